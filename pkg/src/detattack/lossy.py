"""Detector-efficiency model: ideal behaviors to tables with a no-click outcome.

Lossy tables are indexed ``[x, y, a, b]`` with outcome index 0 the no-click
event and ``k >= 1`` the ideal outcome ``k - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .scenario import EXACT_TOL, Behavior, Scenario, _validate_table

NO_CLICK = 0


@dataclass(frozen=True)
class EfficiencyProfile:
    etas: tuple[float, ...]

    def __post_init__(self):
        etas = tuple(float(e) for e in np.atleast_1d(self.etas))
        if not etas:
            raise ConfigurationError("efficiency profile is empty")
        for e in etas:
            if not 0.0 <= e <= 1.0:
                raise ConfigurationError(f"efficiency {e} outside [0, 1]")
        object.__setattr__(self, "etas", etas)

    @classmethod
    def uniform(cls, eta: float, n: int) -> "EfficiencyProfile":
        return cls((eta,) * n)

    def __len__(self):
        return len(self.etas)

    def __getitem__(self, k):
        return self.etas[k]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.etas)


@dataclass(frozen=True)
class LossyBehavior:
    scenario: Scenario
    table: np.ndarray = field(repr=False)
    tol: float = field(default=EXACT_TOL, repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        _validate_table(t, self.scenario.lossy_shape, self.tol, "lossy behavior")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def marginal_a(self) -> np.ndarray:
        return self.table[:, 0, :, :].sum(axis=2)

    def marginal_b(self) -> np.ndarray:
        return self.table[0, :, :, :].sum(axis=1)

    def max_deviation(self, other: "LossyBehavior") -> float:
        return float(np.abs(self.table - other.table).max())

    def to_dict(self) -> dict:
        s = self.scenario
        return {
            "m_a": s.m_a,
            "m_b": s.m_b,
            "d": s.d,
            "no_click": NO_CLICK,
            "table": self.table.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LossyBehavior":
        try:
            scenario = Scenario(int(data["m_a"]), int(data["m_b"]), int(data["d"]))
            flat = np.asarray(data["table"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed lossy behavior record: {exc}") from exc
        if flat.size != np.prod(scenario.lossy_shape):
            raise ConfigurationError("lossy behavior table has the wrong number of entries")
        return cls(scenario, flat.reshape(scenario.lossy_shape))


def embed(q: Behavior) -> np.ndarray:
    """Ideal table placed in the click-click block of an extended table."""
    s = q.scenario
    p = np.zeros(s.lossy_shape)
    p[:, :, 1:, 1:] = q.table
    return p


def apply_loss_bob(q: Behavior, profile: EfficiencyProfile | Sequence[float]) -> LossyBehavior:
    """Bob's setting y clicks with probability eta_y; Alice is lossless."""
    if not isinstance(profile, EfficiencyProfile):
        profile = EfficiencyProfile(tuple(profile))
    s = q.scenario
    if len(profile) != s.m_b:
        raise ConfigurationError(f"profile has {len(profile)} entries, Bob has {s.m_b} settings")
    eta = profile.as_array()[None, :, None, None]
    p = np.zeros(s.lossy_shape)
    p[:, :, 1:, 1:] = eta * q.table
    qa = q.table.sum(axis=3)  # [x, y, a]
    p[:, :, 1:, 0] = (1 - eta[..., 0]) * qa
    return LossyBehavior(s, p)


def apply_loss_both(q: Behavior, eta: float) -> LossyBehavior:
    """Both parties lose each particle independently with probability 1 - eta."""
    if not 0.0 <= eta <= 1.0:
        raise ConfigurationError(f"efficiency {eta} outside [0, 1]")
    s = q.scenario
    p = np.zeros(s.lossy_shape)
    p[:, :, 1:, 1:] = eta * eta * q.table
    p[:, :, 1:, 0] = eta * (1 - eta) * q.table.sum(axis=3)
    p[:, :, 0, 1:] = eta * (1 - eta) * q.table.sum(axis=2)
    p[:, :, 0, 0] = (1 - eta) ** 2
    return LossyBehavior(s, p)


def blanking_channel(d: int, survival: float) -> np.ndarray:
    """Stochastic matrix K[out, in] turning a click into no-click w.p. 1 - survival."""
    k = np.eye(d + 1)
    k[1:, 1:] *= survival
    k[NO_CLICK, 1:] = 1 - survival
    return k


def blank(p: LossyBehavior, survival_a: float, survival_b: float) -> LossyBehavior:
    """Independent per-side blanking of click events (a local operation)."""
    d = p.scenario.d
    ka = blanking_channel(d, survival_a)
    kb = blanking_channel(d, survival_b)
    table = np.einsum("ia,jb,xyab->xyij", ka, kb, p.table)
    return LossyBehavior(p.scenario, table)

