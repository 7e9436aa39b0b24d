"""Tripartite no-signalling box in which Eve's input picks the setting pair she learns.

For each ``z = (xbar, ybar)`` the one-sided attack with a single target runs
on both Alice and Bob with independent branch coins. Eve's output
``e = (e_a, e_b)`` is her record of the targeted outcomes (no-click
included). Summed over ``e``, every ``z`` gives the same lossy behavior.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InfeasibleError
from .lossy import LossyBehavior, apply_loss_both
from .polytope import DEFAULT_TOL, LocalityCertificate, is_local
from .scenario import EXACT_TOL, Behavior, Scenario

# axis layout of TripartiteBox.table
ZX, ZY, X, Y, EA, EB, A, B = range(8)
_INPUTS = {"A": (X,), "B": (Y,), "E": (ZX, ZY)}
_OUTPUTS = {"A": (A,), "B": (B,), "E": (EA, EB)}


def _box_shape(s: Scenario) -> tuple[int, ...]:
    k = s.d + 1
    return (s.m_a, s.m_b, s.m_a, s.m_b, k, k, k, k)


def normalization_residual(table: np.ndarray) -> float:
    return float(np.abs(table.sum(axis=(EA, EB, A, B)) - 1.0).max())


@dataclass(frozen=True)
class NoSignallingReport:
    residuals: dict
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def no_signalling_residuals(table: np.ndarray) -> dict[str, float]:
    """Residual of every marginal-independence constraint of a tripartite table.

    For each group of parties, its output marginal must not depend on the
    inputs of the parties outside the group.
    """
    out = {}
    for size in (1, 2):
        for group in itertools.combinations("ABE", size):
            others = [p for p in "ABE" if p not in group]
            summed = tuple(ax for p in others for ax in _OUTPUTS[p])
            marg = table.sum(axis=summed, keepdims=True)
            ref = marg
            for p in others:
                for ax in _INPUTS[p]:
                    ref = np.take(ref, [0], axis=ax)
            out["".join(group)] = float(np.abs(marg - ref).max())
    return out


@dataclass(frozen=True)
class TripartiteBox:
    """P(a b e | x y z) with axes ``[zx, zy, x, y, e_a, e_b, a, b]``, index 0 = no-click."""

    scenario: Scenario
    table: np.ndarray = field(repr=False)
    check_no_signalling: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != _box_shape(self.scenario):
            raise ConfigurationError(f"box has shape {t.shape}, expected {_box_shape(self.scenario)}")
        if t.min() < -EXACT_TOL:
            raise ConfigurationError("box has negative entries")
        if normalization_residual(t) > EXACT_TOL:
            raise ConfigurationError("box is not normalized")
        if self.check_no_signalling:
            res = no_signalling_residuals(t)
            if max(res.values()) > EXACT_TOL:
                raise ConfigurationError(f"box signals: {res}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def alice_bob(self, zx: int, zy: int) -> np.ndarray:
        """sum_e P(abe|xyz) as an ``[x, y, a, b]`` table."""
        return self.table[zx, zy].sum(axis=(2, 3))

    def to_dict(self) -> dict:
        s = self.scenario
        return {"m_a": s.m_a, "m_b": s.m_b, "d": s.d, "no_click": 0, "table": self.table.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TripartiteBox":
        try:
            s = Scenario(int(data["m_a"]), int(data["m_b"]), int(data["d"]))
            flat = np.asarray(data["table"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed box record: {exc}") from exc
        if flat.size != np.prod(_box_shape(s)):
            raise ConfigurationError("box table has the wrong number of entries")
        return cls(s, flat.reshape(_box_shape(s)))


def _single_target_tau(eta: float, m: int) -> float:
    # target {g} with |G| = 1: untargeted settings click w.p. eta / (1 - eta)
    if m == 1:
        return 0.0
    return eta / (1.0 - eta) if eta < 1 else 0.0


def build_box(q: Behavior, eta: float) -> TripartiteBox:
    """Combine the single-target attacks for every setting pair into one box."""
    if not 0.0 <= eta <= 0.5:
        raise InfeasibleError(f"efficiency {eta} above 1/2: single-target attack infeasible", margin=0.5 - eta)
    s = q.scenario
    d = s.d
    tau_a = _single_target_tau(eta, s.m_a)
    tau_b = _single_target_tau(eta, s.m_b)
    qa = q.marginal_a()
    qb = q.marginal_b()
    box = np.zeros(_box_shape(s))
    measure, idle = eta, 1.0 - eta

    for zx, zy, x, y in itertools.product(range(s.m_a), range(s.m_b), range(s.m_a), range(s.m_b)):
        cell = box[zx, zy, x, y]  # [e_a, e_b, a, b]
        hit_a, hit_b = x == zx, y == zy

        # Eve measured both targets: (a_e, b_e) ~ Q(. . | zx zy)
        w = measure * measure
        pair = q.table[zx, zy]
        if hit_a and hit_b:
            for ae, be in itertools.product(range(d), range(d)):
                cell[1 + ae, 1 + be, 1 + ae, 1 + be] += w * pair[ae, be]
        elif hit_a:
            for ae, be in itertools.product(range(d), range(d)):
                cell[1 + ae, 1 + be, 1 + ae, 0] += w * pair[ae, be]
        elif hit_b:
            for ae, be in itertools.product(range(d), range(d)):
                cell[1 + ae, 1 + be, 0, 1 + be] += w * pair[ae, be]
        else:
            cell[1:, 1:, 0, 0] += w * pair

        # Eve measured Alice's target only; Bob's state is conditioned on her result
        w = measure * idle
        for ae in range(d):
            alice_out = 1 + ae if hit_a else 0
            if hit_b:
                cell[1 + ae, 0, alice_out, 0] += w * qa[zx, ae]
            else:
                cell[1 + ae, 0, alice_out, 1:] += w * tau_b * q.table[zx, y, ae]
                cell[1 + ae, 0, alice_out, 0] += w * (1 - tau_b) * qa[zx, ae]

        # Eve measured Bob's target only
        w = idle * measure
        for be in range(d):
            bob_out = 1 + be if hit_b else 0
            if hit_a:
                cell[0, 1 + be, 0, bob_out] += w * qb[zy, be]
            else:
                cell[0, 1 + be, 1:, bob_out] += w * tau_a * q.table[x, zy, :, be]
                cell[0, 1 + be, 0, bob_out] += w * (1 - tau_a) * qb[zy, be]

        # neither: untouched state, targets blanked, others click w.p. tau
        w = idle * idle
        click_a = 0.0 if hit_a else tau_a
        click_b = 0.0 if hit_b else tau_b
        cell[0, 0, 1:, 1:] += w * click_a * click_b * q.table[x, y]
        cell[0, 0, 1:, 0] += w * click_a * (1 - click_b) * qa[x]
        cell[0, 0, 0, 1:] += w * (1 - click_a) * click_b * qb[y]
        cell[0, 0, 0, 0] += w * (1 - click_a) * (1 - click_b)

    return TripartiteBox(s, box)


def marginal_residual(box: TripartiteBox, lossy: LossyBehavior) -> float:
    """max over z of |sum_e P(abe|xyz) - P(ab|xy)|."""
    s = box.scenario
    worst = 0.0
    for zx, zy in itertools.product(range(s.m_a), range(s.m_b)):
        worst = max(worst, float(np.abs(box.alice_bob(zx, zy) - lossy.table).max()))
    return worst


def guess_success(box: TripartiteBox, z: tuple[int, int]) -> float:
    """P(e = (a, b) | x = zx, y = zy, z)."""
    zx, zy = z
    cell = box.table[zx, zy, zx, zy]
    k = cell.shape[0]
    diag = np.zeros_like(cell, dtype=bool)
    for ea, eb in itertools.product(range(k), range(k)):
        diag[ea, eb, ea, eb] = True
    return 1.0 - float(cell[~diag].sum())


def verify_no_signalling(box: TripartiteBox, tol: float = EXACT_TOL) -> NoSignallingReport:
    return NoSignallingReport(no_signalling_residuals(np.asarray(box.table)), tol)


def steered_residual(box: TripartiteBox) -> float:
    """Worst Alice-Bob signalling of the conditional boxes P(ab|xy, z, e)."""
    t = box.table
    worst = 0.0
    s = box.scenario
    k = s.d + 1
    for zx, zy, ea, eb in itertools.product(range(s.m_a), range(s.m_b), range(k), range(k)):
        joint = t[zx, zy, :, :, ea, eb]  # [x, y, a, b]
        pe = joint.sum(axis=(2, 3))
        if pe.max() <= 0:
            continue
        if np.abs(pe - pe[0, 0]).max() > EXACT_TOL:
            worst = max(worst, float(np.abs(pe - pe[0, 0]).max()))
            continue
        cond = joint / pe[0, 0]
        alice = cond.sum(axis=3)
        bob = cond.sum(axis=2)
        worst = max(
            worst,
            float(np.abs(alice - alice[:, :1]).max()),
            float(np.abs(bob - bob[:1]).max()),
        )
    return worst


@dataclass
class BoundRandomnessCertificate:
    eta: float
    locality: LocalityCertificate
    marginal_residual: float
    no_signalling: NoSignallingReport
    guess: dict  # (zx, zy) -> success probability
    steered_residual: float
    tol: float = EXACT_TOL

    @property
    def nonlocal_(self) -> bool:
        return not self.locality.is_local

    @property
    def box_ok(self) -> bool:
        return (
            self.marginal_residual <= self.tol
            and self.no_signalling.passed
            and min(self.guess.values()) >= 1.0 - self.tol
        )

    @property
    def passed(self) -> bool:
        return self.nonlocal_ and self.box_ok

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "verdict": "PASS" if self.passed else "FAIL",
            "nonlocal": self.nonlocal_,
            "marginal_residual": self.marginal_residual,
            "no_signalling_residuals": self.no_signalling.residuals,
            "no_signalling_max": self.no_signalling.max_residual,
            "steered_residual": self.steered_residual,
            "guess": [
                {"z": [zx + 1, zy + 1], "success": p} for (zx, zy), p in sorted(self.guess.items())
            ],
            "locality": self.locality.to_dict(),
        }


def certify_bound_randomness(q: Behavior, eta: float, lp_tol: float = DEFAULT_TOL) -> BoundRandomnessCertificate:
    """Nonlocal lossy statistics that Eve's box reproduces with perfect a-posteriori guessing."""
    lossy = apply_loss_both(q, eta)
    box = build_box(q, eta)
    s = q.scenario
    guess = {z: guess_success(box, z) for z in itertools.product(range(s.m_a), range(s.m_b))}
    return BoundRandomnessCertificate(
        eta=eta,
        locality=is_local(lossy, lp_tol),
        marginal_residual=marginal_residual(box, lossy),
        no_signalling=verify_no_signalling(box),
        guess=guess,
        steered_residual=steered_residual(box),
    )
