"""Monte-Carlo plumbing shared by the attack simulators.

Each round consumes one fixed-width row of uniforms drawn from a
counter-based Philox stream keyed by the seed, so round ``i`` depends only on
``(seed, i)`` and any slice of rounds can be regenerated independently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterator

import numpy as np

from .scenario import Scenario

NOT_APPLICABLE = -1
UNIFORMS_PER_ROUND = 12


def round_uniforms(seed: int, n: int, start: int = 0) -> np.ndarray:
    """Uniforms for rounds ``start .. start + n - 1``, shape (n, UNIFORMS_PER_ROUND)."""
    bitgen = np.random.Philox(key=int(seed) % 2**64)
    # Philox emits 4 doubles per counter step
    bitgen.advance(start * UNIFORMS_PER_ROUND // 4)
    rng = np.random.Generator(bitgen)
    return rng.random((n, UNIFORMS_PER_ROUND))


def categorical(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one category per row; zero-mass categories are never returned."""
    probs = np.atleast_2d(probs)
    cum = np.cumsum(probs, axis=1)
    cum = cum / cum[:, -1:]
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def setting_distribution(m: int, probs=None) -> np.ndarray:
    if probs is None:
        return np.full(m, 1.0 / m)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (m,) or (probs < 0).any() or abs(probs.sum() - 1) > 1e-12:
        raise ValueError(f"invalid setting distribution {probs!r}")
    return probs


@dataclass
class RoundLog:
    """Per-round record arrays.

    Settings are 0-based here; outcomes and guesses use the extended encoding
    (0 = no-click, k = ideal outcome k - 1) and ``NOT_APPLICABLE`` where Eve
    makes no guess. ``eve_branch`` codes are attack-specific.
    """

    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    eve_branch: np.ndarray
    eve_guess_a: np.ndarray
    eve_guess_b: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.x)

    def records(self) -> Iterator[dict]:
        for i in range(len(self)):
            yield {
                "round": i,
                "x": int(self.x[i]) + 1,
                "y": int(self.y[i]) + 1,
                "a": int(self.a[i]),
                "b": int(self.b[i]),
                "eve_branch": int(self.eve_branch[i]),
                "eve_guess_a": int(self.eve_guess_a[i]),
                "eve_guess_b": int(self.eve_guess_b[i]),
            }

    def write_jsonl(self, fh: IO[str]) -> None:
        for rec in self.records():
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    def equals(self, other: "RoundLog") -> bool:
        names = ("x", "y", "a", "b", "eve_branch", "eve_guess_a", "eve_guess_b")
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in names)


def empirical_table(log: RoundLog, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Counts ``[x, y, a, b]`` over the extended alphabet and rounds per (x, y)."""
    counts = np.zeros(scenario.lossy_shape, dtype=np.int64)
    np.add.at(counts, (log.x, log.y, log.a, log.b), 1)
    return counts, counts.sum(axis=(2, 3))


def max_standard_score(log: RoundLog, exact: np.ndarray) -> tuple[float, int]:
    """Largest |freq - p| / SE over cells with 0 < p < 1, and the count of
    rounds landing in zero-probability cells."""
    counts, n_xy = empirical_table(log, _scenario_of(exact))
    n = np.maximum(n_xy, 1)[:, :, None, None]
    freq = counts / n
    se = np.sqrt(exact * (1 - exact) / n)
    inner = (exact > 0) & (exact < 1)
    z = np.zeros_like(exact)
    z[inner] = np.abs(freq[inner] - exact[inner]) / se[inner]
    impossible = int(counts[exact == 0].sum())
    return float(z.max()), impossible


def _scenario_of(lossy_table: np.ndarray) -> Scenario:
    m_a, m_b, k, _ = lossy_table.shape
    return Scenario(m_a, m_b, k - 1)


def guess_rate(log: RoundLog, settings) -> tuple[float, int]:
    """Fraction of rounds with y in ``settings`` where Eve's guess equals Bob's output."""
    mask = np.isin(log.y, list(settings))
    n = int(mask.sum())
    if n == 0:
        return float("nan"), 0
    return float((log.eve_guess_b[mask] == log.b[mask]).mean()), n
