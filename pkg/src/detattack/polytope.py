"""Local-polytope membership for lossy behaviors.

Deterministic strategies assign one extended outcome (no-click included) to
every setting of a party. A behavior is local iff it is a convex mixture of
strategy pairs. ``is_local`` returns either such a mixture or a Bell
functional that the behavior violates; both kinds of certificate can be
re-checked without the solver.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import ConfigurationError, NumericalFailure
from .lossy import LossyBehavior, apply_loss_both
from .scenario import Behavior, Scenario

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
_HIGHS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class DeterministicStrategy:
    alice: tuple[int, ...]
    bob: tuple[int, ...]

    def table(self, scenario: Scenario) -> np.ndarray:
        t = np.zeros(scenario.lossy_shape)
        for x, y in itertools.product(range(scenario.m_a), range(scenario.m_b)):
            t[x, y, self.alice[x], self.bob[y]] = 1.0
        return t


def party_strategies(m: int, k: int) -> np.ndarray:
    """All k**m assignments of an outcome in range(k) to each of m settings."""
    return np.array(list(itertools.product(range(k), repeat=m)), dtype=np.int64).reshape(-1, m)


def strategy_count(scenario: Scenario) -> int:
    k = scenario.d + 1
    return k**scenario.m_a * k**scenario.m_b


def strategy_pair(scenario: Scenario, index: int) -> DeterministicStrategy:
    k = scenario.d + 1
    n_b = k**scenario.m_b
    ia, ib = divmod(int(index), n_b)
    sa = party_strategies(scenario.m_a, k)[ia]
    sb = party_strategies(scenario.m_b, k)[ib]
    return DeterministicStrategy(tuple(int(v) for v in sa), tuple(int(v) for v in sb))


def strategy_matrix(scenario: Scenario) -> sp.csr_matrix:
    """Sparse (table entries x strategy pairs) incidence matrix.

    Column ``ia * n_b + ib`` is the flattened table of the pair (ia, ib).
    """
    k = scenario.d + 1
    sa = party_strategies(scenario.m_a, k)
    sb = party_strategies(scenario.m_b, k)
    n_a, n_b = len(sa), len(sb)
    shape = scenario.lossy_shape
    cols = np.arange(n_a * n_b)
    ia, ib = np.divmod(cols, n_b)
    rows, cs = [], []
    for x, y in itertools.product(range(scenario.m_a), range(scenario.m_b)):
        rows.append(np.ravel_multi_index((np.full_like(cols, x), np.full_like(cols, y), sa[ia, x], sb[ib, y]), shape))
        cs.append(cols)
    rows = np.concatenate(rows)
    cs = np.concatenate(cs)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cs)), shape=(int(np.prod(shape)), n_a * n_b))


def local_bound(scenario: Scenario, functional: np.ndarray) -> tuple[float, DeterministicStrategy]:
    """Maximum of the functional over deterministic strategy pairs.

    Enumerates Alice's strategies; Bob's best response decouples per setting.
    """
    c = np.asarray(functional, dtype=float)
    if c.shape != scenario.lossy_shape:
        raise ConfigurationError(f"functional has shape {c.shape}, expected {scenario.lossy_shape}")
    k = scenario.d + 1
    sa = party_strategies(scenario.m_a, k)
    xs = np.arange(scenario.m_a)
    # gathered[s, y, b] = sum_x c[x, y, sa[s, x], b]
    gathered = c[xs[None, :], :, sa, :].sum(axis=1)
    per_y = gathered.max(axis=2)
    totals = per_y.sum(axis=1)
    best = int(np.argmax(totals))
    bob = tuple(int(v) for v in gathered[best].argmax(axis=1))
    return float(totals[best]), DeterministicStrategy(tuple(int(v) for v in sa[best]), bob)


def bell_value(p: LossyBehavior, functional: np.ndarray) -> tuple[float, float]:
    """(functional . p, local bound of the functional)."""
    c = np.asarray(functional, dtype=float)
    if c.shape != p.table.shape:
        raise ConfigurationError(f"functional has shape {c.shape}, behavior {p.table.shape}")
    bound, _ = local_bound(p.scenario, c)
    return float((c * p.table).sum()), bound


def chsh_functional(d: int = 2) -> np.ndarray:
    """CHSH on the click-click block (no-click entries weighted 0); binary outcomes only."""
    if d != 2:
        raise ConfigurationError("CHSH needs binary outcomes")
    c = np.zeros((2, 2, 3, 3))
    signs = np.array([[1, 1], [1, -1]])
    for x, y, a, b in itertools.product(range(2), range(2), range(2), range(2)):
        c[x, y, 1 + a, 1 + b] = signs[x, y] * (-1) ** (a + b)
    return c


@dataclass
class LocalityCertificate:
    verdict: str  # "local" | "nonlocal"
    scenario: Scenario
    weights: dict = field(default_factory=dict)  # strategy-pair index -> weight
    reconstruction_error: float | None = None
    functional: np.ndarray | None = field(default=None, repr=False)
    local_bound: float | None = None
    value: float | None = None

    @property
    def is_local(self) -> bool:
        return self.verdict == "local"

    @property
    def violation(self) -> float | None:
        if self.functional is None:
            return None
        return self.value - self.local_bound

    def mixture(self) -> np.ndarray:
        """Table reconstructed from the weights."""
        t = np.zeros(self.scenario.lossy_shape)
        for idx, w in self.weights.items():
            t += w * strategy_pair(self.scenario, idx).table(self.scenario)
        return t

    def to_dict(self) -> dict:
        s = self.scenario
        out = {"verdict": self.verdict, "m_a": s.m_a, "m_b": s.m_b, "d": s.d}
        if self.is_local:
            out["weights"] = [[int(i), float(w)] for i, w in sorted(self.weights.items())]
            out["reconstruction_error"] = self.reconstruction_error
        else:
            out["functional"] = self.functional.ravel().tolist()
            out["local_bound"] = self.local_bound
            out["value"] = self.value
        return out


def _local_from_weights(p: LossyBehavior, w: np.ndarray, m: sp.csr_matrix, tol: float):
    w = np.where(w < 0, 0.0, w)
    err = float(np.abs(m @ w - p.table.ravel()).max())
    err = max(err, abs(w.sum() - 1.0))
    if err > tol:
        return None
    weights = {int(i): float(w[i]) for i in np.flatnonzero(w > 1e-14)}
    return LocalityCertificate("local", p.scenario, weights=weights, reconstruction_error=err)


def is_local(p: LossyBehavior, tol: float = DEFAULT_TOL) -> LocalityCertificate:
    """Decide membership of ``p`` in the local polytope."""
    s = p.scenario
    m = strategy_matrix(s)
    n_rows, n_vars = m.shape
    target = p.table.ravel()

    # feasibility: weights >= 0 reproducing every entry, summing to one
    a_eq = sp.vstack([m, sp.csr_matrix(np.ones((1, n_vars)))]).tocsr()
    b_eq = np.r_[target, 1.0]
    res = linprog(np.zeros(n_vars), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=_HIGHS)
    if res.status == 0:
        cert = _local_from_weights(p, res.x, m, tol)
        if cert is not None:
            return cert
    log.debug("feasibility LP status %s (%s); solving separation LP", res.status, res.message)

    # separation: maximise c.p - beta subject to c.D_lambda <= beta, |c| <= 1
    a_ub = sp.hstack([m.T, -np.ones((n_vars, 1))]).tocsr()
    cost = np.r_[-target, 1.0]
    bounds = [(-1.0, 1.0)] * n_rows + [(None, None)]
    sep = linprog(cost, A_ub=a_ub, b_ub=np.zeros(n_vars), bounds=bounds, method="highs", options=_HIGHS)
    if sep.status != 0:
        raise NumericalFailure(f"separation LP failed: {sep.message}", residuals={"status": sep.status})
    functional = sep.x[:n_rows].reshape(s.lossy_shape)
    value = float(functional.ravel() @ target)
    bound, _ = local_bound(s, functional)
    if value - bound > tol:
        return LocalityCertificate("nonlocal", s, functional=functional, local_bound=bound, value=value)

    # no violation: the separation duals are a local mixture
    weights = -np.asarray(sep.ineqlin.marginals)
    cert = _local_from_weights(p, weights, m, tol)
    if cert is not None:
        return cert
    recon = float(np.abs(m @ np.clip(weights, 0, None) - target).max())
    raise NumericalFailure(
        "neither a local mixture nor a violated functional within tolerance",
        residuals={"violation": value - bound, "reconstruction_error": recon, "tol": tol},
    )


def critical_local_eta(q: Behavior, tol: float = 1e-3, lp_tol: float = DEFAULT_TOL) -> float | None:
    """Bisect the efficiency at which ``apply_loss_both(q, eta)`` stops being local.

    Returns None when the behavior is local even without loss.
    """
    if is_local(apply_loss_both(q, 1.0), lp_tol).is_local:
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_local(apply_loss_both(q, mid), lp_tol).is_local:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
