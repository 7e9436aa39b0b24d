"""Efficiency-tuning attack on a target set of Bob's measurements.

Eve picks target setting ``g`` in G with probability eta_g, measures it
herself and forces Bob to click only on ``y == g``; with the leftover
probability she leaves the state alone, blanks every target setting and lets
the others click with probability tau_y. The result reproduces the lossy
statistics ``apply_loss_bob`` while Eve always knows Bob's output on G.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, InfeasibleError
from .lossy import EfficiencyProfile, LossyBehavior
from .scenario import Behavior
from .simulation import (
    NOT_APPLICABLE,
    RoundLog,
    categorical,
    round_uniforms,
    setting_distribution,
)

# margin slack for float round-off exactly at the threshold (e.g. eta = 1/3, |G| = 2)
BOUNDARY_SLACK = 1e-15

IDLE_BRANCH = 0


@dataclass(frozen=True)
class TargetSet:
    g: frozenset

    def __init__(self, g: Iterable[int]):
        items = [int(v) for v in g]
        if not items:
            raise ConfigurationError("target set must be nonempty")
        if len(set(items)) != len(items):
            raise ConfigurationError(f"target set has repeated settings: {items}")
        if min(items) < 0:
            raise ConfigurationError(f"negative setting in target set: {items}")
        object.__setattr__(self, "g", frozenset(items))

    def __len__(self):
        return len(self.g)

    def __contains__(self, y):
        return y in self.g

    def __iter__(self):
        return iter(sorted(self.g))

    def check(self, m_b: int) -> None:
        if max(self.g) >= m_b:
            raise ConfigurationError(f"target set {sorted(self.g)} exceeds {m_b} settings")

    def complement(self, m_b: int) -> list[int]:
        return [y for y in range(m_b) if y not in self.g]


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    margin: float

    def __bool__(self):
        return self.feasible


def _as_profile(profile) -> EfficiencyProfile:
    return profile if isinstance(profile, EfficiencyProfile) else EfficiencyProfile(tuple(profile))


def feasible(profile: EfficiencyProfile | Sequence[float], target: TargetSet) -> Feasibility:
    """Check sum_{y in G} eta_y <= 1 - max_{y not in G} eta_y.

    The margin is the slack of that inequality; ties count as feasible.
    """
    profile = _as_profile(profile)
    target.check(len(profile))
    etas = profile.as_array()
    rest = target.complement(len(profile))
    eta_prime = float(etas[rest].max()) if rest else 0.0
    margin = (1.0 - eta_prime) - float(sum(etas[y] for y in target))
    return Feasibility(margin >= -BOUNDARY_SLACK, margin)


def critical_efficiency(g_size: int, m_b: int) -> float:
    """Largest equal efficiency at which the attack on |G| settings works."""
    if m_b < 1 or not 1 <= g_size <= m_b:
        raise ValueError(f"need 1 <= g_size <= m_b, got g_size={g_size}, m_b={m_b}")
    return 1.0 / (g_size + 1) if g_size < m_b else 1.0 / m_b


def raw_taus(profile: EfficiencyProfile | Sequence[float], target: TargetSet) -> dict[int, float]:
    """Click probabilities eta_y / (1 - sum_G eta) without range checks.

    Infeasible profiles give values above 1; used for reporting.
    """
    profile = _as_profile(profile)
    idle = 1.0 - sum(profile[y] for y in target)
    out = {}
    for y in target.complement(len(profile)):
        if idle > 0:
            out[y] = profile[y] / idle
        else:
            out[y] = 0.0 if profile[y] == 0 else float("inf")
    return out


@dataclass(frozen=True)
class AttackPlan:
    target: TargetSet
    profile: EfficiencyProfile
    taus: dict  # y not in G -> tau_y
    pick_probs: dict  # y in G -> eta_y

    @property
    def m_b(self) -> int:
        return len(self.profile)

    @property
    def idle_prob(self) -> float:
        return max(0.0, 1.0 - sum(self.pick_probs.values()))

    def branch_probs(self) -> np.ndarray:
        """Probabilities of [idle, pick G[0], pick G[1], ...] with G sorted."""
        return np.array([self.idle_prob] + [self.pick_probs[y] for y in self.target])

    def to_dict(self) -> dict:
        return {
            "target": [y + 1 for y in self.target],
            "profile": list(self.profile.etas),
            "taus": {str(y + 1): t for y, t in sorted(self.taus.items())},
            "pick_probs": {str(y + 1): p for y, p in sorted(self.pick_probs.items())},
            "idle_prob": self.idle_prob,
        }


def build_plan(profile: EfficiencyProfile | Sequence[float], target: TargetSet) -> AttackPlan:
    profile = _as_profile(profile)
    verdict = feasible(profile, target)
    if not verdict:
        raise InfeasibleError(
            f"attack infeasible for profile {profile.etas} and target {sorted(target.g)}: "
            f"margin {verdict.margin:.6g}",
            margin=verdict.margin,
        )
    taus = {y: min(1.0, t) for y, t in raw_taus(profile, target).items()}
    return AttackPlan(target, profile, taus, {y: profile[y] for y in target})


def attack_joint(plan: AttackPlan, q: Behavior) -> np.ndarray:
    """Exact joint P(branch, e, a, b | x, y) of the attack against an honest Alice.

    Axes ``[x, y, branch, e, a, b]``: ``branch`` 0 is the idle branch and
    ``1 + k`` the pick of the k-th target (sorted); ``e`` is Eve's record of
    Bob's output for setting y (extended encoding).
    """
    s = q.scenario
    if plan.m_b != s.m_b:
        raise ConfigurationError(f"plan is for {plan.m_b} settings, behavior has {s.m_b}")
    plan.target.check(s.m_b)
    d = s.d
    targets = list(plan.target)
    qa = q.marginal_a()  # [x, a]
    qb = q.marginal_b()  # [y, b]
    joint = np.zeros((s.m_a, s.m_b, 1 + len(targets), d + 1, d + 1, d + 1))
    outcomes = np.arange(d)

    for k, g in enumerate(targets, start=1):
        w = plan.pick_probs[g]
        for y in range(s.m_b):
            if y == g:
                # Eve measured g, saw b, Bob clicks with that b
                joint[:, y, k, 1 + outcomes, 1:, 1 + outcomes] = w * np.moveaxis(q.table[:, g], 2, 0)
            else:
                joint[:, y, k, 0, 1:, 0] = w * qa

    idle = plan.idle_prob
    for y in range(s.m_b):
        if y in plan.target:
            joint[:, y, IDLE_BRANCH, 0, 1:, 0] = idle * qa
            continue
        tau = plan.taus[y]
        guess = 1 + int(np.argmax(qb[y]))
        joint[:, y, IDLE_BRANCH, guess, 1:, 1:] = idle * tau * q.table[:, y]
        joint[:, y, IDLE_BRANCH, 0, 1:, 0] += idle * (1 - tau) * qa
    return joint


def induced_behavior(plan: AttackPlan, q: Behavior) -> LossyBehavior:
    """Statistics Alice and Bob see while the attack runs."""
    return LossyBehavior(q.scenario, attack_joint(plan, q).sum(axis=(2, 3)))


def guessing_probability(plan: AttackPlan, q: Behavior, y: int) -> float:
    """Probability that Eve's record equals Bob's output (no-click included) for setting y."""
    joint = attack_joint(plan, q)[0, y]  # no-signalling: any x gives the same value
    d1 = joint.shape[-1]
    mismatch = joint.sum(axis=(0, 2)) * (1 - np.eye(d1))  # [e, b]
    return 1.0 - float(mismatch.sum())


def sample_rounds(plan: AttackPlan, q: Behavior, x: np.ndarray, y: np.ndarray, u: np.ndarray):
    """Run Eve's strategy on given settings; ``u`` holds 4 uniforms per round.

    Returns ``(branch_code, a, b, eve_guess_b)`` with branch code 0 for the
    idle branch and ``g + 1`` when Eve measured target setting g.
    """
    s = q.scenario
    d = s.d
    n = len(x)
    targets = np.array(list(plan.target))
    branch = categorical(np.tile(plan.branch_probs(), (n, 1)), u[:, 0])

    a = np.zeros(n, dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    guess_b = np.zeros(n, dtype=np.int64)
    code = np.zeros(n, dtype=np.int64)
    qa = q.marginal_a()
    qb = q.marginal_b()

    picked = branch > 0
    if picked.any():
        g = targets[branch[picked] - 1]
        xs, ys = x[picked], y[picked]
        b_eve = categorical(qb[g], u[picked, 1])
        # Alice's outcome given Eve's result on the forwarded state: Q(a | x, b_eve g)
        a[picked] = 1 + categorical(q.table[xs, g, :, b_eve], u[picked, 2])
        hit = ys == g
        b[picked] = np.where(hit, 1 + b_eve, 0)
        guess_b[picked] = np.where(hit, 1 + b_eve, 0)
        code[picked] = g + 1

    idle = ~picked
    if idle.any():
        xs, ys = x[idle], y[idle]
        in_target = np.isin(ys, targets)
        tau = np.array([plan.taus.get(k, 0.0) for k in range(s.m_b)])
        click = ~in_target & (u[idle, 3] < tau[ys])
        pair = categorical(q.table[xs, ys].reshape(len(xs), d * d), u[idle, 1])
        lone_a = categorical(qa[xs], u[idle, 1])
        a[idle] = 1 + np.where(click, pair // d, lone_a)
        b[idle] = np.where(click, 1 + pair % d, 0)
        best = 1 + np.argmax(qb, axis=1)
        guess_b[idle] = np.where(click, best[ys], 0)
    return code, a, b, guess_b


def simulate_rounds(
    plan: AttackPlan,
    q: Behavior,
    n: int,
    seed: int,
    setting_probs_a=None,
    setting_probs_b=None,
) -> RoundLog:
    """Sample ``n`` rounds of the attack with settings drawn independently."""
    if n < 1:
        raise ValueError("round count must be at least 1")
    s = q.scenario
    if plan.m_b != s.m_b:
        raise ConfigurationError(f"plan is for {plan.m_b} settings, behavior has {s.m_b}")
    plan.target.check(s.m_b)
    u = round_uniforms(seed, n)
    x = categorical(np.tile(setting_distribution(s.m_a, setting_probs_a), (n, 1)), u[:, 0])
    y = categorical(np.tile(setting_distribution(s.m_b, setting_probs_b), (n, 1)), u[:, 1])
    code, a, b, guess_b = sample_rounds(plan, q, x, y, u[:, 2:6])
    return RoundLog(
        x=x,
        y=y,
        a=a,
        b=b,
        eve_branch=code,
        eve_guess_a=np.full(n, NOT_APPLICABLE, dtype=np.int64),
        eve_guess_b=guess_b,
        seed=seed,
        meta={"attack": "primary"},
    )
