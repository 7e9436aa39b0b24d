"""Two-sided attack that also spends Alice's inefficiency.

With probability ``q_mix`` Eve runs the one-sided attack on Bob at equal
efficiency 1/|G|'; otherwise she fixes the outcome of one uniformly chosen
Alice setting and hands Bob an outcome for every setting from the matching
conditional distribution. The whole protocol runs with probability
``r_click``; otherwise both detectors are blanked. Efficiencies below the
critical one are reached by independent blanking on each side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InfeasibleError, NumericalFailure
from .lossy import EfficiencyProfile, LossyBehavior, blanking_channel
from .primary import TargetSet, attack_joint, build_plan, critical_efficiency, sample_rounds
from .scenario import EXACT_TOL, Behavior
from .simulation import NOT_APPLICABLE, RoundLog, categorical, round_uniforms, setting_distribution

BLANK_BOTH, FORWARD, REVERSE = 0, 1, 2


def effective_targets(g_size: int, m_b: int) -> int:
    """|G|' : |G| + 1 while some setting is left untargeted, else |G|."""
    if not 1 <= g_size <= m_b:
        raise ValueError(f"need 1 <= g_size <= m_b, got {g_size}, {m_b}")
    return g_size + 1 if g_size < m_b else g_size


def critical_eta_improved(m_a: int, g_prime: int) -> float:
    """(|G|' + M_A - 2) / (|G|' M_A - 1)."""
    if m_a < 2 or g_prime < 2:
        raise ValueError(f"need m_a >= 2 and g_prime >= 2, got m_a={m_a}, g_prime={g_prime}")
    return (g_prime + m_a - 2) / (g_prime * m_a - 1)


@dataclass(frozen=True)
class TunedParameters:
    eta: float
    q_mix: float
    r_click: float
    residual: float


def tune_parameters(m_a: int, g_prime: int) -> TunedParameters:
    """Solve for (q, r) so the attack's four click blocks match iid loss at eta_crit."""
    eta = critical_eta_improved(m_a, g_prime)
    r = 1 - (1 - eta) ** 2
    target = eta * (1 - eta)
    q_mix = target / (r * (1 - 1 / g_prime))
    # Bob-silent block fixes q; the Alice-silent block must then agree
    residual = abs(r * (1 - q_mix) * (1 - 1 / m_a) - target)
    click_click = r * (q_mix / g_prime + (1 - q_mix) / m_a)
    residual = max(residual, abs(click_click - eta * eta))
    if residual > EXACT_TOL or not (0 <= q_mix <= 1 and 0 <= r <= 1):
        raise NumericalFailure(
            f"inconsistent tuning for m_a={m_a}, g_prime={g_prime}",
            residuals={"residual": residual, "q": q_mix, "r": r},
        )
    return TunedParameters(eta, q_mix, r, residual)


@dataclass(frozen=True)
class ImprovedPlan:
    m_a: int
    m_b: int
    target: TargetSet
    g_prime: int
    eta_crit: float
    q_mix: float
    r_click: float
    survival: float = 1.0

    @property
    def eta(self) -> float:
        return self.survival * self.eta_crit

    def forward_plan(self):
        """One-sided plan run in the forward branch (equal efficiency 1/|G|')."""
        eta0 = critical_efficiency(len(self.target), self.m_b)
        return build_plan(EfficiencyProfile.uniform(eta0, self.m_b), self.target)

    def to_dict(self) -> dict:
        return {
            "m_a": self.m_a,
            "m_b": self.m_b,
            "target": [y + 1 for y in self.target],
            "g_prime": self.g_prime,
            "eta_crit": self.eta_crit,
            "eta": self.eta,
            "q_mix": self.q_mix,
            "r_click": self.r_click,
            "survival": self.survival,
        }


def build_improved_plan(m_a: int, m_b: int, target: TargetSet, eta: float | None = None) -> ImprovedPlan:
    """Tuned plan reproducing equal efficiency ``eta`` (default: the critical one)."""
    target.check(m_b)
    g_prime = effective_targets(len(target), m_b)
    tuned = tune_parameters(m_a, g_prime)
    if eta is None:
        survival = 1.0
    else:
        if not 0 <= eta <= tuned.eta:
            raise InfeasibleError(
                f"efficiency {eta} above the improved-attack threshold {tuned.eta}",
                margin=tuned.eta - eta,
            )
        survival = eta / tuned.eta
    return ImprovedPlan(m_a, m_b, target, g_prime, tuned.eta, tuned.q_mix, tuned.r_click, survival)


def _check(plan: ImprovedPlan, q: Behavior) -> None:
    s = q.scenario
    if (plan.m_a, plan.m_b) != (s.m_a, s.m_b):
        raise ConfigurationError(
            f"plan is for {plan.m_a}x{plan.m_b} settings, behavior has {s.m_a}x{s.m_b}"
        )


def reverse_joint(q: Behavior) -> np.ndarray:
    """Joint ``[x, y, e, a, b]`` of the reverse branch.

    Eve fixes Alice's outcome for a uniformly chosen setting xbar and gives
    Bob, for every y, an outcome drawn from Q(b | y, a xbar). She knows Bob's
    output, so ``e = b``.
    """
    s = q.scenario
    d = s.d
    out = np.zeros((s.m_a, s.m_b, d + 1, d + 1, d + 1))
    idx = 1 + np.arange(d)
    for x in range(s.m_a):
        for xbar in range(s.m_a):
            for y in range(s.m_b):
                pair = q.table[xbar, y] / s.m_a  # [a_eve, b]
                if x == xbar:
                    out[x, y, idx, 1:, idx] += pair.T
                else:
                    lone_b = pair.sum(axis=0)
                    out[x, y, idx, 0, idx] += lone_b
    return out


def improved_joint(plan: ImprovedPlan, q: Behavior) -> np.ndarray:
    """Exact joint ``[x, y, branch, e, a, b]``; branch codes BLANK_BOTH, FORWARD, REVERSE."""
    _check(plan, q)
    s = q.scenario
    d1 = s.d + 1
    joint = np.zeros((s.m_a, s.m_b, 3, d1, d1, d1))
    joint[:, :, FORWARD] = plan.r_click * plan.q_mix * attack_joint(plan.forward_plan(), q).sum(axis=2)
    joint[:, :, REVERSE] = plan.r_click * (1 - plan.q_mix) * reverse_joint(q)
    joint[:, :, BLANK_BOTH, 0, 0, 0] = 1 - plan.r_click
    if plan.survival < 1:
        joint = _blank_with_record(joint, plan.survival)
    return joint


def _blank_with_record(joint: np.ndarray, s: float) -> np.ndarray:
    """Blank each side's clicks independently; Eve records the no-click she caused."""
    d1 = joint.shape[-1]
    ka = blanking_channel(d1 - 1, s)
    out = np.einsum("ia,xyzeab->xyzeib", ka, joint)
    kept = out.copy()
    kept[..., 1:] *= s
    dropped = out[..., 1:].sum(axis=(3, 5)) * (1 - s)  # [x, y, z, a]
    kept[:, :, :, 0, :, 0] += dropped
    return kept


def induced_joint(plan: ImprovedPlan, q: Behavior) -> LossyBehavior:
    return LossyBehavior(q.scenario, improved_joint(plan, q).sum(axis=(2, 3)))


def guessing_probability_improved(plan: ImprovedPlan, q: Behavior, y: int) -> float:
    joint = improved_joint(plan, q)[0, y]
    d1 = joint.shape[-1]
    mismatch = joint.sum(axis=(0, 2)) * (1 - np.eye(d1))
    return 1.0 - float(mismatch.sum())


def simulate_improved(
    plan: ImprovedPlan,
    q: Behavior,
    n: int,
    seed: int,
    setting_probs_a=None,
    setting_probs_b=None,
) -> RoundLog:
    """Monte-Carlo run; ``eve_branch`` holds BLANK_BOTH, FORWARD or REVERSE.

    Eve's record of Alice is filled in where she fixed it (reverse and
    blanked rounds) and NOT_APPLICABLE in forward rounds.
    """
    if n < 1:
        raise ValueError("round count must be at least 1")
    _check(plan, q)
    s = q.scenario
    d = s.d
    u = round_uniforms(seed, n)
    x = categorical(np.tile(setting_distribution(s.m_a, setting_probs_a), (n, 1)), u[:, 0])
    y = categorical(np.tile(setting_distribution(s.m_b, setting_probs_b), (n, 1)), u[:, 1])
    run = u[:, 2] < plan.r_click
    forward = run & (u[:, 3] < plan.q_mix)
    reverse = run & ~forward

    a = np.zeros(n, dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    guess_a = np.zeros(n, dtype=np.int64)
    guess_b = np.zeros(n, dtype=np.int64)
    branch = np.full(n, BLANK_BOTH, dtype=np.int64)

    if forward.any():
        _, a[forward], b[forward], guess_b[forward] = sample_rounds(
            plan.forward_plan(), q, x[forward], y[forward], u[forward, 4:8]
        )
        guess_a[forward] = NOT_APPLICABLE
        branch[forward] = FORWARD

    if reverse.any():
        m = int(reverse.sum())
        xbar = categorical(np.full((m, s.m_a), 1.0 / s.m_a), u[reverse, 4])
        a_eve = categorical(q.marginal_a()[xbar], u[reverse, 5])
        ys = y[reverse]
        b_eve = categorical(q.table[xbar, ys, a_eve, :], u[reverse, 6])
        a[reverse] = np.where(x[reverse] == xbar, 1 + a_eve, 0)
        b[reverse] = 1 + b_eve
        guess_a[reverse] = a[reverse]
        guess_b[reverse] = b[reverse]
        branch[reverse] = REVERSE

    if plan.survival < 1:
        drop_a = u[:, 8] >= plan.survival
        drop_b = u[:, 9] >= plan.survival
        a[drop_a] = 0
        guess_a[drop_a & (guess_a != NOT_APPLICABLE)] = 0
        b[drop_b] = 0
        guess_b[drop_b] = 0

    return RoundLog(x, y, a, b, branch, guess_a, guess_b, seed=seed, meta={"attack": "improved"})
