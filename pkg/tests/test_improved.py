import itertools
from fractions import Fraction

import numpy as np
import pytest

from detattack.errors import ConfigurationError, InfeasibleError
from detattack.improved import (
    BLANK_BOTH,
    FORWARD,
    REVERSE,
    build_improved_plan,
    critical_eta_improved,
    effective_targets,
    guessing_probability_improved,
    improved_joint,
    induced_joint,
    simulate_improved,
    tune_parameters,
)
from detattack.lossy import apply_loss_both
from detattack.primary import TargetSet
from detattack.scenario import Scenario, chsh_tsirelson, magic_square, random_behavior
from detattack.simulation import NOT_APPLICABLE, guess_rate, max_standard_score


def exact_tuning(m_a, g_prime):
    """Rational solution of the click blocks: (eta, q, r)."""
    eta = Fraction(g_prime + m_a - 2, g_prime * m_a - 1)
    r = 1 - (1 - eta) ** 2
    q = eta * (1 - eta) / (r * (1 - Fraction(1, g_prime)))
    return eta, q, r


def test_effective_targets():
    assert effective_targets(1, 3) == 2
    assert effective_targets(3, 3) == 3
    with pytest.raises(ValueError):
        effective_targets(0, 3)


def test_threshold_hand_values():
    assert critical_eta_improved(3, 2) == pytest.approx(0.6)
    assert critical_eta_improved(2, 2) == pytest.approx(2 / 3)
    assert critical_eta_improved(3, 3) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        critical_eta_improved(1, 2)
    with pytest.raises(ValueError):
        critical_eta_improved(3, 1)


@pytest.mark.parametrize("m_a, g_prime", [(2, 2), (3, 2), (3, 3), (4, 5), (5, 2), (7, 6)])
def test_tuning_matches_rational_solution(m_a, g_prime):
    eta, q, r = exact_tuning(m_a, g_prime)
    # the rational solution must also satisfy the Alice-silent and click-click blocks
    assert r * (1 - q) * (1 - Fraction(1, m_a)) == eta * (1 - eta)
    assert r * (q / g_prime + (1 - q) / m_a) == eta * eta
    tuned = tune_parameters(m_a, g_prime)
    assert tuned.eta == pytest.approx(float(eta), abs=1e-15)
    assert tuned.q_mix == pytest.approx(float(q), abs=1e-14)
    assert tuned.r_click == pytest.approx(float(r), abs=1e-15)


def test_hand_worked_values():
    t = tune_parameters(3, 2)
    assert (t.eta, t.r_click) == pytest.approx((0.6, 0.84))
    assert t.q_mix == pytest.approx(4 / 7)
    assert tune_parameters(2, 2).q_mix == pytest.approx(0.5)


def test_large_g_prime_approaches_inverse():
    for g in (2, 5, 40):
        assert abs(critical_eta_improved(10**6, g) - 1 / g) < 2e-6


def test_reproduces_chsh():
    q = chsh_tsirelson()
    plan = build_improved_plan(2, 2, TargetSet([0]))
    assert plan.g_prime == 2
    p = induced_joint(plan, q)
    assert p.max_deviation(apply_loss_both(q, 2 / 3)) <= 1e-12


def test_reproduces_random_behaviors(rng):
    for m_a, m_b in itertools.product(range(2, 5), range(2, 5)):
        q = random_behavior(Scenario(m_a, m_b, int(rng.integers(2, 4))), rng)
        for size in range(1, m_b + 1):
            plan = build_improved_plan(m_a, m_b, TargetSet(range(size)))
            expected = apply_loss_both(q, plan.eta_crit)
            assert induced_joint(plan, q).max_deviation(expected) <= 1e-12
            for y in range(size):
                assert guessing_probability_improved(plan, q, y) >= 1 - 1e-12


def test_sub_critical_blanking(rng):
    q = random_behavior(Scenario(3, 3, 2), rng)
    for eta in (0.0, 0.2, 0.45):
        plan = build_improved_plan(3, 3, TargetSet([0, 1]), eta=eta)
        assert plan.eta == pytest.approx(eta)
        assert induced_joint(plan, q).max_deviation(apply_loss_both(q, eta)) <= 1e-12
        assert guessing_probability_improved(plan, q, 0) >= 1 - 1e-12


def test_above_threshold_rejected():
    with pytest.raises(InfeasibleError) as err:
        build_improved_plan(3, 2, TargetSet([0]), eta=0.7)
    assert err.value.margin == pytest.approx(-0.1)


def test_plan_behavior_mismatch():
    plan = build_improved_plan(2, 2, TargetSet([0]))
    with pytest.raises(ConfigurationError):
        improved_joint(plan, magic_square())


def test_full_target_improved_model_is_local_at_half():
    # with every Bob setting targeted and 3x3 settings, the threshold is 1/2 and
    # the attack is a local model of the lossy magic square (no free choice used)
    q = magic_square()
    plan = build_improved_plan(3, 3, TargetSet([0, 1, 2]))
    assert plan.eta_crit == pytest.approx(0.5)
    assert induced_joint(plan, q).max_deviation(apply_loss_both(q, 0.5)) <= 1e-12


def test_monte_carlo_magic_square():
    q = magic_square()
    plan = build_improved_plan(3, 3, TargetSet([0]), eta=0.4)
    log = simulate_improved(plan, q, 60_000, seed=11)
    z, impossible = max_standard_score(log, apply_loss_both(q, 0.4).table)
    assert impossible == 0
    assert z <= 5
    assert guess_rate(log, [0])[0] == 1.0
    assert set(np.unique(log.eve_branch)) <= {BLANK_BOTH, FORWARD, REVERSE}
    fwd = log.eve_branch == FORWARD
    assert np.all(log.eve_guess_a[fwd] == NOT_APPLICABLE)
    known = log.eve_guess_a != NOT_APPLICABLE
    assert np.all(log.eve_guess_a[known] == log.a[known])
    assert simulate_improved(plan, q, 300, seed=11).equals(simulate_improved(plan, q, 300, seed=11))
