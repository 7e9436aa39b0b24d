import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from detattack.errors import ConfigurationError, InfeasibleError
from detattack.lossy import EfficiencyProfile, apply_loss_bob
from detattack.primary import (
    TargetSet,
    attack_joint,
    build_plan,
    critical_efficiency,
    feasible,
    guessing_probability,
    induced_behavior,
    raw_taus,
    simulate_rounds,
)
from detattack.scenario import Scenario, chsh_tsirelson, magic_square, random_behavior
from detattack.simulation import guess_rate, max_standard_score


def branch_tree_oracle(q, etas, target):
    """Loop over Eve's branches and add up what Alice and Bob record."""
    s = q.scenario
    d = s.d
    out = np.zeros(s.lossy_shape)
    idle = 1 - sum(etas[g] for g in target)
    for x, y in itertools.product(range(s.m_a), range(s.m_b)):
        for g in target:
            # Eve measures g on Bob's half and forwards the post-measurement state
            for a, b in itertools.product(range(d), range(d)):
                p = etas[g] * q.table[x, g, a, b]
                if y == g:
                    out[x, y, 1 + a, 1 + b] += p
                else:
                    out[x, y, 1 + a, 0] += p
        if y in target:
            for a in range(d):
                out[x, y, 1 + a, 0] += idle * q.table[x, y, a].sum()
        else:
            tau = etas[y] / idle if idle > 0 else 0.0
            for a, b in itertools.product(range(d), range(d)):
                out[x, y, 1 + a, 1 + b] += idle * tau * q.table[x, y, a, b]
                out[x, y, 1 + a, 0] += idle * (1 - tau) * q.table[x, y, a, b]
    return out


def test_feasibility_boundaries():
    g = TargetSet([0])
    assert feasible([0.5, 0.5], g)
    assert feasible([0.5, 0.5], g).margin == 0.0
    assert not feasible([0.6, 0.6], g)
    assert feasible([0.6, 0.6], g).margin == pytest.approx(-0.2)
    # slack absorbs float rounding of a saturated profile
    assert feasible([0.1 + 0.2, 0.7], g)


def test_critical_efficiency_values():
    assert critical_efficiency(1, 2) == 0.5
    assert critical_efficiency(2, 3) == pytest.approx(1 / 3)
    assert critical_efficiency(3, 3) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        critical_efficiency(4, 3)


def test_uniform_profile_threshold_brute_force():
    # scan eta on a grid; the largest feasible value is 1/(|G|+1) when G is a proper subset
    grid = np.linspace(0, 1, 1201)
    for m_b, size in [(2, 1), (3, 1), (3, 2), (5, 4), (4, 4)]:
        g = TargetSet(range(size))
        ok = [eta for eta in grid if feasible([eta] * m_b, g)]
        assert max(ok) == pytest.approx(critical_efficiency(size, m_b), abs=1 / 1200)


def test_infeasible_plan_reports_margin():
    with pytest.raises(InfeasibleError) as err:
        build_plan([0.6, 0.6], TargetSet([0]))
    assert err.value.margin == pytest.approx(-0.2)


def test_raw_taus_for_report():
    taus = raw_taus([0.6, 0.6], TargetSet([0]))
    assert taus[1] == pytest.approx(1.5)
    assert raw_taus([1.0, 0.0], TargetSet([0]))[1] == 0.0
    assert raw_taus([1.0, 0.2], TargetSet([0]))[1] == float("inf")


def test_target_validation():
    with pytest.raises(ConfigurationError):
        TargetSet([])
    with pytest.raises(ConfigurationError):
        build_plan([0.5, 0.5], TargetSet([2]))


def test_chsh_half_efficiency_table():
    q = chsh_tsirelson()
    plan = build_plan([0.5, 0.5], TargetSet([0]))
    p = induced_behavior(plan, q)
    assert p.max_deviation(apply_loss_bob(q, [0.5, 0.5])) <= 1e-12
    assert np.allclose(p.marginal_b()[:, 1:], 0.25, atol=1e-15)
    assert guessing_probability(plan, q, 0) == 1.0
    # outside G Eve guesses the click outcome when Bob clicks and the no-click otherwise
    assert guessing_probability(plan, q, 1) == pytest.approx(0.5 + 0.5 * 0.5)


def test_opaque_detector_guesses_everything():
    q = magic_square()
    plan = build_plan([0.0, 0.0, 0.0], TargetSet([1]))
    p = induced_behavior(plan, q)
    assert np.all(p.marginal_b()[:, 0] == 1.0)
    for y in range(3):
        assert guessing_probability(plan, q, y) == 1.0


def test_joint_matches_branch_oracle(rng):
    for _ in range(30):
        q, profile, target = random_instance(rng)
        plan = build_plan(profile, target)
        expected = branch_tree_oracle(q, profile.etas, target)
        assert np.abs(induced_behavior(plan, q).table - expected).max() <= 1e-12


def test_perfect_guess_only_on_target(rng):
    q = random_behavior(Scenario(2, 3, 3), rng)
    plan = build_plan([0.2, 0.3, 0.4], TargetSet([0, 1]))
    for y in (0, 1):
        assert guessing_probability(plan, q, y) == 1.0
    assert guessing_probability(plan, q, 2) < 1.0


def test_joint_is_normalized_and_eve_unaffected_by_x(rng):
    q, profile, target = random_instance(rng)
    j = attack_joint(build_plan(profile, target), q)
    assert np.abs(j.sum(axis=(2, 3, 4, 5)) - 1).max() <= 1e-12
    eve_view = j.sum(axis=4)  # branch, e, b given (x, y)
    assert np.abs(eve_view - eve_view[:1]).max() <= 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), boundary=st.booleans())
def test_reproduction_property(seed, boundary):
    q, profile, target = random_instance(np.random.default_rng(seed), boundary=boundary)
    plan = build_plan(profile, target)
    assert induced_behavior(plan, q).max_deviation(apply_loss_bob(q, profile)) <= 1e-12
    for y in target:
        assert guessing_probability(plan, q, y) >= 1 - 1e-12


def test_monte_carlo_matches_exact_table():
    q = magic_square()
    plan = build_plan(EfficiencyProfile.uniform(1 / 3, 3), TargetSet([0, 1]))
    log = simulate_rounds(plan, q, 40_000, seed=7)
    z, impossible = max_standard_score(log, apply_loss_bob(q, plan.profile).table)
    assert impossible == 0
    assert z <= 5
    rate, n = guess_rate(log, [0, 1])
    assert n > 0 and rate == 1.0


def test_monte_carlo_reproducible():
    q = chsh_tsirelson()
    plan = build_plan([0.5, 0.5], TargetSet([1]))
    first = simulate_rounds(plan, q, 500, seed=3)
    assert first.equals(simulate_rounds(plan, q, 500, seed=3))
    assert not first.equals(simulate_rounds(plan, q, 500, seed=4))


def test_monte_carlo_setting_distribution():
    q = chsh_tsirelson()
    plan = build_plan([0.5, 0.5], TargetSet([0]))
    log = simulate_rounds(plan, q, 2000, seed=1, setting_probs_b=[1.0, 0.0])
    assert np.all(log.y == 0)
    with pytest.raises(ValueError):
        simulate_rounds(plan, q, 10, seed=1, setting_probs_b=[0.7, 0.7])
