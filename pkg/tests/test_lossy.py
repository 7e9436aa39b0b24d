import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detattack.lossy import (
    EfficiencyProfile,
    LossyBehavior,
    apply_loss_both,
    apply_loss_bob,
    blank,
    embed,
)
from detattack.scenario import Scenario, chsh_tsirelson, magic_square, random_behavior, table_residuals
from detattack.errors import ConfigurationError


def test_lossless_limit():
    q = magic_square()
    assert np.array_equal(apply_loss_bob(q, [1.0] * 3).table, embed(q))
    assert np.array_equal(apply_loss_both(q, 1.0).table, embed(q))


def test_opaque_bob():
    q = chsh_tsirelson()
    p = apply_loss_bob(q, [0.0, 0.0])
    assert np.all(p.marginal_b()[:, 0] == 1.0)
    assert np.allclose(p.table[:, :, 1:, 0], q.table.sum(axis=3))


def test_chsh_half_efficiency_bob_marginals():
    p = apply_loss_bob(chsh_tsirelson(), [0.5, 0.5])
    assert np.allclose(p.marginal_b()[:, 1:], 0.25, atol=1e-15)
    assert np.allclose(p.marginal_b()[:, 0], 0.5)


def test_alice_untouched_by_bob_loss(rng):
    q = random_behavior(Scenario(3, 2, 3), rng)
    p = apply_loss_bob(q, [0.3, 0.8])
    assert np.abs(p.marginal_a()[:, 1:] - q.marginal_a()).max() <= 1e-12
    assert np.all(p.marginal_a()[:, 0] == 0)


def test_both_sides_blocks():
    q = magic_square()
    p = apply_loss_both(q, 0.6)
    assert np.allclose(p.table[:, :, 0, 0], 0.16, atol=1e-15)
    blocks = np.array([
        p.table[:, :, 1:, 1:].sum(axis=(2, 3)),
        p.table[:, :, 1:, 0].sum(axis=2),
        p.table[:, :, 0, 1:].sum(axis=2),
        p.table[:, :, 0, 0],
    ])
    expected = [0.36, 0.24, 0.24, 0.16]
    for block, value in zip(blocks, expected):
        assert np.abs(block - value).max() <= 1e-12


def test_profile_validation():
    with pytest.raises(ConfigurationError):
        EfficiencyProfile((0.5, 1.2))
    with pytest.raises(ConfigurationError):
        apply_loss_bob(chsh_tsirelson(), [0.5])


def test_equal_profile_reduces_to_single_party(rng):
    q = random_behavior(Scenario(2, 3, 2), rng)
    eta = 0.37
    pb = apply_loss_bob(q, [eta] * 3).marginal_b()
    assert np.abs(pb[:, 1:] - eta * q.marginal_b()).max() <= 1e-12
    assert np.abs(pb[:, 0] - (1 - eta)).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(
    eta=st.floats(0, 1),
    survival=st.floats(0, 1),
    seed=st.integers(0, 2**32 - 1),
)
def test_blanking_composition(eta, survival, seed):
    q = random_behavior(Scenario(2, 2, 3), np.random.default_rng(seed))
    composed = blank(apply_loss_both(q, eta), survival, survival)
    direct = apply_loss_both(q, survival * eta)
    assert np.abs(composed.table - direct.table).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(etas=st.lists(st.floats(0, 1), min_size=3, max_size=3), seed=st.integers(0, 2**32 - 1))
def test_loss_preserves_no_signalling(etas, seed):
    q = random_behavior(Scenario(2, 3, 2), np.random.default_rng(seed))
    for p in (apply_loss_bob(q, etas), apply_loss_both(q, etas[0])):
        assert max(table_residuals(p.table).values()) <= 1e-12


def test_lossy_json_round_trip():
    p = apply_loss_both(chsh_tsirelson(), 0.7)
    back = LossyBehavior.from_dict(p.to_dict())
    assert np.array_equal(back.table, p.table)
    assert p.to_dict()["no_click"] == 0
