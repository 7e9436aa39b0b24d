import math

import pytest

from detattack.channel import ChannelModel, channel_efficiency, max_distance, min_bases
from detattack.errors import ConfigurationError, InfeasibleError


def test_efficiency_closed_forms():
    assert channel_efficiency(ChannelModel(0.2, 0)) == 1.0
    assert channel_efficiency(ChannelModel(0.2, 50)) == pytest.approx(0.1)
    assert channel_efficiency(ChannelModel(0.2, 100)) == pytest.approx(0.01, rel=1e-12)


def test_min_bases_strict_inequality():
    assert min_bases(ChannelModel(0.2, 100)) == 100
    # eta_C = 0.1 exactly; |G| = 9 gives 1/10, not strictly below
    assert channel_efficiency(ChannelModel(0.2, 50)) == 0.1
    assert min_bases(ChannelModel(0.2, 50)) == 10
    assert min_bases(ChannelModel(0.2, 0)) == 1


def test_min_bases_brute_force():
    for length in (1, 7.5, 33, 60, 100, 150):
        model = ChannelModel(0.2, length)
        eta = channel_efficiency(model)
        expected = next(g for g in range(1, 10**6) if 1 / (g + 1) < eta)
        assert min_bases(model) == expected


def test_max_distance_values():
    assert max_distance(0.2, 1) == pytest.approx(50 * math.log10(2))
    assert max_distance(0.2, 1) == pytest.approx(15.05, abs=0.01)
    assert max_distance(0.2, 100) == pytest.approx(100.216, abs=1e-3)
    assert max_distance(0.2, 20) - max_distance(0.2, 10) == pytest.approx(14.04, abs=0.01)
    assert max_distance(0, 3) == math.inf


def test_max_distance_consistent_with_min_bases():
    for bases in (1, 5, 42):
        d = max_distance(0.2, bases)
        assert min_bases(ChannelModel(0.2, d * 0.999)) <= bases
        assert min_bases(ChannelModel(0.2, d * 1.001)) > bases


def test_validation():
    with pytest.raises(ConfigurationError):
        ChannelModel(-1, 10)
    with pytest.raises(ValueError):
        max_distance(0.2, 0)
    with pytest.raises(InfeasibleError):
        min_bases(ChannelModel(0.2, 1e6))
