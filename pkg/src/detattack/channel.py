"""Fibre-loss budget: how many key bases keep the efficiency attack out of reach."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, InfeasibleError

DEFAULT_ALPHA = 0.2  # dB/km


@dataclass(frozen=True)
class ChannelModel:
    alpha: float = DEFAULT_ALPHA
    length: float = 0.0

    def __post_init__(self):
        if not (self.alpha >= 0 and self.length >= 0):
            raise ConfigurationError(f"alpha and length must be >= 0, got {self.alpha}, {self.length}")


def channel_efficiency(model: ChannelModel) -> float:
    """Transmission 10^(-alpha L / 10)."""
    return 10.0 ** (-(model.alpha * model.length) / 10.0)


def min_bases(model: ChannelModel) -> int:
    """Fewest key bases |G| with 1/(|G|+1) < eta_C (strict: the attack must fail)."""
    eta_c = channel_efficiency(model)
    if eta_c <= 0:
        raise InfeasibleError(f"channel transmission underflows at L={model.length} km", margin=0.0)
    g = max(1, math.floor(1.0 / eta_c))
    while 1.0 / (g + 1) >= eta_c:
        g += 1
    while g > 1 and 1.0 / g < eta_c:
        g -= 1
    return g


def max_distance(alpha: float, bases: int) -> float:
    """Supremum of L with 1/(bases+1) < 10^(-alpha L/10); inf when alpha = 0.

    The inequality is strict, so the returned distance itself is excluded.
    """
    if bases < 1:
        raise ValueError(f"bases must be >= 1, got {bases}")
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return math.inf
    return (10.0 / alpha) * math.log10(bases + 1)
