import numpy as np
import pytest

from detattack.lossy import EfficiencyProfile
from detattack.primary import TargetSet
from detattack.scenario import Scenario, random_behavior

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, max_settings=4, max_outcomes=4, boundary=False):
    """Random (behavior, feasible profile, target set).

    With ``boundary`` the feasibility inequality is saturated.
    """
    s = Scenario(
        int(rng.integers(1, max_settings + 1)),
        int(rng.integers(1, max_settings + 1)),
        int(rng.integers(2, max_outcomes + 1)),
    )
    q = random_behavior(s, rng)
    size = int(rng.integers(1, s.m_b + 1))
    target = TargetSet(rng.choice(s.m_b, size=size, replace=False))
    rest = target.complement(s.m_b)
    eta_prime = float(rng.uniform(0, 1)) if rest else 0.0
    budget = 1 - eta_prime
    if not boundary:
        budget *= float(rng.uniform(0, 1))
    split = rng.dirichlet(np.ones(size)) * budget
    etas = np.zeros(s.m_b)
    etas[list(target)] = split
    if rest:
        etas[rest] = rng.uniform(0, eta_prime, size=len(rest))
        etas[rng.choice(rest)] = eta_prime
    etas = np.clip(etas, 0, 1)
    return q, EfficiencyProfile(tuple(etas)), target


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
