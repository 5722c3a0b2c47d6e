import numpy as np
import pytest

from votemander.fairness import FairnessWindow
from votemander.instances import column_plan, generate_grid_instance
from votemander.model import CampaignScenario, PlanConstraints, UnitGraph
from votemander.recom import ChainError, recursive_tree_partition

TINY_SHAPES = [(2, 3), (3, 3), (2, 4), (1, 6), (3, 2), (2, 2)]


def tiny_instance(rng):
    """Random <= 9-unit grid with integer data, two plans, a scenario and a window."""
    while True:
        try:
            return _tiny_instance(rng)
        except ChainError:  # populations too lumpy to split; draw again
            pass


def _tiny_instance(rng):
    rows, cols = TINY_SHAPES[rng.integers(len(TINY_SHAPES))]
    k = rows * cols
    pop = rng.integers(2, 12, k).astype(float)
    vA = np.array([rng.integers(0, p + 1) for p in pop], dtype=float)
    g = UnitGraph.grid(rows, cols, pop, vA)
    n = int(rng.integers(2, 4)) if k >= 3 else 2
    cons = PlanConstraints(0.6)
    planI = recursive_tree_partition(g, n, cons, rng)
    planJ = recursive_tree_partition(g, n, cons, rng)
    alpha = [0.25, 0.5, 0.75][rng.integers(3)]
    budgetB = float(rng.integers(0, 6))
    allocB = np.zeros(k)
    capB, left = (1 - alpha) * g.vB, budgetB
    for u in rng.permutation(k):
        t = min(capB[u], float(rng.integers(0, 3)), left)
        allocB[u] = t
        left -= t
    scenario = CampaignScenario(alpha, float(rng.integers(0, 15)), budgetB, allocB)
    c, w = rng.uniform(-0.3, 0.3), rng.uniform(0.02, 0.4)
    window = FairnessWindow(c - w, c + w) if rng.random() < 0.9 else FairnessWindow.unbounded()
    return g, planI, planJ, scenario, window


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid20():
    return generate_grid_instance(20, 20, seed=11)


@pytest.fixture(scope="session")
def columns20():
    return column_plan(20, 20, 10)


@pytest.fixture
def square():
    """2x2 grid, units 0 1 / 2 3."""
    return UnitGraph.grid(2, 2, [100, 100, 100, 100], [60, 40, 55, 45])
