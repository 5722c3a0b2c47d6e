import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votemander.fairness import (
    Action,
    FairnessWindow,
    NotApplicable,
    UndefinedMetric,
    action_delta,
    efficiency_gap,
    eg_value,
    morans_i,
    reassignment_delta,
    turnout_threshold,
    votemander_bonus,
    wasted_diff_district,
)
from votemander.model import DistrictPlan, ElectionOutcome, PlanConstraints, UnitGraph, elect
from votemander.recom import recursive_tree_partition


def outcome(*pairs):
    VA, VB = zip(*pairs)
    return ElectionOutcome(np.array(VA, float), np.array(VB, float))


@pytest.mark.parametrize("VA,VB,expected", [(75, 25, 0.0), (60, 40, 30.0), (40, 60, -30.0)])
def test_wasted_diff_district(VA, VB, expected):
    assert wasted_diff_district(VA, VB) == pytest.approx(expected)


def test_efficiency_gap_examples():
    assert efficiency_gap(outcome((60, 40), (40, 60))).eg == pytest.approx(0.0)
    assert efficiency_gap(outcome((60, 40), (55, 45))).eg == pytest.approx(0.35)
    assert eg_value(outcome((75, 25))) == pytest.approx(0.0)


def test_ledger_rows_are_auditable():
    o = outcome((60, 40), (40, 60))
    rows = efficiency_gap(o).rows(o)
    assert [r["winner"] for r in rows] == ["A", "B"]
    assert [r["wasted_diff"] for r in rows] == pytest.approx([30, -30])


def test_window():
    w = FairnessWindow(-0.08, 0.08)
    assert w.contains(0.08) and not w.contains(0.0801)
    assert FairnessWindow.parse("0,0.15") == FairnessWindow(0.0, 0.15)
    assert FairnessWindow.unbounded().contains(1e9)
    with pytest.raises(ValueError):
        FairnessWindow(0.1, 0.0)


def test_action_deltas():
    assert action_delta(Action.WASTE_ON_LOSING) == -1.5
    assert action_delta(Action.WASTE_ON_WINNING) == -0.5
    assert action_delta(Action.WIN_BY_CAMPAIGN, VA=40, VB=60) == pytest.approx(90)
    assert action_delta(Action.SHIFT_WIN_TO_LOSS, x=5) == -5
    assert action_delta(Action.SHIFT_LOSS_TO_WIN, x=5) == 5
    with pytest.raises(NotApplicable):
        action_delta(Action.WIN_BY_CAMPAIGN, VA=60, VB=40)


def test_win_by_campaign_matches_scratch():
    before = wasted_diff_district(40, 60)
    after = wasted_diff_district(60, 60)  # 20 votes bring a tie, A wins it
    assert after - before == pytest.approx(action_delta("win-by-campaign", VA=40, VB=60))


def test_reassignment_delta_trivial_cases():
    g = UnitGraph.grid(2, 3, [10] * 6, [7, 2, 6, 3, 8, 1])
    votes = (g.vA, g.vB)
    p = DistrictPlan([0, 0, 1, 1, 2, 2], 3)
    assert reassignment_delta(g, votes, p, p) == 0
    swapped = DistrictPlan([2, 2, 0, 0, 1, 1], 3)
    assert reassignment_delta(g, votes, p, swapped) == pytest.approx(0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_reassignment_delta_equals_scratch(seed):
    rng = np.random.default_rng(seed)
    pop = rng.integers(5, 30, 12).astype(float)
    g = UnitGraph.grid(3, 4, pop, np.floor(pop * rng.random(12)))
    cons = PlanConstraints(0.8)
    I = recursive_tree_partition(g, 3, cons, rng)
    J = recursive_tree_partition(g, 3, cons, rng)
    votes = (g.vA * 0.7, g.vB * 0.7)

    def W(plan):
        o = elect(g, plan, votes)
        return sum(wasted_diff_district(a, b) for a, b in zip(o.VA, o.VB))

    assert reassignment_delta(g, votes, I, J) == pytest.approx(W(J) - W(I), abs=1e-9)


def test_bonus_examples():
    assert votemander_bonus(3, 5, 4, 4)[0] == 3
    assert votemander_bonus(4, 4, 4, 4) == (0, (0, 0, 0))
    delta, parts = votemander_bonus(12, 15, 16, 17)
    assert delta == 8
    assert parts == (3, 1, 4)
    assert sum(parts) == delta


def test_morans_checkerboard():
    g = UnitGraph.grid(2, 2, [1] * 4, [1] * 4)
    assert morans_i(g, [1, 0, 0, 1]) == pytest.approx(-1.0)
    g6 = UnitGraph.grid(6, 6, [1] * 36, [1] * 36)
    board = [(r + c) % 2 for r in range(6) for c in range(6)]
    assert morans_i(g6, board) == pytest.approx(-1.0)


def test_morans_random_values_near_zero(grid20):
    vals = np.random.default_rng(3).random(400)
    assert abs(morans_i(grid20, vals)) < 0.05


def test_morans_constant_is_undefined(grid20):
    with pytest.raises(UndefinedMetric):
        morans_i(grid20, np.ones(400))


def _strip(vA):
    return UnitGraph.grid(1, len(vA), [10] * len(vA), vA)


def test_turnout_threshold_interior_value():
    g = _strip([0, 5, 10, 6])
    I, J = DistrictPlan([0, 1, 1, 1], 2), DistrictPlan([0, 0, 0, 1], 2)
    votes = (g.vA, g.vB)
    delta = reassignment_delta(g, votes, I, J)
    assert delta == pytest.approx(10.0)
    # J wins both districts (the first on a tie), holding 21 A affiliates
    assert turnout_threshold(g, votes, I, J) == pytest.approx(1 - 2 * 10 / 21)


def test_turnout_threshold_zero_at_half_affiliation():
    g = _strip([0, 5, 10, 5])
    I, J = DistrictPlan([0, 1, 1, 1], 2), DistrictPlan([0, 0, 0, 1], 2)
    votes = (g.vA, g.vB)
    # shift of 10 is half of the 20 A affiliates in J's winning districts
    assert reassignment_delta(g, votes, I, J) == pytest.approx(10.0)
    assert turnout_threshold(g, votes, I, J) == pytest.approx(0.0)


def test_turnout_threshold_nonpositive_shift_is_one():
    g = _strip([9, 7, 5, 2, 3, 0])
    I = DistrictPlan([0, 0, 1, 1, 2, 2], 3)
    J = DistrictPlan([0, 1, 2, 2, 2, 2], 3)
    votes = (g.vA, g.vB)
    assert reassignment_delta(g, votes, I, J) <= 0
    assert turnout_threshold(g, votes, I, J) == 1.0


def test_turnout_threshold_needs_a_gain():
    g = _strip([0, 5, 10, 6])
    J = DistrictPlan([0, 0, 0, 1], 2)
    with pytest.raises(NotApplicable):
        turnout_threshold(g, (g.vA, g.vB), J, J)
