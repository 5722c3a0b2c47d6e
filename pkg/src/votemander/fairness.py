"""Efficiency gap, wasted-vote bookkeeping, seat bonus and Moran's I."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import TOL, DistrictPlan, ElectionOutcome, UnitGraph, district_totals


class UndefinedMetric(ValueError):
    """The metric has no value for this input (zero votes, zero variance)."""


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class FairnessWindow:
    """Bounds on the signed efficiency gap."""

    lo: float = -0.08
    hi: float = 0.08

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")

    def contains(self, eg: float, tol: float = 1e-9) -> bool:
        return self.lo - tol <= eg <= self.hi + tol

    @classmethod
    def unbounded(cls) -> "FairnessWindow":
        return cls(-math.inf, math.inf)

    @classmethod
    def parse(cls, text: str) -> "FairnessWindow":
        lo, hi = (float(x) for x in text.split(","))
        return cls(lo, hi)


DEFAULT_WINDOW = FairnessWindow(-0.08, 0.08)
CASE_STUDY_WINDOW = FairnessWindow(0.0, 0.15)


@dataclass(frozen=True)
class WastedVoteLedger:
    district: tuple[float, ...]
    state_sum: float
    total_votes: float
    eg: float

    def rows(self, outcome: ElectionOutcome) -> list[dict]:
        return [
            {"district": d, "VA": float(a), "VB": float(b), "winner": w, "wasted_diff": x}
            for d, (a, b, w, x) in enumerate(
                zip(outcome.VA, outcome.VB, outcome.winners, self.district)
            )
        ]


def wasted_diff_district(VA: float, VB: float) -> float:
    """B's wasted votes minus A's wasted votes in one district."""
    if VA < 0 or VB < 0:
        raise ValueError("vote totals must be nonnegative")
    if VA == 0 and VB == 0:
        raise UndefinedMetric("district has no votes")
    if VA >= VB - TOL:
        return (3 * VB - VA) / 2
    return (VB - 3 * VA) / 2


def efficiency_gap(outcome: ElectionOutcome) -> WastedVoteLedger:
    total = float(outcome.VA.sum() + outcome.VB.sum())
    if total <= 0:
        raise UndefinedMetric("no votes cast")
    per = tuple(
        0.0 if a == 0 and b == 0 else wasted_diff_district(float(a), float(b))
        for a, b in zip(outcome.VA, outcome.VB)
    )
    s = float(sum(per))
    return WastedVoteLedger(per, s, total, s / total)


def eg_value(outcome: ElectionOutcome) -> float:
    return efficiency_gap(outcome).eg


class Action(str, Enum):
    WASTE_ON_LOSING = "waste-on-losing"
    WASTE_ON_WINNING = "waste-on-winning"
    WIN_BY_CAMPAIGN = "win-by-campaign"
    SHIFT_WIN_TO_LOSS = "shift-W->L"
    SHIFT_LOSS_TO_WIN = "shift-L->W"


def action_delta(action, VA: float | None = None, VB: float | None = None,
                 x: float | None = None) -> float:
    """Change in wasted-vote difference caused by one campaign/shift action.

    Per-vote rates for the two waste actions; ``VA``/``VB`` are the totals of
    a losing district for a campaign win; ``x`` is the shifted vote count.
    """
    action = Action(action)
    if action is Action.WASTE_ON_LOSING:
        return -1.5
    if action is Action.WASTE_ON_WINNING:
        return -0.5
    if action is Action.WIN_BY_CAMPAIGN:
        if VA is None or VB is None:
            raise ValueError("win-by-campaign needs district totals")
        if VA >= VB - TOL:
            raise NotApplicable("district is already won by A")
        return (3 * VA + VB) / 2
    if x is None:
        raise ValueError("shift actions need a vote count x")
    return -x if action is Action.SHIFT_WIN_TO_LOSS else x


def _status_term(plan: DistrictPlan, votes) -> tuple[float, np.ndarray]:
    VA, VB = district_totals(plan, votes)
    win = VA >= VB - TOL
    return float(VB[win].sum() - VA[~win].sum()), win


def reassignment_delta(graph: UnitGraph, votes, planI: DistrictPlan,
                       planJ: DistrictPlan) -> float:
    """Change in state wasted-vote difference when redrawing I as J.

    Only the winning/losing membership matters: the half-difference term of
    every district sums to the same statewide constant under any plan.
    """
    term_j, _ = _status_term(planJ, votes)
    term_i, _ = _status_term(planI, votes)
    return term_j - term_i


def votemander_bonus(wins_initial: int, wins_campaigned: int,
                     wins_votemandered: int, wins_target: int):
    """Seat gain over two rounds plus its three-way breakdown."""
    delta = wins_campaigned + wins_target - 2 * wins_initial
    parts = (
        wins_campaigned - wins_initial,
        wins_target - wins_votemandered,
        wins_votemandered - wins_initial,
    )
    return delta, parts


def morans_i(graph: UnitGraph, values) -> float:
    """Moran's I with binary adjacency weights from the graph edges."""
    v = np.asarray(values, dtype=float)
    if len(v) != graph.n_units:
        raise ValueError("one value per unit required")
    dev = v - v.mean()
    denom = float((dev**2).sum())
    if denom <= 1e-15 * max(1.0, float((v**2).sum())):
        raise UndefinedMetric("values have zero variance")
    e = graph.edge_array
    if len(e) == 0:
        raise UndefinedMetric("graph has no adjacencies")
    # each undirected edge appears twice in the ordered-pair sum
    num = 2.0 * float((dev[e[:, 0]] * dev[e[:, 1]]).sum())
    return graph.n_units / (2.0 * len(e)) * num / denom


def turnout_threshold(graph: UnitGraph, votes, planI: DistrictPlan,
                      planJ: DistrictPlan) -> float:
    """Largest turnout at which spending on J's winning districts restores fairness.

    ``votes`` are the turnout-scaled votes the reshuffle is evaluated on; the
    denominator is A's full affiliation in J's winning districts, so the
    check is exactly "turnout capacity of winning districts covers twice the
    wasted-vote shift".
    """
    wins_i = elect_wins(planI, votes)
    wins_j = elect_wins(planJ, votes)
    if wins_j <= wins_i:
        raise NotApplicable(f"target plan wins {wins_j} <= initial {wins_i}")
    delta_w = reassignment_delta(graph, votes, planI, planJ)
    _, win = _status_term(planJ, votes)
    a_in_wins = float(graph.vA[np.isin(planJ.assign, np.flatnonzero(win))].sum())
    if delta_w <= 0:
        return 1.0
    if a_in_wins <= 0:
        return 0.0
    return float(min(1.0, 1.0 - 2.0 * delta_w / a_in_wins))


def elect_wins(plan: DistrictPlan, votes) -> int:
    VA, VB = district_totals(plan, votes)
    return int((VA >= VB - TOL).sum())


def fixed_point_turnout(graph: UnitGraph, planI: DistrictPlan,
                        planJ: DistrictPlan) -> float:
    """Turnout at which ``turnout_threshold`` evaluated on its own votes is tight.

    Statuses and the wasted-vote shift scale linearly with turnout when only
    baseline votes are cast, so the fixed point has a closed form.
    """
    votes = (graph.vA, graph.vB)
    delta_init = reassignment_delta(graph, votes, planI, planJ)
    _, win = _status_term(planJ, votes)
    a_in_wins = float(graph.vA[np.isin(planJ.assign, np.flatnonzero(win))].sum())
    if delta_init <= 0:
        return 1.0
    return a_in_wins / (a_in_wins + 2.0 * delta_init)
