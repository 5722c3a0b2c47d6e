"""Pool scan for the best target plan, with the round-1 win bound cutoff."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fairness import DEFAULT_WINDOW, FairnessWindow, eg_value, votemander_bonus
from .fairness_step import FairnessStepSolution, max_round1_wins, solve_fairness_step
from .model import (
    CampaignScenario,
    DistrictPlan,
    ElectionOutcome,
    UnitGraph,
    apply_campaign,
    elect,
    original_votes,
)
from .recom import PoolEntry

STAGES = ("initial", "campaigned", "votemandered", "target")
STAGE_LABELS = {
    "initial": "Initial Map",
    "campaigned": "Campaigned Map",
    "votemandered": "Votemandered Map",
    "target": "Target Map",
}


@dataclass(frozen=True)
class Stage:
    outcome: ElectionOutcome
    eg: float

    @property
    def wins(self) -> int:
        return self.outcome.wins_A


def evaluate_stages(graph: UnitGraph, initial: DistrictPlan, target: DistrictPlan,
                    scenario: CampaignScenario, allocA) -> dict[str, Stage]:
    """Score the four plan/vote pairings from scratch."""
    v0 = original_votes(graph, scenario.alpha)
    v1 = apply_campaign(graph, scenario, allocA)
    pairs = {
        "initial": (initial, v0),
        "campaigned": (initial, v1),
        "votemandered": (target, v1),
        "target": (target, v0),
    }
    out = {}
    for name, (plan, votes) in pairs.items():
        outcome = elect(graph, plan, votes)
        out[name] = Stage(outcome, eg_value(outcome))
    return out


def stage_table(stages: dict[str, Stage]) -> str:
    """Four-row wins/EG table."""
    lines = [f"{'Stage':<18} {'Number of Wins':>14} {'Efficiency Gap':>15}"]
    for name in STAGES:
        s = stages[name]
        lines.append(f"{STAGE_LABELS[name]:<18} {s.wins:>14d} {s.eg:>15.4f}")
    return "\n".join(lines)


@dataclass
class VotemanderSolution:
    target_plan: DistrictPlan
    allocation: np.ndarray
    stages: dict[str, Stage]
    weight: int = 1
    pool_index_examined: int = 0
    candidate_index: int | None = None  # position in the input pool, None = no action
    step: FairnessStepSolution | None = None
    s1_max: int | None = None

    @property
    def objective(self) -> int:
        return self.stages["campaigned"].wins + self.weight * self.stages["target"].wins

    @property
    def bonus(self) -> int:
        return self.bonus_parts[0]

    @property
    def bonus_parts(self):
        w = {k: s.wins for k, s in self.stages.items()}
        delta, parts = votemander_bonus(w["initial"], w["campaigned"], w["votemandered"],
                                        w["target"])
        return delta, parts

    def to_json(self) -> dict:
        delta, parts = self.bonus_parts
        return {
            "objective": self.objective,
            "bonus": delta,
            "bonus_parts": list(parts),
            "weight": self.weight,
            "candidate_index": self.candidate_index,
            "pool_index_examined": self.pool_index_examined,
            "s1_max": self.s1_max,
            "stages": {
                name: {"wins": s.wins, "eg": s.eg} for name, s in self.stages.items()
            },
            "target_plan": {"n": self.target_plan.n,
                            "assign": self.target_plan.assign.tolist()},
            "allocation": [float(x) for x in self.allocation],
            "fairness_step": None if self.step is None else {
                k: v for k, v in self.step.to_json().items() if k != "allocation"
            },
        }


def _entries(pool: Sequence) -> list[PoolEntry]:
    return [e if isinstance(e, PoolEntry) else PoolEntry(e, -1, -1) for e in pool]


def scan_order(pool: Sequence[PoolEntry]) -> list[int]:
    """Indices sorted by original-share wins (desc), then cut edges, then position."""
    return sorted(range(len(pool)),
                  key=lambda i: (-pool[i].wins_on_original, pool[i].cut_edges, i))


def no_action(graph, initial_plan, scenario, weight=1, s1_max=None) -> VotemanderSolution:
    alloc = np.zeros(graph.n_units)
    stages = evaluate_stages(graph, initial_plan, initial_plan, scenario, alloc)
    return VotemanderSolution(initial_plan, alloc, stages, weight, s1_max=s1_max)


def votemander(graph: UnitGraph, initial_plan: DistrictPlan, pool: Sequence[PoolEntry],
               scenario: CampaignScenario, window: FairnessWindow = DEFAULT_WINDOW,
               weight: int = 1, exhaustive: bool = False) -> VotemanderSolution:
    """Best target plan in ``pool`` for party A.

    Candidates are scanned by decreasing original-share wins; once the
    round-1 ceiling plus a candidate's weighted target wins falls below the
    best objective found, no later candidate can do better and the scan
    stops. ``exhaustive=True`` disables the cutoff (used as a check).
    """
    if weight < 0:
        raise ValueError("weight must be nonnegative")
    s1_max, _ = max_round1_wins(graph, initial_plan, scenario)
    if s1_max == initial_plan.n:
        warnings.warn("party A's budget can win every round-1 district", stacklevel=2)
    if len(pool) == 0:
        warnings.warn("empty pool: returning the no-action baseline", stacklevel=2)
        return no_action(graph, initial_plan, scenario, weight, s1_max)
    pool = _entries(pool)
    best_obj, best = -math.inf, None
    examined = 0
    for idx in scan_order(pool):
        entry = pool[idx]
        if entry.wins_on_original < 0:
            entry = PoolEntry(entry.plan, elect(graph, entry.plan,
                                                (graph.vA, graph.vB)).wins_A, entry.cut_edges)
        if not exhaustive and s1_max + weight * entry.wins_on_original < best_obj:
            break
        examined += 1
        step = solve_fairness_step(initial_plan, entry.plan, graph, scenario, window)
        if not step.feasible:
            continue
        obj = step.round1_wins + weight * entry.wins_on_original
        if obj > best_obj:
            best_obj, best = obj, (idx, entry, step)
    if best is None:
        sol = no_action(graph, initial_plan, scenario, weight, s1_max)
        sol.pool_index_examined = examined
        return sol
    idx, entry, step = best
    stages = evaluate_stages(graph, initial_plan, entry.plan, scenario, step.allocation)
    return VotemanderSolution(entry.plan, step.allocation, stages, weight, examined, idx,
                              step, s1_max)
