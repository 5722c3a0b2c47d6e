"""Least-change votemandering over pairs of neighboring districts.

Each pair of adjacent districts is re-split along random spanning trees
and priced for three ways of gaining one seat:

1. pay the losing margin of D1 to win it in round 1, with new boundaries
   that leave the votemandered pair's seat count unchanged;
2. new boundaries under which A wins one more pair seat on original shares
   while B's spending keeps the votemandered count unchanged (no budget);
3. new boundaries that win one more seat in both votemandered and target
   pairs (no budget, real fairness cost).

A matching over the district graph then picks disjoint pairs subject to
the budget and the EG window, with optional extra spending ``b`` on losing
districts to pull the EG down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import networkx as nx
import numpy as np

from .fairness import DEFAULT_WINDOW, FairnessWindow, votemander_bonus
from .fairness_step import LOSS_GAP
from .heuristic import STAGES, Stage, evaluate_stages
from .model import (
    TOL,
    CampaignScenario,
    DistrictPlan,
    PlanConstraints,
    UnitGraph,
    apply_campaign,
    district_totals,
    original_votes,
    validate_plan,
)
from .recom import adjacent_districts, submap_pool


class LocalAssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class StrategyEdge:
    pair: tuple[int, int]
    strategy: int
    budget_cost: float
    fairness_cost: float
    perturbation: DistrictPlan
    spend: np.ndarray = field(repr=False, compare=False, default=None)
    gain: int = 1

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "strategy": self.strategy,
                "budget_cost": self.budget_cost, "fairness_cost": self.fairness_cost,
                "gain": self.gain}


def _wasted(VA: np.ndarray, VB: np.ndarray) -> np.ndarray:
    return np.where(VA >= VB - TOL, (3 * VB - VA) / 2, (VB - 3 * VA) / 2)


def build_district_adjacency(graph: UnitGraph, plan: DistrictPlan,
                             scenario: CampaignScenario | None = None) -> nx.Graph:
    """District graph annotated with status and totals on original shares."""
    alpha = 1.0 if scenario is None else scenario.alpha
    VA, VB = district_totals(plan, original_votes(graph, alpha))
    G = nx.Graph()
    for d in range(plan.n):
        G.add_node(d, status="W" if VA[d] >= VB[d] - TOL else "L",
                   VA=float(VA[d]), VB=float(VB[d]))
    for a, b in sorted(adjacent_districts(graph, plan)):
        G.add_edge(a, b)
    return G


@dataclass
class _PairView:
    """Pair-restricted vote totals under the four stages."""

    graph: UnitGraph
    plan: DistrictPlan
    scenario: CampaignScenario
    pair: tuple[int, int]

    def __post_init__(self):
        self.v0 = original_votes(self.graph, self.scenario.alpha)
        self.v1 = apply_campaign(self.graph, self.scenario)
        self.idx = list(self.pair)
        self.cap = (1 - self.scenario.alpha) * self.graph.vA
        self.base_camp = self.wins(self.plan, self.v1)
        self.base_target = self.wins(self.plan, self.v0)
        self.base_W = self.W(self.plan, self.v1)

    def totals(self, plan, votes):
        VA, VB = district_totals(plan, votes)
        return VA[self.idx], VB[self.idx]

    def wins(self, plan, votes) -> int:
        VA, VB = self.totals(plan, votes)
        return int((VA >= VB - TOL).sum())

    def W(self, plan, votes) -> float:
        return float(_wasted(*self.totals(plan, votes)).sum())

    def with_spend(self, spend):
        return (self.v1[0] + spend, self.v1[1])


def _fill(units, cap, need):
    """Place ``need`` votes on ``units`` in order, up to ``cap`` each."""
    spend = {}
    for k in units:
        if need <= 1e-12:
            break
        take = min(cap[k], need)
        if take > 0:
            spend[k] = take
            need -= take
    return spend, need


def strategy_edges(pair: tuple[int, int], submaps: Sequence[DistrictPlan], graph: UnitGraph,
                   plan: DistrictPlan, scenario: CampaignScenario) -> list[StrategyEdge]:
    """Cheapest-in-fairness perturbation for each feasible strategy on a pair."""
    if not submaps:
        raise ValueError("empty submap pool")
    view = _PairView(graph, plan, scenario, tuple(int(d) for d in pair))
    VA0, VB0 = view.totals(plan, view.v0)
    if (VA0 >= VB0 - TOL).all():
        return []
    VA1, VB1 = view.totals(plan, view.v1)
    base_vm = view.base_camp  # votemandered baseline = initial plan, post-B votes
    best: dict[int, StrategyEdge] = {}

    def offer(edge: StrategyEdge):
        cur = best.get(edge.strategy)
        if cur is None or edge.fairness_cost < cur.fairness_cost - 1e-12:
            best[edge.strategy] = edge

    zero = np.zeros(graph.n_units)
    for q in submaps:
        target_gain = view.wins(q, view.v0) - view.base_target
        vm = view.wins(q, view.v1)
        f0 = view.W(q, view.v1) - view.base_W
        if target_gain >= 1 and vm == base_vm:
            offer(StrategyEdge(view.pair, 2, 0.0, f0, q, zero, target_gain))
        if target_gain >= 1 and vm > base_vm:
            offer(StrategyEdge(view.pair, 3, 0.0, f0, q, zero, target_gain + 0))
        # strategy 1: buy D1 in round 1, boundaries undo it
        for pos, d1 in enumerate(view.pair):
            margin = float(VB1[pos] - VA1[pos])
            if margin <= TOL:
                continue
            d1_units = np.flatnonzero(plan.assign == d1)
            leaving = [int(k) for k in d1_units if q.assign[k] != d1]
            staying = [int(k) for k in d1_units if q.assign[k] == d1]
            placed, short = _fill(leaving + staying, view.cap, margin)
            if short > 1e-9:
                continue
            spend = np.zeros(graph.n_units)
            for k, v in placed.items():
                spend[k] = v
            votes = view.with_spend(spend)
            camp_gain = view.wins(plan, votes) - view.base_camp
            if view.wins(q, votes) != base_vm or camp_gain + target_gain < 1:
                continue
            f1 = view.W(q, votes) - view.base_W
            offer(StrategyEdge(view.pair, 1, margin, f1, q, spend, camp_gain + target_gain))
    return [best[s] for s in sorted(best)]


# --- matching with two knapsacks -----------------------------------------

@dataclass
class MatchingResult:
    selected: list[int]          # indices into the edge list
    slack_spend: float
    budget_used: float
    feasible: bool = True

    @property
    def size(self) -> int:
        return len(self.selected)


@dataclass(frozen=True)
class _Costs:
    budget: float
    slack: float
    slack_rate: float
    spend_rate: float
    lower: tuple[float, float, float] | None
    capacity: dict | None


def _slack_needed(edges, chosen, covered, c: _Costs) -> float | None:
    """Cheapest extra spend b making ``chosen`` fit both knapsacks, or None."""
    spent = sum(edges[i].budget_cost for i in chosen)
    load = sum(edges[i].fairness_cost - c.spend_rate * edges[i].budget_cost for i in chosen)
    b = max(0.0, (load - c.slack) / c.slack_rate)
    if spent + b > c.budget + 1e-9:
        return None
    if c.capacity is not None:
        room = sum(v for d, v in c.capacity.items() if d not in covered)
        if b > room + 1e-9:
            return None
    if c.lower is not None:
        floor, rate, srate = c.lower
        low = sum(edges[i].fairness_cost - srate * edges[i].budget_cost for i in chosen)
        if low - rate * b < floor - 1e-9:
            return None
    return b


def _max_matching_size(nodes: set, adj: dict) -> int:
    G = nx.Graph()
    for u in nodes:
        for v in adj[u]:
            if v in nodes and u < v:
                G.add_edge(u, v)
    return len(nx.max_weight_matching(G, maxcardinality=True)) if G.number_of_edges() else 0


def solve_matching(edges: Sequence[StrategyEdge], budgetA: float, fairness_slack: float,
                   slack_rate: float = 1.5, spend_rate: float = 0.0,
                   lower: tuple[float, float, float] | None = None,
                   slack_capacity: dict | None = None) -> MatchingResult:
    """Largest feasible matching, then least edge budget; exact branch and bound.

    Fairness knapsack: sum(f_e - spend_rate*b_e) - slack_rate*b <= slack.
    ``lower`` = (floor, rate, spend_rate) adds
    sum(f_e - spend_rate*b_e) - rate*b >= floor. ``slack_capacity`` maps
    districts to how much slack spend they absorb when left unmatched.
    """
    costs = _Costs(budgetA, fairness_slack, slack_rate, spend_rate, lower, slack_capacity)
    by_node: dict[int, list[int]] = {}
    adj: dict[int, set] = {}
    for i, e in enumerate(edges):
        a, b = e.pair
        if a == b:
            raise ValueError("self-loop edge")
        for u, v in ((a, b), (b, a)):
            by_node.setdefault(u, []).append(i)
            adj.setdefault(u, set()).add(v)
    order = sorted(by_node)
    best = {"key": None, "sel": [], "b": 0.0}

    def consider(chosen, covered):
        b = _slack_needed(edges, chosen, covered, costs)
        if b is None:
            return
        spent = sum(edges[i].budget_cost for i in chosen)
        key = (len(chosen), -spent)
        if best["key"] is None or key > best["key"]:
            best.update(key=key, sel=sorted(chosen), b=b)

    cache: dict[frozenset, int] = {}

    def bound(free: frozenset) -> int:
        if free not in cache:
            cache[free] = _max_matching_size(set(free), adj)
        return cache[free]

    def search(pos: int, chosen: list, matched: set, blocked: set, spent: float):
        consider(chosen, matched)
        while pos < len(order) and (order[pos] in blocked or
                                    all(edges[i].pair[0] in blocked or edges[i].pair[1] in blocked
                                        for i in by_node[order[pos]])):
            pos += 1
        if pos == len(order):
            return
        if best["key"] is not None:
            free = frozenset(u for u in order[pos:] if u not in blocked)
            top = len(chosen) + bound(free)
            if top < best["key"][0] or (top == best["key"][0] and -spent <= best["key"][1]):
                return
        v = order[pos]
        for i in by_node[v]:
            a, b = edges[i].pair
            u = b if a == v else a
            if u in blocked or spent + edges[i].budget_cost > budgetA + 1e-9:
                continue
            chosen.append(i)
            search(pos + 1, chosen, matched | {u, v}, blocked | {u, v},
                   spent + edges[i].budget_cost)
            chosen.pop()
        search(pos + 1, chosen, matched, blocked | {v}, spent)

    search(0, [], frozenset(), frozenset(), 0.0)
    if best["key"] is None:
        return MatchingResult([], 0.0, 0.0, feasible=False)
    sel = best["sel"]
    return MatchingResult(sel, best["b"], sum(edges[i].budget_cost for i in sel))


def enumerate_matchings(edges: Sequence[StrategyEdge], budgetA: float, fairness_slack: float,
                        **kw) -> MatchingResult:
    """Brute-force counterpart of ``solve_matching`` (small graphs only)."""
    costs = _Costs(budgetA, fairness_slack, kw.get("slack_rate", 1.5),
                   kw.get("spend_rate", 0.0), kw.get("lower"), kw.get("slack_capacity"))
    best_key, best = None, MatchingResult([], 0.0, 0.0)

    def rec(i, chosen, covered):
        nonlocal best_key, best
        if i == len(edges):
            b = _slack_needed(edges, chosen, covered, costs)
            if b is None:
                return
            spent = sum(edges[j].budget_cost for j in chosen)
            key = (len(chosen), -spent)
            if best_key is None or key > best_key:
                best_key, best = key, MatchingResult(list(chosen), b, spent)
            return
        rec(i + 1, chosen, covered)
        a, b = edges[i].pair
        if a not in covered and b not in covered:
            rec(i + 1, chosen + [i], covered | {a, b})

    rec(0, [], frozenset())
    if best_key is None:
        return MatchingResult([], 0.0, 0.0, feasible=False)
    return best


# --- assembly ------------------------------------------------------------

@dataclass
class LocalSolution:
    edges: list[StrategyEdge]
    selected: list[StrategyEdge]
    slack_spend: float
    target_plan: DistrictPlan
    allocation: np.ndarray
    stages: dict[str, Stage]
    adjacency: nx.Graph | None = None

    @property
    def bonus(self) -> int:
        w = {k: s.wins for k, s in self.stages.items()}
        return votemander_bonus(w["initial"], w["campaigned"], w["votemandered"],
                                w["target"])[0]

    @property
    def objective(self) -> int:
        return self.stages["campaigned"].wins + self.stages["target"].wins

    def to_json(self) -> dict:
        w = {k: s.wins for k, s in self.stages.items()}
        delta, parts = votemander_bonus(w["initial"], w["campaigned"], w["votemandered"],
                                        w["target"])
        out = {
            "bonus": delta,
            "bonus_parts": list(parts),
            "objective": self.objective,
            "slack_spend": self.slack_spend,
            "budget_used": float(self.allocation.sum()),
            "selected": [e.to_json() for e in self.selected],
            "stages": {k: {"wins": s.wins, "eg": s.eg} for k, s in self.stages.items()},
            "target_plan": {"n": self.target_plan.n, "assign": self.target_plan.assign.tolist()},
            "allocation": [float(x) for x in self.allocation],
        }
        if self.adjacency is not None:
            chosen = {(e.pair, e.strategy) for e in self.selected}
            out["district_graph"] = {
                "nodes": [{"id": d, **attrs} for d, attrs in self.adjacency.nodes(data=True)],
                "edges": [
                    {**e.to_json(), "selected": (e.pair, e.strategy) in chosen}
                    for e in self.edges
                ],
            }
        return out


def slack_capacity(graph: UnitGraph, plan: DistrictPlan, scenario: CampaignScenario) -> dict:
    """Spend each losing district (post-B) absorbs while staying lost."""
    VA, VB = district_totals(plan, apply_campaign(graph, scenario))
    cap = np.bincount(plan.assign, weights=(1 - scenario.alpha) * graph.vA, minlength=plan.n)
    out = {}
    for d in range(plan.n):
        m = VB[d] - VA[d]
        if m > TOL:
            out[d] = float(max(0.0, min(cap[d], m - LOSS_GAP)))
    return out


def _slack_allocation(graph, plan, scenario, amount, covered) -> np.ndarray:
    alloc = np.zeros(graph.n_units)
    cap = (1 - scenario.alpha) * graph.vA
    room = slack_capacity(graph, plan, scenario)
    left = amount
    for d in sorted(room):
        if left <= 1e-12:
            break
        if d in covered:
            continue
        take = min(room[d], left)
        placed, _ = _fill(np.flatnonzero(plan.assign == d), cap, take)
        for k, v in placed.items():
            alloc[k] += v
        left -= take
    if left > 1e-6:
        raise LocalAssemblyError(f"slack spend short by {left:.6g}")
    return alloc


def assemble_target(graph: UnitGraph, plan: DistrictPlan, scenario: CampaignScenario,
                    selection: Sequence[StrategyEdge], slack_spend: float = 0.0,
                    window: FairnessWindow = DEFAULT_WINDOW,
                    constraints: PlanConstraints | None = None) -> LocalSolution:
    """Apply the selected perturbations and re-score every stage."""
    covered: set[int] = set()
    assign = plan.assign.copy()
    alloc = np.zeros(graph.n_units)
    for e in selection:
        a, b = e.pair
        if a in covered or b in covered:
            raise LocalAssemblyError(f"selection is not a matching at pair {e.pair}")
        covered |= {a, b}
        units = (plan.assign == a) | (plan.assign == b)
        assign[units] = e.perturbation.assign[units]
        if e.spend is not None:
            alloc += e.spend
    alloc += _slack_allocation(graph, plan, scenario, slack_spend, covered)
    target = DistrictPlan(assign, plan.n)
    if constraints is not None:
        report = validate_plan(graph, target, constraints)
        if not report.valid:
            raise LocalAssemblyError("target plan invalid: " + "; ".join(report.problems))
    stages = evaluate_stages(graph, plan, target, scenario, alloc)
    eg = stages["votemandered"].eg
    if not window.contains(eg):
        raise LocalAssemblyError(
            f"votemandered EG {eg:.6f} outside [{window.lo}, {window.hi}] "
            f"after {len(selection)} edges and slack {slack_spend:.3f}"
        )
    return LocalSolution([], list(selection), slack_spend, target, alloc, stages)


def matching_costs(graph: UnitGraph, plan: DistrictPlan, scenario: CampaignScenario,
                   window: FairnessWindow) -> dict:
    """Knapsack parameters for ``solve_matching`` from the EG window.

    The baseline is the initial plan under B's campaign with no A spend;
    total votes grow by every unit A spends, hence the window bound
    multiplies the spend terms.
    """
    v1 = apply_campaign(graph, scenario)
    VA, VB = district_totals(plan, v1)
    W_base = float(_wasted(VA, VB).sum())
    T0 = float(v1[0].sum() + v1[1].sum())
    kw: dict = {"slack_capacity": slack_capacity(graph, plan, scenario)}
    if math.isfinite(window.hi):
        kw.update(fairness_slack=window.hi * T0 - W_base, slack_rate=1.5 + window.hi,
                  spend_rate=window.hi)
    else:
        kw.update(fairness_slack=math.inf, slack_rate=1.5, spend_rate=0.0)
    if math.isfinite(window.lo):
        kw["lower"] = (window.lo * T0 - W_base, 1.5 + window.lo, window.lo)
    return kw


def run_local(graph: UnitGraph, plan: DistrictPlan, scenario: CampaignScenario,
              window: FairnessWindow = DEFAULT_WINDOW, submap_pool_size: int = 20,
              seed: int = 0, constraints: PlanConstraints = PlanConstraints()) -> LocalSolution:
    """Price all pairs, solve the matching and assemble the target plan."""
    rng = np.random.default_rng(seed)
    G = build_district_adjacency(graph, plan, scenario)
    edges: list[StrategyEdge] = []
    for a, b in sorted(G.edges()):
        if G.nodes[a]["status"] == "W" and G.nodes[b]["status"] == "W":
            continue
        subs = submap_pool(graph, plan, (a, b), submap_pool_size, rng, constraints)
        edges.extend(strategy_edges((a, b), subs, graph, plan, scenario))
    kw = matching_costs(graph, plan, scenario, window)
    if math.isinf(kw["fairness_slack"]):
        kw["fairness_slack"] = 1e300
    res = solve_matching(edges, scenario.budgetA, **kw)
    if not res.feasible:
        raise LocalAssemblyError("no selection, not even the empty one, fits the EG window")
    chosen = [edges[i] for i in res.selected]
    sol = assemble_target(graph, plan, scenario, chosen, res.slack_spend, window, constraints)
    sol.edges = edges
    sol.adjacency = G
    return sol
