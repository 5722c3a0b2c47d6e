"""Spanning-tree recombination: seed plans, chain steps, plan pools, pair submaps."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .model import (
    DistrictPlan,
    PlanConstraints,
    PlanStructureError,
    UnitGraph,
    cut_edges,
    elect,
    validate_plan,
)

TREE_REDRAWS = 50


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    steps: int
    seed: int
    constraints: PlanConstraints = field(default_factory=PlanConstraints)
    sample_interval: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ChainError("steps must be >= 1")
        if self.sample_interval < 1:
            raise ChainError("sample_interval must be >= 1")


@dataclass(frozen=True)
class PoolEntry:
    plan: DistrictPlan
    wins_on_original: int
    cut_edges: int

    def to_json(self) -> dict:
        return {
            "n": self.plan.n,
            "assign": self.plan.assign.tolist(),
            "wins_on_original": self.wins_on_original,
            "cut_edges": self.cut_edges,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PoolEntry":
        return cls(DistrictPlan(d["assign"], d["n"]), int(d["wins_on_original"]),
                   int(d["cut_edges"]))


def random_spanning_tree(graph: UnitGraph, units: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random-weight minimum spanning tree of the subgraph induced by ``units``.

    Kruskal with union-find on uniform edge weights. Returns (local parent
    array, BFS order from local root 0); the root's parent is -1.
    """
    m = len(units)
    local = np.full(graph.n_units, -1)
    local[units] = np.arange(m)
    e = graph.edge_array
    a, b = local[e[:, 0]], local[e[:, 1]]
    keep = (a >= 0) & (b >= 0)
    a, b = a[keep], b[keep]
    order = np.argsort(rng.random(len(a)), kind="stable")
    root = list(range(m))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    nbrs: list[list[int]] = [[] for _ in range(m)]
    joined = 0
    for idx in order.tolist():
        u, v = int(a[idx]), int(b[idx])
        ru, rv = find(u), find(v)
        if ru != rv:
            root[ru] = rv
            nbrs[u].append(v)
            nbrs[v].append(u)
            joined += 1
            if joined == m - 1:
                break
    if joined != m - 1:
        raise ChainError("merged region is disconnected")
    parent = np.full(m, -1)
    seen = [False] * m
    seen[0] = True
    bfs = [0]
    for u in bfs:
        for v in nbrs[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                bfs.append(v)
    return parent, np.array(bfs)


def balanced_cuts(pop_local: np.ndarray, parent: np.ndarray, order: np.ndarray,
                  lo: float, hi: float, total: float) -> list[int]:
    """Tree nodes whose subtree population and complement both lie in [lo, hi]."""
    sub = pop_local.astype(float).copy()
    for v in order[::-1][:-1]:
        sub[parent[v]] += sub[v]
    ok = []
    for v in order[1:]:
        s = sub[v]
        if lo <= s <= hi and lo <= total - s <= hi:
            ok.append(int(v))
    return ok


def _subtree(parent: np.ndarray, order: np.ndarray, root: int) -> np.ndarray:
    inside = np.zeros(len(parent), dtype=bool)
    inside[root] = True
    for v in order:
        p = parent[v]
        if p >= 0 and inside[p]:
            inside[v] = True
    return inside


def _pop_bounds(graph: UnitGraph, n: int, constraints: PlanConstraints):
    ideal = graph.pop.sum() / n
    tol = constraints.pop_deviation * ideal
    return ideal - tol, ideal + tol


def bipartition(graph: UnitGraph, units: np.ndarray, rng, lo: float, hi: float,
                attempts: int = TREE_REDRAWS) -> np.ndarray | None:
    """Split ``units`` into two connected halves each within [lo, hi].

    Returns a boolean mask over ``units`` (True = first half) or None.
    """
    pop_local = graph.pop[units]
    total = float(pop_local.sum())
    for _ in range(attempts):
        parent, order = random_spanning_tree(graph, units, rng)
        cuts = balanced_cuts(pop_local, parent, order, lo, hi, total)
        if cuts:
            v = cuts[int(rng.integers(len(cuts)))]
            return _subtree(parent, order, v)
    return None


def recursive_tree_partition(graph: UnitGraph, n: int, constraints: PlanConstraints,
                             rng, max_restarts: int = 200) -> DistrictPlan:
    """Seed plan: peel off one balanced district at a time along random trees."""
    lo, hi = _pop_bounds(graph, n, constraints)
    ideal = graph.pop.sum() / n
    for _ in range(max_restarts):
        assign = np.full(graph.n_units, -1)
        remaining = np.arange(graph.n_units)
        ok = True
        for d in range(n - 1):
            left = n - d
            rest_lo, rest_hi = lo * (left - 1), hi * (left - 1)
            pop_local = graph.pop[remaining]
            total = float(pop_local.sum())
            found = None
            for _ in range(TREE_REDRAWS):
                parent, order = random_spanning_tree(graph, remaining, rng)
                sub = pop_local.astype(float).copy()
                for v in order[::-1][:-1]:
                    sub[parent[v]] += sub[v]
                cands = []
                for v in order[1:]:
                    for mask_in, piece in ((True, sub[v]), (False, total - sub[v])):
                        if lo <= piece <= hi and rest_lo <= total - piece <= rest_hi:
                            cands.append((int(v), mask_in))
                if cands:
                    v, mask_in = cands[int(rng.integers(len(cands)))]
                    inside = _subtree(parent, order, v)
                    found = inside if mask_in else ~inside
                    break
            if found is None:
                ok = False
                break
            assign[remaining[found]] = d
            remaining = remaining[~found]
        if not ok:
            continue
        assign[remaining] = n - 1
        plan = DistrictPlan(assign, n)
        if validate_plan(graph, plan, PlanConstraints(constraints.pop_deviation)).valid:
            return plan
    raise ChainError(f"could not build a balanced {n}-district seed plan (ideal {ideal:.1f})")


def recom_step(graph: UnitGraph, plan: DistrictPlan, rng,
               constraints: PlanConstraints = PlanConstraints()) -> DistrictPlan:
    """One recombination move; returns the input plan if no balanced split is found.

    The district pair is picked through a uniformly random cut edge. Proposals
    that break the cut-edge bound count as failed tree draws.
    """
    e = graph.edge_array
    a = plan.assign
    cut = np.flatnonzero(a[e[:, 0]] != a[e[:, 1]])
    if len(cut) == 0:
        return plan
    i, j = e[cut[int(rng.integers(len(cut)))]]
    d1, d2 = int(a[i]), int(a[j])
    units = np.flatnonzero((a == d1) | (a == d2))
    lo, hi = _pop_bounds(graph, plan.n, constraints)
    pop_local = graph.pop[units]
    total = float(pop_local.sum())
    for _ in range(TREE_REDRAWS):
        parent, order = random_spanning_tree(graph, units, rng)
        cuts = balanced_cuts(pop_local, parent, order, lo, hi, total)
        if not cuts:
            continue
        v = cuts[int(rng.integers(len(cuts)))]
        inside = _subtree(parent, order, v)
        new = a.copy()
        new[units[inside]] = d1
        new[units[~inside]] = d2
        proposal = DistrictPlan(new, plan.n)
        if constraints.max_cut_edges is not None and \
                cut_edges(graph, proposal) > constraints.max_cut_edges:
            continue
        return proposal
    return plan


def _require_valid(graph, plan, constraints, what="seed plan"):
    report = validate_plan(graph, plan, constraints)
    if not report.valid:
        raise ChainError(f"{what} violates constraints: " + "; ".join(report.problems))


def run_chain(graph: UnitGraph, seed_plan: DistrictPlan, config: ChainConfig) -> Iterator[DistrictPlan]:
    """Yield the plan after each step."""
    _require_valid(graph, seed_plan, config.constraints)
    rng = np.random.default_rng(config.seed)
    plan = seed_plan
    for _ in range(config.steps):
        plan = recom_step(graph, plan, rng, config.constraints)
        yield plan


def sample_pool(graph: UnitGraph, seed_plan: DistrictPlan, config: ChainConfig) -> list[PoolEntry]:
    """Record a plan every ``sample_interval`` accepted moves, deduplicated.

    ``wins_on_original`` uses the raw affiliations; winners are the same at
    any positive baseline turnout.
    """
    pool: list[PoolEntry] = []
    seen: set[bytes] = set()
    accepted = 0
    prev = seed_plan
    for plan in run_chain(graph, seed_plan, config):
        if plan is prev:
            continue
        prev = plan
        accepted += 1
        if accepted % config.sample_interval:
            continue
        n_cut = cut_edges(graph, plan)
        if config.constraints.max_cut_edges is not None and n_cut > config.constraints.max_cut_edges:
            continue
        canon = plan.canonical()
        key = canon.key()
        if key in seen:
            continue
        seen.add(key)
        wins = elect(graph, canon, (graph.vA, graph.vB)).wins_A
        pool.append(PoolEntry(canon, wins, n_cut))
    return pool


def pool_entry(graph: UnitGraph, plan: DistrictPlan) -> PoolEntry:
    canon = plan.canonical()
    return PoolEntry(canon, elect(graph, canon, (graph.vA, graph.vB)).wins_A,
                     cut_edges(graph, canon))


def write_pool(path, entries: Iterable[PoolEntry]) -> None:
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_json(), separators=(",", ":")) + "\n")


def read_pool(path) -> Iterator[PoolEntry]:
    with open(Path(path)) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield PoolEntry.from_json(json.loads(line))


def adjacent_districts(graph: UnitGraph, plan: DistrictPlan) -> set[tuple[int, int]]:
    e = graph.edge_array
    a, b = plan.assign[e[:, 0]], plan.assign[e[:, 1]]
    mask = a != b
    return {(int(min(x, y)), int(max(x, y))) for x, y in zip(a[mask], b[mask])}


def submap_pool(graph: UnitGraph, plan: DistrictPlan, pair: tuple[int, int], count: int,
                rng, constraints: PlanConstraints = PlanConstraints()) -> list[DistrictPlan]:
    """Alternative balanced bipartitions of two adjacent districts.

    The first entry is always the unchanged plan. The district with label
    ``pair[0]`` keeps the side overlapping it most.
    """
    d1, d2 = int(pair[0]), int(pair[1])
    if d1 == d2 or (min(d1, d2), max(d1, d2)) not in adjacent_districts(graph, plan):
        raise PlanStructureError(f"districts {d1} and {d2} are not adjacent")
    a = plan.assign
    units = np.flatnonzero((a == d1) | (a == d2))
    lo, hi = _pop_bounds(graph, plan.n, constraints)
    pop_local = graph.pop[units]
    total = float(pop_local.sum())
    out = [plan]
    seen = {plan.key()}
    attempts = 0
    while len(out) < count and attempts < max(TREE_REDRAWS, 4 * count):
        attempts += 1
        parent, order = random_spanning_tree(graph, units, rng)
        for v in balanced_cuts(pop_local, parent, order, lo, hi, total):
            inside = _subtree(parent, order, v)
            if (a[units[inside]] == d1).sum() < (a[units[~inside]] == d1).sum():
                inside = ~inside
            new = a.copy()
            new[units[inside]] = d1
            new[units[~inside]] = d2
            cand = DistrictPlan(new, plan.n)
            if constraints.max_cut_edges is not None and \
                    cut_edges(graph, cand) > constraints.max_cut_edges:
                continue
            key = cand.key()
            if key in seen:
                continue
            seen.add(key)
            out.append(cand)
            if len(out) >= count:
                break
    return out


def compact_seed_plan(graph: UnitGraph, n: int, constraints: PlanConstraints,
                      rng=None, max_steps: int = 20000) -> DistrictPlan:
    """Balanced plan meeting the cut-edge bound.

    Starts from a random tree partition and applies recombination moves that
    never increase the number of cut edges until the bound holds.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    plan = recursive_tree_partition(graph, n, PlanConstraints(constraints.pop_deviation), rng)
    bound = constraints.max_cut_edges
    if bound is None:
        return plan
    current = cut_edges(graph, plan)
    for _ in range(max_steps):
        if current <= bound:
            return plan
        step = PlanConstraints(constraints.pop_deviation, current)
        plan = recom_step(graph, plan, rng, step)
        current = cut_edges(graph, plan)
    raise ChainError(f"could not reach {bound} cut edges (stuck at {current})")
