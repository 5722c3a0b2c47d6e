"""States, district plans, campaigns and the election function."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Absolute tolerance for every vote comparison (ties go to party A).
TOL = 1e-9


class PlanStructureError(ValueError):
    """A plan is malformed (unknown units, wrong length, empty district)."""


class GraphError(ValueError):
    """A unit graph violates its invariants."""


class AllocationError(ValueError):
    """A campaign allocation breaks a turnout cap or the budget."""


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class UnitGraph:
    """Units with populations, party affiliations and rook/queen adjacency.

    ``vA[k]``/``vB[k]`` are the maximum number of votes each party can get in
    unit ``k``; ``pop[k] == vA[k] + vB[k]``.
    """

    pop: np.ndarray
    vA: np.ndarray
    vB: np.ndarray
    edges: tuple[tuple[int, int], ...]
    rows: int | None = None
    cols: int | None = None
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    edge_array: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pop = _frozen(self.pop, float)
        vA = _frozen(self.vA, float)
        vB = _frozen(self.vB, float)
        object.__setattr__(self, "pop", pop)
        object.__setattr__(self, "vA", vA)
        object.__setattr__(self, "vB", vB)
        k = len(pop)
        if len(vA) != k or len(vB) != k:
            raise GraphError("pop, vA and vB must have the same length")
        if k == 0:
            raise GraphError("graph has no units")
        if (vA < 0).any() or (vB < 0).any():
            bad = int(np.flatnonzero((vA < 0) | (vB < 0))[0])
            raise GraphError(f"unit {bad} has negative party votes")
        mismatch = np.abs(pop - vA - vB) > 1e-6 * np.maximum(1.0, pop)
        if mismatch.any():
            bad = int(np.flatnonzero(mismatch)[0])
            raise GraphError(
                f"unit {bad}: pop {pop[bad]} != vA + vB = {vA[bad] + vB[bad]}"
            )
        clean = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop on unit {i}")
            if not (0 <= i < k and 0 <= j < k):
                raise GraphError(f"edge ({i}, {j}) references an unknown unit")
            clean.add((min(i, j), max(i, j)))
        edges = tuple(sorted(clean))
        object.__setattr__(self, "edges", edges)
        arr = np.array(edges, dtype=int).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "edge_array", arr)
        nbrs: list[list[int]] = [[] for _ in range(k)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(n)) for n in nbrs))
        if len(_component(self.neighbors, 0, None)) != k:
            raise GraphError("adjacency graph is disconnected")

    @property
    def n_units(self) -> int:
        return len(self.pop)

    @classmethod
    def grid(cls, rows: int, cols: int, pop, vA, vB=None) -> "UnitGraph":
        """Rook-adjacency grid; unit id is ``r * cols + c``."""
        pop = np.asarray(pop, dtype=float)
        vA = np.asarray(vA, dtype=float)
        if vB is None:
            vB = pop - vA
        return cls(pop, vA, vB, grid_edges(rows, cols), rows=rows, cols=cols)


def grid_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return edges


def _component(neighbors, start: int, members: set | None) -> set:
    """Units reachable from ``start`` without leaving ``members``."""
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in neighbors[u]:
            if v not in seen and (members is None or v in members):
                seen.add(v)
                queue.append(v)
    return seen


@dataclass(frozen=True, eq=False)
class DistrictPlan:
    """Unit-to-district labels ``assign[k] in 0..n-1``."""

    assign: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "assign", _frozen(self.assign, int))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "DistrictPlan":
        labels = np.asarray(labels, dtype=int)
        return cls(labels, int(labels.max()) + 1 if len(labels) else 0)

    def districts(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assign == d) for d in range(self.n)]

    def canonical(self) -> "DistrictPlan":
        """Relabel districts in order of their smallest unit id."""
        mapping = {}
        for label in self.assign:
            if int(label) not in mapping:
                mapping[int(label)] = len(mapping)
        return DistrictPlan(np.array([mapping[int(a)] for a in self.assign]), self.n)

    def key(self) -> bytes:
        return self.canonical().assign.astype(np.int32).tobytes()

    def __eq__(self, other):
        if not isinstance(other, DistrictPlan):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.assign, other.assign)

    def __hash__(self):
        return hash((self.n, self.assign.tobytes()))


@dataclass(frozen=True)
class PlanConstraints:
    pop_deviation: float = 0.01
    max_cut_edges: int | None = None

    def __post_init__(self):
        if self.pop_deviation < 0:
            raise ValueError("pop_deviation must be nonnegative")


@dataclass(frozen=True, eq=False)
class CampaignScenario:
    """Baseline turnout, both budgets and party B's fixed per-unit spend."""

    alpha: float
    budgetA: float
    budgetB: float
    allocB: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "allocB", _frozen(self.allocB, float))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.budgetA < 0 or self.budgetB < 0:
            raise ValueError("budgets must be nonnegative")
        if (self.allocB < -TOL).any():
            raise AllocationError("party B allocation has negative entries")
        if self.allocB.sum() > self.budgetB + 1e-6:
            raise AllocationError(
                f"party B spends {self.allocB.sum():.6f} > budget {self.budgetB}"
            )

    @classmethod
    def proportional(cls, graph: UnitGraph, alpha: float, budgetA: float,
                     budgetB: float) -> "CampaignScenario":
        """Party B spends its budget in proportion to unit population.

        Each unit's share is clipped at B's turnout cap; the clipped remainder
        is simply not spent.
        """
        share = budgetB * graph.pop / graph.pop.sum()
        alloc = np.minimum(share, (1 - alpha) * graph.vB)
        return cls(alpha, budgetA, budgetB, alloc)

    def check(self, graph: UnitGraph) -> None:
        if len(self.allocB) != graph.n_units:
            raise AllocationError("allocB length does not match the graph")
        cap = (1 - self.alpha) * graph.vB
        over = self.allocB > cap + 1e-6
        if over.any():
            k = int(np.flatnonzero(over)[0])
            raise AllocationError(
                f"party B spends {self.allocB[k]} in unit {k}, cap is {cap[k]}"
            )


@dataclass
class ValidationReport:
    connected: list[bool]
    populations: list[float]
    deviations: list[float]
    cut_edges: int
    ideal: float
    valid: bool
    problems: list[str]


@dataclass(frozen=True, eq=False)
class ElectionOutcome:
    VA: np.ndarray
    VB: np.ndarray

    @property
    def a_wins(self) -> np.ndarray:
        return self.VA >= self.VB - TOL

    @property
    def wins_A(self) -> int:
        return int(self.a_wins.sum())

    @property
    def wins_B(self) -> int:
        return len(self.VA) - self.wins_A

    @property
    def margins(self) -> np.ndarray:
        return self.VB - self.VA

    @property
    def winners(self) -> list[str]:
        return ["A" if w else "B" for w in self.a_wins]


def check_structure(graph: UnitGraph, plan: DistrictPlan) -> None:
    if len(plan.assign) != graph.n_units:
        raise PlanStructureError(
            f"plan assigns {len(plan.assign)} units, graph has {graph.n_units}"
        )
    if plan.n < 1:
        raise PlanStructureError("plan has no districts")
    if len(plan.assign) and (plan.assign.min() < 0 or plan.assign.max() >= plan.n):
        raise PlanStructureError("district label outside 0..n-1")
    counts = np.bincount(plan.assign, minlength=plan.n)
    if (counts == 0).any():
        raise PlanStructureError(f"district {int(np.flatnonzero(counts == 0)[0])} is empty")


def cut_edges(graph: UnitGraph, plan: DistrictPlan) -> int:
    check_structure(graph, plan)
    e = graph.edge_array
    if len(e) == 0:
        return 0
    return int((plan.assign[e[:, 0]] != plan.assign[e[:, 1]]).sum())


def district_connected(graph: UnitGraph, units) -> bool:
    members = set(int(u) for u in units)
    if not members:
        return False
    start = next(iter(members))
    return len(_component(graph.neighbors, start, members)) == len(members)


def validate_plan(graph: UnitGraph, plan: DistrictPlan,
                  constraints: PlanConstraints = PlanConstraints()) -> ValidationReport:
    """Check contiguity, population balance and the cut-edge bound.

    Raises :class:`PlanStructureError` for malformed plans; constraint
    violations are reported, not raised.
    """
    check_structure(graph, plan)
    ideal = graph.pop.sum() / plan.n
    pops = np.bincount(plan.assign, weights=graph.pop, minlength=plan.n)
    deviations = np.abs(pops - ideal) / ideal
    connected = [district_connected(graph, units) for units in plan.districts()]
    n_cut = cut_edges(graph, plan)
    problems = []
    for d, ok in enumerate(connected):
        if not ok:
            problems.append(f"district {d} is disconnected")
    for d, dev in enumerate(deviations):
        if dev > constraints.pop_deviation + 1e-12:
            problems.append(f"district {d} deviates {dev:.4%} from the ideal population")
    if constraints.max_cut_edges is not None and n_cut > constraints.max_cut_edges:
        problems.append(f"{n_cut} cut edges exceed the bound {constraints.max_cut_edges}")
    return ValidationReport(
        connected=connected,
        populations=pops.tolist(),
        deviations=deviations.tolist(),
        cut_edges=n_cut,
        ideal=float(ideal),
        valid=not problems,
        problems=problems,
    )


def original_votes(graph: UnitGraph, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Votes with baseline turnout and no campaigning by either party."""
    return alpha * graph.vA, alpha * graph.vB


def apply_campaign(graph: UnitGraph, scenario: CampaignScenario,
                   allocA=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit votes after both parties' GOTV spending."""
    scenario.check(graph)
    if allocA is None:
        allocA = np.zeros(graph.n_units)
    allocA = np.asarray(allocA, dtype=float)
    if len(allocA) != graph.n_units:
        raise AllocationError("allocation length does not match the graph")
    if (allocA < -TOL).any():
        k = int(np.flatnonzero(allocA < -TOL)[0])
        raise AllocationError(f"negative spend {allocA[k]} in unit {k}")
    cap = (1 - scenario.alpha) * graph.vA
    over = allocA > cap + 1e-6
    if over.any():
        k = int(np.flatnonzero(over)[0])
        raise AllocationError(
            f"turnout cap: unit {k} receives {allocA[k]}, cap is {cap[k]}"
        )
    total = allocA.sum()
    if total > scenario.budgetA + 1e-6:
        raise AllocationError(f"budget: total spend {total} exceeds {scenario.budgetA}")
    vA = scenario.alpha * graph.vA + allocA
    vB = scenario.alpha * graph.vB + scenario.allocB
    return vA, vB


def district_totals(plan: DistrictPlan, votes) -> tuple[np.ndarray, np.ndarray]:
    vA, vB = votes
    VA = np.bincount(plan.assign, weights=vA, minlength=plan.n)
    VB = np.bincount(plan.assign, weights=vB, minlength=plan.n)
    return VA, VB


def elect(graph: UnitGraph, plan: DistrictPlan, votes) -> ElectionOutcome:
    """First-past-the-post result per district; ties go to A."""
    check_structure(graph, plan)
    VA, VB = district_totals(plan, votes)
    VA.setflags(write=False)
    VB.setflags(write=False)
    return ElectionOutcome(VA, VB)
