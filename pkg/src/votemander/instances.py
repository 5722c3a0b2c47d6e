"""Synthetic grid states, clustered vote patterns, and JSON (de)serialization."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .fairness import morans_i
from .model import (
    CampaignScenario,
    DistrictPlan,
    GraphError,
    PlanStructureError,
    UnitGraph,
    check_structure,
    grid_edges,
)


class InstanceError(ValueError):
    pass


# Gaussian smoothing width (in units) of the clustered share field.
SMOOTHING = 2.0


def generate_grid_instance(rows: int, cols: int, pop_range=(350, 400),
                           share_range=(0.2, 0.8), seed: int = 0) -> UnitGraph:
    """Rook grid with integer populations and uniform party-A shares."""
    lo, hi = pop_range
    slo, shi = share_range
    if rows < 1 or cols < 1:
        raise InstanceError("grid needs at least one row and column")
    if not (0 < lo <= hi) or int(lo) != lo or int(hi) != hi:
        raise InstanceError(f"bad population range {pop_range}")
    if not (0 <= slo <= shi <= 1):
        raise InstanceError(f"bad share range {share_range}")
    rng = np.random.default_rng(seed)
    k = rows * cols
    pop = rng.integers(int(lo), int(hi) + 1, size=k).astype(float)
    share = rng.uniform(slo, shi, size=k)
    vA = share * pop
    return UnitGraph(pop, vA, pop - vA, grid_edges(rows, cols), rows=rows, cols=cols)


def _arrangement_for(graph: UnitGraph, shares: np.ndarray, field: np.ndarray,
                     noise: np.ndarray, lam: float) -> np.ndarray:
    """Permutation that places high shares where the mixed field is high."""
    key = lam * field + (1 - lam) * noise
    slots = np.argsort(key, kind="stable")
    ranked = np.argsort(shares, kind="stable")
    perm = np.empty(len(shares), dtype=int)
    perm[slots] = ranked
    return perm


def generate_clustered_instance(rows: int, cols: int, target_I: float, seed: int = 0,
                                pop_range=(350, 400), share_range=(0.2, 0.8),
                                tol: float = 0.02, max_iter: int = 60) -> UnitGraph:
    """Grid instance whose unit A-shares have Moran's I close to ``target_I``.

    Units (population and share together) are permuted over the grid, so the
    statewide A share equals that of the uniform draw with the same seed.
    Shares are ranked along a mix of a spatial field (smoothed noise for
    clustering, a checkerboard for dispersion) and plain noise; the mixing
    weight is bisected to hit the target.
    """
    if not -0.2 <= target_I <= 0.9:
        raise InstanceError("target Moran's I must lie in [-0.2, 0.9]")
    base = generate_grid_instance(rows, cols, pop_range, share_range, seed)
    rng = np.random.default_rng([seed, 1])
    shares = base.vA / base.pop
    r, c = np.divmod(np.arange(rows * cols), cols)
    noise = rng.random(rows * cols)
    if target_I >= 0:
        # smoothed noise: several same-party patches rather than one split
        blobs = gaussian_filter(rng.random((rows, cols)), sigma=SMOOTHING, mode="reflect")
        field = blobs.ravel()
    else:
        field = ((r + c) % 2).astype(float)

    def build(lam):
        perm = _arrangement_for(base, shares, field, noise, lam)
        return perm, morans_i(base, shares[perm])

    lo_lam, hi_lam = 0.0, 1.0
    perm, value = build(0.0)
    best = (abs(value - target_I), perm, value)
    for _ in range(max_iter):
        if best[0] <= tol:
            break
        mid = (lo_lam + hi_lam) / 2
        perm, value = build(mid)
        if abs(value - target_I) < best[0]:
            best = (abs(value - target_I), perm, value)
        # |I| grows with the weight on the spatial field
        if abs(value) < abs(target_I):
            lo_lam = mid
        else:
            hi_lam = mid
    err, perm, value = best
    if err > 0.05:
        raise InstanceError(f"could not reach Moran's I {target_I} (got {value:.3f})")
    return UnitGraph(base.pop[perm], base.vA[perm], base.vB[perm], base.edges,
                     rows=rows, cols=cols)


def column_plan(rows: int, cols: int, n: int) -> DistrictPlan:
    """Districts made of ``cols // n`` adjacent columns each."""
    if cols % n:
        raise InstanceError("columns must divide evenly into districts")
    width = cols // n
    c = np.arange(rows * cols) % cols
    return DistrictPlan(c // width, n)


def block_plan(rows: int, cols: int, block_rows: int, block_cols: int) -> DistrictPlan:
    """Rectangular blocks of ``rows/block_rows`` x ``cols/block_cols`` units."""
    r, c = np.divmod(np.arange(rows * cols), cols)
    h, w = rows // block_rows, cols // block_cols
    labels = np.minimum(r // h, block_rows - 1) * block_cols + np.minimum(c // w, block_cols - 1)
    return DistrictPlan(labels, block_rows * block_cols)


# --- JSON ---------------------------------------------------------------

def graph_to_json(graph: UnitGraph) -> dict:
    units = [
        {"id": k, "pop": _num(graph.pop[k]), "vA": _num(graph.vA[k]), "vB": _num(graph.vB[k])}
        for k in range(graph.n_units)
    ]
    out = {"units": units, "edges": [list(e) for e in graph.edges]}
    if graph.rows is not None:
        out["rows"], out["cols"] = graph.rows, graph.cols
    return out


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


def graph_from_json(data: dict) -> UnitGraph:
    """Parse a graph document; see README for the accepted forms."""
    if not isinstance(data, dict):
        raise InstanceError("graph document must be a JSON object")
    rows, cols = data.get("rows"), data.get("cols")
    if "units" not in data:
        if rows is None or cols is None:
            raise InstanceError("graph needs 'units' or a {rows, cols} generator form")
        return generate_grid_instance(
            int(rows), int(cols),
            tuple(data.get("pop_range", (350, 400))),
            tuple(data.get("share_range", (0.2, 0.8))),
            int(data.get("seed", 0)),
        )
    units = data["units"]
    try:
        ids = [int(u["id"]) for u in units]
        pop = [float(u["pop"]) for u in units]
        vA = [float(u["vA"]) for u in units]
        vB = [float(u["vB"]) for u in units]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"unit records need id, pop, vA, vB: {exc}") from exc
    if sorted(ids) != list(range(len(ids))):
        raise InstanceError("unit ids must be exactly 0..|K|-1")
    order = np.argsort(ids)
    pop, vA, vB = (np.array(x)[order] for x in (pop, vA, vB))
    if "edges" in data:
        edges = [tuple(e) for e in data["edges"]]
    elif rows is not None and cols is not None:
        edges = grid_edges(int(rows), int(cols))
    else:
        raise InstanceError("graph needs 'edges' (or rows/cols for a grid)")
    try:
        return UnitGraph(pop, vA, vB, edges,
                         rows=int(rows) if rows is not None else None,
                         cols=int(cols) if cols is not None else None)
    except GraphError as exc:
        raise InstanceError(str(exc)) from exc


def plan_to_json(plan: DistrictPlan) -> dict:
    return {"n": plan.n, "assign": plan.assign.tolist()}


def plan_from_json(data: dict, graph: UnitGraph | None = None) -> DistrictPlan:
    try:
        assign = [int(a) for a in data["assign"]]
        n = int(data.get("n", max(assign) + 1 if assign else 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"plan needs 'assign' (and optionally 'n'): {exc}") from exc
    plan = DistrictPlan(assign, n)
    if graph is not None:
        try:
            check_structure(graph, plan)
        except PlanStructureError as exc:
            raise InstanceError(str(exc)) from exc
    return plan


def scenario_to_json(s: CampaignScenario) -> dict:
    return {"alpha": s.alpha, "budgetA": s.budgetA, "budgetB": s.budgetB,
            "allocB": s.allocB.tolist()}


def scenario_from_json(data: dict, graph: UnitGraph) -> CampaignScenario:
    alpha = float(data["alpha"])
    budgetA = float(data.get("budgetA", 0.0))
    budgetB = float(data.get("budgetB", 0.0))
    alloc = data.get("allocB", "proportional")
    if isinstance(alloc, str):
        if alloc != "proportional":
            raise InstanceError(f"unknown allocB rule {alloc!r}")
        s = CampaignScenario.proportional(graph, alpha, budgetA, budgetB)
    else:
        s = CampaignScenario(alpha, budgetA, budgetB, np.asarray(alloc, dtype=float))
    s.check(graph)
    return s


def load_json(path) -> dict:
    with open(Path(path)) as fh:
        return json.load(fh)


def ingest_state(graph_file, plan_file=None):
    """Load and validate a graph (and optional plan) from JSON files."""
    graph = graph_from_json(load_json(graph_file))
    plan = plan_from_json(load_json(plan_file), graph) if plan_file else None
    return graph, plan
