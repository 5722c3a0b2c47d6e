"""The service layer: one function per command, request model in, JSON out.

Both the FastAPI app and the in-process CLI call these, so a command gives
the same document whether it runs locally or against ``serve``.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from ..experiments import SweepConfig, rows_to_csv, run_sweep
from ..fairness import FairnessWindow, UndefinedMetric, efficiency_gap, morans_i
from ..fairness_step import solve_fairness_step
from ..heuristic import stage_table, votemander
from ..instances import (
    InstanceError,
    generate_clustered_instance,
    generate_grid_instance,
    graph_from_json,
    graph_to_json,
    plan_from_json,
    plan_to_json,
    scenario_from_json,
)
from ..local import LocalAssemblyError, run_local
from ..model import (
    AllocationError,
    GraphError,
    PlanConstraints,
    PlanStructureError,
    apply_campaign,
    cut_edges,
    elect,
    validate_plan,
)
from ..recom import ChainConfig, ChainError, PoolEntry, compact_seed_plan, pool_entry, sample_pool
from . import schemas

# Errors caused by the caller's input rather than by a bug.
INPUT_ERRORS = (InstanceError, GraphError, PlanStructureError, AllocationError, ChainError,
                ValueError)


class ServiceError(ValueError):
    """Bad request: the message is meant for the caller."""


def _window(w: schemas.Window) -> FairnessWindow:
    return FairnessWindow(-math.inf if w.lo is None else w.lo,
                          math.inf if w.hi is None else w.hi)


def _graph(data):
    try:
        return graph_from_json(data)
    except INPUT_ERRORS as exc:
        raise ServiceError(f"graph: {exc}") from exc


def _plan(data, graph, what="plan"):
    try:
        return plan_from_json(data, graph)
    except INPUT_ERRORS as exc:
        raise ServiceError(f"{what}: {exc}") from exc


def _scenario(s: schemas.Scenario, graph):
    try:
        return scenario_from_json(s.model_dump(), graph)
    except INPUT_ERRORS as exc:
        raise ServiceError(f"scenario: {exc}") from exc


def _morans(graph, values):
    try:
        return float(morans_i(graph, values))
    except UndefinedMetric:
        return None


def generate(req: schemas.GenerateRequest) -> dict:
    try:
        if req.morans_i is None:
            g = generate_grid_instance(req.rows, req.cols, req.pop_range, req.share_range,
                                       req.seed)
        else:
            g = generate_clustered_instance(req.rows, req.cols, req.morans_i, req.seed,
                                            req.pop_range, req.share_range)
    except INPUT_ERRORS as exc:
        raise ServiceError(str(exc)) from exc
    return graph_to_json(g)


def sample(req: schemas.SampleRequest) -> dict:
    graph = _graph(req.graph)
    cons = PlanConstraints(req.pop_deviation, req.cut_bound)
    try:
        if req.plan is None:
            start = compact_seed_plan(graph, req.n_districts, cons,
                                      np.random.default_rng([req.seed, 7]))
        else:
            start = _plan(req.plan, graph)
        pool = sample_pool(graph, start, ChainConfig(req.steps, req.seed, cons, req.interval))
    except INPUT_ERRORS as exc:
        raise ServiceError(str(exc)) from exc
    if req.pool_size is not None:
        pool = pool[: req.pool_size]
    return {"seed_plan": plan_to_json(start), "pool": [e.to_json() for e in pool]}


def score(req: schemas.ScoreRequest) -> dict:
    graph = _graph(req.graph)
    plan = _plan(req.plan, graph)
    report = validate_plan(graph, plan, PlanConstraints(req.pop_deviation, req.cut_bound))
    shares = graph.vA / np.maximum(graph.pop, 1e-12)

    def block(votes):
        outcome = elect(graph, plan, votes)
        ledger = efficiency_gap(outcome)
        return {"wins_A": outcome.wins_A, "wins_B": outcome.wins_B, "eg": ledger.eg,
                "districts": ledger.rows(outcome)}

    out = {
        "valid": report.valid,
        "problems": list(report.problems),
        "cut_edges": cut_edges(graph, plan),
        "morans_i": _morans(graph, shares),
        "original": block((graph.vA, graph.vB)),
    }
    if req.scenario is not None:
        scenario = _scenario(req.scenario, graph)
        try:
            votes = apply_campaign(graph, scenario, req.allocation)
        except INPUT_ERRORS as exc:
            raise ServiceError(f"allocation: {exc}") from exc
        out["campaigned"] = block(votes)
    return out


def fairness_step(req: schemas.FairnessStepRequest) -> dict:
    graph = _graph(req.graph)
    planI = _plan(req.initial_plan, graph, "initial_plan")
    planJ = _plan(req.target_plan, graph, "target_plan")
    scenario = _scenario(req.scenario, graph)
    return solve_fairness_step(planI, planJ, graph, scenario, _window(req.window)).to_json()


def _pool(raw, graph) -> list[PoolEntry]:
    out = []
    for i, d in enumerate(raw):
        plan = _plan(d, graph, f"pool[{i}]")
        if "wins_on_original" in d and "cut_edges" in d:
            out.append(PoolEntry(plan, int(d["wins_on_original"]), int(d["cut_edges"])))
        else:
            out.append(pool_entry(graph, plan))
    return out


def run_votemander(req: schemas.VotemanderRequest) -> dict:
    graph = _graph(req.graph)
    plan = _plan(req.plan, graph)
    scenario = _scenario(req.scenario, graph)
    pool = _pool(req.pool, graph)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = votemander(graph, plan, pool, scenario, _window(req.window), req.weight,
                         req.exhaustive)
    out = sol.to_json()
    out["table"] = stage_table(sol.stages)
    out["warnings"] = [str(w.message) for w in caught]
    return out


def local(req: schemas.LocalRequest) -> dict:
    graph = _graph(req.graph)
    plan = _plan(req.plan, graph)
    scenario = _scenario(req.scenario, graph)
    try:
        sol = run_local(graph, plan, scenario, _window(req.window), req.submap_pool_size,
                        req.seed, PlanConstraints(req.pop_deviation))
    except (LocalAssemblyError, *INPUT_ERRORS) as exc:
        raise ServiceError(str(exc)) from exc
    out = sol.to_json()
    out["table"] = stage_table(sol.stages)
    return out


def sweep(req: schemas.SweepRequest) -> dict:
    data = dict(req.config)
    data.pop("output", None)  # the caller decides where the CSV goes
    try:
        cfg = SweepConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ServiceError(f"sweep config: {exc}") from exc
    rows = run_sweep(cfg)
    return {
        "csv": rows_to_csv(rows),
        "rows": len(rows),
        "failures": [
            {"level": r.level, "replicate": r.replicate, "error": r.error}
            for r in rows if r.error is not None
        ],
    }


def ingest(req: schemas.IngestRequest) -> dict:
    graph = _graph(req.graph)
    out = {
        "units": graph.n_units,
        "edges": len(graph.edges),
        "total_pop": float(graph.pop.sum()),
        "graph": graph_to_json(graph),
    }
    if req.plan is not None:
        plan = _plan(req.plan, graph)
        report = validate_plan(graph, plan)
        out.update(districts=plan.n, plan=plan_to_json(plan), plan_valid=report.valid,
                   plan_problems=list(report.problems))
    return out
