"""Command line client.

Every subcommand builds a request body and either calls the service layer in
process or, with ``--remote URL``, posts it to a running ``votemander serve``.
Output is JSON with sorted keys, so equal inputs give identical bytes.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click

from . import __version__
from .service import handlers, schemas
from .service.handlers import ServiceError

ROUTES = {
    "generate": (schemas.GenerateRequest, handlers.generate),
    "sample": (schemas.SampleRequest, handlers.sample),
    "score": (schemas.ScoreRequest, handlers.score),
    "fairness-step": (schemas.FairnessStepRequest, handlers.fairness_step),
    "votemander": (schemas.VotemanderRequest, handlers.run_votemander),
    "local": (schemas.LocalRequest, handlers.local),
    "sweep": (schemas.SweepRequest, handlers.sweep),
    "ingest": (schemas.IngestRequest, handlers.ingest),
}


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"{path}: {exc}") from exc


def _read_pool(path) -> list[dict]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        try:  # one entry per line
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise click.ClickException(f"{path}: {exc}") from exc
    if isinstance(doc, dict) and "pool" in doc:
        doc = doc["pool"]
    if not isinstance(doc, list):
        raise click.ClickException(f"{path}: expected a list of plans or a sample output")
    return doc


def _call(ctx: click.Context, route: str, body: dict) -> dict:
    model, fn = ROUTES[route]
    remote = ctx.obj.get("remote")
    if remote:
        import httpx

        try:
            resp = httpx.post(f"{remote.rstrip('/')}/{route}", json=body, timeout=None)
        except httpx.HTTPError as exc:
            raise click.ClickException(f"cannot reach {remote}: {exc}") from exc
        if resp.status_code >= 400:
            raise click.ClickException(f"server said {resp.status_code}: {resp.text}")
        return resp.json()
    try:
        req = model.model_validate(body)
        return fn(req)
    except ServiceError as exc:
        raise click.ClickException(str(exc)) from exc
    except ValueError as exc:  # pydantic validation
        raise click.ClickException(str(exc)) from exc


def _emit(doc, output):
    text = dumps(doc)
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def _window(text: str) -> dict:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise click.BadParameter("expected LO,HI (use inf/-inf for an open side)") from exc
    return {"lo": None if math.isinf(lo) else lo, "hi": None if math.isinf(hi) else hi}


def _scenario(scenario_file, alpha, budget_a, budget_b) -> dict:
    if scenario_file:
        return _read_json(scenario_file)
    return {"alpha": alpha, "budgetA": budget_a, "budgetB": budget_b,
            "allocB": "proportional"}


def scenario_options(f):
    f = click.option("--scenario", "scenario_file", type=click.Path(exists=True),
                     help="Scenario JSON (overrides --alpha/--budget-a/--budget-b).")(f)
    f = click.option("--budget-b", type=float, default=400.0, show_default=True,
                     help="Party B budget, spent in proportion to unit population.")(f)
    f = click.option("--budget-a", type=float, default=400.0, show_default=True)(f)
    f = click.option("--alpha", type=float, default=0.5, show_default=True,
                     help="Baseline turnout.")(f)
    return f


window_option = click.option("--window", default="-0.08,0.08", show_default=True,
                             help="EG window LO,HI.")
output_option = click.option("-o", "--output", type=click.Path(dir_okay=False),
                             help="Write to this file instead of stdout.")


@click.group()
@click.version_option(__version__)
@click.option("--remote", metavar="URL", help="Send the request to a running server.")
@click.pass_context
def main(ctx, remote):
    """Votemandering toolkit: districting plans, campaign budgets and the EG test."""
    ctx.ensure_object(dict)
    ctx.obj["remote"] = remote


@main.command()
@click.option("--rows", type=int, default=20, show_default=True)
@click.option("--cols", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pop-range", type=(int, int), default=(350, 400), show_default=True)
@click.option("--share-range", type=(float, float), default=(0.2, 0.8), show_default=True)
@click.option("--morans-i", type=float, default=None,
              help="Rearrange shares toward this spatial autocorrelation.")
@output_option
@click.pass_context
def generate(ctx, rows, cols, seed, pop_range, share_range, morans_i, output):
    """Synthetic grid state as a graph JSON document."""
    body = {"rows": rows, "cols": cols, "seed": seed, "pop_range": list(pop_range),
            "share_range": list(share_range), "morans_i": morans_i}
    _emit(_call(ctx, "generate", body), output)


@main.command()
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--plan", "plan_file", type=click.Path(exists=True),
              help="Seed plan; a compact random plan is built when omitted.")
@click.option("--districts", type=int, default=10, show_default=True)
@click.option("--steps", type=int, default=400, show_default=True)
@click.option("--interval", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pop-deviation", type=float, default=0.01, show_default=True)
@click.option("--cut-bound", type=int, default=None)
@click.option("--pool-size", type=int, default=None)
@output_option
@click.pass_context
def sample(ctx, graph_file, plan_file, districts, steps, interval, seed, pop_deviation,
           cut_bound, pool_size, output):
    """Run the ReCom chain and emit the deduplicated plan pool."""
    body = {"graph": _read_json(graph_file), "n_districts": districts, "steps": steps,
            "interval": interval, "seed": seed, "pop_deviation": pop_deviation,
            "cut_bound": cut_bound, "pool_size": pool_size}
    if plan_file:
        body["plan"] = _read_json(plan_file)
    _emit(_call(ctx, "sample", body), output)


@main.command()
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--plan", "plan_file", type=click.Path(exists=True), required=True)
@click.option("--scenario", "scenario_file", type=click.Path(exists=True),
              help="Also score the campaigned votes of this scenario.")
@click.option("--allocation", "alloc_file", type=click.Path(exists=True),
              help="JSON list of party A spend per unit (with --scenario).")
@click.option("--pop-deviation", type=float, default=0.01, show_default=True)
@click.option("--cut-bound", type=int, default=None)
@output_option
@click.pass_context
def score(ctx, graph_file, plan_file, scenario_file, alloc_file, pop_deviation, cut_bound,
          output):
    """Wins, efficiency gap, cut edges and Moran's I of a plan."""
    body = {"graph": _read_json(graph_file), "plan": _read_json(plan_file),
            "pop_deviation": pop_deviation, "cut_bound": cut_bound}
    if scenario_file:
        body["scenario"] = _read_json(scenario_file)
    if alloc_file:
        body["allocation"] = _read_json(alloc_file)
    _emit(_call(ctx, "score", body), output)


@main.command("fairness-step")
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--initial", "initial_file", type=click.Path(exists=True), required=True)
@click.option("--target", "target_file", type=click.Path(exists=True), required=True)
@scenario_options
@window_option
@output_option
@click.pass_context
def fairness_step(ctx, graph_file, initial_file, target_file, scenario_file, alpha, budget_a,
                  budget_b, window, output):
    """Best round-1 allocation for a fixed (initial, target) plan pair."""
    body = {"graph": _read_json(graph_file), "initial_plan": _read_json(initial_file),
            "target_plan": _read_json(target_file),
            "scenario": _scenario(scenario_file, alpha, budget_a, budget_b),
            "window": _window(window)}
    _emit(_call(ctx, "fairness-step", body), output)


@main.command()
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--plan", "plan_file", type=click.Path(exists=True), required=True)
@click.option("--pool", "pool_file", type=click.Path(exists=True), required=True,
              help="Output of `sample`, a JSON list of plans, or one plan per line.")
@scenario_options
@window_option
@click.option("--weight", type=int, default=1, show_default=True)
@click.option("--exhaustive", is_flag=True, help="Scan the whole pool (no early stop).")
@click.option("--table", is_flag=True, help="Print the four-stage table instead of JSON.")
@output_option
@click.pass_context
def votemander(ctx, graph_file, plan_file, pool_file, scenario_file, alpha, budget_a,
               budget_b, window, weight, exhaustive, table, output):
    """Pick the best target plan from a pool."""
    body = {"graph": _read_json(graph_file), "plan": _read_json(plan_file),
            "pool": _read_pool(pool_file),
            "scenario": _scenario(scenario_file, alpha, budget_a, budget_b),
            "window": _window(window), "weight": weight, "exhaustive": exhaustive}
    doc = _call(ctx, "votemander", body)
    for w in doc.get("warnings", []):
        click.echo(f"warning: {w}", err=True)
    if table:
        click.echo(doc["table"])
    else:
        _emit(doc, output)


@main.command()
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--plan", "plan_file", type=click.Path(exists=True), required=True)
@scenario_options
@window_option
@click.option("--submaps", type=int, default=20, show_default=True,
              help="ReCom submaps drawn per adjacent district pair.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pop-deviation", type=float, default=0.01, show_default=True)
@click.option("--table", is_flag=True, help="Print the four-stage table instead of JSON.")
@output_option
@click.pass_context
def local(ctx, graph_file, plan_file, scenario_file, alpha, budget_a, budget_b, window,
          submaps, seed, pop_deviation, table, output):
    """Local votemandering: strategy edges on district pairs plus a matching."""
    body = {"graph": _read_json(graph_file), "plan": _read_json(plan_file),
            "scenario": _scenario(scenario_file, alpha, budget_a, budget_b),
            "window": _window(window), "submap_pool_size": submaps, "seed": seed,
            "pop_deviation": pop_deviation}
    doc = _call(ctx, "local", body)
    if table:
        click.echo(doc["table"])
    else:
        _emit(doc, output)


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              help="CSV path (defaults to the config's output, else stdout).")
@click.option("--record-runtime", is_flag=True,
              help="Fill runtime_ms; the CSV is then no longer reproducible.")
@click.option("--workers", type=int, default=None, help="Processes for replicates.")
@click.pass_context
def sweep(ctx, config_file, output, record_runtime, workers):
    """Run a parameter sweep and write the results CSV."""
    config = _read_json(config_file)
    output = output or config.get("output")
    if record_runtime:
        config["record_runtime"] = True
    if workers is not None:
        config["workers"] = workers
    doc = _call(ctx, "sweep", {"config": config})
    for f in doc["failures"]:
        click.echo(f"failed: level={f['level']} replicate={f['replicate']}: {f['error']}",
                   err=True)
    if output:
        Path(output).write_text(doc["csv"])
        click.echo(f"{doc['rows']} rows -> {output}", err=True)
    else:
        click.echo(doc["csv"], nl=False)


@main.command()
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--plan", "plan_file", type=click.Path(exists=True))
@output_option
@click.pass_context
def ingest(ctx, graph_file, plan_file, output):
    """Validate a state graph (and plan) and emit the normalized documents."""
    body = {"graph": _read_json(graph_file)}
    if plan_file:
        body["plan"] = _read_json(plan_file)
    _emit(_call(ctx, "ingest", body), output)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP API."""
    import uvicorn

    uvicorn.run("votemander.service.app:app", host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
