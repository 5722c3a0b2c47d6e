"""Acceptance suite.

Each test checks one acceptance criterion at its stated size and tolerance,
prints a single PASS/FAIL line and then asserts. The sweep criteria (4 to 7)
take several minutes each on one core.
"""
import json
import time
import warnings
from collections import defaultdict

import networkx as nx
import numpy as np
import pytest
from click.testing import CliRunner

from conftest import tiny_instance
from votemander.cli import main
from votemander.experiments import SweepConfig, run_sweep
from votemander.fairness import (
    DEFAULT_WINDOW,
    Action,
    FairnessWindow,
    action_delta,
    fixed_point_turnout,
    reassignment_delta,
)
from votemander.fairness_step import (
    brute_force_step,
    solve_fairness_step,
    turnout_construction,
)
from votemander.heuristic import STAGE_LABELS, STAGES, evaluate_stages, stage_table, votemander
from votemander.instances import (
    InstanceError,
    generate_grid_instance,
    graph_to_json,
    ingest_state,
    plan_to_json,
)
from votemander.local import (
    LocalAssemblyError,
    StrategyEdge,
    enumerate_matchings,
    run_local,
    solve_matching,
)
from votemander.model import (
    CampaignScenario,
    PlanConstraints,
    apply_campaign,
    district_totals,
    original_votes,
)
from votemander.recom import ChainConfig, ChainError, recursive_tree_partition, sample_pool

pytestmark = pytest.mark.acceptance

MASTER_SEED = 1
REPLICATES = 20
TIE = 1e-9


def report(capsys, number, title, ok, detail, elapsed):
    with capsys.disabled():
        print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail} "
              f"({elapsed:.1f} s)")


# --- scratch oracles -------------------------------------------------------

def scratch_wasted(VA, VB):
    """B's wasted votes minus A's, summed over districts; ties go to A."""
    VA, VB = np.asarray(VA, float), np.asarray(VB, float)
    half = (VA + VB) / 2
    a_wins = VA >= VB - TIE
    wasted_A = np.where(a_wins, VA - half, VA)
    wasted_B = np.where(a_wins, VB, VB - half)
    return float((wasted_B - wasted_A).sum())


def scratch_eg(plan, votes):
    VA, VB = district_totals(plan, votes)
    return scratch_wasted(VA, VB) / float(VA.sum() + VB.sum())


def scratch_wins(plan, votes):
    VA, VB = district_totals(plan, votes)
    return int((VA >= VB - TIE).sum())


# --- 1 ---------------------------------------------------------------------

def _random_action(rng, VA, VB):
    """Apply one applicable action in place; return its predicted change."""
    win = VA >= VB - TIE
    W, L = np.flatnonzero(win), np.flatnonzero(~win)
    choice = rng.choice(list(Action))
    if choice is Action.WASTE_ON_WINNING and len(W):
        d, v = rng.choice(W), rng.uniform(0, 200)
        VA[d] += v
        return v * action_delta(choice)
    if choice is Action.WASTE_ON_LOSING and len(L):
        d = rng.choice(L)
        v = rng.uniform(0, 0.99) * (VB[d] - VA[d])
        VA[d] += v
        return v * action_delta(choice)
    if choice is Action.WIN_BY_CAMPAIGN and len(L):
        d = rng.choice(L)
        delta = action_delta(choice, VA=VA[d], VB=VB[d])
        VA[d] = VB[d]
        return delta
    if choice in (Action.SHIFT_WIN_TO_LOSS, Action.SHIFT_LOSS_TO_WIN) and len(W) and len(L):
        w, l = rng.choice(W), rng.choice(L)
        if choice is Action.SHIFT_WIN_TO_LOSS:
            room = min(VA[w] - VB[w], VB[l] - VA[l])
            src, dst = w, l
        else:
            room = min(VA[l], VB[l] - VA[l])
            src, dst = l, w
        x = rng.uniform(0, 0.99) * room
        VA[src] -= x
        VA[dst] += x
        return action_delta(choice, x=x)
    return None


def test_c1_incremental_wasted_votes(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, cases = 0.0, 0
    while cases < 1000:
        n = int(rng.integers(2, 7))
        VA = rng.integers(1, 1000, n).astype(float)
        VB = rng.integers(1, 1000, n).astype(float)
        before = scratch_wasted(VA, VB)
        predicted = 0.0
        for _ in range(int(rng.integers(1, 6))):
            step = _random_action(rng, VA, VB)
            if step is not None:
                predicted += step
        worst = max(worst, abs(scratch_wasted(VA, VB) - before - predicted))
        cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5
    report(capsys, 1, "incremental wasted-vote changes", ok,
           f"{cases} cases, max error {worst:.2e}", elapsed)
    assert ok


# --- 2 ---------------------------------------------------------------------

def test_c2_fairness_step_matches_oracle(capsys):
    t0 = time.perf_counter()
    mismatches, over_rounds, infeasible = [], 0, 0
    for seed in range(200):
        g, I, J, s, w = tiny_instance(np.random.default_rng(seed))
        sol = solve_fairness_step(I, J, g, s, w)
        exact, _ = brute_force_step(I, J, g, s, w)
        if sol.objective != exact.objective:
            mismatches.append((seed, sol.objective, exact.objective))
        over_rounds += sol.flip_rounds > J.n
        infeasible += not exact.feasible
    elapsed = time.perf_counter() - t0
    ok = not mismatches and over_rounds == 0 and elapsed < 120
    report(capsys, 2, "fairness step equals exact oracle", ok,
           f"200 instances ({infeasible} infeasible), {len(mismatches)} mismatches, "
           f"{over_rounds} over n flip rounds", elapsed)
    assert ok, mismatches


# --- 3 ---------------------------------------------------------------------

def test_c3_early_stop_is_exact(capsys):
    t0 = time.perf_counter()
    diffs, examined = [], []
    for i in range(50):
        rng = np.random.default_rng(3000 + i)
        g = generate_grid_instance(6, 6, seed=3000 + i)
        cons = PlanConstraints(0.1)
        plan = recursive_tree_partition(g, int(rng.integers(3, 5)), cons, rng)
        pool = sample_pool(g, plan, ChainConfig(300, 3000 + i, cons))[:50]
        s = CampaignScenario.proportional(g, float(rng.choice([0.3, 0.5, 0.7, 0.9])),
                                          float(rng.integers(0, 500)),
                                          float(rng.integers(0, 500)))
        c = float(rng.uniform(-0.1, 0.1))
        w = DEFAULT_WINDOW if rng.random() < 0.5 else FairnessWindow(c - 0.05, c + 0.05)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fast = votemander(g, plan, pool, s, w)
            full = votemander(g, plan, pool, s, w, exhaustive=True)
        if len(pool) < 50 or fast.objective != full.objective:
            diffs.append((i, len(pool), fast.objective, full.objective))
        examined.append(fast.pool_index_examined)
    elapsed = time.perf_counter() - t0
    ok = not diffs and elapsed < 300
    report(capsys, 3, "early stop equals exhaustive scan", ok,
           f"50 instances, {len(diffs)} disagreements, mean candidates examined "
           f"{np.mean(examined):.1f} of 50", elapsed)
    assert ok, diffs


# --- 4 to 7 ----------------------------------------------------------------

def _sweep(factor, levels, **kw):
    rows = run_sweep(SweepConfig(factor, levels, replicates=REPLICATES,
                                 master_seed=MASTER_SEED, **kw))
    failed = [r for r in rows if r.error is not None]
    by_level = defaultdict(list)
    for r in rows:
        if r.error is None:
            by_level[r.level].append(r)
    return rows, failed, by_level


def test_c4_budget_trend(capsys):
    t0 = time.perf_counter()
    levels = [100, 200, 300, 400, 500, 600, 700]
    rows, failed, by_level = _sweep("budgetA", levels)
    nonmonotone = 0
    for r in range(REPLICATES):
        objs = [x.objective for x in rows if x.replicate == r and x.error is None]
        nonmonotone += any(a > b for a, b in zip(objs, objs[1:]))
    means = [float(np.mean([x.bonus for x in by_level[lv]])) for lv in levels]
    inc = np.diff(means)
    ok = (not failed and nonmonotone == 0 and bool(np.all(inc >= 0))
          and means[-1] > means[0] and inc[-1] <= inc[0])
    report(capsys, 4, "objective rises with A's budget", ok,
           f"mean bonus {[round(m, 2) for m in means]}, first/last increment "
           f"{inc[0]:.2f}/{inc[-1]:.2f}, {nonmonotone} nonmonotone replicates, "
           f"{len(failed)} failed rows", time.perf_counter() - t0)
    assert ok


def test_c5_turnout_trend(capsys):
    t0 = time.perf_counter()
    _, failed, by_level = _sweep("alpha", [0.5, 0.9])
    med = {lv: float(np.median([x.bonus for x in by_level[lv]])) for lv in (0.5, 0.9)}
    ok = not failed and med[0.9] <= med[0.5]
    report(capsys, 5, "higher turnout lowers the bonus", ok,
           f"median bonus {med[0.5]} at 0.5, {med[0.9]} at 0.9, {len(failed)} failed rows",
           time.perf_counter() - t0)
    assert ok


def test_c6_compactness_trend(capsys):
    t0 = time.perf_counter()
    _, failed, by_level = _sweep("cut_bound", [360, 135])
    mean = {lv: float(np.mean([x.objective for x in by_level[lv]])) for lv in (360, 135)}
    ok = not failed and mean[135] <= mean[360]
    report(capsys, 6, "tighter compactness lowers the objective", ok,
           f"mean objective {mean[360]:.2f} at 360 cut edges, {mean[135]:.2f} at 135, "
           f"{len(failed)} failed rows", time.perf_counter() - t0)
    assert ok


def test_c7_morans_i_insensitivity(capsys):
    t0 = time.perf_counter()
    levels = [-0.2, -0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9]
    _, failed, by_level = _sweep("morans_i", levels)
    means = [float(np.mean([x.bonus for x in by_level[lv]])) for lv in levels]
    overall = float(np.mean([x.bonus for lv in levels for x in by_level[lv]]))
    spread = max(means) - min(means)
    ok = not failed and spread <= 0.25 * overall
    report(capsys, 7, "bonus insensitive to spatial clustering", ok,
           f"mean bonus per bin {[round(m, 2) for m in means]}, range {spread:.2f} vs "
           f"limit {0.25 * overall:.2f}, {len(failed)} failed rows",
           time.perf_counter() - t0)
    assert ok


# --- 8 ---------------------------------------------------------------------

def _turnout_instance(rng):
    """Rejection-sample an instance meeting the sufficient conditions."""
    while True:
        rows, cols = (int(x) for x in rng.integers(3, 7, 2))
        g = generate_grid_instance(rows, cols, seed=int(rng.integers(1 << 31)))
        n = int(rng.integers(2, 5))
        cons = PlanConstraints(0.25)
        try:
            I = recursive_tree_partition(g, n, cons, rng)
            J = recursive_tree_partition(g, n, cons, rng)
        except ChainError:
            continue
        raw = (g.vA, g.vB)
        if not DEFAULT_WINDOW.contains(scratch_eg(I, raw)):
            continue
        if scratch_wins(J, raw) <= scratch_wins(I, raw):
            continue
        if reassignment_delta(g, raw, I, J) < 0:
            continue
        alpha = fixed_point_turnout(g, I, J) * float(rng.uniform(0.05, 1.0))
        return g, I, J, alpha


def test_c8_turnout_construction(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    bad = []
    for i in range(100):
        g, I, J, alpha = _turnout_instance(rng)
        alloc = turnout_construction(g, I, J, alpha)
        s = CampaignScenario(alpha, float(alloc.sum()) + 1e-9, 0.0, np.zeros(g.n_units))
        v0, v1 = original_votes(g, alpha), apply_campaign(g, s, alloc)
        eg_vm = scratch_eg(J, v1)
        bonus = (scratch_wins(I, v1) + scratch_wins(J, v0) - 2 * scratch_wins(I, v0))
        if not DEFAULT_WINDOW.contains(eg_vm) or bonus < 1:
            bad.append((i, eg_vm, bonus))
    elapsed = time.perf_counter() - t0
    ok = not bad
    report(capsys, 8, "turnout construction is fair with a positive bonus", ok,
           f"100 instances, {len(bad)} violations", elapsed)
    assert ok, bad


# --- 9 ---------------------------------------------------------------------

def _district_like_graph(rng, n):
    G = nx.random_labeled_tree(n, seed=int(rng.integers(1 << 30))) if n > 1 else nx.empty_graph(1)
    for _ in range(int(rng.integers(0, n + 1))):
        a, b = rng.choice(n, 2, replace=False)
        G.add_edge(int(a), int(b))
    return G


def test_c9_local_votemandering(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    mismatches = 0
    for _ in range(500):
        G = _district_like_graph(rng, int(rng.integers(2, 13)))
        edges = []
        for a, b in G.edges():
            for st in rng.choice([1, 2, 3], int(rng.integers(1, 4)), replace=False):
                cost = 0.0 if st == 2 else float(rng.integers(0, 30))
                edges.append(StrategyEdge((a, b), int(st), cost, float(rng.normal(2, 6)), None))
        kw = dict(budgetA=float(rng.integers(0, 80)), fairness_slack=float(rng.uniform(-3, 15)))
        fast, slow = solve_matching(edges, **kw), enumerate_matchings(edges, **kw)
        same = fast.feasible == slow.feasible and fast.size == slow.size
        mismatches += not (same and abs(fast.budget_used - slow.budget_used) <= 1e-9)

    accepted, rejected, violations = 0, 0, []
    for i in range(8):
        g = generate_grid_instance(10, 10, seed=900 + i)
        cons = PlanConstraints(0.05)
        plan = recursive_tree_partition(g, 5, cons, np.random.default_rng(900 + i))
        s = CampaignScenario.proportional(g, 0.5, float(rng.integers(50, 300)),
                                          float(rng.integers(0, 200)))
        window = FairnessWindow(-0.15, 0.15) if i % 2 else FairnessWindow(0.0, 0.15)
        try:
            sol = run_local(g, plan, s, window, submap_pool_size=10, seed=i, constraints=cons)
        except LocalAssemblyError:
            rejected += 1
            continue
        accepted += 1
        changed = set(np.unique(plan.assign[sol.target_plan.assign != plan.assign]).tolist())
        eg = scratch_eg(sol.target_plan, apply_campaign(g, s, sol.allocation))
        if len(changed) > 2 * len(sol.selected) or not window.contains(eg):
            violations.append((i, len(changed), len(sol.selected), eg))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and not violations and accepted > 0
    report(capsys, 9, "local matching and assembly", ok,
           f"500 matching instances, {mismatches} mismatches; {accepted} accepted and "
           f"{rejected} rejected assemblies, {len(violations)} violations", elapsed)
    assert ok, violations


# --- 10 --------------------------------------------------------------------

def test_c10_synthetic_state_table(capsys, tmp_path):
    t0 = time.perf_counter()
    g = generate_grid_instance(11, 30, seed=33)
    cons = PlanConstraints(0.05)
    plan = recursive_tree_partition(g, 33, cons, np.random.default_rng(33))

    gp, pp = tmp_path / "graph.json", tmp_path / "plan.json"
    gp.write_text(json.dumps(graph_to_json(g)))
    pp.write_text(json.dumps(plan_to_json(plan)))
    g2, plan2 = ingest_state(gp, pp)
    ingest_ok = plan2 == plan and graph_to_json(g2) == graph_to_json(g)
    broken = graph_to_json(g)
    broken["units"][5]["vB"] += 1
    gp.write_text(json.dumps(broken))
    try:
        ingest_state(gp, pp)
        ingest_ok = False
    except InstanceError:
        pass

    pool = sample_pool(g, plan, ChainConfig(300, 33, cons))
    s = CampaignScenario.proportional(g, 0.5, 600, 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = votemander(g, plan, pool, s, FairnessWindow(0.0, 0.15))
    table = stage_table(sol.stages)
    lines = table.splitlines()
    header = lines[0].split()
    shape_ok = (header == ["Stage", "Number", "of", "Wins", "Efficiency", "Gap"]
                and len(lines) == 5)
    for name, line in zip(STAGES, lines[1:]):
        label = STAGE_LABELS[name]
        cells = line[len(label):].split()
        shape_ok &= (line.startswith(label) and len(cells) == 2 and cells[0].isdigit()
                     and 0 <= int(cells[0]) <= 33 and len(cells[1].split(".")[-1]) == 4)
    stages = evaluate_stages(g, plan, sol.target_plan, s, sol.allocation)
    shape_ok &= all(stages[k].wins == sol.stages[k].wins for k in STAGES)
    ok = ingest_ok and shape_ok
    report(capsys, 10, "synthetic 33-district four-stage table", ok,
           "real-state figures are not reproduced since that input data is not bundled; "
           f"ingestion checks {'ok' if ingest_ok else 'failed'}, table shape "
           f"{'ok' if shape_ok else 'wrong'}", time.perf_counter() - t0)
    with capsys.disabled():
        print(table)
    assert ok


# --- 11 --------------------------------------------------------------------

def _invoke(args):
    res = CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res.stdout


def test_c11_cli_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    d = tmp_path
    _invoke(["generate", "--rows", 6, "--cols", 6, "--seed", 8, "-o", d / "graph.json"])
    _invoke(["sample", "--graph", d / "graph.json", "--districts", 3, "--steps", 40,
             "--seed", 8, "--pop-deviation", 0.1, "-o", d / "pool.json"])
    pool = json.loads((d / "pool.json").read_text())
    (d / "plan.json").write_text(json.dumps(pool["seed_plan"]))
    (d / "target.json").write_text(json.dumps(pool["pool"][-1]))
    sweep_cfg = {"factor": "budgetB", "levels": [0, 100], "replicates": 2, "rows": 6,
                 "cols": 6, "n_districts": 3, "pool_size": 10, "pool_steps": 30,
                 "pop_deviation": 0.1, "master_seed": 8}
    (d / "sweep.json").write_text(json.dumps(sweep_cfg))
    G, P = ["--graph", d / "graph.json"], ["--plan", d / "plan.json"]
    commands = {
        "generate": ["generate", "--rows", 8, "--cols", 8, "--seed", 3, "--morans-i", 0.4],
        "sample": ["sample", *G, "--districts", 3, "--steps", 30, "--seed", 4,
                   "--pop-deviation", 0.1],
        "score": ["score", *G, *P, "--pop-deviation", 0.1],
        "fairness-step": ["fairness-step", *G, "--initial", d / "plan.json",
                          "--target", d / "target.json", "--budget-a", 80],
        "votemander": ["votemander", *G, *P, "--pool", d / "pool.json", "--budget-a", 80],
        "local": ["local", *G, *P, "--budget-a", 80, "--window=-inf,inf", "--seed", 2,
                  "--submaps", 4, "--pop-deviation", 0.1],
        "ingest": ["ingest", *G, *P],
        "sweep": ["sweep", "--config", d / "sweep.json"],
    }
    differing = []
    for name, args in commands.items():
        outs = []
        for k in range(2):
            out = d / f"{name}-{k}.out"
            _invoke([*args, "-o", out])
            outs.append(out.read_bytes())
        if outs[0] != outs[1] or not outs[0]:
            differing.append(name)
    ok = not differing
    report(capsys, 11, "CLI output is byte-identical on repeat", ok,
           f"{len(commands)} commands, differing: {differing or 'none'}",
           time.perf_counter() - t0)
    assert ok
