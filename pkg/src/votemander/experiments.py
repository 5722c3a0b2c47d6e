"""Seeded parameter sweeps over synthetic grid states, written to CSV."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
import io
import json
import logging
import time
import warnings
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fairness import FairnessWindow
from .heuristic import votemander
from .instances import generate_clustered_instance, generate_grid_instance
from .model import CampaignScenario, PlanConstraints, UnitGraph
from .recom import ChainConfig, PoolEntry, compact_seed_plan, sample_pool

log = logging.getLogger(__name__)

FACTORS = ("budgetA", "budgetB", "alpha", "cut_bound", "morans_i")
CSV_FIELDS = ("factor", "level", "replicate", "seed", "wins_initial", "wins_campaigned",
              "wins_votemandered", "wins_target", "eg_initial", "eg_votemandered", "bonus",
              "runtime_ms")


@dataclass
class SweepConfig:
    factor: str
    levels: list
    replicates: int = 20
    rows: int = 20
    cols: int = 20
    n_districts: int = 10
    alpha: float = 0.5
    budgetA: float = 400.0
    budgetB: float = 400.0
    window: tuple[float, float] = (-0.08, 0.08)
    pop_range: tuple[int, int] = (350, 400)
    share_range: tuple[float, float] = (0.2, 0.8)
    pop_deviation: float = 0.01
    cut_bound: int | None = None
    pool_size: int = 200
    pool_steps: int | None = None
    pool_interval: int = 1
    weight: int = 1
    master_seed: int = 0
    output: str | None = None
    record_runtime: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.factor not in FACTORS:
            raise ValueError(f"factor must be one of {FACTORS}")
        if not self.levels:
            raise ValueError("levels must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.levels = list(self.levels)
        self.window = tuple(float(x) for x in self.window)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown sweep keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SweepConfig":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepRow:
    factor: str
    level: float
    replicate: int
    seed: int
    wins_initial: int | None = None
    wins_campaigned: int | None = None
    wins_votemandered: int | None = None
    wins_target: int | None = None
    eg_initial: float | None = None
    eg_votemandered: float | None = None
    bonus: int | None = None
    runtime_ms: float | None = None
    objective: int | None = None
    error: str | None = None

    def csv_values(self) -> list[str]:
        out = []
        for name in CSV_FIELDS:
            v = getattr(self, name)
            out.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
        return out


def replicate_seed(master_seed: int, replicate: int, *extra: int) -> int:
    ss = np.random.SeedSequence([master_seed, replicate, *extra])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def level_key(level) -> int:
    """Stable integer for a level value, so seeds do not depend on list order."""
    return zlib.crc32(repr(float(level)).encode())


def _pool(graph: UnitGraph, cfg: SweepConfig, cut_bound, seed: int) -> list[PoolEntry]:
    cons = PlanConstraints(cfg.pop_deviation, cut_bound)
    rng = np.random.default_rng([seed, 7])
    start = compact_seed_plan(graph, cfg.n_districts, cons, rng)
    steps = cfg.pool_steps or 2 * cfg.pool_size * cfg.pool_interval
    pool = sample_pool(graph, start, ChainConfig(steps, seed, cons, cfg.pool_interval))
    return pool[: cfg.pool_size]


def _graph(cfg: SweepConfig, seed: int, morans_target=None) -> UnitGraph:
    if morans_target is None:
        return generate_grid_instance(cfg.rows, cfg.cols, cfg.pop_range, cfg.share_range, seed)
    return generate_clustered_instance(cfg.rows, cfg.cols, float(morans_target), seed,
                                       cfg.pop_range, cfg.share_range)


def _scenario(graph, cfg: SweepConfig, factor=None, level=None) -> CampaignScenario:
    params = {"alpha": cfg.alpha, "budgetA": cfg.budgetA, "budgetB": cfg.budgetB}
    if factor in params:
        params[factor] = float(level)
    return CampaignScenario.proportional(graph, params["alpha"], params["budgetA"],
                                         params["budgetB"])


def _run_one(row: SweepRow, graph, initial, pool, scenario, cfg: SweepConfig) -> SweepRow:
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        sol = votemander(graph, initial, pool, scenario, FairnessWindow(*cfg.window),
                         cfg.weight)
    st = sol.stages
    row.wins_initial = st["initial"].wins
    row.wins_campaigned = st["campaigned"].wins
    row.wins_votemandered = st["votemandered"].wins
    row.wins_target = st["target"].wins
    row.eg_initial = float(st["initial"].eg)
    row.eg_votemandered = float(st["votemandered"].eg)
    row.bonus = sol.bonus
    row.objective = sol.objective
    if cfg.record_runtime:
        row.runtime_ms = round((time.perf_counter() - t0) * 1000.0, 3)
    return row


def _replicate(cfg: SweepConfig, r: int) -> list[SweepRow]:
    seed = replicate_seed(cfg.master_seed, r)
    rows = [SweepRow(cfg.factor, lv, r, seed) for lv in cfg.levels]
    pick = np.random.default_rng([seed, 3])
    if cfg.factor == "morans_i":
        for row in rows:
            def work(row=row):
                graph = _graph(cfg, seed, row.level)
                pool = _pool(graph, cfg, cfg.cut_bound,
                             replicate_seed(cfg.master_seed, r, level_key(row.level)))
                pick = np.random.default_rng([seed, 3, level_key(row.level)])
                initial = pool[int(pick.integers(len(pool)))].plan
                return _run_one(row, graph, initial, pool, _scenario(graph, cfg), cfg)
            _guard(row, work)
        return rows
    try:
        graph = _graph(cfg, seed)
        if cfg.factor == "cut_bound":
            pools = [_pool(graph, cfg, int(lv),
                           replicate_seed(cfg.master_seed, r, level_key(lv)))
                     for lv in cfg.levels]
            tight = int(np.argmin([int(lv) for lv in cfg.levels]))
            initial = pools[tight][int(pick.integers(len(pools[tight])))].plan
        else:  # one pool shared by every level
            shared = _pool(graph, cfg, cfg.cut_bound, seed)
            pools = [shared] * len(rows)
            initial = shared[int(pick.integers(len(shared)))].plan
    except Exception as exc:  # no instance or pool: every level of the replicate fails
        for row in rows:
            _fail(row, exc)
        return rows
    for row, pool in zip(rows, pools):
        _guard(row, lambda row=row, pool=pool: _run_one(
            row, graph, initial, pool, _scenario(graph, cfg, cfg.factor, row.level), cfg))
    return rows


def _fail(row: SweepRow, exc: Exception) -> None:
    row.error = f"{type(exc).__name__}: {exc}"
    log.warning("sweep %s=%s replicate %d failed: %s", row.factor, row.level,
                row.replicate, row.error)


def _guard(row: SweepRow, fn) -> None:
    try:
        fn()
    except Exception as exc:  # recorded, the sweep carries on
        _fail(row, exc)


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """All levels x replicates; writes ``cfg.output`` as CSV when set.

    Replicates depend only on (master seed, replicate index), so the result
    is the same for any ``workers`` count; rows come back in replicate order.
    """
    rows: list[SweepRow] = []
    if cfg.workers > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            for chunk in ex.map(_replicate, [cfg] * cfg.replicates, range(cfg.replicates)):
                rows.extend(chunk)
    else:
        for r in range(cfg.replicates):
            rows.extend(_replicate(cfg, r))
    if cfg.output:
        write_csv(rows, cfg.output)
    return rows


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        w.writerow(row.csv_values())
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path) -> None:
    Path(path).write_text(rows_to_csv(rows))
