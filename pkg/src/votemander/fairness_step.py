"""Party A's best round-1 allocation that keeps a chosen target plan fair.

The state is split into pieces, one per nonempty intersection of a round-1
district I and a round-2 district J. Only piece totals matter to the
election and EG arithmetic, so the search runs over piece spends z_IJ.

For a fixed set F of round-2 districts that A's spending flips, the
problem is a small mixed-integer program: one binary per round-1 district
that A currently loses, linear caps, the budget, and the EG window with its
exact denominator (the window bound times total votes cast). The solver
starts from F = {} and flips one district at a time while that raises the
optimum, then a full MIP over all flip patterns certifies the answer.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .exact_lp import feasible_exact
from .fairness import (
    DEFAULT_WINDOW,
    FairnessWindow,
    NotApplicable,
    efficiency_gap,
    reassignment_delta,
    _status_term,
)
from .model import (
    TOL,
    CampaignScenario,
    DistrictPlan,
    UnitGraph,
    apply_campaign,
    check_structure,
    district_totals,
    elect,
)

# A district that must stay lost keeps A at least this far behind.
LOSS_GAP = 1e-6
TIGHT = 1e-6


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Piece:
    I: int
    J: int
    units: tuple[int, ...]
    turnout_cap: float
    capacity: float


@dataclass
class FairnessStepSolution:
    allocation: np.ndarray
    piece_spend: np.ndarray
    pieces: list[Piece]
    round1_wins: int | None
    votemandered_wins: int | None
    votemandered_eg: float | None
    flipped_districts: frozenset = frozenset()
    feasible: bool = False
    lp_solves: int = 0
    flip_rounds: int = 0
    certificate_improved: bool = False

    @property
    def objective(self) -> float:
        return self.round1_wins if self.feasible else -math.inf

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "round1_wins": self.round1_wins,
            "votemandered_wins": self.votemandered_wins,
            "votemandered_eg": self.votemandered_eg,
            "flipped_districts": sorted(int(j) for j in self.flipped_districts),
            "lp_solves": self.lp_solves,
            "flip_rounds": self.flip_rounds,
            "certificate_improved": self.certificate_improved,
            "allocation": [float(x) for x in self.allocation],
            "pieces": [
                {"I": p.I, "J": p.J, "units": list(p.units), "capacity": p.capacity,
                 "spend": float(s)}
                for p, s in zip(self.pieces, self.piece_spend)
            ],
        }


def _post_b_votes(graph: UnitGraph, scenario: CampaignScenario):
    return apply_campaign(graph, scenario, np.zeros(graph.n_units))


def piece_decomposition(planI: DistrictPlan, planJ: DistrictPlan, graph: UnitGraph,
                        scenario: CampaignScenario) -> list[Piece]:
    """Nonempty I∩J pieces, ordered by (I, J)."""
    check_structure(graph, planI)
    check_structure(graph, planJ)
    votes = _post_b_votes(graph, scenario)
    VA, VB = district_totals(planJ, votes)
    marginJ = VB - VA
    cap_unit = (1 - scenario.alpha) * graph.vA
    groups: dict[tuple[int, int], list[int]] = {}
    for k in range(graph.n_units):
        groups.setdefault((int(planI.assign[k]), int(planJ.assign[k])), []).append(k)
    pieces = []
    for (i, j), units in sorted(groups.items()):
        tcap = float(cap_unit[units].sum())
        cap = min(tcap, float(marginJ[j])) if marginJ[j] > TOL else tcap
        pieces.append(Piece(i, j, tuple(units), tcap, max(cap, 0.0)))
    return pieces


@dataclass
class _Step:
    """Precomputed data of one fairness-step instance."""

    pieces: list[Piece]
    tcap: np.ndarray
    pI: np.ndarray          # piece -> round-1 district
    pJ: np.ndarray          # piece -> round-2 district
    nI: int
    nJ: int
    mI: np.ndarray          # VB - VA per round-1 district, post-B, no A spend
    mJ: np.ndarray
    VAJ: np.ndarray
    VBJ: np.ndarray
    loseI: np.ndarray       # indices of round-1 districts A loses at baseline
    loseJ: np.ndarray
    winsI0: int
    T0: float
    budget: float
    window: FairnessWindow

    @property
    def P(self) -> int:
        return len(self.pieces)

    def ubJ(self, j: int) -> float:
        return max(float(self.mJ[j]) - LOSS_GAP, 0.0)

    def winning_J(self, flipped) -> np.ndarray:
        win = self.mJ <= TOL
        for j in flipped:
            win[j] = True
        return win

    def W0(self, flipped) -> float:
        win = self.winning_J(flipped)
        VA, VB = self.VAJ, self.VBJ
        return float(np.where(win, (3 * VB - VA) / 2, (VB - 3 * VA) / 2).sum())

    def rates(self, flipped) -> np.ndarray:
        win = self.winning_J(flipped)
        return np.where(win[self.pJ], 0.5, 1.5)

    def row_I(self, i: int) -> np.ndarray:
        return (self.pI == i).astype(float)

    def row_J(self, j: int) -> np.ndarray:
        return (self.pJ == j).astype(float)


def _prepare(planI, planJ, graph, scenario, window) -> _Step:
    pieces = piece_decomposition(planI, planJ, graph, scenario)
    votes = _post_b_votes(graph, scenario)
    VAI, VBI = district_totals(planI, votes)
    VAJ, VBJ = district_totals(planJ, votes)
    mI, mJ = VBI - VAI, VBJ - VAJ
    return _Step(
        pieces=pieces,
        tcap=np.array([p.turnout_cap for p in pieces]),
        pI=np.array([p.I for p in pieces]),
        pJ=np.array([p.J for p in pieces]),
        nI=planI.n, nJ=planJ.n,
        mI=mI, mJ=mJ, VAJ=VAJ, VBJ=VBJ,
        loseI=np.flatnonzero(mI > TOL),
        loseJ=np.flatnonzero(mJ > TOL),
        winsI0=int((mI <= TOL).sum()),
        T0=float(votes[0].sum() + votes[1].sum()),
        budget=float(scenario.budgetA),
        window=window,
    )


def _piece_rows(st: _Step, flipped, wins_needed=None):
    """Linear rows shared by every formulation, over the piece spends only.

    Returns (A, lo, hi) with one row per constraint. ``wins_needed`` lists
    round-1 districts forced to be won; if None they are left out.
    """
    A, lo, hi = [], [], []
    for j in st.loseJ:
        row = st.row_J(j)
        if j in flipped:
            A.append(row); lo.append(st.mJ[j]); hi.append(np.inf)
        else:
            A.append(row); lo.append(-np.inf); hi.append(st.ubJ(j))
    A.append(np.ones(st.P)); lo.append(-np.inf); hi.append(st.budget)
    c = st.rates(flipped)
    W0 = st.W0(flipped)
    if math.isfinite(st.window.hi):
        A.append(c + st.window.hi); lo.append(W0 - st.window.hi * st.T0); hi.append(np.inf)
    if math.isfinite(st.window.lo):
        A.append(c + st.window.lo); lo.append(-np.inf); hi.append(W0 - st.window.lo * st.T0)
    for i in wins_needed or ():
        A.append(st.row_I(i)); lo.append(st.mI[i]); hi.append(np.inf)
    return A, lo, hi


@dataclass
class _PatternResult:
    feasible: bool
    wins: int
    z: np.ndarray | None
    won: tuple[int, ...]
    z_vertex: np.ndarray | None = None  # raw solver point, used for tightness


def _no_good(nv: int, cols, chosen) -> tuple[np.ndarray, float]:
    """Cut excluding one 0/1 assignment of the given binary columns."""
    row = np.zeros(nv)
    for col, on in zip(cols, chosen):
        row[col] = 1.0 if on else -1.0
    return row, float(sum(chosen)) - 1.0


def _solve_pattern(st: _Step, flipped: frozenset, max_cuts: int = 64) -> _PatternResult:
    """Max round-1 wins for a fixed set of flipped round-2 districts.

    The MILP answer is re-checked with a tight LP on the chosen win set;
    solver tolerance can pass a win short by about 1e-6 times the margin,
    and such answers are cut off and the MILP re-solved.
    """
    P, L = st.P, len(st.loseI)
    A, lo, hi = _piece_rows(st, flipped)
    A = [np.concatenate([r, np.zeros(L)]) for r in A]
    for col, i in enumerate(st.loseI):
        row = np.concatenate([st.row_I(i), np.zeros(L)])
        row[P + col] = -st.mI[i]
        A.append(row); lo.append(0.0); hi.append(np.inf)
    cost = np.concatenate([np.zeros(P), -np.ones(L)])
    integrality = np.concatenate([np.zeros(P), np.ones(L)])
    bounds = Bounds(np.zeros(P + L), np.concatenate([st.tcap, np.ones(L)]))
    for _ in range(max_cuts):
        res = milp(cost, constraints=LinearConstraint(np.array(A), lo, hi),
                   integrality=integrality, bounds=bounds,
                   options={"mip_rel_gap": 0.0, "presolve": True})
        if res.x is None:
            break
        x = np.round(res.x[P:]).astype(int)
        won = tuple(int(i) for i, v in zip(st.loseI, x) if v)
        z = _fixed_lp(st, flipped, won)
        if z is not None:
            return _PatternResult(True, st.winsI0 + len(won), z, won, res.x[:P])
        row, rhs = _no_good(P + L, range(P, P + L), x)
        A.append(row); lo.append(-np.inf); hi.append(rhs)
    return _PatternResult(False, -1, None, ())


def _solve_full_mip(st: _Step, max_cuts: int = 64):
    """All flip patterns at once, flips linearized with product variables.

    Returns (flipped set, verified pattern result) or None.
    """
    P, LI, LJ = st.P, len(st.loseI), len(st.loseJ)
    nv = P + LI + 2 * LJ  # z, x, y, u
    xs, ys, us = P, P + LI, P + LI + LJ
    rows, lo, hi = [], [], []

    def add(row, l, h):
        rows.append(row); lo.append(l); hi.append(h)

    for col, i in enumerate(st.loseI):
        r = np.zeros(nv); r[:P] = st.row_I(i); r[xs + col] = -st.mI[i]
        add(r, 0.0, np.inf)
    upper_J = {}
    for col, j in enumerate(st.loseJ):
        rj = st.row_J(j)
        U = min(float(st.tcap[rj > 0].sum()), st.budget)
        upper_J[j] = U
        r = np.zeros(nv); r[:P] = rj; r[ys + col] = -st.mJ[j]
        add(r, 0.0, np.inf)                                    # flipped => Z >= m
        r = np.zeros(nv); r[:P] = rj; r[ys + col] = -max(U - st.ubJ(j), 0.0)
        add(r, -np.inf, st.ubJ(j))                             # kept => Z <= m - gap
        r = np.zeros(nv); r[us + col] = 1; r[ys + col] = -U
        add(r, -np.inf, 0.0)                                   # u <= U y
        r = np.zeros(nv); r[us + col] = 1; r[:P] = -rj
        add(r, -np.inf, 0.0)                                   # u <= Z
        r = np.zeros(nv); r[us + col] = 1; r[:P] = -rj; r[ys + col] = -U
        add(r, -U, np.inf)                                     # u >= Z - U(1-y)
    r = np.zeros(nv); r[:P] = 1
    add(r, -np.inf, st.budget)
    c0 = st.rates(())
    W0 = st.W0(())
    swing = st.VAJ + st.VBJ
    for bound, is_hi in ((st.window.hi, True), (st.window.lo, False)):
        if not math.isfinite(bound):
            continue
        r = np.zeros(nv)
        r[:P] = -(c0 + bound)
        for col, j in enumerate(st.loseJ):
            r[ys + col] = swing[j]
            r[us + col] = 1.0
        rhs = bound * st.T0 - W0
        if is_hi:
            add(r, -np.inf, rhs)
        else:
            add(r, rhs, np.inf)
    ub = np.concatenate([st.tcap, np.ones(LI + LJ),
                         [upper_J[j] for j in st.loseJ]])
    cost = np.zeros(nv); cost[xs:ys] = -1
    integrality = np.zeros(nv); integrality[xs:us] = 1
    binary_cols = list(range(xs, us))
    for _ in range(max_cuts):
        res = milp(cost, constraints=LinearConstraint(np.array(rows), lo, hi),
                   integrality=integrality, bounds=Bounds(np.zeros(nv), ub),
                   options={"mip_rel_gap": 0.0, "presolve": True})
        if res.x is None:
            return None
        bits = np.round(res.x[xs:us]).astype(int)
        won = tuple(int(i) for i, v in zip(st.loseI, bits[:LI]) if v)
        flipped = frozenset(int(j) for j, v in zip(st.loseJ, bits[LI:]) if v)
        z = _fixed_lp(st, flipped, won)
        if z is not None:
            return flipped, _PatternResult(True, st.winsI0 + len(won), z, won)
        row, rhs = _no_good(nv, binary_cols, bits)
        add(row, -np.inf, rhs)
    return None


def _fixed_lp(st: _Step, flipped, won, slack: float = 1e-3):
    """Spends realizing exactly (won, flipped), pushed away from the edges.

    Maximizes a common slack t <= ``slack`` on every status and window row;
    returns None when even t = 0 is infeasible.
    """
    A, lo, hi = _piece_rows(st, flipped, won)
    A_ub, b_ub = [], []
    for row, l, h in zip(A, lo, hi):
        if math.isfinite(h):
            A_ub.append(np.append(row, 1.0)); b_ub.append(h)
        if math.isfinite(l):
            A_ub.append(np.append(-row, 1.0)); b_ub.append(-l)
    bounds = [(0, c) for c in st.tcap] + [(0, slack)]
    cost = np.zeros(st.P + 1); cost[-1] = -1
    res = linprog(cost, A_ub=np.array(A_ub), b_ub=b_ub, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    return res.x[:-1]


def expand_to_units(graph: UnitGraph, pieces: list[Piece], spend, alpha: float) -> np.ndarray:
    """Fill each piece's units in ascending id up to their turnout caps."""
    alloc = np.zeros(graph.n_units)
    cap = (1 - alpha) * graph.vA
    for piece, amount in zip(pieces, spend):
        left = float(amount)
        for k in piece.units:  # already ascending
            if left <= 0:
                break
            take = min(cap[k], left)
            alloc[k] = take
            left -= take
    return alloc


def _realize(graph, planI, planJ, scenario, window, st: _Step, z, lp_solves, rounds,
             improved):
    z = np.clip(z, 0.0, st.tcap)
    if z.sum() > st.budget:
        z = z * (st.budget / z.sum())
    alloc = expand_to_units(graph, st.pieces, z, scenario.alpha)
    votes = apply_campaign(graph, scenario, alloc)
    wins = elect(graph, planI, votes).wins_A
    outJ = elect(graph, planJ, votes)
    eg = efficiency_gap(outJ).eg
    flipped = frozenset(int(j) for j in st.loseJ if outJ.a_wins[j])
    return FairnessStepSolution(
        allocation=alloc, piece_spend=z, pieces=st.pieces, round1_wins=wins,
        votemandered_wins=outJ.wins_A, votemandered_eg=eg, flipped_districts=flipped,
        feasible=window.contains(eg), lp_solves=lp_solves, flip_rounds=rounds,
        certificate_improved=improved,
    )


def _infeasible(graph, st: _Step, lp_solves: int, rounds: int = 0) -> FairnessStepSolution:
    return FairnessStepSolution(
        allocation=np.zeros(graph.n_units), piece_spend=np.zeros(st.P), pieces=st.pieces,
        round1_wins=None, votemandered_wins=None, votemandered_eg=None,
        feasible=False, lp_solves=lp_solves, flip_rounds=rounds,
    )


def _relaxed_point(st: _Step, flipped) -> np.ndarray | None:
    """Piece spends at an optimal vertex of the relaxation (wins in [0, 1])."""
    P, L = st.P, len(st.loseI)
    A, lo, hi = _piece_rows(st, flipped)
    A = [np.concatenate([r, np.zeros(L)]) for r in A]
    for col, i in enumerate(st.loseI):
        row = np.concatenate([st.row_I(i), np.zeros(L)])
        row[P + col] = -st.mI[i]
        A.append(row); lo.append(0.0); hi.append(np.inf)
    A_ub, b_ub = [], []
    for row, l, h in zip(A, lo, hi):
        if math.isfinite(h):
            A_ub.append(row); b_ub.append(h)
        if math.isfinite(l):
            A_ub.append(-row); b_ub.append(-l)
    cost = np.concatenate([np.zeros(P), -np.ones(L)])
    bounds = [(0, c) for c in st.tcap] + [(0, 1)] * L
    res = linprog(cost, A_ub=np.array(A_ub), b_ub=b_ub, bounds=bounds, method="highs-ds")
    return res.x[:P] if res.status == 0 else None


def _flip_candidates(st: _Step, flipped, cur: _PatternResult) -> list[int]:
    """Round-2 districts whose status flip may raise the optimum."""
    rest = [int(j) for j in st.loseJ if j not in flipped]
    if not cur.feasible:
        return rest
    z = _relaxed_point(st, flipped)
    if z is None:
        return rest
    Z = np.bincount(st.pJ, weights=z, minlength=st.nJ)
    tight = [j for j in rest if Z[j] >= st.ubJ(j) - TIGHT]
    if tight:
        return tight
    if math.isfinite(st.window.lo):
        # spending held back by the lower window edge; a flip raises W
        W = st.W0(flipped) - float(st.rates(flipped) @ z)
        if W - st.window.lo * (st.T0 + z.sum()) <= TIGHT * max(1.0, st.T0):
            return rest
    return []


def _window_violation(st: _Step, flipped) -> float:
    """Smallest breach of the window rows (in wasted votes) over all spends.

    Status and budget rows stay hard; returns inf when they alone conflict.
    """
    A, lo, hi = _piece_rows(st, flipped)
    n_status = len(st.loseJ) + 1  # J rows then the budget row
    A_ub, b_ub = [], []
    for r, (row, l, h) in enumerate(zip(A, lo, hi)):
        relax = 0.0 if r < n_status else 1.0
        if math.isfinite(h):
            A_ub.append(np.append(row, -relax)); b_ub.append(h)
        if math.isfinite(l):
            A_ub.append(np.append(-row, -relax)); b_ub.append(-l)
    cost = np.zeros(st.P + 1); cost[-1] = 1
    bounds = [(0, c) for c in st.tcap] + [(0, None)]
    res = linprog(cost, A_ub=np.array(A_ub), b_ub=b_ub, bounds=bounds, method="highs")
    return float(res.fun) if res.status == 0 else math.inf


def _flip_loop(st: _Step) -> tuple[frozenset, _PatternResult, int, int]:
    """Flip tight round-2 districts while the optimum keeps rising.

    Each round tries the candidates in order of fairness cost (3VB + VA)/2
    and keeps the first flip that improves: more wins once feasible, or a
    smaller window breach while still infeasible. A round without
    improvement ends the loop, so there are at most n rounds.
    Returns (flipped, result, solves, rounds).
    """
    flipped: frozenset = frozenset()
    cur = _solve_pattern(st, flipped)
    solves, rounds = 1, 0
    breach = math.inf if cur.feasible else _window_violation(st, flipped)
    fairness_cost = (3 * st.VBJ + st.VAJ) / 2
    while True:
        cands = sorted(_flip_candidates(st, flipped, cur),
                       key=lambda d: (fairness_cost[d], d))
        if not cands:
            break
        rounds += 1
        for j in cands:
            trial = _solve_pattern(st, flipped | {j})
            solves += 1
            if trial.feasible and (not cur.feasible or trial.wins > cur.wins):
                flipped, cur = flipped | {j}, trial
                break
            if not cur.feasible:
                v = _window_violation(st, flipped | {j})
                if v < breach - TIGHT:
                    flipped, breach = flipped | {j}, v
                    break
        else:
            break
    return flipped, cur, solves, rounds


def solve_fairness_step(planI: DistrictPlan, planJ: DistrictPlan, graph: UnitGraph,
                        scenario: CampaignScenario,
                        window: FairnessWindow = DEFAULT_WINDOW) -> FairnessStepSolution:
    """Maximize round-1 wins under ``planI`` keeping ``planJ`` inside the window."""
    st = _prepare(planI, planJ, graph, scenario, window)
    flipped, cur, solves, rounds = _flip_loop(st)
    improved = False
    cert = _solve_full_mip(st)
    if cert is not None and (not cur.feasible or cert[1].wins > cur.wins):
        (flipped, cur), improved = cert, True
    if not cur.feasible:
        return _infeasible(graph, st, solves, rounds)
    return _realize(graph, planI, planJ, scenario, window, st, cur.z, solves, rounds, improved)


def max_round1_wins(graph: UnitGraph, planI: DistrictPlan,
                    scenario: CampaignScenario) -> tuple[int, np.ndarray]:
    """Baseline wins plus the cheapest losing districts A can afford to flip."""
    votes = _post_b_votes(graph, scenario)
    VA, VB = district_totals(planI, votes)
    margin = VB - VA
    cap = (1 - scenario.alpha) * graph.vA
    capI = np.bincount(planI.assign, weights=cap, minlength=planI.n)
    wins = int((margin <= TOL).sum())
    alloc = np.zeros(graph.n_units)
    left = float(scenario.budgetA)
    for d in sorted(np.flatnonzero(margin > TOL), key=lambda d: (margin[d], d)):
        m = float(margin[d])
        if m > capI[d] + TOL:
            continue
        if m > left + TOL:
            break
        need = m
        for k in np.flatnonzero(planI.assign == d):
            if need <= 0:
                break
            take = min(cap[k], need)
            alloc[k] += take
            need -= take
        left -= m
        wins += 1
    return wins, alloc


# --- exact oracle ------------------------------------------------------

def _fractions(st: _Step, flipped, won):
    A, lo, hi = _piece_rows(st, flipped, won)
    A_ub, b_ub = [], []
    for row, l, h in zip(A, lo, hi):
        fr = [Fraction(float(v)) for v in row]
        if math.isfinite(h):
            A_ub.append(fr); b_ub.append(Fraction(float(h)))
        if math.isfinite(l):
            A_ub.append([-v for v in fr]); b_ub.append(-Fraction(float(l)))
    return A_ub, b_ub


def _grid_best(graph, planI, planJ, scenario, window, st: _Step, resolution: int,
               max_points: int = 20000):
    levels = []
    for p, piece in enumerate(st.pieces):
        lv = set(np.linspace(0.0, st.tcap[p], resolution).tolist())
        for m in (st.mI[piece.I], st.mJ[piece.J]):
            if 0 < m <= st.tcap[p]:
                lv.add(float(m))
        levels.append(sorted(lv))
    if math.prod(len(lv) for lv in levels) > max_points:
        return None
    Z = np.array(list(itertools.product(*levels))).reshape(-1, st.P)
    Z = Z[Z.sum(axis=1) <= st.budget + 1e-9]
    if len(Z) == 0:
        return None
    votes = _post_b_votes(graph, scenario)
    VAI, VBI = district_totals(planI, votes)
    onehotI = np.array([[st.pI[p] == i for i in range(st.nI)] for p in range(st.P)], float)
    onehotJ = np.array([[st.pJ[p] == j for j in range(st.nJ)] for p in range(st.P)], float)
    winsI = ((VAI + Z @ onehotI) >= VBI - TOL).sum(axis=1)
    VA = st.VAJ + Z @ onehotJ
    VB = np.broadcast_to(st.VBJ, VA.shape)
    W = np.where(VA >= VB - TOL, (3 * VB - VA) / 2, (VB - 3 * VA) / 2).sum(axis=1)
    eg = W / (st.T0 + Z.sum(axis=1))
    ok = (eg >= window.lo - 1e-9) & (eg <= window.hi + 1e-9)
    return int(winsI[ok].max()) if ok.any() else None


def brute_force_step(planI: DistrictPlan, planJ: DistrictPlan, graph: UnitGraph,
                     scenario: CampaignScenario, window: FairnessWindow = DEFAULT_WINDOW,
                     grid_resolution: int = 4):
    """Exhaustive reference answer for tiny instances.

    Every (flip set, win set) pair is checked with an exact rational LP, so
    the answer is the true optimum. A coarse grid scan over piece spends is
    also run as an independent lower bound. Returns (solution, grid_wins).
    """
    if graph.n_units > 12 or planI.n > 3 or planJ.n > 3:
        raise InstanceTooLarge("brute force is limited to 12 units and 3 districts")
    st = _prepare(planI, planJ, graph, scenario, window)
    best = None
    for r in range(len(st.loseJ) + 1):
        for flipped in itertools.combinations(st.loseJ.tolist(), r):
            for size in range(len(st.loseI), -1, -1):
                if best is not None and st.winsI0 + size <= best[0]:
                    break
                hit = None
                for won in itertools.combinations(st.loseI.tolist(), size):
                    A_ub, b_ub = _fractions(st, set(flipped), won)
                    upper = [Fraction(float(c)) for c in st.tcap]
                    x = feasible_exact(A_ub, b_ub, upper=upper, n=st.P)
                    if x is not None:
                        hit = (st.winsI0 + size, np.array([float(v) for v in x]))
                        break
                if hit is not None:
                    best = hit
                    break
    grid = _grid_best(graph, planI, planJ, scenario, window, st, grid_resolution)
    if best is None:
        return _infeasible(graph, st, 0), grid
    sol = _realize(graph, planI, planJ, scenario, window, st, best[1], 0, 0, False)
    if not sol.feasible or sol.round1_wins < best[0]:
        raise ArithmeticError("exact witness failed direct evaluation")
    sol.round1_wins = best[0]
    return sol, grid


# --- constructive turnout check ------------------------------------------

def turnout_construction(graph: UnitGraph, planI: DistrictPlan, planJ: DistrictPlan,
                         alpha: float) -> np.ndarray:
    """A's spend that cancels the wasted-vote shift of moving from I to J.

    Twice the shift is spent in J's winning districts (each vote there
    lowers B-minus-A waste by one half), filling units in ascending id.
    """
    votes = (alpha * graph.vA, alpha * graph.vB)
    delta = reassignment_delta(graph, votes, planI, planJ)
    alloc = np.zeros(graph.n_units)
    if delta <= 0:
        return alloc
    _, win = _status_term(planJ, votes)
    cap = (1 - alpha) * graph.vA
    need = 2 * delta
    for k in np.flatnonzero(win[planJ.assign]):
        take = min(cap[k], need)
        alloc[k] = take
        need -= take
        if need <= 1e-12:
            break
    if need > 1e-9 * max(1.0, 2 * delta):
        raise NotApplicable(f"winning-district capacity short by {need:.6g}")
    return alloc
