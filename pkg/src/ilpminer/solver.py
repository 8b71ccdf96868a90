"""Exact solvers for :class:`~ilpminer.ilpmodel.IlpModel`.

``solve`` dispatches to HiGHS' MIP solver (default), to the best-bound
branch-and-bound defined here, or to an external LP-file solver.
``brute_force_solve`` enumerates arc sets directly from the measures and never
looks at the model rows, so it can check any of them.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .ilpmodel import (
    FEAS_TOL,
    INT_TOL,
    DiscoveryConfig,
    IlpModel,
    Solution,
    SolveStats,
    Status,
    arcs_of,
    assignment_from_arcs,
    export_lp,
)
from .measures import DependencyMeasures

log = logging.getLogger(__name__)

EXTERNAL_SOLVER_ENV = "ILPMINER_EXTERNAL_SOLVER"
OBJ_TOL = 1e-9
# HiGHS works with absolute tolerances around 1e-7..1e-6 (MIP gap, dual
# feasibility); scaling the objective puts them below the 1e-7 arc tie-break
HIGHS_OBJ_SCALE = 1e4


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveLimits:
    time_limit: float = math.inf
    node_limit: int = 1_000_000
    gap_tolerance: float = 0.0

    def __post_init__(self):
        if self.time_limit < 0 or self.node_limit < 0 or self.gap_tolerance < 0:
            raise ValueError("solve limits must be non-negative")


# ---------------------------------------------------------------------------
# LP relaxation

@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "error"
    x: np.ndarray | None
    bound: float  # maximization objective, -inf when infeasible
    iterations: int = 0


def _split_rows(A: sp.csr_matrix, lo: np.ndarray, hi: np.ndarray):
    eq = np.isfinite(lo) & np.isfinite(hi) & (lo == hi)
    up = np.isfinite(hi) & ~eq
    dn = np.isfinite(lo) & ~eq
    A_ub = sp.vstack([A[up], -A[dn]]).tocsr()
    b_ub = np.concatenate([hi[up], -lo[dn]])
    return A_ub, b_ub, A[eq].tocsr(), lo[eq]


class LpRelaxation:
    """Row data prepared once; each call only changes variable bounds."""

    def __init__(self, c: np.ndarray, A: sp.csr_matrix, row_lo: np.ndarray, row_hi: np.ndarray):
        self.c = np.asarray(c, dtype=float)
        self.A_ub, self.b_ub, self.A_eq, self.b_eq = _split_rows(A, row_lo, row_hi)
        if self.A_ub.shape[0] == 0:
            self.A_ub = self.b_ub = None
        if self.A_eq.shape[0] == 0:
            self.A_eq = self.b_eq = None

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> LpResult:
        if np.any(lb > ub + FEAS_TOL):
            return LpResult("infeasible", None, -math.inf)
        bounds = np.column_stack([lb, ub])
        res = None
        for method in ("highs-ds", "highs-ipm"):
            res = linprog(-HIGHS_OBJ_SCALE * self.c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                          bounds=bounds, method=method)
            if res.status in (0, 2, 3):
                break
            log.debug("LP method %s failed with status %s, retrying", method, res.status)
        iters = int(getattr(res, "nit", 0) or 0)
        if res.status == 0:
            return LpResult("optimal", res.x, float(self.c @ res.x), iters)
        if res.status == 2:
            return LpResult("infeasible", None, -math.inf, iters)
        if res.status == 3:
            return LpResult("unbounded", None, math.inf, iters)
        return LpResult("error", None, math.inf, iters)


def lp_relax_solve(model: IlpModel, lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> LpResult:
    """Solve the LP relaxation of ``model`` (integrality dropped)."""
    a = model.arrays
    relax = LpRelaxation(a.c, a.A, a.row_lo, a.row_hi)
    return relax.solve(a.lb if lb is None else lb, a.ub if ub is None else ub)


# ---------------------------------------------------------------------------
# branch and bound

@dataclass(order=True)
class _Node:
    key: tuple
    lb: np.ndarray = None
    ub: np.ndarray = None
    bound: float = math.inf
    depth: int = 0


Heuristic = Callable[[np.ndarray], "np.ndarray | None"]


def _most_fractional(x: np.ndarray, integrality: np.ndarray, priority: np.ndarray | None = None) -> int | None:
    """Most fractional integer variable, lowest index on ties.

    With ``priority`` given, only the lowest priority class that still has a
    fractional variable is considered.
    """
    frac = np.abs(x - np.floor(x + 0.5))
    frac[~integrality] = 0.0
    cand = frac > INT_TOL
    if not cand.any():
        return None
    if priority is not None:
        top = priority[cand].min()
        frac[priority != top] = 0.0
    return int(np.argmax(frac))  # argmax returns the first maximum


def arc_rounding_heuristic(model: IlpModel) -> Heuristic:
    """Round the arc variables of an LP point and complete them if possible."""

    def run(x: np.ndarray):
        arcs = arcs_of(model, x)
        return assignment_from_arcs(model, arcs)

    return run


def branch_priority(model: IlpModel) -> np.ndarray:
    """Arc-level variables (E, R and penalties) before tree variables (x, y, u, q)."""
    return np.array([1 if v.kind in ("x", "y", "u", "q") else 0 for v in model.variables])


def _bnb(model: IlpModel, limits: SolveLimits, heuristic: Heuristic | None) -> Solution:
    a = model.arrays
    priority = branch_priority(model)
    relax = LpRelaxation(a.c, a.A, a.row_lo, a.row_hi)
    stats = SolveStats()
    t0 = time.perf_counter()
    integ = a.integrality

    best_x: np.ndarray | None = None
    best_val = -math.inf

    def offer(x: np.ndarray) -> None:
        nonlocal best_x, best_val
        xr = x.copy()
        xr[integ] = np.round(xr[integ])
        if model.violations(xr):
            return
        val = float(a.c @ xr)
        if val > best_val + OBJ_TOL:
            best_x, best_val = xr, val

    def prunable(bound: float) -> bool:
        if best_x is None:
            return False
        slack = max(OBJ_TOL, limits.gap_tolerance * abs(best_val))
        return bound <= best_val + slack

    counter = itertools.count()
    heap: list[_Node] = []
    root_lb, root_ub = a.lb.copy(), a.ub.copy()
    heapq.heappush(heap, _Node((-math.inf, next(counter)), root_lb, root_ub, math.inf, 0))
    global_bound = math.inf
    hit_limit = False

    while heap:
        if stats.nodes >= limits.node_limit or time.perf_counter() - t0 > limits.time_limit:
            hit_limit = True
            break
        node = heapq.heappop(heap)
        if prunable(node.bound):
            continue
        stats.nodes += 1
        lp = relax.solve(node.lb, node.ub)
        stats.lp_solves += 1
        stats.lp_iterations += lp.iterations
        if lp.status == "infeasible":
            continue
        if lp.status != "optimal":
            raise SolverError(f"LP relaxation failed ({lp.status}) at node {stats.nodes}")
        if prunable(lp.bound):
            continue
        x = lp.x
        k = _most_fractional(x, integ, priority)
        if k is None:
            offer(x)
            continue
        if heuristic is not None:
            cand = heuristic(x)
            if cand is not None:
                offer(cand)
                if prunable(lp.bound):
                    continue
        # children: 1-branch (round up) first, then 0-branch (round down)
        up_lb = node.lb.copy()
        up_lb[k] = math.ceil(x[k])
        dn_ub = node.ub.copy()
        dn_ub[k] = math.floor(x[k])
        key_bound = -lp.bound
        heapq.heappush(heap, _Node((key_bound, next(counter)), up_lb, node.ub, lp.bound, node.depth + 1))
        heapq.heappush(heap, _Node((key_bound, next(counter)), node.lb, dn_ub, lp.bound, node.depth + 1))

    stats.wall_time = time.perf_counter() - t0
    if hit_limit:
        open_bound = max([n.bound for n in heap], default=-math.inf)
        global_bound = max(open_bound, best_val)
        return Solution(Status.LIMIT_REACHED, best_x, best_val if best_x is not None else -math.inf, stats, global_bound)
    if best_x is None:
        return Solution(Status.INFEASIBLE, None, -math.inf, stats, -math.inf)
    return Solution(Status.OPTIMAL, best_x, best_val, stats, best_val)


def _highs(model: IlpModel, limits: SolveLimits) -> Solution:
    a = model.arrays
    t0 = time.perf_counter()
    options = {"mip_rel_gap": limits.gap_tolerance, "presolve": True}
    if not math.isinf(limits.time_limit):
        options["time_limit"] = limits.time_limit
    if limits.node_limit < 1_000_000:
        options["node_limit"] = limits.node_limit
    res = milp(-HIGHS_OBJ_SCALE * a.c,
               constraints=LinearConstraint(a.A, a.row_lo, a.row_hi),
               integrality=a.integrality.astype(np.uint8),
               bounds=Bounds(a.lb, a.ub),
               options=options)
    stats = SolveStats(nodes=int(getattr(res, "mip_node_count", 0) or 0), wall_time=time.perf_counter() - t0,
                       lp_solves=1)
    bound = -float(getattr(res, "mip_dual_bound", -math.inf) or -math.inf) / HIGHS_OBJ_SCALE
    x = None
    if res.x is not None:
        x = np.array(res.x, dtype=float)
        x[a.integrality] = np.round(x[a.integrality])
        bad = model.violations(x)
        if bad:
            raise SolverError(f"HiGHS returned a point violating {len(bad)} row(s), e.g. {bad[:3]}")
    if res.status == 0:
        return Solution(Status.OPTIMAL, x, model.objective_value(x), stats, bound)
    if res.status == 2:
        return Solution(Status.INFEASIBLE, None, -math.inf, stats, -math.inf)
    if res.status == 1:
        val = model.objective_value(x) if x is not None else -math.inf
        return Solution(Status.LIMIT_REACHED, x, val, stats, bound)
    raise SolverError(f"HiGHS failed: {res.message}")


BACKENDS = ("highs", "bnb", "external")


def solve(model: IlpModel, limits: SolveLimits | None = None, heuristic: Heuristic | None = None,
          backend: str | None = None) -> Solution:
    """Solve ``model`` to proven optimality (or report infeasible / limit_reached).

    Backends: ``"highs"`` (default, HiGHS MIP via scipy), ``"bnb"`` (the
    branch-and-bound in this module, LP relaxations by HiGHS) and
    ``"external"``. Setting ``ILPMINER_EXTERNAL_SOLVER`` selects the external
    solver when no backend is named. Every returned point is re-checked
    against all rows.
    """
    limits = limits or SolveLimits()
    if backend is None:
        backend = "external" if os.environ.get(EXTERNAL_SOLVER_ENV) else "highs"
    if backend == "highs":
        return _highs(model, limits)
    if backend == "bnb":
        if heuristic is None:
            heuristic = arc_rounding_heuristic(model)
        return _bnb(model, limits, heuristic)
    if backend == "external":
        return solve_external(model, os.environ.get(EXTERNAL_SOLVER_ENV, ""), limits)
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# external solver escape hatch

def parse_solution_file(text: str) -> dict[str, float]:
    """Read ``name value`` lines; other lines (headers, comments) are skipped."""
    values: dict[str, float] = {}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) < 2 or line.lstrip().startswith(("#", "\\")):
            continue
        # accept "name value" and "index name value ..." layouts
        for a, b in ((parts[0], parts[1]), (parts[1], parts[2] if len(parts) > 2 else None)):
            if b is None:
                continue
            try:
                values[a] = float(b)
                break
            except ValueError:
                continue
    return values


def solve_external(model: IlpModel, command: str, limits: SolveLimits | None = None) -> Solution:
    """Run ``command <lp-file> <solution-file>`` and re-verify its answer.

    An empty solution file means the solver found the model infeasible.
    """
    if not command:
        raise SolverError(f"no external solver configured (set {EXTERNAL_SOLVER_ENV})")
    limits = limits or SolveLimits()
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        with open(lp_path, "w") as fh:
            fh.write(export_lp(model))
        timeout = None if math.isinf(limits.time_limit) else limits.time_limit
        try:
            proc = subprocess.run(command.split() + [lp_path, sol_path], capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return Solution(Status.LIMIT_REACHED, None, -math.inf, SolveStats(wall_time=time.perf_counter() - t0))
        if proc.returncode != 0:
            raise SolverError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()[:500]}")
        text = open(sol_path).read() if os.path.exists(sol_path) else ""
    stats = SolveStats(wall_time=time.perf_counter() - t0)
    values = parse_solution_file(text)
    if not values:
        return Solution(Status.INFEASIBLE, None, -math.inf, stats, -math.inf)
    x = np.zeros(model.n_vars)
    for name, val in values.items():
        k = model.name_index.get(name)
        if k is not None:
            x[k] = val
    integ = model.arrays.integrality
    x[integ] = np.round(x[integ])
    bad = model.violations(x)
    if bad:
        raise SolverError(f"external solution violates {len(bad)} row(s), e.g. {bad[:3]}")
    return Solution(Status.OPTIMAL, x, model.objective_value(x), stats)


# ---------------------------------------------------------------------------
# brute-force oracle

def _closure(adj: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure for a batch of (B, n, n) boolean matrices."""
    n = adj.shape[-1]
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(max(1, math.ceil(math.log2(max(n, 2))))):
        reach = np.einsum("bij,bjk->bik", reach.astype(np.uint8), reach.astype(np.uint8)) > 0
    return reach


def brute_force_solve(meas: DependencyMeasures, start: int, end: int, cfg: DiscoveryConfig | None = None,
                      cap: int = 5, chunk: int = 1 << 14) -> tuple[Solution, frozenset[tuple[int, int]]]:
    """Enumerate every arc set and score it straight from the measures.

    Arcs into start and out of end are never enumerated (they are always
    infeasible). Returns the best solution (assignment = flattened E) and its
    arc set; ties prefer fewer arcs, then the lexicographically smallest E.
    """
    cfg = cfg or DiscoveryConfig()
    n = meas.n
    if n > cap:
        raise SolverError(f"brute force refused: {n} tasks exceeds cap {cap}")
    if n < 2 or start == end:
        raise SolverError("need two distinct endpoints")
    t0 = time.perf_counter()
    d, s, l = np.asarray(meas.d, float), np.asarray(meas.s, float), np.asarray(meas.l, float)
    big_m = cfg.resolved_big_m(n)
    eps = cfg.sparsity_epsilon
    free = [(i, j) for i in range(n) for j in range(n) if j != start and i != end]
    m = len(free)
    rows = np.array([p[0] for p in free])
    cols = np.array([p[1] for p in free])
    offdiag = ~np.eye(n, dtype=bool)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)

    best = None  # (value, n_arcs, flat E bytes)
    for lo in range(0, 1 << m, chunk):
        codes = np.arange(lo, min(lo + chunk, 1 << m), dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(bool)
        E = np.zeros((len(codes), n, n), dtype=bool)
        E[:, rows, cols] = bits
        arcs = E.sum(axis=(1, 2))
        ok = arcs <= n * cfg.max_arcs_ratio + FEAS_TOL
        ok &= (E.sum(axis=2) <= cfg.max_outputs).all(axis=1)
        ok &= (E.sum(axis=1) <= cfg.max_inputs).all(axis=1)
        diag = np.diagonal(E, axis1=1, axis2=2)
        two = E & E.transpose(0, 2, 1) & offdiag
        both_loops = diag[:, :, None] & diag[:, None, :]
        ok &= ~(two & both_loops).any(axis=(1, 2))
        if not ok.any():
            continue
        E, two, diag, arcs = E[ok], two[ok], diag[ok], arcs[ok]
        reach = _closure(E)
        ok = reach[:, start, :].all(axis=1) & reach[:, :, end].all(axis=1)
        if not ok.any():
            continue
        E, two, diag, arcs = E[ok], two[ok], diag[ok], arcs[ok]
        one_way = E & offdiag & ~two
        forced = one_way & (cfg.dep_thresh > np.maximum(d, 0.0) + 1e-12)
        forcesl = diag & (cfg.sloop_thresh > s + 1e-12)
        forcel = two & upper & (cfg.loop_thresh > l + 1e-12)
        value = (
            ((E & offdiag) * d).sum(axis=(1, 2))
            + cfg.alpha * (diag * s).sum(axis=1)
            + cfg.beta / 2.0 * (two * l).sum(axis=(1, 2))
            - big_m * (forced * (1.0 - d)).sum(axis=(1, 2))
            - big_m * (forcel * (1.0 - l)).sum(axis=(1, 2))
            - big_m * (forcesl * (1.0 - s)).sum(axis=1)
            - eps * arcs
        )
        top = value.max()
        for k in np.nonzero(value >= top - OBJ_TOL)[0]:
            cand = (float(value[k]), int(arcs[k]), E[k].reshape(-1).astype(np.uint8).tobytes())
            if best is None or _better(cand, best):
                best = cand
    stats = SolveStats(nodes=1 << m, wall_time=time.perf_counter() - t0)
    if best is None:
        return Solution(Status.INFEASIBLE, None, -math.inf, stats, -math.inf), frozenset()
    e = np.frombuffer(best[2], dtype=np.uint8).reshape(n, n).astype(float)
    arcset = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(e)))
    return Solution(Status.OPTIMAL, e.reshape(-1), best[0], stats, best[0]), arcset


def _better(a, b) -> bool:
    if a[0] > b[0] + OBJ_TOL:
        return True
    if a[0] < b[0] - OBJ_TOL:
        return False
    if a[1] != b[1]:
        return a[1] < b[1]
    # lexicographically smaller E, read as 0/1 strings row by row
    return a[2] < b[2]
