"""Integer program for optimal dependency-graph discovery.

Variables, per ordered task pair (i, j) unless noted:

    E      arc i -> j present (E[i, i] is a self loop)
    x, y   loop-free spanning in-tree from start / out-tree to end, both inside E
    R      i and j form a length-two loop
    u, q   per task, MTZ ordering potentials for x and y, integers in [0, n-1]
    forced, forcesl (per task), forcel
           threshold violations the model had to accept, priced by big_m

Families with no meaning on the diagonal (R, forced, forcel) and the lower
triangle of forcel are declared with upper bound 0 so that every pair family
has n*n columns.
"""
from __future__ import annotations

import json
import math
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .depgraph import DependencyGraph
from .measures import DependencyMeasures

KIND_ORDER = ("E", "x", "y", "R", "u", "q", "forced", "forcesl", "forcel")

FEAS_TOL = 1e-6
INT_TOL = 1e-6


class ModelError(ValueError):
    pass


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscoveryConfig:
    dep_thresh: float = 0.0
    sloop_thresh: float = 0.0
    loop_thresh: float = 0.0
    max_arcs_ratio: float = 2.0
    max_outputs: int = 1000
    max_inputs: int = 1000
    alpha: float = 1.0
    beta: float = 1.0
    big_m: float | None = None  # None -> 10 * (n^2 + n)
    sparsity_epsilon: float = 1e-7

    def __post_init__(self):
        for name in ("dep_thresh", "sloop_thresh", "loop_thresh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {v}")
        if self.max_arcs_ratio <= 0:
            raise ModelError("max_arcs_ratio must be positive")
        if self.max_outputs < 0 or self.max_inputs < 0:
            raise ModelError("degree caps must be non-negative")
        if self.alpha < 0 or self.beta < 0:
            raise ModelError("alpha and beta must be non-negative")
        if self.big_m is not None and self.big_m <= 0:
            raise ModelError("big_m must be positive")
        if self.sparsity_epsilon < 0:
            raise ModelError("sparsity_epsilon must be non-negative")

    def resolved_big_m(self, n: int) -> float:
        return self.big_m if self.big_m is not None else 10.0 * (n * n + n)


@dataclass(frozen=True)
class Variable:
    kind: str
    i: int
    j: int | None
    integer: bool  # False never occurs in this model; kept for generality
    lb: float
    ub: float

    @property
    def name(self) -> str:
        if self.j is None:
            return f"{self.kind}_{self.i}"
        return f"{self.kind}_{self.i}_{self.j}"

    @property
    def binary(self) -> bool:
        return self.integer and self.lb >= 0 and self.ub <= 1


@dataclass(frozen=True)
class Constraint:
    family: str
    name: str
    terms: tuple[tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float


@dataclass(frozen=True)
class IlpModel:
    n: int
    tasks: tuple[str, ...]
    start: int
    end: int
    config: DiscoveryConfig
    variables: tuple[Variable, ...]
    objective: np.ndarray  # maximize objective @ x
    constraints: tuple[Constraint, ...]

    def index(self, kind: str, i: int, j: int | None = None) -> int:
        return _index(self.n, kind, i, j)

    @cached_property
    def name_index(self) -> dict[str, int]:
        return {v.name: k for k, v in enumerate(self.variables)}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def family_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for c in self.constraints:
            counts[c.family] = counts.get(c.family, 0) + 1
        return counts

    @cached_property
    def arrays(self) -> "ModelArrays":
        return ModelArrays.from_model(self)

    def objective_value(self, assignment) -> float:
        return float(np.dot(self.objective, np.asarray(assignment, dtype=float)))

    def violations(self, assignment, tol: float = FEAS_TOL) -> list[str]:
        """Names of violated rows and bounds (integrality included)."""
        a = self.arrays
        v = np.asarray(assignment, dtype=float)
        act = a.A @ v
        bad = [self.constraints[k].name for k in np.nonzero((act < a.row_lo - tol) | (act > a.row_hi + tol))[0]]
        bad += [self.variables[k].name for k in np.nonzero((v < a.lb - tol) | (v > a.ub + tol))[0]]
        frac = np.abs(v - np.round(v)) > INT_TOL
        bad += [self.variables[k].name + " (fractional)" for k in np.nonzero(frac & a.integrality)[0]]
        return bad

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "tasks": list(self.tasks),
            "start": self.start,
            "end": self.end,
            "sense": "maximize",
            "variables": [
                {"name": v.name, "lb": v.lb, "ub": v.ub, "type": "binary" if v.binary else "integer",
                 "obj": float(self.objective[k])}
                for k, v in enumerate(self.variables)
            ],
            "constraints": [
                {"name": c.name, "family": c.family, "sense": c.sense, "rhs": c.rhs,
                 "terms": {self.variables[k].name: coef for k, coef in c.terms}}
                for c in self.constraints
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


@dataclass(frozen=True)
class ModelArrays:
    """Dense/sparse numeric view used by solvers: ``row_lo <= A x <= row_hi``."""

    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray

    @classmethod
    def from_model(cls, model: IlpModel) -> "ModelArrays":
        rows, cols, vals = [], [], []
        lo = np.empty(model.n_rows)
        hi = np.empty(model.n_rows)
        for r, c in enumerate(model.constraints):
            for k, coef in c.terms:
                rows.append(r)
                cols.append(k)
                vals.append(coef)
            lo[r] = c.rhs if c.sense in ("=", ">=") else -np.inf
            hi[r] = c.rhs if c.sense in ("=", "<=") else np.inf
        A = sp.csr_matrix((vals, (rows, cols)), shape=(model.n_rows, model.n_vars))
        A.sum_duplicates()
        lb = np.array([v.lb for v in model.variables])
        ub = np.array([v.ub for v in model.variables])
        integ = np.array([v.integer for v in model.variables])
        for arr in (lo, hi, lb, ub, integ):
            arr.setflags(write=False)
        return cls(np.asarray(model.objective, dtype=float), A, lo, hi, lb, ub, integ)


# ---------------------------------------------------------------------------
# layout

def _offsets(n: int) -> dict[str, int]:
    sizes = {"E": n * n, "x": n * n, "y": n * n, "R": n * n, "u": n, "q": n,
             "forced": n * n, "forcesl": n, "forcel": n * n}
    off, pos = {}, 0
    for kind in KIND_ORDER:
        off[kind] = pos
        pos += sizes[kind]
    off["_total"] = pos
    return off


def _index(n: int, kind: str, i: int, j: int | None = None) -> int:
    off = _offsets(n)[kind]
    if kind in ("u", "q", "forcesl"):
        return off + i
    return off + i * n + j


def variable_count(n: int) -> int:
    return 6 * n * n + 3 * n


def expected_row_count(n: int) -> int:
    """Rows emitted by :func:`build_model` (no extra rows).

    1 + 1 + n^2 + n^2 + (n-1)  + n^2 + n^2 + (n-1)     definition / trees
    + 3 n(n-1)                                          two-cycle linking
    + 1 + n + n                                         size caps
    + n(n-1) + n + n(n-1)/2                             thresholds
    = (17 n^2 + n + 2) / 2
    """
    return (17 * n * n + n + 2) // 2


# ---------------------------------------------------------------------------
# builder

def build_model(
    meas: DependencyMeasures,
    start: int,
    end: int,
    cfg: DiscoveryConfig | None = None,
    tasks: tuple[str, ...] | None = None,
    extra_rows: list[Constraint] | None = None,
) -> IlpModel:
    cfg = cfg or DiscoveryConfig()
    n = meas.n
    if n < 2:
        raise ModelError("need at least two tasks")
    if start == end:
        raise ModelError("start and end must differ")
    if not (0 <= start < n and 0 <= end < n):
        raise ModelError("start/end out of range")
    d, s, l = (np.asarray(m, dtype=float) for m in (meas.d, meas.s, meas.l))
    off_diag = ~np.eye(n, dtype=bool)
    if not (np.all(np.isfinite(d[off_diag])) and np.all(np.isfinite(s)) and np.all(np.isfinite(l[off_diag]))):
        raise ArithmeticError("non-finite dependency measure")
    if tasks is None:
        tasks = tuple(str(i) for i in range(n))
    if len(tasks) != n:
        raise ModelError("task names do not match the measure size")

    off = _offsets(n)
    big_m = cfg.resolved_big_m(n)
    eps = cfg.sparsity_epsilon

    def E(i, j): return off["E"] + i * n + j
    def X(i, j): return off["x"] + i * n + j
    def Y(i, j): return off["y"] + i * n + j
    def R(i, j): return off["R"] + i * n + j
    def U(i): return off["u"] + i
    def Q(i): return off["q"] + i
    def F(i, j): return off["forced"] + i * n + j
    def FS(i): return off["forcesl"] + i
    def FL(i, j): return off["forcel"] + i * n + j

    variables: list[Variable] = []
    for kind in KIND_ORDER:
        if kind in ("u", "q"):
            variables += [Variable(kind, i, None, True, 0.0, float(n - 1)) for i in range(n)]
        elif kind == "forcesl":
            variables += [Variable(kind, i, None, True, 0.0, 1.0) for i in range(n)]
        else:
            for i in range(n):
                for j in range(n):
                    unused = (kind in ("R", "forced", "forcel") and i == j) or (kind == "forcel" and i > j)
                    variables.append(Variable(kind, i, j, True, 0.0, 0.0 if unused else 1.0))
    assert len(variables) == off["_total"] == variable_count(n)

    obj = np.zeros(len(variables))
    for i in range(n):
        obj[E(i, i)] = cfg.alpha * s[i] - eps
        obj[FS(i)] = -big_m * (1.0 - s[i])
        for j in range(n):
            if i == j:
                continue
            obj[E(i, j)] = d[i, j] - eps
            obj[R(i, j)] = cfg.beta / 2.0 * l[i, j]
            obj[F(i, j)] = -big_m * (1.0 - d[i, j])
            if i < j:
                obj[FL(i, j)] = -big_m * (1.0 - l[i, j])

    rows: list[Constraint] = []

    def add(family, name, terms, sense, rhs):
        rows.append(Constraint(family, name, tuple((k, float(c)) for k, c in terms if c != 0), sense, float(rhs)))

    # definition of start/end
    add("no_arc_into_start", "no_arc_into_start", [(E(i, start), 1) for i in range(n)], "=", 0)
    add("no_arc_out_of_end", "no_arc_out_of_end", [(E(end, j), 1) for j in range(n)], "=", 0)
    # in-tree from start
    for i in range(n):
        for j in range(n):
            add("in_tree_subset", f"in_tree_subset_{i}_{j}", [(X(i, j), 1), (E(i, j), -1)], "<=", 0)
    for i in range(n):
        for j in range(n):
            terms = [(X(i, j), n)] if i == j else [(U(i), 1), (U(j), -1), (X(i, j), n)]
            add("in_tree_order", f"in_tree_order_{i}_{j}", terms, "<=", n - 1)
    for j in range(n):
        if j != start:
            add("in_tree_parent", f"in_tree_parent_{j}", [(X(i, j), 1) for i in range(n)], "=", 1)
    # out-tree to end
    for i in range(n):
        for j in range(n):
            add("out_tree_subset", f"out_tree_subset_{i}_{j}", [(Y(i, j), 1), (E(i, j), -1)], "<=", 0)
    for i in range(n):
        for j in range(n):
            terms = [(Y(i, j), n)] if i == j else [(Q(i), 1), (Q(j), -1), (Y(i, j), n)]
            add("out_tree_order", f"out_tree_order_{i}_{j}", terms, "<=", n - 1)
    for i in range(n):
        if i != end:
            add("out_tree_child", f"out_tree_child_{i}", [(Y(i, j), 1) for j in range(n)], "=", 1)
    # length-two loops
    for i in range(n):
        for j in range(n):
            if i != j:
                add("cycle2_on", f"cycle2_on_{i}_{j}", [(E(i, j), 1), (E(j, i), 1), (R(i, j), -1)], "<=", 1)
    for i in range(n):
        for j in range(n):
            if i != j:
                add("cycle2_off", f"cycle2_off_{i}_{j}", [(R(i, j), 2), (E(i, j), -1), (E(j, i), -1)], "<=", 0)
    for i in range(n):
        for j in range(n):
            if i != j:
                add("cycle2_vs_self_loops", f"cycle2_vs_self_loops_{i}_{j}", [(R(i, j), 1), (E(i, i), 1), (E(j, j), 1)], "<=", 2)
    # size
    add("arc_budget", "arc_budget", [(E(i, j), 1) for i in range(n) for j in range(n)], "<=", n * cfg.max_arcs_ratio)
    for i in range(n):
        add("max_outputs", f"max_outputs_{i}", [(E(i, j), 1) for j in range(n)], "<=", cfg.max_outputs)
    for j in range(n):
        add("max_inputs", f"max_inputs_{j}", [(E(i, j), 1) for i in range(n)], "<=", cfg.max_inputs)
    # thresholds
    for i in range(n):
        for j in range(n):
            if i != j:
                add("dep_threshold", f"dep_threshold_{i}_{j}", [(E(i, j), cfg.dep_thresh), (R(i, j), -1), (F(i, j), -1)],
                    "<=", max(0.0, d[i, j]))
    for i in range(n):
        add("self_loop_threshold", f"self_loop_threshold_{i}", [(E(i, i), cfg.sloop_thresh), (FS(i), -1)], "<=", s[i])
    for i in range(n):
        for j in range(i + 1, n):
            add("cycle2_threshold", f"cycle2_threshold_{i}_{j}", [(R(i, j), cfg.loop_thresh), (FL(i, j), -1)], "<=", l[i, j])

    if extra_rows:
        for r in extra_rows:
            if any(not 0 <= k < len(variables) for k, _ in r.terms):
                raise ModelError(f"extra row {r.name} references an undeclared variable")
            rows.append(r)

    obj.setflags(write=False)
    return IlpModel(n, tuple(tasks), start, end, cfg, tuple(variables), obj, tuple(rows))


# ---------------------------------------------------------------------------
# domain-knowledge rows

_TERM = re.compile(r"\s*([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*\*?\s*([A-Za-z]+)\(([^)]*)\)")
_SENSE = re.compile(r"(<=|>=|=)")


def parse_extra_row(text: str, tasks: tuple[str, ...], name: str = "user") -> Constraint:
    """Parse ``"E(a,b) + E(c,b) <= 1"`` (task names, not indices) into a row.

    Variable kinds are E, x, y, R, forced, forcel (two tasks) or u, q,
    forcesl (one task).
    """
    parts = _SENSE.split(text)
    if len(parts) != 3:
        raise ModelError(f"extra row needs exactly one of <=, >=, =: {text!r}")
    lhs, sense, rhs_text = parts
    try:
        rhs = float(rhs_text)
    except ValueError:
        raise ModelError(f"extra row right-hand side is not a number: {rhs_text!r}") from None
    n = len(tasks)
    index = {t: k for k, t in enumerate(tasks)}
    terms: list[tuple[int, float]] = []
    pos = 0
    lhs = lhs.strip()
    while pos < len(lhs):
        m = _TERM.match(lhs, pos)
        if not m or m.end() == pos:
            raise ModelError(f"cannot parse extra row near {lhs[pos:]!r}")
        sign, coef, kind, args = m.groups()
        value = float(coef) if coef else 1.0
        if sign == "-":
            value = -value
        names = [a.strip() for a in args.split(",")]
        try:
            idx = [index[a] for a in names]
        except KeyError as exc:
            raise ModelError(f"unknown task {exc.args[0]!r} in extra row") from None
        if kind not in KIND_ORDER:
            raise ModelError(f"unknown variable kind {kind!r}")
        single = kind in ("u", "q", "forcesl")
        if len(idx) != (1 if single else 2):
            raise ModelError(f"{kind} takes {1 if single else 2} task argument(s)")
        terms.append((_index(n, kind, *idx), value))
        pos = m.end()
    return Constraint("user", name, tuple(terms), sense, rhs)


# ---------------------------------------------------------------------------
# solutions and extraction

class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    LIMIT_REACHED = "limit_reached"


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    lp_solves: int = 0


@dataclass
class Solution:
    status: Status
    assignment: np.ndarray | None
    objective_value: float
    stats: SolveStats = field(default_factory=SolveStats)
    bound: float = math.inf

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def arcs_of(model: IlpModel, assignment) -> frozenset[tuple[int, int]]:
    n = model.n
    e = np.asarray(assignment[: n * n]).reshape(n, n) > 0.5
    return frozenset(zip(*(a.tolist() for a in np.nonzero(e))))


def extract_graph(model: IlpModel, sol: Solution, start: int | None = None, end: int | None = None) -> DependencyGraph:
    if sol.status is not Status.OPTIMAL or sol.assignment is None:
        raise ExtractionError(f"cannot extract a graph from a {sol.status.value} solution")
    start = model.start if start is None else start
    end = model.end if end is None else end
    return DependencyGraph(model.tasks, arcs_of(model, sol.assignment), start, end)


def _bfs_parents(root: int, nbrs: list[list[int]]) -> tuple[dict[int, int], dict[int, int]]:
    parent: dict[int, int] = {}
    depth = {root: 0}
    todo = deque([root])
    while todo:
        v = todo.popleft()
        for w in nbrs[v]:
            if w not in depth:
                depth[w] = depth[v] + 1
                parent[w] = v
                todo.append(w)
    return parent, depth


def assignment_from_arcs(model: IlpModel, arcs) -> np.ndarray | None:
    """Complete an arc set into a full variable assignment, or None if infeasible.

    Trees come from BFS (potentials are BFS depths); R and the penalty
    variables take their smallest admissible values.
    """
    n = model.n
    cfg = model.config
    v = np.zeros(model.n_vars)
    e = np.zeros((n, n), dtype=bool)
    for i, j in arcs:
        e[i, j] = True
    outs = [sorted(np.nonzero(e[i])[0].tolist()) for i in range(n)]
    ins = [sorted(np.nonzero(e[:, j])[0].tolist()) for j in range(n)]
    par_in, dep_in = _bfs_parents(model.start, outs)
    par_out, dep_out = _bfs_parents(model.end, ins)
    if len(dep_in) < n or len(dep_out) < n:
        return None

    idx = model.index
    for i, j in zip(*np.nonzero(e)):
        v[idx("E", i, j)] = 1
    for child, p in par_in.items():
        v[idx("x", p, child)] = 1
    for child, p in par_out.items():
        # BFS on reversed arcs: p is the successor of child toward end
        v[idx("y", child, p)] = 1
    for t in range(n):
        v[idx("u", t)] = dep_in[t]
        v[idx("q", t)] = (n - 1) - dep_out[t]

    # penalty thresholds are read back from the row right-hand sides
    thr = _threshold_rhs(model)
    for i in range(n):
        for j in range(n):
            if i != j and e[i, j] and e[j, i]:
                v[idx("R", i, j)] = 1
    for i in range(n):
        if e[i, i] and cfg.sloop_thresh > thr["self_loop_threshold"][i] + 1e-12:
            v[idx("forcesl", i)] = 1
        for j in range(n):
            if i == j:
                continue
            if e[i, j] and not (e[i, j] and e[j, i]) and cfg.dep_thresh > thr["dep_threshold"][i, j] + 1e-12:
                v[idx("forced", i, j)] = 1
            if i < j and e[i, j] and e[j, i] and cfg.loop_thresh > thr["cycle2_threshold"][i, j] + 1e-12:
                v[idx("forcel", i, j)] = 1
    if model.violations(v):
        return None
    return v


def _threshold_rhs(model: IlpModel) -> dict[str, np.ndarray]:
    n = model.n
    out = {"dep_threshold": np.zeros((n, n)), "self_loop_threshold": np.zeros(n), "cycle2_threshold": np.zeros((n, n))}
    for c in model.constraints:
        if c.family == "self_loop_threshold":
            out["self_loop_threshold"][int(c.name.split("_")[-1])] = c.rhs
        elif c.family in ("dep_threshold", "cycle2_threshold"):
            i, j = c.name.split("_")[-2:]
            out[c.family][int(i), int(j)] = c.rhs
    return out


# ---------------------------------------------------------------------------
# LP text export

def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _linear(terms, names) -> list[str]:
    out = []
    for k, coef in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        out.append(f"{sign} {names[k]}" if mag == 1 else f"{sign} {_fmt(mag)} {names[k]}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(head: str, tokens: list[str], width: int = 200) -> list[str]:
    lines, cur = [], head
    for tok in tokens:
        if len(cur) + len(tok) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + tok
    lines.append(cur)
    return lines


def export_lp(model: IlpModel) -> str:
    """CPLEX-LP text of the model; byte-identical for identical models."""
    names = [v.name for v in model.variables]
    out = [f"\\ dependency graph ILP, {model.n} tasks, start {model.tasks[model.start]!r}, end {model.tasks[model.end]!r}",
           "Maximize"]
    obj_terms = [(k, float(c)) for k, c in enumerate(model.objective) if c != 0]
    if not obj_terms:
        obj_terms = [(0, 0.0)]
    out += _wrap(" obj:", _linear(obj_terms, names) if obj_terms[0][1] != 0 else [f"0 {names[0]}"])
    out.append("Subject To")
    for c in model.constraints:
        terms = _linear(c.terms, names) or [f"0 {names[0]}"]
        out += _wrap(f" {c.name}:", terms + [c.sense, _fmt(c.rhs)])
    out.append("Bounds")
    for v in model.variables:
        if v.binary and v.ub == 0:
            out.append(f" {v.name} = 0")
        elif not v.binary:
            out.append(f" {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}")
    out.append("Binaries")
    out += _wrap("", [v.name for v in model.variables if v.binary])
    out.append("Generals")
    out += _wrap("", [v.name for v in model.variables if v.integer and not v.binary])
    out.append("End")
    return "\n".join(out) + "\n"
