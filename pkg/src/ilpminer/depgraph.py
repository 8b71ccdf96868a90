"""Dependency graphs: path validation, reachability, a threshold baseline, serialization."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .measures import DependencyMeasures


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DependencyGraph:
    tasks: tuple[str, ...]
    arcs: frozenset[tuple[int, int]]
    start: int
    end: int

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "arcs", frozenset((int(i), int(j)) for i, j in self.arcs))

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def an(self) -> int:
        """Arc count, self-loops included."""
        return len(self.arcs)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.arcs:
            adj[i, j] = True
        return adj

    def inputs(self) -> list[set[int]]:
        inp: list[set[int]] = [set() for _ in self.tasks]
        for i, j in self.arcs:
            inp[j].add(i)
        return inp

    def outputs(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in self.tasks]
        for i, j in self.arcs:
            out[i].add(j)
        return out

    def named_arcs(self) -> list[tuple[str, str]]:
        return sorted((self.tasks[i], self.tasks[j]) for i, j in self.arcs)

    def endpoint_violations(self) -> list[tuple[int, int]]:
        """Arcs entering start or leaving end."""
        return sorted(a for a in self.arcs if a[1] == self.start or a[0] == self.end)


@dataclass
class PathReport:
    unreachable_from_start: list[str] = field(default_factory=list)
    cannot_reach_end: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.unreachable_from_start and not self.cannot_reach_end

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if self.unreachable_from_start:
            parts.append("not reachable from start: " + ", ".join(self.unreachable_from_start))
        if self.cannot_reach_end:
            parts.append("cannot reach end: " + ", ".join(self.cannot_reach_end))
        return "; ".join(parts)


def _sweep(root: int, nbrs: list[set[int]]) -> set[int]:
    seen = {root}
    todo = deque([root])
    while todo:
        v = todo.popleft()
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def validate_paths(g: DependencyGraph) -> PathReport:
    """Check that every task lies on some start-to-end path (two BFS sweeps)."""
    fwd = _sweep(g.start, g.outputs())
    bwd = _sweep(g.end, g.inputs())
    return PathReport(
        unreachable_from_start=[g.tasks[t] for t in range(g.n) if t not in fwd],
        cannot_reach_end=[g.tasks[t] for t in range(g.n) if t not in bwd],
    )


def reachability(g: DependencyGraph) -> np.ndarray:
    """Warshall closure: ``reach[x, y]`` iff a path of length >= 1 leads from x to y."""
    reach = g.adjacency()
    for k in range(g.n):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


def baseline_threshold_miner(
    meas: DependencyMeasures,
    start: int,
    end: int,
    dep_thresh: float,
    sloop_thresh: float = 0.9,
    loop_thresh: float = 0.9,
    tasks: tuple[str, ...] | None = None,
) -> DependencyGraph:
    """Threshold arcs plus the all-tasks-connected repair.

    Only strictly positive measures qualify, so a zero threshold keeps exactly
    the positive-measure arcs. Repair gives each task lacking an input (output)
    its best-measured one, ties to the lowest index. No check is made that the
    result connects start to end.
    """
    n = meas.n
    d, s, l = meas.d, meas.s, meas.l
    arcs: set[tuple[int, int]] = set()

    def allowed(i: int, j: int) -> bool:
        return j != start and i != end

    for i in range(n):
        if s[i] > 0 and s[i] >= sloop_thresh and allowed(i, i):
            arcs.add((i, i))
        for j in range(n):
            if i == j or not allowed(i, j):
                continue
            if d[i, j] > 0 and d[i, j] >= dep_thresh:
                arcs.add((i, j))
            if i < j and l[i, j] > 0 and l[i, j] >= loop_thresh and allowed(j, i):
                arcs.add((i, j))
                arcs.add((j, i))

    has_in = {j for i, j in arcs if i != j}
    has_out = {i for i, j in arcs if i != j}
    for j in range(n):
        if j == start or j in has_in:
            continue
        sources = [i for i in range(n) if i != j and allowed(i, j)]
        if sources:
            best = max(sources, key=lambda i: (d[i, j], -i))
            arcs.add((best, j))
            has_out.add(best)
    for i in range(n):
        if i == end or i in has_out:
            continue
        targets = [j for j in range(n) if j != i and allowed(i, j)]
        if targets:
            best = max(targets, key=lambda j: (d[i, j], -j))
            arcs.add((i, best))

    if tasks is None:
        tasks = tuple(str(i) for i in range(n))
    return DependencyGraph(tasks, frozenset(arcs), start, end)


# ---------------------------------------------------------------------------
# serialization

def to_json(g: DependencyGraph) -> str:
    return json.dumps({
        "tasks": list(g.tasks),
        "arcs": [list(a) for a in sorted(g.arcs)],
        "start": g.start,
        "end": g.end,
    })


def from_json(text: str | bytes) -> DependencyGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed graph JSON: {exc.msg} at line {exc.lineno}") from None
    try:
        tasks = tuple(str(t) for t in doc["tasks"])
        arcs = [(int(a[0]), int(a[1])) for a in doc["arcs"]]
        start, end = int(doc["start"]), int(doc["end"])
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise GraphFormatError(f"graph JSON missing or bad field: {exc}") from None
    n = len(tasks)
    for i, j in arcs:
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"arc {[i, j]} refers to an unknown task index")
    if not (0 <= start < n and 0 <= end < n):
        raise GraphFormatError("start/end index out of range")
    return DependencyGraph(tasks, frozenset(arcs), start, end)


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: DependencyGraph) -> str:
    lines = ["digraph dependency_graph {", "  rankdir=LR;", "  node [shape=box];"]
    for i, name in enumerate(g.tasks):
        style = ""
        if i == g.start:
            style = " [shape=circle, style=filled, fillcolor=palegreen]"
        elif i == g.end:
            style = " [shape=doublecircle, style=filled, fillcolor=lightcoral]"
        lines.append(f"  {_dot_id(name)}{style};")
    for i, j in sorted(g.arcs):
        lines.append(f"  {_dot_id(g.tasks[i])} -> {_dot_id(g.tasks[j])};")
    lines.append("}")
    return "\n".join(lines) + "\n"
