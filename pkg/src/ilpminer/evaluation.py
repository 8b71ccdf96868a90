"""Replay fitness (FiM), precision (PrM), F-score and arc count of a dependency graph."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .depgraph import DependencyGraph, reachability
from .loglib import EventLog
from .relations import eventually_follows

log = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class FitnessReport:
    afe: int
    aewpr: int
    aewpo: int
    ntewpr: int
    ntewpo: int
    nel: int
    ntl: int

    @property
    def penalty(self) -> float:
        return self.aewpr / (self.ntl - self.ntewpr + 1) + self.aewpo / (self.ntl - self.ntewpo + 1)

    @property
    def fim(self) -> float:
        return (self.afe - self.penalty) / self.nel

    def to_dict(self) -> dict:
        return {**asdict(self), "penalty": self.penalty, "fim": self.fim}


@dataclass(frozen=True)
class PrecisionReport:
    matched: int
    possible: int

    @property
    def prm(self) -> float:
        return self.matched / self.possible

    def to_dict(self) -> dict:
        return {**asdict(self), "prm": self.prm}


@dataclass(frozen=True)
class QualityReport:
    fim: float
    prm: float
    fscore: float
    an: int
    fitness: FitnessReport | None = None
    precision: PrecisionReport | None = None

    def to_dict(self) -> dict:
        out = {"fim": self.fim, "prm": self.prm, "fscore": self.fscore, "an": self.an}
        if self.fitness is not None:
            out["fitness"] = self.fitness.to_dict()
        if self.precision is not None:
            out["precision"] = self.precision.to_dict()
        return out


def _graph_index(log_: EventLog, g: DependencyGraph) -> list[int]:
    """Map each log task index to the graph task with the same name."""
    pos = {name: k for k, name in enumerate(g.tasks)}
    out = []
    for name in log_.alphabet:
        if name not in pos:
            raise EvaluationError(f"log task {name!r} has no counterpart in the graph")
        out.append(pos[name])
    return out


def fitness(log_: EventLog, g: DependencyGraph, strict_pseudocode: bool = False) -> FitnessReport:
    """Replay every trace against the graph's pre-/post-requisite sets.

    An event violates its pre-requisites when its task has inputs and none of
    them occurred earlier in the trace; post-requisites mirror this over later
    events and outputs. By default an event counts as fitting when it has
    neither violation itself. ``strict_pseudocode`` instead uses trace-level
    flags, so every event from the first violation onward is non-fitting.
    """
    to_g = _graph_index(log_, g)
    inp, out = g.inputs(), g.outputs()
    afe = aewpr = aewpo = ntewpr = ntewpo = nel = ntl = 0
    for events, count in log_.traces:
        tasks = [to_g[e] for e in events]
        m = len(tasks)
        # suffix sets: tasks occurring strictly after position i
        after: list[set[int]] = [set() for _ in range(m)]
        acc: set[int] = set()
        for i in range(m - 1, -1, -1):
            after[i] = set(acc)
            acc.add(tasks[i])
        before: set[int] = set()
        fit = pre_hits = post_hits = 0
        tr_pre = tr_post = False
        for i, t in enumerate(tasks):
            pre_bad = bool(inp[t]) and not (inp[t] & before)
            post_bad = bool(out[t]) and not (out[t] & after[i])
            pre_hits += pre_bad
            post_hits += post_bad
            tr_pre |= pre_bad
            tr_post |= post_bad
            if strict_pseudocode:
                fit += not (tr_pre or tr_post)
            else:
                fit += not (pre_bad or post_bad)
            before.add(t)
        afe += fit * count
        aewpr += pre_hits * count
        aewpo += post_hits * count
        ntewpr += tr_pre * count
        ntewpo += tr_post * count
        nel += m * count
        ntl += count
    return FitnessReport(afe, aewpr, aewpo, ntewpr, ntewpo, nel, ntl)


def precision(log_: EventLog, g: DependencyGraph) -> PrecisionReport:
    """Observed eventually-follows pairs over graph-reachable pairs, on the union alphabet."""
    names = list(g.tasks) + [t for t in log_.alphabet if t not in set(g.tasks)]
    pos = {name: k for k, name in enumerate(names)}
    n = len(names)
    fl = np.zeros((n, n), dtype=bool)
    idx = np.array([pos[t] for t in log_.alphabet], dtype=np.intp)
    fl[np.ix_(idx, idx)] = eventually_follows(log_)
    fdg = np.zeros((n, n), dtype=bool)
    fdg[: g.n, : g.n] = reachability(g)
    possible = int(fdg.sum())
    if possible == 0:
        raise EvaluationError("empty reachability: the graph has no arcs")
    return PrecisionReport(int((fl & fdg).sum()), possible)


def f_score(fim: float, prm: float) -> float:
    if fim + prm <= 0:
        return 0.0
    return 2.0 * fim * prm / (fim + prm)


def quality(log_: EventLog, g: DependencyGraph, strict_pseudocode: bool = False) -> QualityReport:
    fit = fitness(log_, g, strict_pseudocode)
    prec = precision(log_, g)
    if fit.fim < 0:
        log.warning("FiM is negative (%.4f): penalties exceed fitting events", fit.fim)
    return QualityReport(fit.fim, prec.prm, f_score(fit.fim, prec.prm), g.an, fit, prec)
