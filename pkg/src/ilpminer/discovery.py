"""End-to-end discovery: log -> measures -> ILP -> solved graph."""
from __future__ import annotations

import time
from dataclasses import dataclass

from .depgraph import DependencyGraph, PathReport, baseline_threshold_miner, validate_paths
from .evaluation import QualityReport, quality
from .ilpmodel import Constraint, DiscoveryConfig, IlpModel, Solution, build_model, extract_graph
from .loglib import EventLog, ensure_unique_endpoints
from .measures import DependencyMeasures, dependency_measures
from .relations import count_relations
from .solver import SolveLimits, solve


@dataclass
class Prepared:
    log: EventLog
    measures: DependencyMeasures


@dataclass
class DiscoveryResult:
    model: IlpModel
    solution: Solution
    graph: DependencyGraph | None
    paths: PathReport | None
    solve_time: float


def prepare(log: EventLog) -> Prepared:
    if log.start is None or log.end is None:
        log = ensure_unique_endpoints(log)
    return Prepared(log, dependency_measures(count_relations(log)))


def discover(prepared: Prepared, cfg: DiscoveryConfig | None = None, limits: SolveLimits | None = None,
             backend: str | None = None, extra_rows: list[Constraint] | None = None) -> DiscoveryResult:
    log = prepared.log
    model = build_model(prepared.measures, log.start, log.end, cfg, tasks=log.alphabet, extra_rows=extra_rows)
    t0 = time.perf_counter()
    sol = solve(model, limits, backend=backend)
    elapsed = time.perf_counter() - t0
    if not sol.optimal:
        return DiscoveryResult(model, sol, None, None, elapsed)
    graph = extract_graph(model, sol)
    return DiscoveryResult(model, sol, graph, validate_paths(graph), elapsed)


def baseline(prepared: Prepared, dep_thresh: float, sloop_thresh: float = 0.9, loop_thresh: float = 0.9) -> DependencyGraph:
    log = prepared.log
    return baseline_threshold_miner(prepared.measures, log.start, log.end, dep_thresh, sloop_thresh, loop_thresh,
                                    tasks=log.alphabet)


def score(prepared: Prepared, graph: DependencyGraph, strict_pseudocode: bool = False) -> QualityReport | None:
    """Quality of ``graph``; None when precision is undefined (arcless graph)."""
    if graph.an == 0:
        return None
    return quality(prepared.log, graph, strict_pseudocode)
