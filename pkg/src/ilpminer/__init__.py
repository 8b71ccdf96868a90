"""Dependency-graph discovery from event logs by integer linear programming."""
from .depgraph import DependencyGraph, baseline_threshold_miner, reachability, validate_paths
from .discovery import DiscoveryResult, Prepared, baseline, discover, prepare, score
from .evaluation import f_score, fitness, precision, quality
from .ilpmodel import DiscoveryConfig, IlpModel, Solution, Status, build_model, export_lp, extract_graph
from .loglib import EventLog, ensure_unique_endpoints, load_log, parse_csv, parse_xes
from .measures import DependencyMeasures, dependency_measures
from .relations import RelationCounts, count_relations, eventually_follows
from .solver import SolveLimits, brute_force_solve, solve

__all__ = [
    "DependencyGraph", "baseline_threshold_miner", "reachability", "validate_paths",
    "DiscoveryResult", "Prepared", "baseline", "discover", "prepare", "score",
    "f_score", "fitness", "precision", "quality",
    "DiscoveryConfig", "IlpModel", "Solution", "Status", "build_model", "export_lp", "extract_graph",
    "EventLog", "ensure_unique_endpoints", "load_log", "parse_csv", "parse_xes",
    "DependencyMeasures", "dependency_measures",
    "RelationCounts", "count_relations", "eventually_follows",
    "SolveLimits", "brute_force_solve", "solve",
]
