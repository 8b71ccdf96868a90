"""Command-line interface.

Exit codes: 0 success, 1 solver infeasible or limit reached, 2 input error,
3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import fields, replace

from . import depgraph, loglib
from .discovery import Prepared, discover, prepare, score
from .experiments import (
    FSCORE_FLOORS,
    BASELINE_DEP_THRESH,
    SWEEP_MAX_ARCS_RATIO,
    SweepSpec,
    rows_csv,
    rows_json,
    run_compare,
    run_sweep,
)
from .ilpmodel import DiscoveryConfig, ModelError, build_model, export_lp, parse_extra_row
from .solver import BACKENDS, SolveLimits, SolverError
from .synth import GenerationError, GeneratorSpec, generate_synthetic_log

EXIT_OK, EXIT_SOLVER, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("ilpminer")

# config-file keys (names used in the method description) -> DiscoveryConfig fields
CONFIG_KEYS = {
    "DepThresh": "dep_thresh",
    "SLoopThresh": "sloop_thresh",
    "LoopThresh": "loop_thresh",
    "MaxArcsRatio": "max_arcs_ratio",
    "MaxOutputs": "max_outputs",
    "MaxInputs": "max_inputs",
    "alpha": "alpha",
    "beta": "beta",
    "big_m": "big_m",
    "M": "big_m",
    "sparsity_epsilon": "sparsity_epsilon",
}
INT_FIELDS = {"max_outputs", "max_inputs"}


class InputError(Exception):
    """Raised for problems the user can fix (exit code 2)."""


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.cause = exc


def read_config_file(path: str) -> tuple[dict, list[str]]:
    """Flat ``key = value`` file; ``row = <linear row>`` lines add constraints."""
    values: dict = {}
    rows: list[str] = []
    try:
        text = open(path).read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{no}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key == "row":
            rows.append(value)
            continue
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{no}: unknown key {key!r}")
        name = CONFIG_KEYS[key]
        try:
            values[name] = int(value) if name in INT_FIELDS else float(value)
        except ValueError:
            raise InputError(f"{path}:{no}: bad value {value!r} for {key}") from None
    return values, rows


# ---------------------------------------------------------------------------
# argument groups

def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("log", help="event log (.xes, .csv or canonical .json)")
    p.add_argument("--format", choices=["xes", "csv", "json"], help="override format detection")
    p.add_argument("--case-col", default="case", help="CSV case id column")
    p.add_argument("--activity-col", default="activity", help="CSV activity column")
    p.add_argument("--order-col", default="timestamp", help="CSV ordering column ('' for file order)")


def _add_config(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("discovery configuration")
    g.add_argument("--config", help="key = value file (DepThresh, MaxArcsRatio, ...)")
    g.add_argument("--dep-thresh", type=float)
    g.add_argument("--sloop-thresh", type=float)
    g.add_argument("--loop-thresh", type=float)
    g.add_argument("--max-arcs-ratio", type=float)
    g.add_argument("--max-outputs", type=int)
    g.add_argument("--max-inputs", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--big-m", type=float)
    g.add_argument("--sparsity-epsilon", type=float)
    s = p.add_argument_group("solver")
    s.add_argument("--time-limit", type=float, default=math.inf, help="seconds per solve")
    s.add_argument("--node-limit", type=int, default=1_000_000)
    s.add_argument("--gap", type=float, default=0.0, help="relative optimality gap")
    s.add_argument("--backend", choices=BACKENDS, help="default: highs (or external if configured)")
    p.add_argument("--fim-strict-pseudocode", action="store_true",
                   help="trace-level fitting flags when counting fitting events")


def _config(args) -> tuple[DiscoveryConfig, list[str]]:
    values, rows = read_config_file(args.config) if getattr(args, "config", None) else ({}, [])
    for f in fields(DiscoveryConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    try:
        return DiscoveryConfig(**values), rows
    except (ModelError, TypeError) as exc:
        raise InputError(f"bad configuration: {exc}") from None


def _limits(args) -> SolveLimits:
    try:
        return SolveLimits(args.time_limit, args.node_limit, args.gap)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load(args) -> Prepared:
    cols = {"case": args.case_col, "activity": args.activity_col, "order": args.order_col or None}
    try:
        raw = loglib.load_log(args.log, args.format, cols)
    except OSError as exc:
        raise InputError(f"cannot read {args.log}: {exc.strerror}") from None
    except loglib.LogError as exc:
        raise StageError("parse", exc) from None
    return prepare(raw)


def _write(path: str, text: str, written: list[str]) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    written.append(path)


def _extra_rows(rows: list[str], tasks) -> list:
    out = []
    for k, text in enumerate(rows):
        try:
            out.append(parse_extra_row(text, tasks, name=f"user{k}"))
        except ModelError as exc:
            raise InputError(str(exc)) from None
    return out


def _quality_table(q) -> str:
    return (f"{'AN':>6} {'FiM':>8} {'PrM':>8} {'F-score':>8}\n"
            f"{q.an:>6} {q.fim:>8.4f} {q.prm:>8.4f} {q.fscore:>8.4f}\n")


# ---------------------------------------------------------------------------
# commands

def cmd_discover(args) -> int:
    cfg, row_texts = _config(args)
    prepared = _load(args)
    lg = prepared.log
    extra = _extra_rows(row_texts, lg.alphabet)
    out_dir = args.out
    written: list[str] = []
    try:
        if args.export_lp or args.lp_only:
            model = build_model(prepared.measures, lg.start, lg.end, cfg, tasks=lg.alphabet, extra_rows=extra)
            _write(args.export_lp or os.path.join(out_dir, "model.lp"), export_lp(model), written)
            if args.lp_only:
                print(f"wrote {written[-1]} ({model.n_vars} variables, {model.n_rows} rows)")
                return EXIT_OK
        try:
            res = discover(prepared, cfg, _limits(args), args.backend, extra)
        except (ModelError, SolverError) as exc:
            raise StageError("solve", exc) from None
        if res.graph is None:
            print(f"solver status: {res.solution.status.value}", file=sys.stderr)
            for p in written:
                os.remove(p)
            return EXIT_SOLVER
        if not res.paths.ok:
            raise StageError("validate", RuntimeError(f"discovered graph fails path check: {res.paths}"))
        q = score(prepared, res.graph, args.fim_strict_pseudocode)
        report = {
            "status": res.solution.status.value,
            "objective": res.solution.objective_value,
            "solve_time": res.solve_time,
            "nodes": res.solution.stats.nodes,
            "n_tasks": res.model.n,
            "n_variables": res.model.n_vars,
            "n_rows": res.model.n_rows,
            "paths_ok": res.paths.ok,
            "quality": q.to_dict() if q else None,
            "arcs": [list(a) for a in res.graph.named_arcs()],
        }
        _write(os.path.join(out_dir, "graph.json"), depgraph.to_json(res.graph), written)
        _write(os.path.join(out_dir, "graph.dot"), depgraph.to_dot(res.graph), written)
        _write(os.path.join(out_dir, "report.json"), json.dumps(report, indent=1), written)
    except BaseException:
        for p in written:
            if os.path.exists(p):
                os.remove(p)
        raise
    if q:
        sys.stdout.write(_quality_table(q))
    print(f"wrote {', '.join(written)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    prepared = _load(args)
    try:
        graph = depgraph.from_json(open(args.graph).read())
    except OSError as exc:
        raise InputError(f"cannot read {args.graph}: {exc.strerror}") from None
    except depgraph.GraphFormatError as exc:
        raise StageError("graph", exc) from None
    from .evaluation import EvaluationError, quality
    try:
        q = quality(prepared.log, graph, args.fim_strict_pseudocode)
    except EvaluationError as exc:
        raise StageError("evaluate", exc) from None
    doc = q.to_dict()
    doc["paths_ok"] = depgraph.validate_paths(graph).ok
    if args.json:
        print(json.dumps(doc, indent=1))
    else:
        sys.stdout.write(_quality_table(q))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(json.dumps(doc, indent=1))
    return EXIT_OK


def _parse_values(text: str, parameter: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise InputError(f"bad sweep values {text!r}") from None
    if parameter in INT_FIELDS:
        vals = tuple(int(v) for v in vals)
    return vals


def cmd_sweep(args) -> int:
    cfg, row_texts = _config(args)
    try:
        spec = SweepSpec(args.parameter, _parse_values(args.values, args.parameter) if args.values
                         else SWEEP_MAX_ARCS_RATIO)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    prepared = _load(args)
    extra = _extra_rows(row_texts, prepared.log.alphabet)
    rows = run_sweep(prepared, spec, cfg, _limits(args), args.backend, args.fim_strict_pseudocode, extra)
    text = rows_csv(rows)
    sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(rows_json(rows))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, _ = _config(args)
    prepared = _load(args)
    ratios = _parse_values(args.ratios, "max_arcs_ratio") if args.ratios else SWEEP_MAX_ARCS_RATIO
    thresholds = _parse_values(args.thresholds, "dep_thresh") if args.thresholds else BASELINE_DEP_THRESH
    comp = run_compare(prepared, cfg, _limits(args), ratios, thresholds, FSCORE_FLOORS, args.backend,
                       args.fim_strict_pseudocode)
    text = comp.summary_csv()
    sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(json.dumps(comp.to_dict(), indent=1))
    return EXIT_OK


def cmd_synth(args) -> int:
    tree = None
    if args.tree:
        try:
            tree = _tuplify(json.loads(args.tree))
        except json.JSONDecodeError as exc:
            raise InputError(f"--tree is not valid JSON: {exc.msg}") from None
    spec = GeneratorSpec(args.n_activities, args.seq_weight, args.xor_weight, args.and_weight,
                         args.loop_prob, args.redo_prob, tree)
    try:
        lg = generate_synthetic_log(spec, args.traces, args.noise, args.seed)
    except GenerationError as exc:
        raise InputError(str(exc)) from None
    written: list[str] = []
    _write(args.output, loglib.to_json(lg), written)
    if args.xes:
        _write(args.xes, loglib.to_xes(lg), written)
    print(f"{lg.n_traces} traces, {len(lg.traces)} distinct, {lg.n_tasks} tasks -> {', '.join(written)}")
    return EXIT_OK


def _tuplify(node):
    if isinstance(node, list):
        return tuple(_tuplify(c) for c in node)
    return node


def cmd_export_lp(args) -> int:
    cfg, row_texts = _config(args)
    prepared = _load(args)
    lg = prepared.log
    model = build_model(prepared.measures, lg.start, lg.end, cfg, tasks=lg.alphabet,
                        extra_rows=_extra_rows(row_texts, lg.alphabet))
    text = export_lp(model) if args.format_out == "lp" else model.to_json()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_relations_dump(args) -> int:
    from .relations import count_relations, eventually_follows
    lg = _load(args).log
    doc = count_relations(lg).to_dict(lg.alphabet)
    doc["eventually_follows"] = eventually_follows(lg).astype(int).tolist()
    print(json.dumps(doc))
    return EXIT_OK


def cmd_measures_dump(args) -> int:
    prepared = _load(args)
    print(json.dumps(prepared.measures.to_dict(prepared.log.alphabet)))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilpminer", description="Optimal dependency-graph discovery by integer programming.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="solve the ILP and write graph + quality report")
    _add_input(p)
    _add_config(p)
    p.add_argument("-o", "--out", default="out", help="output directory")
    p.add_argument("--export-lp", metavar="PATH", help="also write the model in LP format")
    p.add_argument("--lp-only", action="store_true", help="write the LP file and stop")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("evaluate", help="score a graph JSON against a log")
    _add_input(p)
    p.add_argument("graph", help="graph JSON")
    p.add_argument("--fim-strict-pseudocode", action="store_true")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.add_argument("--output", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="one discovery per parameter value")
    _add_input(p)
    _add_config(p)
    p.add_argument("--parameter", default="max_arcs_ratio")
    p.add_argument("--values", help="comma-separated (default: 2.1,...,1.1)")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="ILP sweep versus threshold baseline")
    _add_input(p)
    _add_config(p)
    p.add_argument("--ratios", help="MaxArcsRatio grid (default 2.1..1.1)")
    p.add_argument("--thresholds", help="baseline dependency thresholds (default 0.80..1.00)")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic log")
    p.add_argument("-o", "--output", required=True, help="canonical JSON log path")
    p.add_argument("--xes", help="also write XES here")
    p.add_argument("--n-activities", type=int, default=8)
    p.add_argument("--seq-weight", type=float, default=1.0)
    p.add_argument("--xor-weight", type=float, default=1.0)
    p.add_argument("--and-weight", type=float, default=1.0)
    p.add_argument("--loop-prob", type=float, default=0.0)
    p.add_argument("--redo-prob", type=float, default=0.4)
    p.add_argument("--tree", help='explicit process tree as JSON, e.g. ["seq","s",["and","a","b"],"e"]')
    p.add_argument("--traces", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("export-lp", help="write the model without solving")
    _add_input(p)
    _add_config(p)
    p.add_argument("--output")
    p.add_argument("--format-out", choices=["lp", "json"], default="lp")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("relations-dump", help="relation counts as JSON")
    _add_input(p)
    p.set_defaults(func=cmd_relations_dump)

    p = sub.add_parser("measures-dump", help="dependency measures as JSON")
    _add_input(p)
    p.set_defaults(func=cmd_measures_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return EXIT_INPUT if exc.stage in ("parse", "graph", "evaluate") else EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort reporting for the CLI
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
