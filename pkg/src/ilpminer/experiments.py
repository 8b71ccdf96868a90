"""Configuration sweeps and ILP-versus-baseline comparison reports."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace

from .depgraph import validate_paths
from .discovery import Prepared, baseline, discover, score
from .ilpmodel import DiscoveryConfig, ModelError
from .solver import SolveLimits, SolverError

# MaxArcsRatio for configurations C1..C11; all thresholds 0, degree caps 1000
SWEEP_MAX_ARCS_RATIO = (2.1, 2.0, 1.9, 1.8, 1.7, 1.6, 1.5, 1.4, 1.3, 1.2, 1.1)
# dependency thresholds of the threshold miners, same eleven steps
BASELINE_DEP_THRESH = (0.80, 0.82, 0.84, 0.86, 0.88, 0.90, 0.92, 0.94, 0.96, 0.98, 1.00)
FSCORE_FLOORS = (0.6, 0.7, 0.8, 0.9)

SWEEPABLE = ("dep_thresh", "sloop_thresh", "loop_thresh", "max_arcs_ratio", "max_outputs", "max_inputs",
             "alpha", "beta", "big_m", "sparsity_epsilon")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose from {', '.join(SWEEPABLE)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")


@dataclass
class Row:
    method: str
    config: str
    parameter: str
    value: float
    status: str
    an: int | None = None
    fim: float | None = None
    prm: float | None = None
    fscore: float | None = None
    solve_time: float | None = None
    paths_ok: bool | None = None

    @property
    def usable(self) -> bool:
        return self.status == "optimal" and bool(self.paths_ok) and self.fscore is not None


ROW_FIELDS = [f for f in Row.__dataclass_fields__]


def _fill(row: Row, prepared: Prepared, graph, strict: bool) -> Row:
    row.an = graph.an
    row.paths_ok = validate_paths(graph).ok
    q = score(prepared, graph, strict)
    if q is not None:
        row.fim, row.prm, row.fscore = q.fim, q.prm, q.fscore
    return row


def run_sweep(prepared: Prepared, sweep: SweepSpec, base: DiscoveryConfig | None = None,
              limits: SolveLimits | None = None, backend: str | None = None, strict: bool = False,
              extra_rows=None) -> list[Row]:
    """One ILP discovery per value; failures are recorded, never raised."""
    base = base or DiscoveryConfig()
    rows = []
    for k, value in enumerate(sweep.values, start=1):
        row = Row("ilp", f"C{k}", sweep.parameter, value, "error")
        try:
            cfg = replace(base, **{sweep.parameter: value})
            res = discover(prepared, cfg, limits, backend, extra_rows)
        except (ModelError, SolverError, ValueError) as exc:
            row.status = f"error: {exc}"
            rows.append(row)
            continue
        row.status = res.solution.status.value
        row.solve_time = res.solve_time
        if res.graph is not None:
            _fill(row, prepared, res.graph, strict)
        rows.append(row)
    return rows


def run_baseline_grid(prepared: Prepared, thresholds=BASELINE_DEP_THRESH, sloop_thresh: float = 0.9,
                      loop_thresh: float = 0.9, strict: bool = False) -> list[Row]:
    rows = []
    for k, t in enumerate(thresholds, start=1):
        g = baseline(prepared, t, sloop_thresh, loop_thresh)
        rows.append(_fill(Row("baseline", f"C{k}", "dep_thresh", t, "optimal", solve_time=0.0), prepared, g, strict))
    return rows


def min_an(rows: list[Row], floor: float) -> Row | None:
    """Smallest-AN usable row with F-score at or above ``floor`` (ties: higher F-score, then grid order)."""
    ok = [r for r in rows if r.usable and r.fscore >= floor]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.an, -r.fscore))


def best_fscore(rows: list[Row]) -> Row | None:
    ok = [r for r in rows if r.usable]
    if not ok:
        return None
    return max(ok, key=lambda r: (r.fscore, -r.an))


def path_failure_rate(rows: list[Row]) -> float | None:
    done = [r for r in rows if r.paths_ok is not None]
    if not done:
        return None
    return sum(not r.paths_ok for r in done) / len(done)


@dataclass
class Comparison:
    rows: list[Row]
    best: dict[str, Row | None] = field(default_factory=dict)
    min_an: dict[str, dict[float, Row | None]] = field(default_factory=dict)
    path_failures: dict[str, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        # timings are left out so repeated runs produce identical reports
        def r(x):
            if x is None:
                return None
            d = asdict(x)
            d.pop("solve_time")
            return d
        return {
            "rows": [r(x) for x in self.rows],
            "best_fscore": {m: r(x) for m, x in self.best.items()},
            "min_an": {m: {str(f): r(x) for f, x in d.items()} for m, d in self.min_an.items()},
            "path_failure_rate": self.path_failures,
        }

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "measure", "floor", "config", "an", "fim", "prm", "fscore"])
        for m in self.best:
            b = self.best[m]
            w.writerow([m, "best_fscore", "", *(_cells(b))])
            for floor, row in self.min_an[m].items():
                w.writerow([m, "min_an", floor, *(_cells(row))])
            rate = self.path_failures[m]
            w.writerow([m, "path_failure_pct", "", "", "", "", "", "" if rate is None else f"{100 * rate:.1f}"])
        return buf.getvalue()


def _cells(row: Row | None) -> list:
    if row is None:
        return ["-", "", "", "", ""]
    return [row.config, row.an, _f(row.fim), _f(row.prm), _f(row.fscore)]


def _f(x):
    return "" if x is None else f"{x:.4f}"


def run_compare(prepared: Prepared, base: DiscoveryConfig | None = None, limits: SolveLimits | None = None,
                ratios=SWEEP_MAX_ARCS_RATIO, thresholds=BASELINE_DEP_THRESH, floors=FSCORE_FLOORS,
                backend: str | None = None, strict: bool = False) -> Comparison:
    ilp = run_sweep(prepared, SweepSpec("max_arcs_ratio", tuple(ratios)), base, limits, backend, strict)
    base_rows = run_baseline_grid(prepared, thresholds, strict=strict)
    out = Comparison(ilp + base_rows)
    for name, rows in (("ilp", ilp), ("baseline", base_rows)):
        out.best[name] = best_fscore(rows)
        out.min_an[name] = {f: min_an(rows, f) for f in floors}
        out.path_failures[name] = path_failure_rate(rows)
    return out


def rows_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for r in rows:
        d = asdict(r)
        w.writerow(["" if d[k] is None else (_f(d[k]) if isinstance(d[k], float) and k != "value" else d[k])
                    for k in ROW_FIELDS])
    return buf.getvalue()


def rows_json(rows: list[Row]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1)
