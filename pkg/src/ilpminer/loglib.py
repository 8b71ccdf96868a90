"""Event-log ingestion: XES and CSV parsing, canonical JSON, endpoint normalization.

An :class:`EventLog` stores traces as a multiset (distinct trace -> multiplicity)
over a dense task alphabet, so relation counting costs O(distinct traces).
"""
from __future__ import annotations

import csv
import io
import json
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Iterable, Mapping, Sequence

START_NAME = "__start__"
END_NAME = "__end__"


class LogError(ValueError):
    """Base class for log ingestion problems."""


class LogParseError(LogError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class LogSchemaError(LogError):
    pass


class LogConfigError(LogError):
    pass


class LogRowError(LogError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class TaskId:
    index: int
    name: str


@dataclass(frozen=True)
class EventLog:
    """Immutable trace multiset over ``alphabet``.

    ``traces`` holds ``(events, count)`` pairs with events given as alphabet
    indices; distinct traces appear once, in first-seen order.
    """

    alphabet: tuple[str, ...]
    traces: tuple[tuple[tuple[int, ...], int], ...]
    start: int | None = None
    end: int | None = None
    artificial_start: bool = False
    artificial_end: bool = False
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.alphabet)})
        if len(self._index) != len(self.alphabet):
            raise LogSchemaError("duplicate task names in alphabet")
        n = len(self.alphabet)
        for events, count in self.traces:
            if not events:
                raise LogSchemaError("empty trace")
            if count < 1:
                raise LogSchemaError("trace multiplicity must be positive")
            if any(e < 0 or e >= n for e in events):
                raise LogSchemaError("trace references a task outside the alphabet")

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]], alphabet: Sequence[str] | None = None) -> "EventLog":
        """Build a log from task-name sequences (repeats become multiplicities)."""
        names = list(alphabet) if alphabet is not None else []
        index = {name: i for i, name in enumerate(names)}
        counts: Counter = Counter()
        order: list[tuple[int, ...]] = []
        for seq in sequences:
            if len(seq) == 0:
                raise LogSchemaError("empty trace")
            encoded = []
            for name in seq:
                if name not in index:
                    index[name] = len(names)
                    names.append(name)
                encoded.append(index[name])
            key = tuple(encoded)
            if key not in counts:
                order.append(key)
            counts[key] += 1
        return cls(tuple(names), tuple((t, counts[t]) for t in order))

    @property
    def n_tasks(self) -> int:
        return len(self.alphabet)

    @property
    def tasks(self) -> list[TaskId]:
        return [TaskId(i, name) for i, name in enumerate(self.alphabet)]

    def index_of(self, name: str) -> int:
        return self._index[name]

    def task(self, name: str) -> TaskId:
        return TaskId(self._index[name], name)

    @property
    def n_traces(self) -> int:
        return sum(count for _, count in self.traces)

    @property
    def n_events(self) -> int:
        return sum(len(events) * count for events, count in self.traces)

    def sequences(self) -> list[tuple[str, ...]]:
        """Expanded list of traces as name tuples (multiplicity repeated)."""
        out = []
        for events, count in self.traces:
            names = tuple(self.alphabet[e] for e in events)
            out.extend([names] * count)
        return out

    def multiset(self) -> Counter:
        """Counter of name-tuples; alphabet-order independent, used for comparisons."""
        c: Counter = Counter()
        for events, count in self.traces:
            c[tuple(self.alphabet[e] for e in events)] += count
        return c


# ---------------------------------------------------------------------------
# XES

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_xes(data: bytes | str) -> EventLog:
    """Parse the XES subset we care about: ``trace``/``event`` with ``concept:name``.

    Events carrying a ``lifecycle:transition`` other than ``complete`` are
    dropped. Timestamps are read but do not affect ordering.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise LogParseError(f"malformed XES: {exc.msg if hasattr(exc, 'msg') else exc}", line, col) from None

    if _local(root.tag) != "log":
        raise LogSchemaError(f"root element is <{_local(root.tag)}>, expected <log>")

    sequences = []
    for t_no, trace in enumerate(el for el in root if _local(el.tag) == "trace"):
        trace_name = _string_attr(trace, "concept:name") or f"#{t_no}"
        seq = []
        for event in (el for el in trace if _local(el.tag) == "event"):
            name = _string_attr(event, "concept:name")
            if name is None:
                raise LogSchemaError(f"event without concept:name in trace {trace_name!r}")
            lifecycle = _string_attr(event, "lifecycle:transition")
            if lifecycle is not None and lifecycle.lower() != "complete":
                continue
            _date_attr(event, "time:timestamp")  # validated, not used for ordering
            seq.append(name)
        if not seq:
            raise LogSchemaError(f"trace {trace_name!r} has no complete events")
        sequences.append(seq)
    return EventLog.from_sequences(sequences)


def _string_attr(el: ET.Element, key: str) -> str | None:
    for child in el:
        if _local(child.tag) == "string" and child.get("key") == key:
            return child.get("value")
    return None


def _date_attr(el: ET.Element, key: str) -> datetime | None:
    for child in el:
        if _local(child.tag) == "date" and child.get("key") == key:
            try:
                return _parse_time(child.get("value", ""))
            except ValueError:
                raise LogSchemaError(f"bad {key} value {child.get('value')!r}") from None
    return None


def _parse_time(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def to_xes(log: EventLog) -> str:
    """Serialize to a minimal XES document (one ``<trace>`` per trace instance)."""
    root = ET.Element("log", {"xes.version": "1.0", "xmlns": "http://www.xes-standard.org/"})
    ET.SubElement(root, "extension", {"name": "Concept", "prefix": "concept", "uri": "http://www.xes-standard.org/concept.xesext"})
    case = 0
    for events, count in log.traces:
        for _ in range(count):
            trace = ET.SubElement(root, "trace")
            ET.SubElement(trace, "string", {"key": "concept:name", "value": f"case_{case}"})
            case += 1
            for e in events:
                ev = ET.SubElement(trace, "event")
                ET.SubElement(ev, "string", {"key": "concept:name", "value": log.alphabet[e]})
                ET.SubElement(ev, "string", {"key": "lifecycle:transition", "value": "complete"})
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


# ---------------------------------------------------------------------------
# CSV

def _order_key(raw: str, row: int):
    raw = raw.strip()
    try:
        return (0, float(raw))
    except ValueError:
        pass
    try:
        stamp = _parse_time(raw)
    except ValueError:
        raise LogRowError(f"unparsable order value {raw!r}", row) from None
    return (1, stamp.timestamp())


def parse_csv(data: bytes | str, case: str = "case", activity: str = "activity", order: str | None = "timestamp") -> EventLog:
    """Group CSV rows by ``case`` and order each case by ``order``.

    ``order`` may be numeric or an ISO timestamp; ties keep file order. With
    ``order=None`` rows are taken in file order. Row numbers in errors are
    1-based and count the header as row 1.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(data))
    if reader.fieldnames is None:
        raise LogConfigError("CSV input has no header row")
    needed = [case, activity] + ([order] if order else [])
    missing = [c for c in needed if c not in reader.fieldnames]
    if missing:
        raise LogConfigError(f"missing column(s): {', '.join(missing)}")

    cases: dict[str, list] = {}
    for row_no, row in enumerate(reader, start=2):
        key = _order_key(row[order], row_no) if order else (0, 0.0)
        name = row[activity]
        if name is None or name == "":
            raise LogRowError("empty activity", row_no)
        cases.setdefault(row[case], []).append((key, row_no, name))

    sequences = []
    for rows in cases.values():
        kinds = {k[0] for k, _, _ in rows}
        if len(kinds) > 1:
            raise LogRowError("mixed numeric and timestamp order values in one case", rows[0][1])
        rows.sort(key=lambda r: (r[0], r[1]))
        sequences.append([name for _, _, name in rows])
    return EventLog.from_sequences(sequences)


def to_csv(log: EventLog, case: str = "case", activity: str = "activity", order: str = "timestamp") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([case, activity, order])
    case_no = 0
    for events, count in log.traces:
        for _ in range(count):
            for pos, e in enumerate(events):
                writer.writerow([f"c{case_no}", log.alphabet[e], pos])
            case_no += 1
    return buf.getvalue()


# ---------------------------------------------------------------------------
# canonical JSON

def to_json(log: EventLog) -> str:
    doc = {
        "alphabet": list(log.alphabet),
        "traces": [{"events": list(events), "count": count} for events, count in log.traces],
        "start": log.start,
        "end": log.end,
    }
    if log.artificial_start or log.artificial_end:
        doc["artificial"] = [log.artificial_start, log.artificial_end]
    return json.dumps(doc, indent=1)


def from_json(text: str | bytes) -> EventLog:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LogParseError(f"malformed JSON log: {exc.msg}", exc.lineno, exc.colno) from None
    try:
        artificial = doc.get("artificial", [False, False])
        return EventLog(
            alphabet=tuple(doc["alphabet"]),
            traces=tuple((tuple(int(e) for e in t["events"]), int(t.get("count", 1))) for t in doc["traces"]),
            start=doc.get("start"),
            end=doc.get("end"),
            artificial_start=bool(artificial[0]),
            artificial_end=bool(artificial[1]),
        )
    except (KeyError, TypeError) as exc:
        raise LogSchemaError(f"JSON log missing field: {exc}") from None


def load_log(path: str, fmt: str | None = None, csv_columns: Mapping[str, str | None] | None = None) -> EventLog:
    """Read a log file; ``fmt`` defaults to the file suffix (xes, csv, json)."""
    fmt = (fmt or path.rsplit(".", 1)[-1]).lower()
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "xes":
        return parse_xes(data)
    if fmt == "csv":
        return parse_csv(data, **(csv_columns or {}))
    if fmt == "json":
        return from_json(data)
    raise LogConfigError(f"unknown log format {fmt!r}")


# ---------------------------------------------------------------------------
# endpoints

def _unique_endpoint(log: EventLog, first: bool) -> int | None:
    pos = 0 if first else -1
    candidate = None
    for events, _ in log.traces:
        t = events[pos]
        if candidate is None:
            candidate = t
        elif t != candidate:
            return None
    for events, _ in log.traces:
        inner = events[1:] if first else events[:-1]
        if candidate in inner:
            return None
    return candidate


def _fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def ensure_unique_endpoints(log: EventLog) -> EventLog:
    """Designate unique start/end tasks, adding artificial ones when needed.

    A task qualifies as start when it opens every trace and occurs nowhere
    else (symmetrically for end). A length-1 trace cannot host distinct
    start and end, so both sides are then made artificial.
    """
    start = _unique_endpoint(log, first=True)
    end = _unique_endpoint(log, first=False)
    if start is not None and start == end:
        start = end = None

    alphabet = list(log.alphabet)
    taken = set(alphabet)
    art_start = art_end = False
    if start is None:
        start = len(alphabet)
        name = _fresh_name(START_NAME, taken)
        alphabet.append(name)
        taken.add(name)
        art_start = True
    if end is None:
        end = len(alphabet)
        alphabet.append(_fresh_name(END_NAME, taken))
        art_end = True

    traces = []
    for events, count in log.traces:
        ev = events
        if art_start:
            ev = (start,) + ev
        if art_end:
            ev = ev + (end,)
        traces.append((ev, count))
    return EventLog(tuple(alphabet), tuple(traces), start, end, art_start, art_end)


def merge(a: EventLog, b: EventLog) -> EventLog:
    """Multiset union by task name (endpoint designations are dropped)."""
    return EventLog.from_sequences(a.sequences() + b.sequences(), alphabet=a.alphabet)


def with_endpoints(log: EventLog, start: str, end: str) -> EventLog:
    return replace(log, start=log.index_of(start), end=log.index_of(end))
