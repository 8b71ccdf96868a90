"""Direct-succession, length-two-repetition and eventually-follows counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loglib import EventLog


@dataclass(frozen=True)
class RelationCounts:
    """``freq[a]`` = |a|, ``direct[a, b]`` = |a>b|, ``repeat2[a, b]`` = |a>>b|."""

    freq: np.ndarray
    direct: np.ndarray
    repeat2: np.ndarray

    @property
    def n(self) -> int:
        return len(self.freq)

    def to_dict(self, alphabet=None) -> dict:
        out = {"freq": self.freq.tolist(), "direct": self.direct.tolist(), "repeat2": self.repeat2.tolist()}
        if alphabet is not None:
            out["alphabet"] = list(alphabet)
        return out


def count_relations(log: EventLog) -> RelationCounts:
    n = log.n_tasks
    freq = np.zeros(n, dtype=np.int64)
    direct = np.zeros((n, n), dtype=np.int64)
    repeat2 = np.zeros((n, n), dtype=np.int64)
    for events, count in log.traces:
        ev = np.asarray(events, dtype=np.intp)
        np.add.at(freq, ev, count)
        if len(ev) >= 2:
            np.add.at(direct, (ev[:-1], ev[1:]), count)
        if len(ev) >= 3:
            # every position t with ev[t] == ev[t+2] is an a,b,a pattern (overlaps included)
            hits = np.nonzero(ev[:-2] == ev[2:])[0]
            np.add.at(repeat2, (ev[hits], ev[hits + 1]), count)
    for m in (freq, direct, repeat2):
        m.setflags(write=False)
    return RelationCounts(freq, direct, repeat2)


def eventually_follows(log: EventLog) -> np.ndarray:
    """Boolean ``fl[x, y]``: some trace has an x strictly before a y."""
    n = log.n_tasks
    fl = np.zeros((n, n), dtype=bool)
    for events, _ in log.traces:
        seen_after: set[int] = set()
        # walk backwards so each event sees the set of tasks after it
        for e in reversed(events):
            if seen_after:
                fl[e, list(seen_after)] = True
            seen_after.add(e)
    fl.setflags(write=False)
    return fl
