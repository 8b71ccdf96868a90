"""Heuristics-Miner style dependency measures for arcs, short loops and length-two loops."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .relations import RelationCounts


@dataclass(frozen=True)
class DependencyMeasures:
    d: np.ndarray  # arcs, antisymmetric, diagonal 0 (unused)
    s: np.ndarray  # self loops
    l: np.ndarray  # length-two loops, symmetric, diagonal 0 (unused)

    @property
    def n(self) -> int:
        return len(self.s)

    def to_dict(self, alphabet=None) -> dict:
        out = {"d": self.d.tolist(), "s": self.s.tolist(), "l": self.l.tolist()}
        if alphabet is not None:
            out["alphabet"] = list(alphabet)
        return out


def dependency_measures(counts: RelationCounts) -> DependencyMeasures:
    direct = counts.direct
    fwd_minus_back = direct - direct.T
    both = direct + direct.T
    d = fwd_minus_back / (both + 1.0)
    np.fill_diagonal(d, 0.0)

    loops = np.diag(direct).astype(np.float64)
    s = loops / (loops + 1.0)

    rep = counts.repeat2 + counts.repeat2.T
    l = rep / (rep + 1.0)
    np.fill_diagonal(l, 0.0)

    for m in (d, s, l):
        m.setflags(write=False)
    return DependencyMeasures(d, s, l)
