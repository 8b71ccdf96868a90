"""Block-structured synthetic logs with per-event noise.

Process trees are nested tuples::

    "a"                          activity
    ("seq", c1, c2, ...)         sequence
    ("xor", c1, c2, ...)         exclusive choice, uniform
    ("and", c1, c2, ...)         interleaving of the children
    ("loop", body)               body, then repeat with probability ``redo_prob``
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .loglib import EventLog, ensure_unique_endpoints

OPERATORS = ("seq", "xor", "and", "loop")


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of the random tree (or an explicit ``tree``).

    ``seq_weight``/``xor_weight``/``and_weight`` set the odds of each block
    operator; ``loop_prob`` is the chance an inner block is wrapped in a loop.
    """

    n_activities: int = 8
    seq_weight: float = 1.0
    xor_weight: float = 1.0
    and_weight: float = 1.0
    loop_prob: float = 0.0
    redo_prob: float = 0.4
    tree: object = None


def activity_names(n: int) -> list[str]:
    width = len(str(n))
    return [f"t{i:0{width}d}" for i in range(1, n + 1)]


def random_tree(spec: GeneratorSpec, rng: random.Random):
    names = activity_names(spec.n_activities)
    ops = ["seq", "xor", "and"]
    weights = [spec.seq_weight, spec.xor_weight, spec.and_weight]
    if sum(weights) <= 0:
        raise GenerationError("all block weights are zero")

    def build(acts: list[str], depth: int):
        if len(acts) == 1:
            node = acts[0]
        else:
            k = min(len(acts), rng.choice((2, 2, 3)))
            cuts = sorted(rng.sample(range(1, len(acts)), k - 1))
            parts = [acts[i:j] for i, j in zip([0] + cuts, cuts + [len(acts)])]
            op = rng.choices(ops, weights)[0]
            node = (op, *(build(p, depth + 1) for p in parts))
        if depth > 0 and spec.loop_prob > 0 and rng.random() < spec.loop_prob:
            node = ("loop", node)
        return node

    # the outermost block is a sequence so every trace has some fixed skeleton
    return ("seq", build(names, 0))


def tree_activities(tree) -> set[str]:
    if isinstance(tree, str):
        return {tree}
    op, *children = tree
    if op not in OPERATORS:
        raise GenerationError(f"unknown operator {op!r}")
    if op == "loop" and len(children) != 1:
        raise GenerationError("loop takes exactly one body")
    if not children:
        raise GenerationError(f"empty {op} block")
    out: set[str] = set()
    for c in children:
        out |= tree_activities(c)
    return out


def _play(tree, rng: random.Random, redo_prob: float) -> list[str]:
    if isinstance(tree, str):
        return [tree]
    op, *children = tree
    if op == "seq":
        return [a for c in children for a in _play(c, rng, redo_prob)]
    if op == "xor":
        return _play(rng.choice(children), rng, redo_prob)
    if op == "loop":
        out = _play(children[0], rng, redo_prob)
        while rng.random() < redo_prob:
            out += _play(children[0], rng, redo_prob)
        return out
    # and: random interleaving, each child's order kept
    queues = [_play(c, rng, redo_prob) for c in children]
    out = []
    while any(queues):
        live = [q for q in queues if q]
        pick = rng.choices(live, [len(q) for q in live])[0]
        out.append(pick.pop(0))
    return out


def add_noise(trace: list[str], rate: float, rng: random.Random) -> list[str]:
    """Per event, with probability ``rate``: swap with neighbour, skip, or duplicate."""
    out = list(trace)
    i = 0
    while i < len(out):
        if rng.random() < rate:
            kind = rng.choice(("swap", "skip", "duplicate"))
            if kind == "swap" and len(out) > 1:
                j = i + 1 if i + 1 < len(out) else i - 1
                out[i], out[j] = out[j], out[i]
                i += 1
            elif kind == "skip" and len(out) > 1:
                del out[i]
                continue
            elif kind == "duplicate":
                out.insert(i, out[i])
                i += 1
        i += 1
    return out


def generate_synthetic_log(spec: GeneratorSpec, n_traces: int, noise_rate: float = 0.0, seed: int = 0) -> EventLog:
    """Simulate ``n_traces`` traces, inject noise, and normalize endpoints."""
    if n_traces < 1:
        raise GenerationError("n_traces must be at least 1")
    if not 0.0 <= noise_rate <= 1.0:
        raise GenerationError("noise_rate must lie in [0, 1]")
    rng = random.Random(seed)
    if spec.tree is not None:
        tree = spec.tree
    else:
        if spec.n_activities < 2:
            raise GenerationError("alphabet size must be at least 2")
        tree = random_tree(spec, rng)
    acts = tree_activities(tree)
    if len(acts) < 2 and spec.tree is None:
        raise GenerationError("alphabet size must be at least 2")

    sequences = []
    for _ in range(n_traces):
        trace = _play(tree, rng, spec.redo_prob)
        if not trace:
            raise GenerationError("process tree produced an empty trace")
        if noise_rate > 0:
            trace = add_noise(trace, noise_rate, rng)
        sequences.append(trace)
    return ensure_unique_endpoints(EventLog.from_sequences(sequences))
