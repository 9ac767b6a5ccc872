"""Cube generation: bigram-guided sampling of operation sequences.

A cube fixes the operation of every line and leaves arguments open; it is
the unit of parallel work.  Cubes are sampled from a bigram model over
adjacent operation pairs, smoothed so unseen pairs keep probability mass,
and decayed so stale evidence fades.  A trie records every cube handed out,
with per-subtree counts so exhausted regions are never re-entered and no
cube is generated twice, across all generators of a run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .dsl import COMPLEX_JOINS, OPERATION_ORDER

EMPTY = None  # the empty-prefix symbol for bigram keys


@dataclass(frozen=True)
class Cube:
    ops: tuple[str, ...]

    def __post_init__(self):
        if not self.ops:
            raise ValueError("cube must contain at least one operation")

    @property
    def size(self) -> int:
        return len(self.ops)

    def has_complex_join(self) -> bool:
        return any(op in COMPLEX_JOINS for op in self.ops)


@dataclass
class BigramModel:
    delta: float = 0.99999
    alpha: float = 1.0
    scores: dict[tuple[Optional[str], str], float] = field(default_factory=dict)

    def get(self, prev: Optional[str], op: str) -> float:
        return self.scores.get((prev, op), 0.0)

    def update(self, op_sequence: Sequence[str], score: float) -> None:
        """Credit every adjacent pair, plus position-weighted credit toward
        the sequence start (position i adds score/(i+1)^2 to the start
        bigram); the first operation is credited by both terms."""
        prev: Optional[str] = EMPTY
        for op in op_sequence:
            key = (prev, op)
            self.scores[key] = self.scores.get(key, 0.0) + score
            prev = op
        for i, op in enumerate(op_sequence):
            key = (EMPTY, op)
            self.scores[key] = self.scores.get(key, 0.0) + score / (i + 1) ** 2

    def decay(self) -> None:
        for key in self.scores:
            self.scores[key] *= self.delta

    def next_operation(self, prev: Optional[str], allowed: Sequence[str],
                       rng: random.Random,
                       weights: Optional[Sequence[float]] = None) -> str:
        """Sample from p(op) proportional to smoothed scores over `allowed`."""
        if not allowed:
            raise ValueError("no operations to sample from")
        if weights is None:
            weights = [self.get(prev, op) + self.alpha for op in allowed]
        total = sum(weights)
        pick = rng.random() * total
        acc = 0.0
        for op, w in zip(allowed, weights):
            acc += w
            if pick < acc:
                return op
        return allowed[-1]


@dataclass(frozen=True)
class CubeSpace:
    """A slice of the cube universe assigned to one group of workers.

    `require_complex_join` carves the full operation alphabet into the set
    of sequences containing at least one complex join (the F side) while the
    B side simply drops those operations from its alphabet; together they
    cover every sequence exactly once.
    """

    tag: str
    operations: tuple[str, ...]
    require_complex_join: bool = False

    def simple_operations(self) -> tuple[str, ...]:
        return tuple(op for op in self.operations if op not in COMPLEX_JOINS)

    def leaf_count(self, remaining: int, has_complex: bool) -> int:
        total = len(self.operations) ** remaining
        if not self.require_complex_join or has_complex:
            return total
        return total - len(self.simple_operations()) ** remaining


FULL_SPACE = CubeSpace("full", OPERATION_ORDER)
COMPLEX_SPACE = CubeSpace("F", OPERATION_ORDER, require_complex_join=True)
SIMPLE_SPACE = CubeSpace(
    "B", tuple(op for op in OPERATION_ORDER if op not in COMPLEX_JOINS))


def spaces_for(operations=None) -> dict[str, CubeSpace]:
    """Cube spaces per worker tag, optionally over a restricted alphabet."""
    if operations is None:
        return dict(SPACE_BY_TAG)
    ops = tuple(operations)
    simple = tuple(op for op in ops if op not in COMPLEX_JOINS)
    full = CubeSpace("full", ops)
    return {"full": full, "random": full,
            "F": CubeSpace("F", ops, require_complex_join=True),
            "B": CubeSpace("B", simple)}


class _Node:
    __slots__ = ("children", "gen_total", "gen_simple")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.gen_total: dict[int, int] = {}
        self.gen_simple: dict[int, int] = {}


class CubeTrie:
    """Prefix tree over generated cubes with per-subtree generation counts."""

    def __init__(self):
        self.root = _Node()

    def generated(self, node: _Node, remaining: int,
                  space: CubeSpace, has_complex: bool) -> int:
        if not space.require_complex_join:
            if space.tag == "B":
                return node.gen_simple.get(remaining, 0)
            return node.gen_total.get(remaining, 0)
        if has_complex:
            return node.gen_total.get(remaining, 0)
        return (node.gen_total.get(remaining, 0)
                - node.gen_simple.get(remaining, 0))

    def remaining_capacity(self, node: _Node, remaining: int,
                           space: CubeSpace, has_complex: bool) -> int:
        return (space.leaf_count(remaining, has_complex)
                - self.generated(node, remaining, space, has_complex))

    def insert(self, ops: Sequence[str]) -> None:
        size = len(ops)
        simple = not any(op in COMPLEX_JOINS for op in ops)
        node = self.root
        for depth in range(size + 1):
            remaining = size - depth
            node.gen_total[remaining] = node.gen_total.get(remaining, 0) + 1
            if simple:
                node.gen_simple[remaining] = node.gen_simple.get(remaining, 0) + 1
            if depth < size:
                node = node.children.setdefault(ops[depth], _Node())

    def sample(self, space: CubeSpace, size: int, model: Optional[BigramModel],
               rng: random.Random) -> Optional[Cube]:
        """Walk to a fresh cube of `size` within `space`; None when the level
        is exhausted.  Weights follow the bigram model when one is given,
        else uniform."""
        if self.remaining_capacity(self.root, size, space, False) <= 0:
            return None
        node = self.root
        ops: list[str] = []
        has_complex = False
        prev: Optional[str] = EMPTY
        for depth in range(size):
            remaining = size - depth - 1
            options = []
            weights = []
            for op in space.operations:
                child = node.children.get(op)
                child_complex = has_complex or op in COMPLEX_JOINS
                capacity = space.leaf_count(remaining, child_complex)
                if child is not None:
                    capacity -= self.generated(child, remaining, space,
                                               child_complex)
                if capacity > 0:
                    options.append(op)
                    weights.append(
                        (model.get(prev, op) + model.alpha) if model else 1.0)
            if not options:
                return None
            if model is not None:
                op = model.next_operation(prev, options, rng, weights)
            else:
                op = BigramModel(alpha=1.0).next_operation(
                    prev, options, rng, weights)
            ops.append(op)
            has_complex = has_complex or op in COMPLEX_JOINS
            node = node.children.setdefault(op, _Node())
            prev = op
        self.insert(ops)
        return Cube(tuple(ops))


def split_workers(n: int, ratio: tuple[int, int] = (1, 2),
                  reserved_random: int = 2) -> list[str]:
    """Assign a cube space tag to each of n workers.

    With at least 4 workers, `reserved_random` workers solve randomly
    generated cubes from the full space; the rest are split F:B by `ratio`
    (complex-join programs vs the remainder).  A single worker covers the
    full space.
    """
    if n < 1:
        raise ValueError("need at least one worker")
    if n == 1:
        return ["full"]
    n_random = reserved_random if n >= 4 else 0
    m = n - n_random
    f_share, b_share = ratio
    n_b = int(m * b_share / (f_share + b_share) + 0.5)
    n_f = m - n_b
    if n_f == 0 and m >= 2:
        n_f, n_b = 1, n_b - 1
    if n_b == 0 and m >= 2:
        n_b, n_f = 1, n_f - 1
    return ["F"] * n_f + ["B"] * n_b + ["random"] * n_random


SPACE_BY_TAG = {"full": FULL_SPACE, "F": COMPLEX_SPACE, "B": SIMPLE_SPACE,
                "random": FULL_SPACE}
