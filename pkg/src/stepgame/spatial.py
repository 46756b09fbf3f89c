"""2-D spatial relation algebra.

Coordinates are integer grid units with x growing rightward and y growing
upward, so ``top`` is ``(0, +1)``.  Every relation is a unit step; a triple
``(head, rel, tail)`` asserts ``pos(head) = pos(tail) + offset(rel)``.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

from .errors import DisconnectedEntity, InconsistentChain


class Coord(NamedTuple):
    x: int
    y: int

    def __add__(self, other):  # type: ignore[override]
        return Coord(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Coord(self.x - other[0], self.y - other[1])

    def __neg__(self):
        return Coord(-self.x, -self.y)


ORIGIN = Coord(0, 0)


class Direction(str, Enum):
    TOP = "top"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    TOP_LEFT = "top-left"
    TOP_RIGHT = "top-right"
    DOWN_LEFT = "down-left"
    DOWN_RIGHT = "down-right"

    def __str__(self) -> str:
        return self.value

    @property
    def inverse(self) -> "Direction":
        return _OFFSET_TO_DIRECTION[-_OFFSETS[self]]


class AnswerLabel(str, Enum):
    TOP = "top"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    TOP_LEFT = "top-left"
    TOP_RIGHT = "top-right"
    DOWN_LEFT = "down-left"
    DOWN_RIGHT = "down-right"
    OVERLAP = "overlap"

    def __str__(self) -> str:
        return self.value


DIRECTIONS: tuple[Direction, ...] = tuple(Direction)
ANSWER_LABELS: tuple[AnswerLabel, ...] = tuple(AnswerLabel)

_OFFSETS: dict[Direction, Coord] = {
    Direction.TOP: Coord(0, 1),
    Direction.DOWN: Coord(0, -1),
    Direction.LEFT: Coord(-1, 0),
    Direction.RIGHT: Coord(1, 0),
    Direction.TOP_LEFT: Coord(-1, 1),
    Direction.TOP_RIGHT: Coord(1, 1),
    Direction.DOWN_LEFT: Coord(-1, -1),
    Direction.DOWN_RIGHT: Coord(1, -1),
}
_OFFSET_TO_DIRECTION = {v: k for k, v in _OFFSETS.items()}
_SIGN_TO_LABEL = {(c.x, c.y): AnswerLabel(d.value) for d, c in _OFFSETS.items()}
_SIGN_TO_LABEL[(0, 0)] = AnswerLabel.OVERLAP


def offset(d: Direction) -> Coord:
    return _OFFSETS[Direction(d)]


def inverse(d: Direction) -> Direction:
    return Direction(d).inverse


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def label_displacement(d: Sequence[int]) -> AnswerLabel:
    """Classify a displacement by the signs of its components."""
    return _SIGN_TO_LABEL[(_sign(d[0]), _sign(d[1]))]


def direction_of(d: Sequence[int]) -> Direction:
    """The direction whose unit offset is ``d``; raises KeyError otherwise."""
    return _OFFSET_TO_DIRECTION[Coord(d[0], d[1])]


@dataclass(frozen=True, order=True)
class RelationTriple:
    head: str
    rel: Direction
    tail: str

    def __post_init__(self):
        if self.head == self.tail:
            raise ValueError(f"triple relates {self.head!r} to itself")
        if not isinstance(self.rel, Direction):
            object.__setattr__(self, "rel", Direction(self.rel))

    def encode(self) -> str:
        return f"{self.head}|{self.rel.value}|{self.tail}"

    @classmethod
    def decode(cls, text: str) -> "RelationTriple":
        head, rel, tail = text.split("|")
        return cls(head, Direction(rel), tail)

    def to_list(self) -> list[str]:
        return [self.head, self.rel.value, self.tail]

    def __iter__(self):
        return iter((self.head, self.rel, self.tail))


def invert(t: RelationTriple) -> RelationTriple:
    return RelationTriple(t.tail, t.rel.inverse, t.head)


def _adjacency(triples: Iterable[RelationTriple]) -> dict[str, list[tuple[str, Coord]]]:
    adj: dict[str, list[tuple[str, Coord]]] = {}
    for t in triples:
        step = _OFFSETS[t.rel]
        adj.setdefault(t.head, []).append((t.tail, -step))
        adj.setdefault(t.tail, []).append((t.head, step))
    return adj


def place_component(
    triples: Iterable[RelationTriple],
    anchor: str,
    rng: random.Random | None = None,
) -> dict[str, Coord]:
    """Place every entity reachable from ``anchor``; other entities are ignored.

    With ``rng`` the neighbour visiting order is shuffled, giving a random
    spanning tree. Raises InconsistentChain on any conflicting cycle.
    """
    adj = _adjacency(triples)
    coords = {anchor: ORIGIN}
    queue = deque([anchor])
    while queue:
        node = queue.popleft()
        here = coords[node]
        nbrs = adj.get(node, ())
        if rng is not None:
            nbrs = list(nbrs)
            rng.shuffle(nbrs)
        for other, step in nbrs:
            pos = here + step
            seen = coords.get(other)
            if seen is None:
                coords[other] = pos
                queue.append(other)
            elif seen != pos:
                raise InconsistentChain(
                    f"{other} placed at {tuple(seen)} and {tuple(pos)}"
                )
    return coords


def place_chain(relations: Sequence[RelationTriple], anchor: str) -> dict[str, Coord]:
    """Unique integer placement of a connected, consistent triple set."""
    coords = place_component(relations, anchor)
    missing = {e for t in relations for e in (t.head, t.tail)} - coords.keys()
    if missing:
        raise DisconnectedEntity(
            f"entities unreachable from {anchor}: {', '.join(sorted(missing))}"
        )
    return coords
