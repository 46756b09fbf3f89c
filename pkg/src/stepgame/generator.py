"""Chain sampling, question selection and story realization."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .errors import InvalidE, InvalidK
from .spatial import (
    DIRECTIONS,
    AnswerLabel,
    Coord,
    RelationTriple,
    label_displacement,
    place_chain,
)
from .templates import DEFAULT_ENTITIES, TemplateBank


@dataclass(frozen=True)
class Chain:
    """k+1 distinct entities linked by k unit relations; edge i joins entities i and i+1."""

    entities: tuple[str, ...]
    edges: tuple[RelationTriple, ...]
    coords: dict[str, Coord] = field(compare=False)

    @property
    def k(self) -> int:
        return len(self.edges)

    @classmethod
    def from_edges(cls, entities: Sequence[str], edges: Sequence[RelationTriple]) -> "Chain":
        if len(entities) != len(edges) + 1:
            raise ValueError("a chain needs exactly one more entity than edges")
        for i, t in enumerate(edges):
            if {t.head, t.tail} != {entities[i], entities[i + 1]}:
                raise ValueError(f"edge {i} does not join {entities[i]} and {entities[i + 1]}")
        coords = place_chain(edges, entities[0])
        return cls(tuple(entities), tuple(edges), coords)

    def to_dict(self) -> dict[str, Any]:
        return {
            "entities": list(self.entities),
            "edges": [t.to_list() for t in self.edges],
            "coords": {e: [c.x, c.y] for e, c in self.coords.items()},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Chain":
        return cls.from_edges(d["entities"], [RelationTriple(*e) for e in d["edges"]])


@dataclass(frozen=True)
class Question:
    x: str  # entity being located
    y: str  # reference entity
    hops: int

    def to_dict(self) -> dict[str, Any]:
        return {"x": self.x, "y": self.y, "hops": self.hops}


@dataclass
class Sample:
    id: int
    k: int
    story: list[str]
    question: str
    answer: str
    meta: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "k": self.k,
            "story": list(self.story),
            "question": self.question,
            "answer": self.answer,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Sample":
        return cls(d["id"], d["k"], list(d["story"]), d["question"], d["answer"], d.get("meta", {}))


def sample_chain(
    k: int, rng: random.Random, entities: Sequence[str] = DEFAULT_ENTITIES
) -> Chain:
    if k < 1 or k + 1 > len(entities):
        raise InvalidK(f"k={k} needs 1 <= k and k+1 <= {len(entities)}")
    names = rng.sample(list(entities), k + 1)
    edges = []
    for a, b in zip(names, names[1:]):
        rel = rng.choice(DIRECTIONS)
        # Orientation coin: "a rel b" or the inverse phrasing "b inv(rel) a".
        if rng.random() < 0.5:
            edges.append(RelationTriple(a, rel, b))
        else:
            edges.append(RelationTriple(b, rel, a))
    return Chain.from_edges(names, edges)


def pick_question(c: Chain, rng: random.Random) -> Question:
    n = len(c.entities)
    if n < 2:
        raise ValueError("question needs at least two entities")
    i, j = rng.sample(range(n), 2)
    if i > j:
        i, j = j, i
    if rng.random() < 0.5:
        i, j = j, i
    return Question(c.entities[i], c.entities[j], abs(i - j))


def answer_for(c: Chain, q: Question) -> AnswerLabel:
    return label_displacement(c.coords[q.x] - c.coords[q.y])


def realize(
    c: Chain,
    q: Question,
    bank: TemplateBank,
    rng: random.Random,
    noise: Sequence = (),
    sample_id: int = 0,
    seed: str | int | None = None,
) -> Sample:
    """Render chain (and optional noise) sentences, shuffle them, attach the question.

    The answer is always read off the chain coordinates; noise never enters it.
    """
    rendered: list[tuple[str, int, list]] = []
    for i, t in enumerate(c.edges):
        text, tid = bank.render(t, rng)
        rendered.append((text, tid, ["chain", i]))
    for j, ann in enumerate(noise):
        text, tid = bank.render(ann.triple, rng)
        rendered.append((text, tid, [ann.type, j]))
    order = list(range(len(rendered)))
    rng.shuffle(order)
    story = [rendered[i][0] for i in order]
    qtext, qid = bank.render_question(q.x, q.y, rng)
    meta = {
        "chain": c.to_dict(),
        "question": q.to_dict(),
        "noise": [ann.to_dict() for ann in noise],
        "template_ids": [rendered[i][1] for i in order],
        "question_template": qid,
        "origins": [rendered[i][2] for i in order],
        "seed": seed,
    }
    return Sample(sample_id, c.k, story, qtext, answer_for(c, q).value, meta)


def count_samples(k: int, E: int) -> int:
    """Number of distinct (chain, phrasing, order, question) combinations, templates excluded."""
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if E < k + 1:
        raise InvalidE(f"need at least k+1={k + 1} entities, got {E}")
    total = (
        Fraction(math.factorial(k + 1) * math.comb(E, k + 1))
        * 16**k
        * Fraction(math.factorial(k), 2)
        * 2
        * math.comb(k + 1, 2)
    )
    assert total.denominator == 1, total
    return total.numerator
