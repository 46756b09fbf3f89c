"""Distracting noise: irrelevant branches, disconnected chains and supporting shortcuts.

Every noise triple is true under the chain's coordinates (extended to the
fresh entities), so no kind of noise can change the answer.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import LexiconExhausted, NoiseNotAllowed
from .generator import Chain
from .spatial import DIRECTIONS, Coord, RelationTriple, direction_of, invert, offset
from .templates import DEFAULT_ENTITIES

IRRELEVANT = "irrelevant"
DISCONNECTED = "disconnected"
SUPPORTING = "supporting"
NOISE_TYPES = (IRRELEVANT, DISCONNECTED, SUPPORTING)


@dataclass(frozen=True)
class NoiseAnnotation:
    type: str
    triple: RelationTriple
    new_entities: tuple[str, ...] = ()
    segment: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": self.type,
            "triple": self.triple.to_list(),
            "new_entities": list(self.new_entities),
            "segment": self.segment,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NoiseAnnotation":
        return cls(d["type"], RelationTriple(*d["triple"]), tuple(d["new_entities"]), d.get("segment", 0))


@dataclass(frozen=True)
class NoiseSpec:
    irrelevant_sentences: int = 0
    disconnected_sentences: int = 0
    supporting_sentences: int = 0
    seed: int | None = None
    supporting_min_k: int = 3


@dataclass(frozen=True)
class NoisePolicy:
    """Inclusive (min, max) sentence-count ranges drawn uniformly per sample."""

    irrelevant: tuple[int, int] = (0, 3)
    disconnected: tuple[int, int] = (0, 3)
    supporting: tuple[int, int] = (0, 2)
    supporting_min_k: int = 3

    def draw(self, k: int, rng: random.Random) -> NoiseSpec:
        n_sup = rng.randint(*self.supporting) if k >= self.supporting_min_k else 0
        return NoiseSpec(
            irrelevant_sentences=rng.randint(*self.irrelevant),
            disconnected_sentences=rng.randint(*self.disconnected),
            supporting_sentences=n_sup,
            supporting_min_k=self.supporting_min_k,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "irrelevant": list(self.irrelevant),
            "disconnected": list(self.disconnected),
            "supporting": list(self.supporting),
            "supporting_min_k": self.supporting_min_k,
        }


NO_NOISE = NoisePolicy((0, 0), (0, 0), (0, 0))


@dataclass
class NoiseResult:
    annotations: list[NoiseAnnotation] = field(default_factory=list)
    coords: dict[str, Coord] = field(default_factory=dict)
    shortfall: int = 0

    @property
    def triples(self) -> list[RelationTriple]:
        return [a.triple for a in self.annotations]


def _oriented(a: str, rel, b: str, rng: random.Random) -> RelationTriple:
    t = RelationTriple(a, rel, b)
    return t if rng.random() < 0.5 else invert(t)


def _fresh(lexicon: Sequence[str], used: set[str], n: int, rng: random.Random) -> list[str]:
    pool = [e for e in lexicon if e not in used]
    if len(pool) < n:
        raise LexiconExhausted(f"need {n} unused entities, only {len(pool)} left")
    return rng.sample(pool, n)


def add_irrelevant(
    c: Chain,
    n: int,
    rng: random.Random,
    lexicon: Sequence[str] = DEFAULT_ENTITIES,
    used: set[str] | None = None,
) -> NoiseResult:
    """Grow a branch of n fresh entities hanging off the chain.

    Each new entity attaches to a uniformly chosen entity already placed
    (chain or earlier branch), so one call may extend or fork the branch.
    """
    used = set(c.entities) if used is None else used
    res = NoiseResult()
    if n == 0:
        return res
    fresh = _fresh(lexicon, used, n, rng)
    placed = dict(c.coords)
    anchors = list(c.entities)
    for name in fresh:
        base = rng.choice(anchors)
        rel = rng.choice(DIRECTIONS)
        placed[name] = placed[base] + offset(rel)
        res.coords[name] = placed[name]
        res.annotations.append(
            NoiseAnnotation(IRRELEVANT, _oriented(name, rel, base, rng), (name,))
        )
        anchors.append(name)
        used.add(name)
    return res


def add_disconnected(
    c: Chain,
    n: int,
    rng: random.Random,
    lexicon: Sequence[str] = DEFAULT_ENTITIES,
    used: set[str] | None = None,
    segment: int = 0,
) -> NoiseResult:
    """An independent chain of n triples over n+1 fresh entities."""
    used = set(c.entities) if used is None else used
    res = NoiseResult()
    if n == 0:
        return res
    fresh = _fresh(lexicon, used, n + 1, rng)
    used.update(fresh)
    res.coords[fresh[0]] = Coord(0, 0)
    for i, (a, b) in enumerate(zip(fresh, fresh[1:])):
        rel = rng.choice(DIRECTIONS)
        res.coords[b] = res.coords[a] - offset(rel)
        new = (a, b) if i == 0 else (b,)
        res.annotations.append(
            NoiseAnnotation(DISCONNECTED, _oriented(a, rel, b, rng), new, segment)
        )
    return res


def supporting_candidates(c: Chain) -> list[tuple[str, str]]:
    """Non-adjacent chain pairs (U, V), U before V, whose displacement is one unit step."""
    out = []
    ents = c.entities
    for i in range(len(ents)):
        for j in range(i + 2, len(ents)):
            d = c.coords[ents[i]] - c.coords[ents[j]]
            if d != (0, 0) and max(abs(d.x), abs(d.y)) <= 1:
                out.append((ents[i], ents[j]))
    return out


def add_supporting(
    c: Chain, n: int, rng: random.Random, min_k: int = 3
) -> NoiseResult:
    """Redundant but true shortcuts between existing chain entities."""
    if c.k < min_k:
        raise NoiseNotAllowed(f"supporting noise needs k >= {min_k}, chain has k={c.k}")
    res = NoiseResult()
    if n == 0:
        return res
    cands = supporting_candidates(c)
    picked = rng.sample(cands, min(n, len(cands)))
    res.shortfall = n - len(picked)
    for u, v in picked:
        rel = direction_of(c.coords[u] - c.coords[v])
        res.annotations.append(NoiseAnnotation(SUPPORTING, _oriented(u, rel, v, rng)))
    return res


def inject(
    c: Chain,
    spec: NoiseSpec,
    rng: random.Random,
    lexicon: Sequence[str] = DEFAULT_ENTITIES,
) -> NoiseResult:
    """Apply all three noise kinds of ``spec`` in a fixed order."""
    used = set(c.entities)
    out = NoiseResult()
    for part in (
        add_irrelevant(c, spec.irrelevant_sentences, rng, lexicon, used),
        add_disconnected(c, spec.disconnected_sentences, rng, lexicon, used),
        add_supporting(c, spec.supporting_sentences, rng, spec.supporting_min_k)
        if spec.supporting_sentences
        else NoiseResult(),
    ):
        out.annotations.extend(part.annotations)
        out.coords.update(part.coords)
        out.shortfall += part.shortfall
    return out
