import itertools
import random
from collections import Counter

import pytest

from stepgame.errors import InvalidE, InvalidK
from stepgame.generator import (
    Chain,
    Question,
    count_samples,
    pick_question,
    realize,
    sample_chain,
)
from stepgame.spatial import DIRECTIONS, RelationTriple, invert, offset, place_chain
from stepgame.templates import bank_from_text

T = RelationTriple


def brute_force_count(k: int, E: int) -> int:
    """Enumerate every distinct (ordered story, oriented question) pair."""
    ents = [chr(65 + i) for i in range(E)]
    seen = set()
    for seq in itertools.permutations(ents, k + 1):
        for rels in itertools.product(DIRECTIONS, repeat=k):
            for flips in itertools.product((False, True), repeat=k):
                triples = []
                for i, (rel, flip) in enumerate(zip(rels, flips)):
                    t = T(seq[i], rel, seq[i + 1])
                    triples.append(invert(t) if flip else t)
                for order in itertools.permutations(triples):
                    for q in itertools.permutations(seq, 2):
                        seen.add((order, q))
    return len(seen)


@pytest.mark.parametrize("k, E", [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4)])
def test_count_matches_enumeration(k, E):
    assert count_samples(k, E) == brute_force_count(k, E)


def test_count_reference_values():
    assert count_samples(1, 26) == 10_400
    assert count_samples(2, 26) == 23_961_600
    assert count_samples(1, 2) == 32


def test_count_monotone_in_k():
    vals = [count_samples(k, 26) for k in range(1, 25)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_count_range_errors():
    with pytest.raises(InvalidK):
        count_samples(0, 26)
    with pytest.raises(InvalidE):
        count_samples(3, 3)


def test_sample_chain_minimal(rng):
    c = sample_chain(1, rng)
    assert len(c.entities) == 2 and len(c.edges) == 1
    a, b = c.entities
    t = c.edges[0]
    step = offset(t.rel) if t.head == b else -offset(t.rel)
    assert c.coords[a] == (0, 0)
    assert c.coords[b] == step


def test_sample_chain_deterministic():
    assert sample_chain(5, random.Random(42)) == sample_chain(5, random.Random(42))


def test_sample_chain_structure(rng):
    for k in range(1, 26):
        c = sample_chain(k, rng)
        assert len(set(c.entities)) == k + 1
        for i, t in enumerate(c.edges):
            assert {t.head, t.tail} == {c.entities[i], c.entities[i + 1]}
        assert place_chain(c.edges, c.entities[0]) == c.coords


def test_sample_chain_invalid_k(rng):
    with pytest.raises(InvalidK):
        sample_chain(0, rng)
    with pytest.raises(InvalidK):
        sample_chain(26, rng)


def test_direction_frequencies():
    rng = random.Random(2024)
    counts = [Counter() for _ in range(3)]
    n = 80_000
    for _ in range(n):
        for i, t in enumerate(sample_chain(3, rng).edges):
            counts[i][t.rel] += 1
    for pos in counts:
        for d in DIRECTIONS:
            assert abs(pos[d] / n - 1 / 8) <= 0.01


def test_question_k1(rng):
    c = sample_chain(1, rng)
    for _ in range(20):
        q = pick_question(c, rng)
        assert {q.x, q.y} == set(c.entities) and q.hops == 1


def test_question_pair_frequencies():
    rng = random.Random(5)
    c = sample_chain(5, rng)
    n = 100_000
    pairs = Counter()
    oriented = Counter()
    for _ in range(n):
        q = pick_question(c, rng)
        assert 1 <= q.hops <= 5
        pairs[frozenset((q.x, q.y))] += 1
        oriented[(q.x, q.y)] += 1
    assert len(pairs) == 15
    assert all(abs(v / n - 1 / 15) <= 0.01 for v in pairs.values())
    assert len(oriented) == 30


def chain_of(entities, edges):
    return Chain.from_edges(entities, edges)


@pytest.fixture
def single_bank():
    from stepgame.spatial import DIRECTIONS

    return bank_from_text("\n".join(f"{d.value}\t<HEAD> is {d.value} of <TAIL>." for d in DIRECTIONS))


def test_realize_answers(single_bank, rng):
    c = chain_of("ABC", [T("B", "right", "A"), T("C", "top", "B")])
    s = realize(c, Question("C", "A", 2), single_bank, rng)
    assert s.answer == "top-right"
    c = chain_of("ABC", [T("B", "right", "A"), T("C", "left", "B")])
    s = realize(c, Question("C", "A", 2), single_bank, rng)
    assert s.answer == "overlap"


def test_realize_story_is_permutation(single_bank, rng):
    c = sample_chain(6, rng)
    s = realize(c, pick_question(c, rng), single_bank, rng)
    assert sorted(s.story) == sorted(t.head + f" is {t.rel.value} of " + t.tail + "." for t in c.edges)
    assert len(s.story) == s.k == 6
    assert [o[0] for o in s.meta["origins"]] == ["chain"] * 6


def test_realize_deterministic(bank):
    def make():
        r = random.Random(77)
        c = sample_chain(4, r)
        return realize(c, pick_question(c, r), bank, r).to_dict()

    assert make() == make()


def test_chain_round_trip():
    c = sample_chain(7, random.Random(1))
    again = Chain.from_dict(c.to_dict())
    assert again == c and again.coords == c.coords
