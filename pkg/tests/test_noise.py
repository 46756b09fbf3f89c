import random

import pytest

from stepgame.errors import LexiconExhausted, NoiseNotAllowed
from stepgame.generator import Chain, pick_question, realize, sample_chain
from stepgame.noise import (
    NoisePolicy,
    NoiseSpec,
    add_disconnected,
    add_irrelevant,
    add_supporting,
    inject,
    supporting_candidates,
)
from stepgame.oracle import StoryGraph, solve
from stepgame.spatial import RelationTriple, invert, place_chain, place_component

T = RelationTriple


def square_chain():
    # A(0,0) B(1,0) C(1,1) D(0,1)
    return Chain.from_edges("ABCD", [T("B", "right", "A"), T("C", "top", "B"), T("C", "right", "D")])


def test_irrelevant_zero_is_identity(rng):
    c = sample_chain(3, rng)
    res = add_irrelevant(c, 0, rng)
    assert res.annotations == [] and res.coords == {}


def test_irrelevant_structure():
    for seed in range(1000):
        rng = random.Random(seed)
        c = sample_chain(2, rng)
        res = add_irrelevant(c, 2, rng)
        assert len(res.annotations) == 2
        new = [e for a in res.annotations for e in a.new_entities]
        assert len(set(new)) == 2 and not set(new) & set(c.entities)
        placed = set(c.entities)
        for a in res.annotations:
            ends = {a.triple.head, a.triple.tail}
            assert ends & placed
            placed |= ends
        full = place_chain(list(c.edges) + res.triples, c.entities[0])
        assert all(full[e] == c.coords[e] for e in c.entities)
        assert all(full[e] == res.coords[e] for e in new)


def test_disconnected_minimal(rng):
    c = sample_chain(3, rng)
    res = add_disconnected(c, 1, rng)
    assert len(res.annotations) == 1
    assert len(res.annotations[0].new_entities) == 2
    assert not set(res.annotations[0].new_entities) & set(c.entities)


def test_disconnected_uses_one_more_entity_than_irrelevant():
    for n in range(1, 6):
        for seed in range(50):
            rng = random.Random(seed)
            c = sample_chain(4, rng)
            irr = add_irrelevant(c, n, random.Random(seed))
            dis = add_disconnected(c, n, random.Random(seed))
            count = lambda r: sum(len(a.new_entities) for a in r.annotations)
            assert count(dis) == count(irr) + 1 == n + 1


def test_disconnected_makes_two_components():
    for seed in range(500):
        rng = random.Random(seed)
        c = sample_chain(rng.randint(1, 8), rng)
        res = add_disconnected(c, rng.randint(1, 4), rng)
        g = StoryGraph.build(list(c.edges) + res.triples)
        assert len(g.components) == 2
        assert place_component(res.triples, res.annotations[0].triple.head)


def test_supporting_square_example():
    c = square_chain()
    cands = {frozenset(p) for p in supporting_candidates(c)}
    assert frozenset("AD") in cands
    assert cands == {frozenset("AC"), frozenset("AD"), frozenset("BD")}
    res = add_supporting(c, 3, random.Random(0))
    emitted = set(res.triples)
    assert T("D", "top", "A") in emitted or invert(T("D", "top", "A")) in emitted
    assert res.shortfall == 0


def test_supporting_refused_below_threshold(rng):
    with pytest.raises(NoiseNotAllowed):
        add_supporting(sample_chain(2, rng), 1, rng)


def test_supporting_shortfall_recorded():
    # Straight line: no non-adjacent pair is within one unit step.
    c = Chain.from_edges("ABCD", [T("B", "right", "A"), T("C", "right", "B"), T("D", "right", "C")])
    res = add_supporting(c, 2, random.Random(0))
    assert res.annotations == [] and res.shortfall == 2


def test_supporting_consistency():
    for seed in range(10_000):
        rng = random.Random(seed)
        c = sample_chain(rng.randint(3, 10), rng)
        res = add_supporting(c, rng.randint(1, 4), rng)
        assert place_chain(list(c.edges) + res.triples, c.entities[0]) == c.coords
        edges = set(c.edges) | {invert(t) for t in c.edges}
        assert not edges & set(res.triples)
        assert not any(a.new_entities for a in res.annotations)


def test_answer_invariance(bank):
    policy = NoisePolicy((0, 4), (0, 4), (0, 3))
    for seed in range(10_000):
        rng = random.Random(seed)
        k = rng.randint(1, 10)
        c = sample_chain(k, rng)
        q = pick_question(c, rng)
        before = solve(list(c.edges), (q.x, q.y))
        noise = inject(c, policy.draw(k, rng), rng)
        s = realize(c, q, bank, rng, noise.annotations)
        assert s.answer == before.value
        assert solve(list(c.edges) + noise.triples, (q.x, q.y)) == before


def test_lexicon_exhausted(rng):
    c = sample_chain(20, rng)
    with pytest.raises(LexiconExhausted):
        add_disconnected(c, 5, rng)
    with pytest.raises(LexiconExhausted):
        add_irrelevant(c, 6, rng)


def test_policy_respects_threshold(rng):
    pol = NoisePolicy((1, 1), (1, 1), (2, 2))
    assert pol.draw(2, rng).supporting_sentences == 0
    assert pol.draw(3, rng).supporting_sentences == 2
    assert NoisePolicy(supporting_min_k=2).draw(2, random.Random(1)).supporting_min_k == 2


def test_inject_entities_disjoint_across_types(rng):
    for _ in range(200):
        c = sample_chain(6, rng)
        res = inject(c, NoiseSpec(3, 3, 2), rng)
        new = [e for a in res.annotations for e in a.new_entities]
        assert len(new) == len(set(new)) == 3 + 4
