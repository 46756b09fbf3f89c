"""Independent symbolic solver and per-sample certification."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .errors import InconsistentChain, InconsistentStory, StepGameError, Unreachable
from .generator import Sample
from .spatial import AnswerLabel, RelationTriple, label_displacement, place_component
from .templates import TemplateBank


@dataclass
class StoryGraph:
    nodes: set[str]
    edges: list[RelationTriple]
    components: list[set[str]]

    @classmethod
    def build(cls, triples: Iterable[RelationTriple]) -> "StoryGraph":
        edges = list(triples)
        parent: dict[str, str] = {}

        def find(a: str) -> str:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for t in edges:
            for e in (t.head, t.tail):
                parent.setdefault(e, e)
            ra, rb = find(t.head), find(t.tail)
            if ra != rb:
                parent[ra] = rb
        groups: dict[str, set[str]] = {}
        for e in parent:
            groups.setdefault(find(e), set()).add(e)
        comps = sorted(groups.values(), key=lambda s: min(s))
        return cls(set(parent), edges, comps)


def solve(
    triples: Sequence[RelationTriple],
    question: tuple[str, str],
    rng: random.Random | None = None,
) -> AnswerLabel:
    """Label of X relative to Y, read off a placement anchored at Y."""
    x, y = question
    if x == y:
        raise ValueError("question must name two different entities")
    try:
        coords = place_component(triples, y, rng)
    except InconsistentChain as exc:
        raise InconsistentStory(str(exc)) from None
    if x not in coords:
        raise Unreachable(f"{x} is not connected to {y}")
    return label_displacement(coords[x])


@dataclass
class CertReport:
    id: int
    checks: dict[str, bool] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "passed": self.passed, "checks": self.checks, "errors": self.errors}


def chain_triples(sample: Sample) -> list[RelationTriple]:
    return [RelationTriple(*e) for e in sample.meta["chain"]["edges"]]


def noise_triples(sample: Sample) -> list[RelationTriple]:
    return [RelationTriple(*n["triple"]) for n in sample.meta.get("noise", [])]


def certify(sample: Sample, bank: TemplateBank) -> CertReport:
    """Re-derive the sample from its rendered text and compare with metadata.

    Checks: ``parse`` (every sentence and the question invert exactly),
    ``triples`` (parsed multiset equals chain plus noise), ``noisy_answer``
    (solving the parsed story gives the stored answer), ``chain_answer``
    (solving the bare chain gives the stored answer).
    """
    rep = CertReport(sample.id)
    try:
        chain = chain_triples(sample)
        noise = noise_triples(sample)
        q = sample.meta["question"]
        asked = (q["x"], q["y"])
    except (KeyError, TypeError, ValueError) as exc:
        rep.checks["meta"] = False
        rep.errors.append(f"meta: {exc!r}")
        return rep

    parsed = []
    ok = True
    for i, sentence in enumerate(sample.story):
        try:
            parsed.append(bank.parse(sentence))
        except StepGameError as exc:
            ok = False
            rep.errors.append(f"parse: sentence {i}: {exc}")
    try:
        if bank.parse_question(sample.question) != asked:
            ok = False
            rep.errors.append("parse: question entities differ from metadata")
    except StepGameError as exc:
        ok = False
        rep.errors.append(f"parse: question: {exc}")
    rep.checks["parse"] = ok

    same = Counter(parsed) == Counter(chain + noise)
    rep.checks["triples"] = same
    if not same:
        rep.errors.append("triples: parsed story differs from chain + noise")

    for name, triples in (("noisy_answer", parsed), ("chain_answer", chain)):
        try:
            got = solve(triples, asked).value
        except (StepGameError, ValueError) as exc:
            rep.checks[name] = False
            rep.errors.append(f"{name}: {exc}")
            continue
        rep.checks[name] = got == sample.answer
        if got != sample.answer:
            rep.errors.append(f"{name}: solved {got}, stored {sample.answer}")
    return rep
