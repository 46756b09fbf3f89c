"""Relation-indexed sentence templates: loading, rendering and exact inverse parsing.

Template file format: one template per line, ``direction<TAB>pattern``,
``#`` starts a comment, placeholders are literally ``<HEAD>`` and ``<TAIL>``.
"""
from __future__ import annotations

import hashlib
import random
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from os import PathLike
from typing import Sequence

from .errors import Ambiguous, EmptyDirection, NoMatch, ParseError
from .spatial import DIRECTIONS, Direction, RelationTriple

HEAD = "<HEAD>"
TAIL = "<TAIL>"
DEFAULT_ENTITIES: tuple[str, ...] = tuple(string.ascii_uppercase)

_PLACEHOLDER = re.compile(r"<[A-Z]+>")

# Question surface forms; <X> is the entity being located, <Y> the reference.
QUESTION_TEMPLATES: tuple[str, ...] = (
    "What is the relation of <X> to <Y>?",
    "Where is <X> relative to <Y>?",
    "What is the position of <X> with respect to <Y>?",
)


@dataclass(frozen=True)
class Template:
    id: int
    rel: Direction
    pattern: str

    def fill(self, head: str, tail: str) -> str:
        return self.pattern.replace(HEAD, head).replace(TAIL, tail)


def _slot_regex(pattern: str, slots: dict[str, str], entity_re: str) -> re.Pattern:
    parts = re.split(r"(<[A-Z]+>)", pattern)
    out = []
    for part in parts:
        if part in slots:
            out.append(f"(?P<{slots[part]}>{entity_re})")
        else:
            out.append(re.escape(part))
    return re.compile("".join(out))


def _entity_regex(entities: Sequence[str]) -> str:
    return "|".join(re.escape(e) for e in sorted(entities, key=len, reverse=True))


@dataclass
class TemplateBank:
    """An immutable, validated set of relation templates."""

    templates: tuple[Template, ...]
    version: str
    entities: tuple[str, ...] = DEFAULT_ENTITIES
    _by_rel: dict = field(init=False, repr=False)
    _compiled: list = field(init=False, repr=False)
    _questions: list = field(init=False, repr=False)

    def __post_init__(self):
        self._by_rel = {d: [] for d in DIRECTIONS}
        for t in self.templates:
            self._by_rel[t.rel].append(t)
        missing = [d.value for d, ts in self._by_rel.items() if not ts]
        if missing:
            raise EmptyDirection(f"no template for: {', '.join(missing)}")
        ent = _entity_regex(self.entities)
        slots = {HEAD: "head", TAIL: "tail"}
        self._compiled = [(t, _slot_regex(t.pattern, slots, ent)) for t in self.templates]
        qslots = {"<X>": "x", "<Y>": "y"}
        self._questions = [
            (i, _slot_regex(q, qslots, ent)) for i, q in enumerate(QUESTION_TEMPLATES)
        ]

    def for_direction(self, d: Direction) -> list[Template]:
        return self._by_rel[Direction(d)]

    def stats(self) -> dict[str, int]:
        return {d.value: len(ts) for d, ts in self._by_rel.items()}

    def render(self, t: RelationTriple, rng: random.Random) -> tuple[str, int]:
        """Render a triple with a uniformly drawn template; returns (sentence, template id)."""
        tpl = rng.choice(self._by_rel[t.rel])
        return tpl.fill(t.head, t.tail), tpl.id

    def match(self, sentence: str) -> tuple[RelationTriple, Template]:
        hits = []
        for tpl, rx in self._compiled:
            m = rx.fullmatch(sentence)
            if m is not None and m["head"] != m["tail"]:
                hits.append((RelationTriple(m["head"], tpl.rel, m["tail"]), tpl))
        if not hits:
            raise NoMatch(f"no template matches {sentence!r}")
        if len(hits) > 1:
            ids = ", ".join(str(tpl.id) for _, tpl in hits)
            raise Ambiguous(f"{sentence!r} matches templates {ids}")
        return hits[0]

    def parse(self, sentence: str) -> RelationTriple:
        return self.match(sentence)[0]

    def render_question(self, x: str, y: str, rng: random.Random) -> tuple[str, int]:
        i = rng.randrange(len(QUESTION_TEMPLATES))
        return QUESTION_TEMPLATES[i].replace("<X>", x).replace("<Y>", y), i

    def parse_question(self, text: str) -> tuple[str, str]:
        for _, rx in self._questions:
            m = rx.fullmatch(text)
            if m is not None:
                return m["x"], m["y"]
        raise NoMatch(f"no question template matches {text!r}")


def _parse_lines(text: str) -> list[tuple[int, Direction, str]]:
    rows = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise ParseError("expected direction<TAB>pattern", lineno)
        rel_text, pattern = line.split("\t", 1)
        try:
            rel = Direction(rel_text.strip())
        except ValueError:
            raise ParseError(f"unknown direction {rel_text.strip()!r}", lineno) from None
        pattern = pattern.strip()
        for ph in (HEAD, TAIL):
            n = pattern.count(ph)
            if n != 1:
                raise ParseError(f"{ph} must appear exactly once, found {n}", lineno)
        stray = set(_PLACEHOLDER.findall(pattern)) - {HEAD, TAIL}
        if stray:
            raise ParseError(f"unknown placeholder(s) {sorted(stray)}", lineno)
        if pattern in seen:
            raise ParseError(f"duplicate pattern (first on line {seen[pattern]})", lineno)
        seen[pattern] = lineno
        rows.append((lineno, rel, pattern))
    return rows


def bank_from_text(text: str, entities: Sequence[str] = DEFAULT_ENTITIES) -> TemplateBank:
    rows = _parse_lines(text)
    version = "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
    templates = tuple(Template(i, rel, pat) for i, (_, rel, pat) in enumerate(rows))
    bank = TemplateBank(templates, version, tuple(entities))
    # Probe injectivity: each template must be the only reader of its own output.
    a, b = bank.entities[0], bank.entities[1]
    for (lineno, _, _), tpl in zip(rows, templates):
        for h, t in ((a, b), (b, a)):
            try:
                _, hit = bank.match(tpl.fill(h, t))
            except (Ambiguous, NoMatch) as exc:
                raise ParseError(f"template is not uniquely invertible: {exc}", lineno) from None
            if hit.id != tpl.id:
                raise ParseError(f"template output parsed as template {hit.id}", lineno)
    return bank


def read_bank_text(source: str | PathLike | None = None) -> str:
    if source is None:
        return resources.files("stepgame").joinpath("data/templates.tsv").read_text("utf-8")
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def load_bank(
    source: str | PathLike | None = None, entities: Sequence[str] = DEFAULT_ENTITIES
) -> TemplateBank:
    """Load a template file; ``None`` loads the built-in bank."""
    return bank_from_text(read_bank_text(source), entities)


def render(t: RelationTriple, bank: TemplateBank, rng: random.Random) -> str:
    return bank.render(t, rng)[0]


def parse(sentence: str, bank: TemplateBank) -> RelationTriple:
    return bank.parse(sentence)
