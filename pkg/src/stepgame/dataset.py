"""Dataset assembly, serialization, leakage measurement and noise statistics."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

from .errors import CertificationError, MissingMeta, StepGameError
from .generator import Sample, pick_question, realize, sample_chain
from .noise import (
    DISCONNECTED,
    IRRELEVANT,
    NO_NOISE,
    NOISE_TYPES,
    SUPPORTING,
    NoisePolicy,
    inject,
)
from .oracle import certify
from .spatial import RelationTriple
from .templates import DEFAULT_ENTITIES, TemplateBank, bank_from_text

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
FORMATS = ("jsonl", "babi")


@dataclass(frozen=True)
class CanonicalKey:
    triples: tuple[str, ...]
    question: tuple[str, str]


@dataclass
class SplitPlan:
    train_n: int = 10_000
    valid_n: int = 1_000
    test_n: int = 10_000
    train_ks: tuple[int, ...] = (1, 2, 3, 4, 5)
    test_ks: tuple[int, ...] = tuple(range(1, 11))
    train_noise: bool = False
    test_noise: bool = True

    def splits(self) -> list[tuple[str, tuple[int, ...], int, bool]]:
        return [
            ("train", self.train_ks, self.train_n, self.train_noise),
            ("valid", self.train_ks, self.valid_n, self.train_noise),
            ("test", self.test_ks, self.test_n, self.test_noise),
        ]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["train_ks"] = list(self.train_ks)
        d["test_ks"] = list(self.test_ks)
        return d


def stream_id(seed: int, split: str, k: int, attempt: int) -> str:
    return f"stepgame:{seed}:{split}:{k}:{attempt}"


def generate_sample(
    k: int,
    bank: TemplateBank,
    rng: random.Random,
    policy: NoisePolicy = NO_NOISE,
    sample_id: int = 0,
    seed: str | int | None = None,
    lexicon: Sequence[str] = DEFAULT_ENTITIES,
) -> Sample:
    chain = sample_chain(k, rng, lexicon)
    q = pick_question(chain, rng)
    spec = policy.draw(k, rng)
    noise = inject(chain, spec, rng, lexicon)
    sample = realize(chain, q, bank, rng, noise.annotations, sample_id, seed)
    sample.meta["noise_requested"] = {
        IRRELEVANT: spec.irrelevant_sentences,
        DISCONNECTED: spec.disconnected_sentences,
        SUPPORTING: spec.supporting_sentences,
    }
    sample.meta["noise_shortfall"] = noise.shortfall
    return sample


def canonical_key(sample: Sample) -> CanonicalKey:
    """Order- and template-free identity of a sample: sorted chain triples plus oriented question."""
    meta = sample.meta
    try:
        edges = meta["chain"]["edges"]
        q = meta["question"]
        return CanonicalKey(
            tuple(sorted("|".join(e) for e in edges)), (q["x"], q["y"])
        )
    except (KeyError, TypeError) as exc:
        raise MissingMeta(f"sample {sample.id} lacks chain/question metadata") from exc


# -- serialization ---------------------------------------------------------


def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def babi_lines(sample: Sample) -> list[str]:
    lines = [f"{i} {s}" for i, s in enumerate(sample.story, start=1)]
    origins = sample.meta.get("origins") or []
    support = [str(i) for i, o in enumerate(origins, start=1) if o[0] == "chain"]
    n = len(sample.story) + 1
    lines.append(f"{n} {sample.question}\t{sample.answer}\t{' '.join(support)}")
    return lines


def write_dataset(samples: Iterable[Sample], fmt: str, path: str | os.PathLike) -> Path:
    path = Path(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for s in samples:
                if fmt == "jsonl":
                    fh.write(_dump(s.to_dict()) + "\n")
                else:
                    fh.write("\n".join(babi_lines(s)) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


def read_dataset(path: str | os.PathLike) -> list[Sample]:
    with open(path, encoding="utf-8") as fh:
        return [Sample.from_dict(json.loads(line)) for line in fh if line.strip()]


def read_babi(path: str | os.PathLike, bank: TemplateBank, k_hint: int | None = None) -> list[Sample]:
    """Read a babi-txt file; chain triples and question entities are recovered by parsing."""
    out: list[Sample] = []
    story: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            num, rest = line.split(" ", 1)
            if num == "1":
                story = []
            if "\t" not in rest:
                story.append(rest)
                continue
            question, answer, support = rest.split("\t")
            idx = [int(i) - 1 for i in support.split()]
            edges = [bank.parse(story[i]).to_list() for i in idx]
            x, y = bank.parse_question(question)
            meta = {
                "chain": {"edges": edges},
                "question": {"x": x, "y": y},
                "origins": [["chain", 0] if i in idx else ["noise", 0] for i in range(len(story))],
            }
            out.append(Sample(len(out), k_hint or len(edges), story, question, answer, meta))
    return out


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# -- analysis --------------------------------------------------------------


@dataclass
class LeakageReport:
    fraction: float
    overlap: int
    total: int
    per_k: dict[int, dict[str, float]] = field(default_factory=dict)
    offending_ids: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "fraction": self.fraction,
            "overlap": self.overlap,
            "total": self.total,
            "per_k": {str(k): v for k, v in sorted(self.per_k.items())},
            "offending_ids": self.offending_ids,
        }


def leakage(train: Iterable[Sample], test: Iterable[Sample]) -> LeakageReport:
    seen = {canonical_key(s) for s in train}
    counts: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    offending = []
    total = 0
    for s in test:
        total += 1
        row = counts[s.k]
        row[1] += 1
        if canonical_key(s) in seen:
            row[0] += 1
            offending.append(s.id)
    per_k = {
        k: {"overlap": o, "total": n, "fraction": o / n if n else 0.0}
        for k, (o, n) in sorted(counts.items())
    }
    return LeakageReport(
        len(offending) / total if total else 0.0, len(offending), total, per_k, offending
    )


def noise_stats(dataset: Iterable[Sample]) -> dict[int, dict[str, Any]]:
    """Per-k totals and per-sample means of noise sentences/entities by noise type."""
    acc: dict[int, dict[str, Any]] = {}
    for s in dataset:
        if "noise" not in s.meta:
            raise MissingMeta(f"sample {s.id} has no noise annotations")
        row = acc.setdefault(
            s.k,
            {"samples": 0, **{t: {"sentences": 0, "entities": 0, "segments": 0} for t in NOISE_TYPES}},
        )
        row["samples"] += 1
        segs: dict[str, set] = defaultdict(set)
        for ann in s.meta["noise"]:
            cell = row[ann["type"]]
            cell["sentences"] += 1
            cell["entities"] += len(ann["new_entities"])
            segs[ann["type"]].add(ann.get("segment", 0))
        for t, ids in segs.items():
            row[t]["segments"] += len(ids)
    for row in acc.values():
        n = row["samples"]
        for t in NOISE_TYPES:
            cell = row[t]
            cell["mean_sentences"] = cell["sentences"] / n
            cell["mean_entities"] = cell["entities"] / n
    return dict(sorted(acc.items()))


def noise_violations(sample: Sample, supporting_min_k: int = 3) -> list[str]:
    """Entity-accounting rules every noisy sample must satisfy."""
    chain_ents = set(sample.meta["chain"]["entities"])
    out = []
    by_type: dict[str, list[dict]] = defaultdict(list)
    for ann in sample.meta["noise"]:
        by_type[ann["type"]].append(ann)
    new = [e for ann in sample.meta["noise"] for e in ann["new_entities"]]
    if len(new) != len(set(new)) or chain_ents & set(new):
        out.append("noise entities repeat or collide with chain entities")
    irr = by_type[IRRELEVANT]
    if sum(len(a["new_entities"]) for a in irr) != len(irr):
        out.append("irrelevant: entities != sentences")
    segments: dict[int, list[dict]] = defaultdict(list)
    for a in by_type[DISCONNECTED]:
        segments[a["segment"]].append(a)
    for seg, anns in segments.items():
        if sum(len(a["new_entities"]) for a in anns) != len(anns) + 1:
            out.append(f"disconnected segment {seg}: entities != sentences + 1")
    sup = by_type[SUPPORTING]
    if sup and sample.k < supporting_min_k:
        out.append(f"supporting noise at k={sample.k}")
    if any(a["new_entities"] for a in sup):
        out.append("supporting noise introduced entities")
    chain_edges = {tuple(e) for e in sample.meta["chain"]["edges"]}
    for a in sup:
        t = RelationTriple(*a["triple"])
        inv = (t.tail, t.rel.inverse.value, t.head)
        if tuple(a["triple"]) in chain_edges or inv in chain_edges:
            out.append("supporting triple duplicates a chain edge")
    return out


# -- split building --------------------------------------------------------

_WORKER_BANK: TemplateBank | None = None


def _init_worker(bank_text: str, entities: tuple[str, ...]) -> None:
    global _WORKER_BANK
    _WORKER_BANK = bank_from_text(bank_text, entities)


def _make_and_certify(args) -> tuple[Sample, dict]:
    seed, split, k, attempt, policy, bank = args
    bank = bank or _WORKER_BANK
    sid = stream_id(seed, split, k, attempt)
    s = generate_sample(k, bank, random.Random(sid), policy, seed=sid, lexicon=bank.entities)
    return s, certify(s, bank).to_dict()


@dataclass
class SplitResult:
    samples: dict[str, list[Sample]]
    attempts: dict[str, dict[int, int]]
    certification_failures: list[dict]


def generate_splits(
    plan: SplitPlan,
    bank: TemplateBank,
    seed: int,
    policy: NoisePolicy = NoisePolicy(),
    workers: int = 1,
    bank_text: str | None = None,
    batch: int = 2048,
) -> SplitResult:
    """Generate, certify and de-duplicate every split.

    Attempts are numbered per (split, k) and accepted in attempt order, so
    the output is independent of the worker count.
    """
    pool = None
    if workers > 1:
        if bank_text is None:
            raise ValueError("parallel generation needs the bank source text")
        pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(bank_text, bank.entities))
    try:
        samples: dict[str, list[Sample]] = {}
        attempts: dict[str, dict[int, int]] = {}
        failures: list[dict] = []
        for split, ks, n, noisy in plan.splits():
            pol = policy if noisy else NO_NOISE
            out: list[Sample] = []
            attempts[split] = {}
            for k in ks:
                keys: set[CanonicalKey] = set()
                taken = 0
                attempt = 0
                while taken < n:
                    todo = range(attempt, attempt + batch)
                    attempt += batch
                    local = None if pool else bank
                    jobs = [(seed, split, k, a, pol, local) for a in todo]
                    results = pool.map(_make_and_certify, jobs, chunksize=64) if pool else map(_make_and_certify, jobs)
                    for a, (s, rep) in zip(todo, results):
                        if taken == n:
                            attempt = a
                            break
                        key = canonical_key(s)
                        if key in keys:
                            continue
                        if not rep["passed"]:
                            rep["split"] = split
                            failures.append(rep)
                        keys.add(key)
                        s.id = len(out)
                        out.append(s)
                        taken += 1
                attempts[split][k] = attempt
                log.info("%s k=%d: %d samples from %d attempts", split, k, n, attempt)
            samples[split] = out
        return SplitResult(samples, attempts, failures)
    finally:
        if pool:
            pool.shutdown()


def build_splits(
    plan: SplitPlan,
    bank: TemplateBank,
    seed: int,
    out_dir: str | os.PathLike,
    fmt: str = "jsonl",
    policy: NoisePolicy = NoisePolicy(),
    workers: int = 1,
    bank_text: str | None = None,
) -> dict[str, Any]:
    """Generate all splits, write them and a manifest; returns the manifest."""
    res = generate_splits(plan, bank, seed, policy, workers, bank_text)
    if res.certification_failures:
        first = res.certification_failures[0]
        raise CertificationError(
            f"{len(res.certification_failures)} samples failed certification; first: {first}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for split, samples in res.samples.items():
        if fmt == "jsonl":
            p = write_dataset(samples, "jsonl", out_dir / f"{split}.jsonl")
            files[p.name] = sha256_file(p)
        else:
            by_k: dict[int, list[Sample]] = defaultdict(list)
            for s in samples:
                by_k[s.k].append(s)
            for k, group in sorted(by_k.items()):
                p = write_dataset(group, "babi", out_dir / f"{split}_k{k}.txt")
                files[p.name] = sha256_file(p)
    manifest = {
        "seed": seed,
        "format": fmt,
        "plan": plan.to_dict(),
        "noise_policy": policy.to_dict(),
        "bank_version": bank.version,
        "counts": {
            split: {str(k): sum(1 for s in ss if s.k == k) for k in sorted({s.k for s in ss})}
            for split, ss in res.samples.items()
        },
        "attempts": {split: {str(k): a for k, a in d.items()} for split, d in res.attempts.items()},
        "certified": sum(len(ss) for ss in res.samples.values()),
        "leakage": leakage(res.samples["train"], res.samples["test"]).to_dict(),
        "noise_stats": {str(k): v for k, v in noise_stats(res.samples["test"]).items()},
        "files": files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def iter_split_files(out_dir: str | os.PathLike, split: str) -> Iterator[Path]:
    out_dir = Path(out_dir)
    single = out_dir / f"{split}.jsonl"
    if single.exists():
        yield single
    else:
        yield from sorted(out_dir.glob(f"{split}_k*.txt"), key=lambda p: int(p.stem.split("_k")[1]))


def load_split(out_dir: str | os.PathLike, split: str, bank: TemplateBank | None = None) -> list[Sample]:
    samples: list[Sample] = []
    for p in iter_split_files(out_dir, split):
        if p.suffix == ".jsonl":
            samples.extend(read_dataset(p))
        else:
            if bank is None:
                raise StepGameError("reading babi files needs a template bank")
            k = int(p.stem.split("_k")[1])
            samples.extend(read_babi(p, bank, k))
    return samples
