"""Command-line entry point.

Machine-readable results go to stdout as JSON lines; human summaries go to
stderr. Exit codes: 0 success, 1 validation failure, 2 usage error.
Set ``STEPGAME_VERBOSITY`` to quiet, info or debug.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .checks import tpmann_check
from .dataset import (
    FORMATS,
    SplitPlan,
    build_splits,
    leakage,
    load_split,
    noise_stats,
    read_babi,
    read_dataset,
)
from .errors import CertificationError, StepGameError
from .generator import count_samples
from .noise import NoisePolicy
from .oracle import certify, solve
from .spatial import RelationTriple
from .templates import bank_from_text, load_bank, read_bank_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("stepgame")


class UsageError(Exception):
    pass


def _emit(obj: Any) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")
    sys.stdout.flush()


def _say(msg: str) -> None:
    if os.environ.get("STEPGAME_VERBOSITY", "info") != "quiet":
        print(msg, file=sys.stderr)


def _range(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)(?:\.\.(\d+))?", text.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"expected MIN..MAX, got {text!r}")
    lo = int(m[1])
    hi = int(m[2]) if m[2] is not None else lo
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _ks(text: str) -> tuple[int, ...]:
    lo, hi = _range(text)
    if lo < 1:
        raise argparse.ArgumentTypeError("k must be >= 1")
    return tuple(range(lo, hi + 1))


def _bank(path: str | None):
    if path is not None and not Path(path).is_file():
        raise UsageError(f"template bank not found: {path}")
    return load_bank(path)


def _load_samples(path: str, bank) -> list:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file or directory: {path}")
    if p.is_dir():
        raise UsageError(f"{path} is a directory; pass a split file")
    if p.suffix == ".txt":
        return read_babi(p, bank)
    return read_dataset(p)


# -- gen -------------------------------------------------------------------

GEN_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "k_train": (1, 2, 3, 4, 5),
    "k_test": tuple(range(1, 11)),
    "train_n": 10_000,
    "valid_n": 1_000,
    "test_n": 10_000,
    "noise_irrelevant": (0, 3),
    "noise_disconnected": (0, 3),
    "noise_supporting": (0, 2),
    "supporting_min_k": 3,
    "train_noise": "off",
    "profile": "stepgame",
    "bank": None,
    "format": "jsonl",
    "workers": 1,
    "out": None,
    "figures": None,
}

_CONFIG_PARSERS = {
    "k_train": lambda v: _ks(v) if isinstance(v, str) else tuple(v),
    "k_test": lambda v: _ks(v) if isinstance(v, str) else tuple(v),
    "noise_irrelevant": lambda v: _range(v) if isinstance(v, str) else tuple(v),
    "noise_disconnected": lambda v: _range(v) if isinstance(v, str) else tuple(v),
    "noise_supporting": lambda v: _range(v) if isinstance(v, str) else tuple(v),
}


def resolve_gen_config(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(GEN_DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r}")
            try:
                cfg[key] = _CONFIG_PARSERS.get(key, lambda v: v)(value)
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
    for key in GEN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["out"] is None:
        raise UsageError("--out is required (flag or config)")
    if cfg["format"] not in FORMATS:
        raise UsageError(f"--format must be one of {FORMATS}")
    if cfg["train_noise"] == "on" and cfg["profile"] == "stepgame":
        raise UsageError("the stepgame profile trains noise-free; use --profile custom to add training noise")
    if cfg["workers"] < 1:
        raise UsageError("--workers must be >= 1")
    return cfg


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = resolve_gen_config(args)
    if cfg["bank"] is not None and not Path(cfg["bank"]).is_file():
        raise UsageError(f"template bank not found: {cfg['bank']}")
    bank_text = read_bank_text(cfg["bank"])
    bank = bank_from_text(bank_text)
    plan = SplitPlan(
        train_n=cfg["train_n"],
        valid_n=cfg["valid_n"],
        test_n=cfg["test_n"],
        train_ks=tuple(cfg["k_train"]),
        test_ks=tuple(cfg["k_test"]),
        train_noise=cfg["train_noise"] == "on",
    )
    policy = NoisePolicy(
        tuple(cfg["noise_irrelevant"]),
        tuple(cfg["noise_disconnected"]),
        tuple(cfg["noise_supporting"]),
        cfg["supporting_min_k"],
    )
    try:
        manifest = build_splits(plan, bank, cfg["seed"], cfg["out"], cfg["format"], policy, cfg["workers"], bank_text)
    except CertificationError as exc:
        _emit({"command": "gen", "passed": False, "error": str(exc)})
        _say(f"certification failed: {exc}")
        return EXIT_FAIL
    if cfg["figures"]:
        from .plotting import plot_counts, plot_leakage, plot_noise_stats

        fig_dir = Path(cfg["figures"])
        plot_noise_stats(manifest["noise_stats"], fig_dir / "noise_stats.png")
        plot_leakage(manifest["leakage"], fig_dir / "leakage.png")
        plot_counts(manifest["counts"], fig_dir / "counts.png")
    _emit({"command": "gen", "passed": True, "out": str(cfg["out"]), "counts": manifest["counts"],
           "leakage": manifest["leakage"]["fraction"]})
    total = sum(sum(v.values()) for v in manifest["counts"].values())
    _say(f"wrote {total} certified samples to {cfg['out']} "
         f"(train->test overlap {100 * manifest['leakage']['fraction']:.2f}%)")
    return EXIT_OK


# -- analysis commands -----------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    bank = _bank(args.bank)
    p = Path(args.path)
    if p.is_dir():
        files = sorted(p.glob("*.jsonl"))
        if not files:
            raise UsageError(f"no .jsonl split files in {p}")
    elif p.is_file():
        files = [p]
    else:
        raise UsageError(f"no such file or directory: {p}")
    failed = total = 0
    sink = open(args.reports, "w", encoding="utf-8") if args.reports else None
    try:
        for f in files:
            for s in read_dataset(f):
                rep = certify(s, bank).to_dict()
                rep["file"] = f.name
                total += 1
                if sink:
                    sink.write(json.dumps(rep, sort_keys=True) + "\n")
                if not rep["passed"]:
                    failed += 1
                    _emit(rep)
    finally:
        if sink:
            sink.close()
    _emit({"command": "validate", "samples": total, "failures": failed, "passed": failed == 0})
    _say(f"validated {total} samples: {failed} failure(s)")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_leakage(args: argparse.Namespace) -> int:
    bank = _bank(args.bank)
    rep = leakage(_load_samples(args.train, bank), _load_samples(args.test, bank))
    out = rep.to_dict()
    if not args.ids:
        out.pop("offending_ids")
    _emit({"command": "leakage", **out})
    if args.figures:
        from .plotting import plot_leakage

        plot_leakage(rep.to_dict(), Path(args.figures) / "leakage.png")
    _say(f"{rep.overlap}/{rep.total} test samples ({100 * rep.fraction:.2f}%) also occur in train")
    for k, row in sorted(rep.per_k.items()):
        _say(f"  k={k:>2}: {row['overlap']:>6} / {row['total']}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    bank = _bank(args.bank)
    p = Path(args.path)
    if p.is_dir():
        samples = load_split(p, args.split, bank)
    else:
        samples = _load_samples(args.path, bank)
    stats = noise_stats(samples)
    for k, row in stats.items():
        _emit({"command": "stats", "k": k, **row})
    if args.figures:
        from .plotting import plot_noise_stats

        plot_noise_stats(stats, Path(args.figures) / "noise_stats.png")
    _say(f"{'k':>3} {'n':>6} " + " ".join(f"{t[:5]:>12}" for t in ("irrelevant", "disconnected", "supporting")))
    for k, row in stats.items():
        cells = " ".join(f"{row[t]['sentences']:>6}/{row[t]['entities']:<5}" for t in ("irrelevant", "disconnected", "supporting"))
        _say(f"{k:>3} {row['samples']:>6} {cells}")
    return EXIT_OK


def cmd_count(args: argparse.Namespace) -> int:
    try:
        n = count_samples(args.k, args.entities)
    except StepGameError as exc:
        raise UsageError(str(exc)) from None
    _emit({"command": "count", "k": args.k, "entities": args.entities, "count": n})
    _say(str(n))
    return EXIT_OK


_TRIPLE = re.compile(r"\(\s*([^,()]+?)\s*,\s*([a-z-]+)\s*,\s*([^,()]+?)\s*\)")


def parse_triples(text: str) -> list[RelationTriple]:
    found = _TRIPLE.findall(text)
    leftover = _TRIPLE.sub("", text).replace(";", "").strip()
    if not found or leftover:
        raise UsageError(f"cannot read triples from {text!r}; expected (HEAD,direction,TAIL);...")
    try:
        return [RelationTriple(h, r, t) for h, r, t in found]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(args: argparse.Namespace) -> int:
    if args.triples:
        triples = parse_triples(args.triples)
    else:
        p = Path(args.story)
        if not p.is_file():
            raise UsageError(f"story file not found: {p}")
        bank = _bank(args.bank)
        triples = []
        for line in p.read_text("utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("("):
                triples.extend(parse_triples(line))
            else:
                try:
                    triples.append(bank.parse(line))
                except StepGameError as exc:
                    raise UsageError(str(exc)) from None
    x, y = args.question
    if x == y:
        raise UsageError("question entities must differ")
    try:
        label = solve(triples, (x, y)).value
    except StepGameError as exc:
        _emit({"command": "solve", "passed": False, "error": f"{type(exc).__name__}: {exc}"})
        _say(f"unsolvable: {exc}")
        return EXIT_FAIL
    _emit({"command": "solve", "question": [x, y], "answer": label, "passed": True})
    _say(label)
    return EXIT_OK


def cmd_tpmann_check(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from .checks import bank_vocabulary
    from .tpr import Dims

    bank = _bank(args.bank)
    vocab, nmax = bank_vocabulary(bank)
    dims = Dims(args.d, args.d_e, args.d_r, args.hidden, len(vocab), nmax, not args.fixed_initial_memory)
    if args.vocab:
        dims = replace(dims, vocab=args.vocab)
    rep = tpmann_check(dims, T=args.T, m=args.m, seed=args.seed, recovery_instances=args.instances)
    _emit({"command": "tpmann-check", **rep})
    for name, row in rep["invariants"].items():
        _say(f"{'PASS' if row['passed'] else 'FAIL'}  {name}")
    return EXIT_OK if rep["passed"] else EXIT_FAIL


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stepgame", description="StepGame benchmark generator and verifier")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate train/valid/test splits and a manifest")
    g.add_argument("--config", help="JSON run config; flags override its values")
    g.add_argument("--seed", type=int)
    g.add_argument("--k-train", type=_ks, metavar="MIN..MAX")
    g.add_argument("--k-test", type=_ks, metavar="MIN..MAX")
    g.add_argument("--train-n", type=int)
    g.add_argument("--valid-n", type=int)
    g.add_argument("--test-n", type=int)
    g.add_argument("--noise-irrelevant", type=_range, metavar="MIN..MAX")
    g.add_argument("--noise-disconnected", type=_range, metavar="MIN..MAX")
    g.add_argument("--noise-supporting", type=_range, metavar="MIN..MAX")
    g.add_argument("--supporting-min-k", type=int)
    g.add_argument("--train-noise", choices=("on", "off"))
    g.add_argument("--profile", choices=("stepgame", "custom"))
    g.add_argument("--bank", metavar="PATH")
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", metavar="DIR")
    g.add_argument("--figures", metavar="DIR", help="also render report figures into DIR")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("validate", help="certify every sample of a jsonl split (or a directory of them)")
    v.add_argument("path")
    v.add_argument("--bank")
    v.add_argument("--reports", metavar="FILE", help="write one certification report per sample")
    v.set_defaults(func=cmd_validate)

    lk = sub.add_parser("leakage", help="fraction of test samples whose canonical key occurs in train")
    lk.add_argument("train")
    lk.add_argument("test")
    lk.add_argument("--bank")
    lk.add_argument("--ids", action="store_true", help="include offending test ids")
    lk.add_argument("--figures", metavar="DIR")
    lk.set_defaults(func=cmd_leakage)

    st = sub.add_parser("stats", help="noise statistics per k")
    st.add_argument("path", help="split file, or dataset directory with --split")
    st.add_argument("--split", default="test")
    st.add_argument("--bank")
    st.add_argument("--figures", metavar="DIR")
    st.set_defaults(func=cmd_stats)

    c = sub.add_parser("count", help="number of distinct samples for k relations over E entities")
    c.add_argument("k", type=int)
    c.add_argument("entities", type=int)
    c.set_defaults(func=cmd_count)

    s = sub.add_parser("solve", help="answer a question over a story")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--story", metavar="FILE", help="one sentence or (H,rel,T) triple per line")
    src.add_argument("--triples", metavar="TEXT", help='e.g. "(B,right,A);(C,top,B)"')
    s.add_argument("--question", nargs=2, metavar=("X", "Y"), required=True, help="locate X relative to Y")
    s.add_argument("--bank")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("tpmann-check", help="structural checks of the TP-MANN reference")
    t.add_argument("--d", type=int, default=256)
    t.add_argument("--d-e", type=int, default=200)
    t.add_argument("--d-r", type=int, default=80)
    t.add_argument("--hidden", type=int, default=200)
    t.add_argument("--vocab", type=int, help="override the bank-derived vocabulary size")
    t.add_argument("--T", type=int, default=8)
    t.add_argument("--m", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--instances", type=int, default=1000)
    t.add_argument("--fixed-initial-memory", action="store_true",
                   help="keep the initial memory at zero and out of the parameter count")
    t.add_argument("--bank")
    t.set_defaults(func=cmd_tpmann_check)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    level = {"quiet": logging.WARNING, "debug": logging.DEBUG}.get(
        os.environ.get("STEPGAME_VERBOSITY", "info"), logging.INFO
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stepgame {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StepGameError as exc:
        print(f"stepgame {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
