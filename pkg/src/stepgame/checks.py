"""Structural and algebraic checks of the TP-MANN reference, packaged as a report."""
from __future__ import annotations

import time
from dataclasses import asdict, replace

import numpy as np

from .spatial import ANSWER_LABELS
from .templates import QUESTION_TEMPLATES, TemplateBank
from .tpr import (
    Dims,
    EncodedStory,
    ModelParams,
    Vocabulary,
    bind,
    decode,
    encode,
    episodes,
    keys,
    layer_norm,
    memory_forward,
    param_count,
    tokenize,
    unbind,
)


def bank_vocabulary(bank: TemplateBank) -> tuple[Vocabulary, int]:
    """Vocabulary of every sentence/question the bank can emit, plus answer labels; and max length."""
    a, b = bank.entities[0], bank.entities[1]
    texts = [t.fill(a, b) for t in bank.templates]
    texts += [q.replace("<X>", a).replace("<Y>", b) for q in QUESTION_TEMPLATES]
    nmax = max(len(tokenize(t)) for t in texts)
    extra = [e.lower() for e in bank.entities] + [lbl.value for lbl in ANSWER_LABELS]
    return Vocabulary.build(texts, extra), nmax


def orthonormal_recovery_error(rng: np.random.Generator, d_e: int, d_r: int, n: int) -> float:
    roles, _ = np.linalg.qr(rng.standard_normal((d_r, d_r)))
    roles = roles[:, :n].T
    fillers = rng.standard_normal((n, d_e))
    M = bind(list(zip(fillers, roles)))
    return max(float(np.max(np.abs(unbind(M, roles[i]) - fillers[i]))) for i in range(n))


def tpr_recovery(instances: int, d_e: int, d_r: int, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, d_r + 1))
        worst = max(worst, orthonormal_recovery_error(rng, d_e, d_r, n))
    return worst


def random_story(rng: np.random.Generator, dims: Dims, m: int) -> tuple[list[list[int]], list[int]]:
    story = [list(rng.integers(0, dims.vocab, rng.integers(1, dims.nmax + 1))) for _ in range(m)]
    question = list(rng.integers(0, dims.vocab, rng.integers(1, dims.nmax + 1)))
    return story, question


def tpmann_check(
    dims: Dims | None = None,
    bank: TemplateBank | None = None,
    T: int = 8,
    m: int = 10,
    seed: int = 0,
    recovery_instances: int = 1000,
) -> dict:
    """Run every structural invariant and return a JSON-ready report."""
    if dims is None:
        dims = Dims()
        if bank is not None:
            vocab, nmax = bank_vocabulary(bank)
            dims = replace(dims, vocab=len(vocab), nmax=nmax)
    params = ModelParams.init(dims, seed)
    rng = np.random.default_rng(seed)
    inv: dict[str, dict] = {}

    counts = {t: param_count(dims) for t in (1, 2, 4, 8)}
    inv["param_count_independent_of_T"] = {
        "passed": len(set(counts.values())) == 1 and params.count() == counts[1],
        "counts": counts,
        "enumerated": params.count(),
    }
    total = counts[1]
    inv["param_count_band"] = {"passed": 3_400_000 <= total <= 4_600_000, "value": total, "band": [3_400_000, 4_600_000]}

    err = tpr_recovery(recovery_instances, dims.d_e, dims.d_r, seed)
    inv["tpr_orthonormal_recovery"] = {"passed": err <= 1e-10, "max_error": err, "instances": recovery_instances}

    story, question = random_story(rng, dims, m)
    enc = encode(story, question, params)
    t0 = time.perf_counter()
    M = memory_forward(enc, params, T)
    probs = decode(M, enc.q, params)
    elapsed = time.perf_counter() - t0
    norm_err = abs(float(probs.sum()) - 1.0)
    inv["forward"] = {
        "passed": bool(np.all(np.isfinite(M)) and np.all(np.isfinite(probs)) and norm_err <= 1e-9 and elapsed < 1.0),
        "softmax_error": norm_err,
        "seconds": elapsed,
        "memory_shape": list(M.shape),
        "min_prob": float(probs.min()),
    }

    # First layer from zero memory stores only the direct episodes.
    ks = keys(enc, params)
    K1, _, K3 = (ks.K(j) for j in (1, 2, 3))
    expected = layer_norm(episodes(K1, ks.E[1]) + episodes(K3, ks.E[0]))
    first = memory_forward(enc, params, 1)
    t0_err = float(np.max(np.abs(first - expected)))
    inv["first_layer_stores_episodes"] = {"passed": t0_err <= 1e-9, "max_error": t0_err}

    perm = rng.permutation(m)
    shuffled = EncodedStory(enc.S[perm], enc.q)
    perm_err = float(np.max(np.abs(memory_forward(shuffled, params, 2) - memory_forward(enc, params, 2))))
    inv["sentence_order_invariance"] = {"passed": perm_err <= 1e-9, "max_error": perm_err}

    ln = layer_norm(M + rng.standard_normal(M.shape))
    ln_err = max(abs(float(ln.mean())), abs(float(ln.var()) - 1.0))
    inv["layer_norm_moments"] = {"passed": ln_err <= 1e-6, "max_error": ln_err}

    return {
        "dims": asdict(dims),
        "vocab": dims.vocab,
        "T": T,
        "m": m,
        "param_count": total,
        "invariants": inv,
        "passed": all(v["passed"] for v in inv.values()),
    }
