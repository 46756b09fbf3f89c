"""Tensor-product binding/unbinding and a forward-only TP-MANN reference.

Memory tensors are indexed ``(head entity, relation, tail entity)`` with
shape ``(d_e, d_r, d_e)``.  Sentence keys contract against the first two
axes; the decoder unbinds the head axis, then the relation axis, so each
retrieved vector lives in tail-entity space and is fed back as the next
head query.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, SentenceTooLong, TokenOutOfRange

_TOKEN = re.compile(r"[A-Za-z0-9]+(?:[-'][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")


# -- binding ---------------------------------------------------------------


def bind(pairs: Sequence[tuple[np.ndarray, np.ndarray]], shape: tuple[int, int] | None = None) -> np.ndarray:
    """Sum of outer products ``f_i r_i^T``; ``shape`` is required for an empty list."""
    if not pairs:
        if shape is None:
            raise DimensionMismatch("empty binding needs an explicit shape")
        return np.zeros(shape)
    fs = [np.asarray(f, dtype=float) for f, _ in pairs]
    rs = [np.asarray(r, dtype=float) for _, r in pairs]
    if len({f.shape for f in fs}) != 1 or len({r.shape for r in rs}) != 1 or fs[0].ndim != 1 or rs[0].ndim != 1:
        raise DimensionMismatch("fillers and roles must each share one vector dimension")
    return np.stack(fs, axis=1) @ np.stack(rs, axis=0)


def unbind(M: np.ndarray, u: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or M.shape[-1] != u.shape[0]:
        raise DimensionMismatch(f"cannot unbind {M.shape} with {u.shape}")
    return M @ u


def layer_norm(x: np.ndarray) -> np.ndarray:
    """Normalise over every entry; a constant input maps to zeros."""
    centred = x - x.mean()
    std = np.sqrt(np.mean(centred * centred))
    if std == 0.0 or not np.isfinite(std):
        return np.zeros_like(x)
    return centred / std


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


# -- model -----------------------------------------------------------------


@dataclass(frozen=True)
class Dims:
    d: int = 256
    d_e: int = 200
    d_r: int = 80
    hidden: int = 200
    vocab: int = 100
    nmax: int = 20
    trainable_initial_memory: bool = True


@dataclass
class MLP:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _mlp(rng: np.random.Generator, d_in: int, hidden: int, d_out: int) -> MLP:
    return MLP(
        _uniform(rng, d_in, (d_in, hidden)),
        _uniform(rng, d_in, hidden),
        _uniform(rng, hidden, (hidden, d_out)),
        _uniform(rng, hidden, d_out),
    )


@dataclass
class ModelParams:
    dims: Dims
    embeddings: np.ndarray  # (|V|, d)
    positions: np.ndarray  # (nmax, d)
    f_e: list[MLP]  # 2 x (d -> d_e)
    f_r: list[MLP]  # 3 x (d -> d_r)
    f_u: list[MLP]  # d -> d_e, then 3 x (d -> d_r)
    w_o: np.ndarray  # (|V|, d_e)
    m0: np.ndarray  # (d_e, d_r, d_e); zero-initialised

    @classmethod
    def init(cls, dims: Dims = Dims(), seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)
        d, de, dr, h = dims.d, dims.d_e, dims.d_r, dims.hidden
        return cls(
            dims=dims,
            embeddings=rng.uniform(-1.0, 1.0, (dims.vocab, d)),
            positions=rng.uniform(-1.0, 1.0, (dims.nmax, d)),
            f_e=[_mlp(rng, d, h, de) for _ in range(2)],
            f_r=[_mlp(rng, d, h, dr) for _ in range(3)],
            f_u=[_mlp(rng, d, h, de)] + [_mlp(rng, d, h, dr) for _ in range(3)],
            w_o=_uniform(rng, de, (dims.vocab, de)),
            m0=np.zeros((de, dr, de)),
        )

    def trainable(self) -> list[np.ndarray]:
        arrays = [self.embeddings, self.positions, self.w_o]
        for net in (*self.f_e, *self.f_r, *self.f_u):
            arrays.extend(net.arrays())
        if self.dims.trainable_initial_memory:
            arrays.append(self.m0)
        return arrays

    def count(self) -> int:
        return sum(a.size for a in self.trainable())


def param_count(dims: Dims) -> int:
    """Closed-form trainable scalar count; no dependence on the number of layers."""
    d, de, dr, h, V = dims.d, dims.d_e, dims.d_r, dims.hidden, dims.vocab

    def mlp(out: int) -> int:
        return d * h + h + h * out + out

    total = V * d + dims.nmax * d + V * de
    total += 2 * mlp(de) + 3 * mlp(dr) + mlp(de) + 3 * mlp(dr)
    if dims.trainable_initial_memory:
        total += de * dr * de
    return total


# -- forward pass ----------------------------------------------------------


@dataclass
class EncodedStory:
    S: np.ndarray  # (m, d)
    q: np.ndarray  # (d,)
    lengths: list[int] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.S.shape[0]


def _encode_one(tokens: Sequence[int], params: ModelParams) -> np.ndarray:
    V, nmax = params.dims.vocab, params.dims.nmax
    if len(tokens) == 0:
        raise ValueError("cannot encode an empty sentence")
    if len(tokens) > nmax:
        raise SentenceTooLong(f"{len(tokens)} tokens > nmax={nmax}")
    ids = np.asarray(tokens)
    if ids.min() < 0 or ids.max() >= V:
        raise TokenOutOfRange(f"token ids must lie in [0, {V})")
    w = params.embeddings[ids]
    p = params.positions[: len(ids)]
    return (w * p).mean(axis=0)


def encode(story: Sequence[Sequence[int]], question: Sequence[int], params: ModelParams) -> EncodedStory:
    if not story:
        raise ValueError("story needs at least one sentence")
    S = np.stack([_encode_one(s, params) for s in story])
    return EncodedStory(S, _encode_one(question, params), [len(s) for s in story])


@dataclass
class Keys:
    E: list[np.ndarray]  # 2 x (m, d_e)
    R: list[np.ndarray]  # 3 x (m, d_r)

    def K(self, j: int) -> np.ndarray:
        """Search key j (1-based) as (m, d_e, d_r)."""
        e, r = {1: (0, 0), 2: (0, 1), 3: (1, 2)}[j]
        return np.einsum("sa,sb->sab", self.E[e], self.R[r])


def keys(enc: EncodedStory, params: ModelParams) -> Keys:
    return Keys([f(enc.S) for f in params.f_e], [f(enc.S) for f in params.f_r])


def episodes(K: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Sum over sentences of K[s] (x) X[s] -> (d_e, d_r, d_e)."""
    m = K.shape[0]
    return (K.reshape(m, -1).T @ X).reshape(K.shape[1], K.shape[2], X.shape[1])


def pseudo_entities(K: np.ndarray, M: np.ndarray) -> np.ndarray:
    m = K.shape[0]
    return K.reshape(m, -1) @ M.reshape(-1, M.shape[2])


def memory_step(M: np.ndarray, ks: Keys, Ks: list[np.ndarray]) -> np.ndarray:
    P = [pseudo_entities(K, M) for K in Ks]
    old = sum(episodes(K, Pj) for K, Pj in zip(Ks, P))
    new = episodes(Ks[0], ks.E[1]) + episodes(Ks[1], P[0]) + episodes(Ks[2], ks.E[0])
    return layer_norm(M + new - old)


def memory_forward(enc: EncodedStory, params: ModelParams, T: int = 8) -> np.ndarray:
    if T < 1:
        raise ValueError("need at least one recurrent layer")
    if enc.S.shape[1] != params.dims.d:
        raise DimensionMismatch(f"sentence vectors have dim {enc.S.shape[1]}, model expects {params.dims.d}")
    ks = keys(enc, params)
    Ks = [ks.K(j) for j in (1, 2, 3)]
    M = params.m0
    for _ in range(T):
        M = memory_step(M, ks, Ks)
    return M


def decode(M: np.ndarray, q: np.ndarray, params: ModelParams) -> np.ndarray:
    de, dr = params.dims.d_e, params.dims.d_r
    if M.shape != (de, dr, de) or q.shape != (params.dims.d,):
        raise DimensionMismatch(f"memory {M.shape} / question {q.shape} do not fit the model")
    U = [f(q) for f in params.f_u]
    I = []
    query = U[0]
    for u in U[1:]:
        query = np.einsum("bc,b->c", layer_norm(np.einsum("abc,a->bc", M, query)), u)
        I.append(query)
    return softmax(params.w_o @ sum(I))


def forward(story, question, params: ModelParams, T: int = 8) -> np.ndarray:
    enc = encode(story, question, params)
    return decode(memory_forward(enc, params, T), enc.q, params)


# -- vocabulary ------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN.findall(text)]


@dataclass
class Vocabulary:
    words: list[str]

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def ids(self, text: str) -> list[int]:
        return [self.index[t] for t in tokenize(text)]

    @classmethod
    def build(cls, texts: Iterable[str], extra: Iterable[str] = ()) -> "Vocabulary":
        seen = {"<pad>": None}
        for w in extra:
            seen.setdefault(w, None)
        for t in texts:
            for w in tokenize(t):
                seen.setdefault(w, None)
        return cls(list(seen))
