"""Skip-gram with negative sampling over counted (center, context) pairs.

Walks are reduced once to a table of pair frequencies. Training then draws
pairs from that table with an alias sampler, adds ``K`` negative context
nodes, and takes one SGD step on

    -log sigma(psi_j . phi_i) - sum_k log sigma(-psi_nk . phi_i)

Negatives are drawn with probability proportional to context frequency
raised to ``noise_exponent``, either over all nodes (homogeneous mode) or
over the nodes sharing the context node's type (heterogeneous mode).
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from . import rng as _rng
from .alias import AliasTable, draw
from .errors import TrainingError

logger = logging.getLogger(__name__)

HOMOGENEOUS = "homogeneous"
HETEROGENEOUS = "heterogeneous"
_CHUNK = 1 << 23


@dataclass
class PairFrequencyTable:
    """Sparse co-occurrence counts sorted by ``(center, context)``."""

    centers: np.ndarray
    contexts: np.ndarray
    counts: np.ndarray
    window: int
    num_nodes: int

    def __len__(self):
        return self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def context_counts(self) -> np.ndarray:
        return np.bincount(self.contexts, weights=self.counts, minlength=self.num_nodes).astype(np.int64)

    @property
    def center_counts(self) -> np.ndarray:
        return np.bincount(self.centers, weights=self.counts, minlength=self.num_nodes).astype(np.int64)

    def context_counts_by_type(self, node_type) -> np.ndarray:
        node_type = np.asarray(node_type)
        return np.bincount(node_type, weights=self.context_counts, minlength=node_type.max() + 1).astype(np.int64)

    def count(self, center: int, context: int) -> int:
        key = np.int64(center) * self.num_nodes + context
        keys = self.centers * self.num_nodes + self.contexts
        k = np.searchsorted(keys, key)
        return int(self.counts[k]) if k < keys.size and keys[k] == key else 0

    def as_dict(self) -> dict:
        return {(int(a), int(b)): int(c) for a, b, c in zip(self.centers, self.contexts, self.counts)}


@njit(cache=True)
def _window_pairs(nodes, offsets, first, last, window, n, out):
    m = 0
    for k in range(first, last):
        lo = offsets[k]
        hi = offsets[k + 1]
        for i in range(lo, hi):
            a = max(lo, i - window)
            b = min(hi, i + window + 1)
            for j in range(a, b):
                if j != i:
                    out[m] = nodes[i] * n + nodes[j]
                    m += 1
    return m


@njit(cache=True)
def _pairs_per_walk(offsets, window):
    out = np.zeros(offsets.shape[0] - 1, np.int64)
    for k in range(out.shape[0]):
        length = offsets[k + 1] - offsets[k]
        total = 0
        for i in range(length):
            total += min(length, i + window + 1) - max(0, i - window) - 1
        out[k] = total
    return out


def _merge(keys, counts):
    order = np.argsort(keys, kind="stable")
    keys, counts = keys[order], counts[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]]) if keys.size else np.zeros(0, np.int64)
    return keys[starts], np.add.reduceat(counts, starts) if keys.size else counts


def count_pairs(corpus, window: int = 5, num_nodes: int | None = None) -> PairFrequencyTable:
    """Count ordered (center, context) pairs within ``window`` positions.

    Each position ``i`` of each walk pairs with every ``j`` where
    ``0 < |i - j| <= window``; both orders of a pair are counted separately.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    nodes = np.ascontiguousarray(corpus.nodes, dtype=np.int64)
    offsets = np.ascontiguousarray(corpus.offsets, dtype=np.int64)
    if num_nodes is None:
        num_nodes = int(nodes.max()) + 1 if nodes.size else 0
    per_walk = _pairs_per_walk(offsets, window)
    keys, counts = np.zeros(0, np.int64), np.zeros(0, np.int64)
    first = 0
    n_walks = offsets.size - 1
    while first < n_walks:
        last = first + 1
        budget = per_walk[first]
        while last < n_walks and budget + per_walk[last] <= _CHUNK:
            budget += per_walk[last]
            last += 1
        buf = np.empty(budget, np.int64)
        m = _window_pairs(nodes, offsets, first, last, window, num_nodes, buf)
        uniq, cnt = np.unique(buf[:m], return_counts=True)
        keys, counts = _merge(np.concatenate([keys, uniq]), np.concatenate([counts, cnt.astype(np.int64)]))
        first = last
    return PairFrequencyTable(keys // max(num_nodes, 1), keys % max(num_nodes, 1), counts, window, num_nodes)


class NegativeSampler:
    """Noise distribution over nodes, optionally split by node type.

    ``order`` lists node ids grouped by type; the alias table has one segment
    per type (a single segment in homogeneous mode). ``lo[t]:hi[t]`` is the
    segment that negatives for a type-``t`` context node come from.
    """

    def __init__(self, weights, node_type=None):
        weights = np.asarray(weights, dtype=np.float64)
        n = weights.size
        if node_type is None:
            node_type = np.zeros(n, dtype=np.int64)
        node_type = np.asarray(node_type, dtype=np.int64)
        self.node_type = node_type
        self.order = np.argsort(node_type, kind="stable").astype(np.int64)
        k = int(node_type.max()) + 1 if n else 1
        sizes = np.bincount(node_type, minlength=k)
        offsets = np.zeros(k + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(sizes)
        w = weights[self.order].copy()
        for t in range(k):
            seg = slice(offsets[t], offsets[t + 1])
            if sizes[t] and w[seg].sum() <= 0:
                w[seg] = 1.0  # never a context node, so never queried
        self.table = AliasTable(w, offsets)
        self.lo = offsets[:-1].copy()
        self.hi = offsets[1:].copy()

    def probabilities(self, context: int) -> np.ndarray:
        """Exact probability of each node being drawn for ``context``."""
        t = self.node_type[context]
        p = np.zeros(self.node_type.size)
        p[self.order[self.lo[t]:self.hi[t]]] = self.table.probabilities(t)
        return p

    def draw(self, context: int, rng, size=None):
        t = self.node_type[context]
        return self.order[self.table.sample(rng, size, segment=t)]


@dataclass
class Samplers:
    pairs: AliasTable
    negatives: NegativeSampler
    table: PairFrequencyTable

    def sample_pairs(self, rng, size):
        k = self.pairs.sample(rng, size)
        return self.table.centers[k], self.table.contexts[k]


def build_samplers(table: PairFrequencyTable, mode: str = HOMOGENEOUS, node_type=None,
                   noise_exponent: float = 0.75) -> Samplers:
    """Alias samplers for pairs (by frequency) and for negative nodes."""
    if len(table) == 0:
        raise TrainingError("pair table is empty")
    if mode not in (HOMOGENEOUS, HETEROGENEOUS):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == HETEROGENEOUS and node_type is None:
        raise ValueError("heterogeneous mode needs node types")
    weights = table.context_counts.astype(np.float64) ** noise_exponent
    negatives = NegativeSampler(weights, node_type if mode == HETEROGENEOUS else None)
    return Samplers(AliasTable(table.counts), negatives, table)


@dataclass
class EmbeddingModel:
    """Input vectors ``phi`` (the embeddings) and context vectors ``psi``."""

    phi: np.ndarray
    psi: np.ndarray

    @property
    def dim(self) -> int:
        return self.phi.shape[1]

    @property
    def num_nodes(self) -> int:
        return self.phi.shape[0]

    @classmethod
    def initialize(cls, num_nodes, dim, seed=0):
        gen = np.random.default_rng(seed)
        phi = gen.uniform(-0.5 / dim, 0.5 / dim, size=(num_nodes, dim))
        return cls(phi, np.zeros((num_nodes, dim)))

    def copy(self):
        return EmbeddingModel(self.phi.copy(), self.psi.copy())


@dataclass
class TrainConfig:
    mode: str = HOMOGENEOUS
    dim: int = 128
    negatives: int = 5
    learning_rate: float = 0.025
    max_iterations: int = 10_000_000
    noise_exponent: float = 0.75
    seed: int = 0
    deterministic: bool = True
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (HOMOGENEOUS, HETEROGENEOUS):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.negatives < 1:
            raise ValueError("need at least one negative sample")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def objective_value(model: EmbeddingModel, center: int, context: int, negatives) -> float:
    """Negative-sampling loss for one pair (lower is better)."""
    v = model.phi[center]
    pos = _log_sigmoid(model.psi[context] @ v)
    neg = sum(_log_sigmoid(-(model.psi[n] @ v)) for n in negatives)
    return float(-(pos + neg))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def objective_gradient(model: EmbeddingModel, center: int, context: int, negatives):
    """Gradient of :func:`objective_value`.

    Returns ``(d/d phi[center], {row: d/d psi[row]})``; repeated rows have
    their contributions summed.
    """
    v = model.phi[center]
    g_center = np.zeros_like(v)
    g_psi = {}
    for row, label in [(context, 1.0)] + [(n, 0.0) for n in negatives]:
        coef = _sigmoid(model.psi[row] @ v) - label
        g_center += coef * model.psi[row]
        g_psi[row] = g_psi.get(row, 0.0) + coef * v
    return g_center, g_psi


@njit(cache=True, inline="always")
def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _update(phi, psi, center, targets, alpha, coef, grad):
    """Exact gradient step: all coefficients use pre-update values."""
    d = phi.shape[1]
    for q in range(d):
        grad[q] = 0.0
    for k in range(targets.shape[0]):
        t = targets[k]
        dot = 0.0
        for q in range(d):
            dot += phi[center, q] * psi[t, q]
        coef[k] = _sig(dot) - (1.0 if k == 0 else 0.0)
        for q in range(d):
            grad[q] += coef[k] * psi[t, q]
    for k in range(targets.shape[0]):
        t = targets[k]
        step = alpha * coef[k]
        for q in range(d):
            psi[t, q] -= step * phi[center, q]
    for q in range(d):
        phi[center, q] -= alpha * grad[q]


def sgd_update(model: EmbeddingModel, center: int, context: int, negatives, alpha: float):
    """One in-place SGD step on the loss of a single (center, context) pair."""
    targets = np.asarray([context, *negatives], dtype=np.int64)
    _update(model.phi, model.psi, int(center), targets, float(alpha),
            np.empty(targets.size), np.empty(model.dim))


@njit(cache=True, inline="always")
def _negatives(ctx, neg_prob, neg_alias, order, type_lo, type_hi, node_type, targets, state):
    """Fill ``targets[1:]`` with noise nodes for context ``ctx``."""
    ty = node_type[ctx]
    for k in range(1, targets.shape[0]):
        targets[k] = order[draw(neg_prob, neg_alias, type_lo[ty], type_hi[ty], state)]


@njit(cache=True)
def _negatives_batch(contexts, k_neg, neg_prob, neg_alias, order, type_lo, type_hi, node_type, seed):
    state = np.empty(1, np.uint64)
    state[0] = _rng.substream(seed, 0, 2)
    targets = np.empty(k_neg + 1, np.int64)
    out = np.empty((contexts.shape[0], k_neg), np.int64)
    for i in range(contexts.shape[0]):
        _negatives(contexts[i], neg_prob, neg_alias, order, type_lo, type_hi, node_type, targets, state)
        out[i] = targets[1:]
    return out


def sample_negatives(samplers: "Samplers", contexts, k: int, seed: int = 0) -> np.ndarray:
    """``k`` negatives per context node, drawn by the training kernel's sampler."""
    neg = samplers.negatives
    contexts = np.ascontiguousarray(contexts, dtype=np.int64)
    return _negatives_batch(contexts, int(k), neg.table.prob, neg.table.alias, neg.order, neg.lo, neg.hi,
                            neg.node_type, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@njit(cache=True)
def _train_stream(phi, psi, pair_prob, pair_alias, centers, contexts, neg_prob, neg_alias, order,
                  type_lo, type_hi, node_type, k_neg, alpha0, total, first, last, state):
    targets = np.empty(k_neg + 1, np.int64)
    coef = np.empty(k_neg + 1)
    grad = np.empty(phi.shape[1])
    n_pairs = pair_prob.shape[0]
    for t in range(first, last):
        alpha = alpha0 * (1.0 - (1.0 - 1e-4) * t / total)
        p = draw(pair_prob, pair_alias, 0, n_pairs, state)
        ctx = contexts[p]
        targets[0] = ctx
        _negatives(ctx, neg_prob, neg_alias, order, type_lo, type_hi, node_type, targets, state)
        _update(phi, psi, centers[p], targets, alpha, coef, grad)


@njit(cache=True, parallel=True)
def _train_hogwild(phi, psi, pair_prob, pair_alias, centers, contexts, neg_prob, neg_alias, order,
                   type_lo, type_hi, node_type, k_neg, alpha0, total, workers, seed):
    per = (total + workers - 1) // workers
    for w in prange(workers):
        state = np.empty(1, np.uint64)
        state[0] = _rng.substream(seed, w, 1)
        first = w * per
        last = min(total, first + per)
        _train_stream(phi, psi, pair_prob, pair_alias, centers, contexts, neg_prob, neg_alias, order,
                      type_lo, type_hi, node_type, k_neg, alpha0, total, first, last, state)


def train(table: PairFrequencyTable, config: TrainConfig, num_nodes: int | None = None,
          node_type=None) -> EmbeddingModel:
    """Learn embeddings from a pair table.

    The learning rate decays linearly from ``config.learning_rate`` to
    ``1e-4`` times that value over ``max_iterations`` sampled pairs. With
    ``deterministic`` set, one update stream runs and the result is
    bit-reproducible for a fixed seed; otherwise ``threads`` workers update
    the shared matrices without locking.
    """
    num_nodes = table.num_nodes if num_nodes is None else num_nodes
    if len(table) == 0:
        raise TrainingError("pair table is empty")
    if node_type is None:
        node_type = np.zeros(num_nodes, dtype=np.int64)
    node_type = np.asarray(node_type, dtype=np.int64)
    samplers = build_samplers(table, config.mode, node_type, config.noise_exponent)
    neg = samplers.negatives
    model = EmbeddingModel.initialize(num_nodes, config.dim, config.seed)
    if config.max_iterations == 0:
        return model
    args = (model.phi, model.psi, samplers.pairs.prob, samplers.pairs.alias, table.centers, table.contexts,
            neg.table.prob, neg.table.alias, neg.order, neg.lo, neg.hi, neg.node_type,
            config.negatives, config.learning_rate, config.max_iterations)
    seed = np.uint64(int(config.seed) & 0xFFFFFFFFFFFFFFFF)
    if config.deterministic:
        state = np.array([_rng.substream(seed, 0, 0)], dtype=np.uint64)
        _train_stream(*args, 0, config.max_iterations, state)
    else:
        workers = config.threads or numba.get_num_threads()
        previous = numba.get_num_threads()
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))
        try:
            _train_hogwild(*args, workers, seed)
        finally:
            numba.set_num_threads(previous)
    for name, m in (("phi", model.phi), ("psi", model.psi)):
        bad = ~np.isfinite(m)
        if bad.any():
            rows = np.unique(np.nonzero(bad)[0])
            raise TrainingError(f"non-finite values in {name} for {rows.size} rows (first: {rows[:5].tolist()}); "
                                f"try a smaller learning rate")
    return model


# file formats

_EMB_MAGIC = b"HEMBv1\x00\x00"
_PAIR_MAGIC = b"HPAIRv1\x00"


def save_embeddings(path, vectors, node_ids, binary=False):
    """Write vectors in word2vec-style text or the package's binary format.

    Text: ``<count> <dim>`` then ``<id> <v1> ... <vd>`` with 9 significant
    digits. Binary: magic, ``<u8 count><u4 dim>``, each id as ``<u2 len>`` plus
    UTF-8 bytes, then the ``count x dim`` little-endian float32 matrix.
    """
    vectors = np.asarray(vectors)
    n, d = vectors.shape
    if len(node_ids) != n:
        raise ValueError("one id per row is required")
    if binary:
        with open(path, "wb") as fh:
            fh.write(_EMB_MAGIC)
            fh.write(struct.pack("<QI", n, d))
            for node_id in node_ids:
                raw = node_id.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
            fh.write(vectors.astype("<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for node_id, row in zip(node_ids, vectors):
            fh.write(node_id + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def load_embeddings(path):
    """Read either embedding format; returns ``(node_ids, matrix)``."""
    with open(path, "rb") as fh:
        head = fh.read(len(_EMB_MAGIC))
        if head == _EMB_MAGIC:
            n, d = struct.unpack("<QI", fh.read(12))
            ids = []
            for _ in range(n):
                (size,) = struct.unpack("<H", fh.read(2))
                ids.append(fh.read(size).decode("utf-8"))
            matrix = np.frombuffer(fh.read(4 * n * d), dtype="<f4").reshape(n, d).astype(np.float64)
            return ids, matrix
    with open(path, encoding="utf-8") as fh:
        n, d = map(int, fh.readline().split())
        ids, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != d + 1:
                raise ValueError(f"{path}: expected {d} values for {parts[0]!r}")
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(ids) != n:
        raise ValueError(f"{path}: header says {n} rows, found {len(ids)}")
    return ids, np.array(rows, dtype=np.float64).reshape(n, d)


def save_pair_table(table: PairFrequencyTable, path):
    """Binary cache: magic, ``<u8 nodes><u4 window><u8 pairs>``, then int64 triples."""
    with open(path, "wb") as fh:
        fh.write(_PAIR_MAGIC)
        fh.write(struct.pack("<QIQ", table.num_nodes, table.window, len(table)))
        triples = np.stack([table.centers, table.contexts, table.counts], axis=1).astype("<i8")
        fh.write(triples.tobytes())


def load_pair_table(path) -> PairFrequencyTable:
    with open(path, "rb") as fh:
        if fh.read(len(_PAIR_MAGIC)) != _PAIR_MAGIC:
            raise ValueError(f"{path}: not a pair table file (bad magic or version)")
        num_nodes, window, n = struct.unpack("<QIQ", fh.read(20))
        triples = np.frombuffer(fh.read(24 * n), dtype="<i8").reshape(n, 3).astype(np.int64)
    return PairFrequencyTable(triples[:, 0].copy(), triples[:, 1].copy(), triples[:, 2].copy(), window, num_nodes)
