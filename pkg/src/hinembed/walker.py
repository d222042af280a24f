"""Random-walk corpora guided by metagraphs, metapaths, or nothing at all.

A metagraph-guided step from node ``v`` first collects the *qualified* node
types: types the recursive metagraph allows next and that ``v`` actually has
neighbors of. It picks one of them uniformly, then a neighbor of that type
uniformly, so that

    Pr(u | v) = 1 / T(v) * 1 / |neighbors of v with type(u)|

with ``T(v)`` the number of qualified types. No qualified type means the
walk stops. Metapaths are chain metagraphs and take the same path through
the code; the uniform policy ignores types entirely.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from . import rng as _rng
from .errors import WalkError
from .metagraph import MetaGraph, TransitionTable, validate

logger = logging.getLogger(__name__)

UNIFORM = "uniform"


@dataclass(frozen=True)
class WalkState:
    """Current node, its recursive metagraph layer, and steps taken so far."""

    node: int
    layer: int = 1
    steps: int = 0


@dataclass
class WalkCorpus:
    """Walks stored back to back: walk ``k`` is ``nodes[offsets[k]:offsets[k+1]]``."""

    nodes: np.ndarray
    offsets: np.ndarray
    policy: str
    length: int
    walks_per_node: int
    seed: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.offsets) - 1

    def __getitem__(self, k):
        return self.nodes[self.offsets[k]:self.offsets[k + 1]]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @classmethod
    def from_walks(cls, walks, policy="custom", length=0, walks_per_node=0, seed=0):
        walks = [np.asarray(w, dtype=np.int64) for w in walks]
        offsets = np.zeros(len(walks) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(w) for w in walks])
        nodes = np.concatenate(walks) if walks else np.zeros(0, dtype=np.int64)
        return cls(nodes.astype(np.int64), offsets, policy, length or int(max(map(len, walks), default=0)),
                   walks_per_node, seed)

    def __eq__(self, other):
        if not isinstance(other, WalkCorpus):
            return NotImplemented
        return (np.array_equal(self.nodes, other.nodes) and np.array_equal(self.offsets, other.offsets)
                and (self.policy, self.length, self.walks_per_node, self.seed)
                == (other.policy, other.length, other.walks_per_node, other.seed))


def _table(graph, mg):
    cache = mg.__dict__.setdefault("_tables", {})
    key = id(graph.schema)
    if key not in cache or cache[key][0] is not graph.schema:
        problems = validate(mg, graph.schema)
        if problems:
            raise WalkError("metagraph does not fit the graph schema: " + "; ".join(problems))
        cache[key] = (graph.schema, mg.transition_table(graph.schema))
    return cache[key][1]


def _state_index(graph, mg, state):
    if not 0 <= state.node < graph.num_nodes:
        raise WalkError(f"unknown node {state.node}")
    t = graph.type_name(state.node)
    try:
        occupied = mg.occupied(state.layer, t)
    except Exception as exc:
        raise WalkError(f"node {graph.node_ids[state.node]} of type {t} cannot sit at layer {state.layer}") from exc
    return mg.nodes.index(occupied)


def transition_distribution(graph, mg: MetaGraph, state: WalkState) -> dict:
    """Exact next-node distribution ``{node: probability}`` from ``state``.

    An empty dict means the walk is at a dead end.
    """
    s = _state_index(graph, mg, state)
    here = mg.nodes[s]
    if here.alias == mg.target:
        here = mg.node(mg.source)
    buckets = []
    for e in mg.out_edges(here.alias):
        t = mg.node(e.dst).node_type
        cands = [u for u, label in graph.out_edges(state.node)
                 if graph.type_name(u) == t and (e.label is None or label == e.label)]
        if cands:
            buckets.append(cands)
    dist = {}
    for cands in buckets:
        for u in cands:
            dist[u] = dist.get(u, 0.0) + 1.0 / (len(buckets) * len(cands))
    return dist


@njit(cache=True)
def _qualified_step(node, s, type_ptr, dst, rel, tt_ptr, tt_type, tt_rel, state):
    """One guided step. Returns (next node, transition index) or (-1, -1)."""
    lo = tt_ptr[s]
    hi = tt_ptr[s + 1]
    counts = np.zeros(hi - lo, np.int64)
    n_qualified = 0
    for k in range(lo, hi):
        a = type_ptr[node, tt_type[k]]
        b = type_ptr[node, tt_type[k] + 1]
        if tt_rel[k] < 0:
            c = b - a
        else:
            c = 0
            for e in range(a, b):
                if rel[e] == tt_rel[k]:
                    c += 1
        counts[k - lo] = c
        if c > 0:
            n_qualified += 1
    if n_qualified == 0:
        return -1, -1
    pick = _rng.randint(state, n_qualified)
    for k in range(lo, hi):
        if counts[k - lo] == 0:
            continue
        if pick > 0:
            pick -= 1
            continue
        j = _rng.randint(state, counts[k - lo])
        a = type_ptr[node, tt_type[k]]
        if tt_rel[k] < 0:
            return dst[a + j], k
        for e in range(a, type_ptr[node, tt_type[k] + 1]):
            if rel[e] == tt_rel[k]:
                if j == 0:
                    return dst[e], k
                j -= 1
    return -1, -1


@njit(cache=True, parallel=True)
def _guided_walks(starts, gamma, length, seed, start_state, type_ptr, dst, rel,
                  tt_ptr, tt_type, tt_next, tt_rel, out, lengths):
    n = starts.shape[0]
    for job in prange(n * gamma):
        w = job // n
        i = job % n
        state = np.empty(1, np.uint64)
        state[0] = _rng.substream(seed, i, w)
        node = starts[i]
        s = start_state
        out[job, 0] = node
        size = 1
        while size < length:
            nxt, k = _qualified_step(node, s, type_ptr, dst, rel, tt_ptr, tt_type, tt_rel, state)
            if nxt < 0:
                break
            node = nxt
            s = tt_next[k]
            out[job, size] = node
            size += 1
        lengths[job] = size


@njit(cache=True, parallel=True)
def _uniform_walks(starts, gamma, length, seed, indptr, dst, out, lengths):
    n = starts.shape[0]
    for job in prange(n * gamma):
        w = job // n
        i = job % n
        state = np.empty(1, np.uint64)
        state[0] = _rng.substream(seed, i, w)
        node = starts[i]
        out[job, 0] = node
        size = 1
        while size < length:
            deg = indptr[node + 1] - indptr[node]
            if deg == 0:
                break
            node = dst[indptr[node] + _rng.randint(state, deg)]
            out[job, size] = node
            size += 1
        lengths[job] = size


@njit(cache=True)
def _sample_steps(node, s, n, seed, type_ptr, dst, rel, tt_ptr, tt_type, tt_rel, out):
    state = np.empty(1, np.uint64)
    state[0] = _rng.substream(seed, 0, 0)
    for k in range(n):
        out[k], _ = _qualified_step(node, s, type_ptr, dst, rel, tt_ptr, tt_type, tt_rel, state)


def _draw_seed(rng) -> int:
    return int(rng.integers(0, 2**63))


def step(graph, mg: MetaGraph, state: WalkState, rng) -> WalkState | None:
    """Sample the next state, or ``None`` when no qualified type remains.

    ``rng`` is a ``numpy.random.Generator``; one 63-bit seed is drawn from it
    per call to key the kernel's stream.
    """
    s = _state_index(graph, mg, state)
    tt = _table(graph, mg)
    st = _rng.new_state(_draw_seed(rng))
    nxt, k = _qualified_step(state.node, s, graph.type_ptr, graph.dst, graph.rel,
                             tt.ptr, tt.next_type, tt.rel, st)
    if nxt < 0:
        return None
    return WalkState(int(nxt), state.layer + int(tt.delta[k]), state.steps + 1)


def sample_steps(graph, mg: MetaGraph, state: WalkState, n: int, seed: int = 0) -> np.ndarray:
    """``n`` independent next-node draws from ``state`` (-1 marks a dead end)."""
    s = _state_index(graph, mg, state)
    tt = _table(graph, mg)
    out = np.empty(n, dtype=np.int64)
    _sample_steps(state.node, s, n, seed, graph.type_ptr, graph.dst, graph.rel,
                  tt.ptr, tt.next_type, tt.rel, out)
    return out


def generate_walk(graph, mg: MetaGraph, start: int, length: int, rng) -> list[int]:
    """One metagraph-guided walk of at most ``length`` nodes from ``start``."""
    if graph.type_name(start) != mg.source_type:
        raise WalkError(f"walks must start on type {mg.source_type}, "
                        f"node {graph.node_ids[start]} has type {graph.type_name(start)}")
    if length < 1:
        raise WalkError("walk length must be >= 1")
    walk = [start]
    state = WalkState(start)
    while len(walk) < length:
        state = step(graph, mg, state, rng)
        if state is None:
            break
        walk.append(state.node)
    return walk


def generate_corpus(graph, policy, length: int = 100, walks_per_node: int = 80, seed: int = 0,
                    threads: int | None = None) -> WalkCorpus:
    """Walk ``walks_per_node`` times from every eligible start node.

    ``policy`` is a :class:`MetaGraph` (metapaths are chain metagraphs) or
    ``"uniform"``. Guided walks start on every node of the metagraph's source
    type; uniform walks start on every node. Walk ``w`` from the ``i``-th
    start node draws from ``rng.substream(seed, i, w)``, so the corpus does
    not depend on ``threads``. Walks are ordered round by round: all starts
    for round 0, then round 1, and so on.
    """
    if length < 1:
        raise WalkError("walk length must be >= 1")
    if walks_per_node < 0:
        raise WalkError("walks per node must be >= 0")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if isinstance(policy, str):
        if policy != UNIFORM:
            raise WalkError(f"unknown walk policy {policy!r}")
        starts = np.arange(graph.num_nodes, dtype=np.int64)
        name = UNIFORM
    else:
        tt = _table(graph, policy)
        starts = graph.nodes_of_type(policy.source_type).astype(np.int64)
        name = ("metapath:" if policy.is_chain else "metagraph:") + policy.name
    if starts.size == 0:
        raise WalkError("no start nodes for this policy")

    jobs = starts.size * walks_per_node
    buf = np.full((jobs, length), -1, dtype=np.int64)
    lengths = np.zeros(jobs, dtype=np.int64)
    previous = numba.get_num_threads()
    if threads:
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    try:
        if isinstance(policy, str):
            _uniform_walks(starts, walks_per_node, length, np.uint64(seed), graph.indptr, graph.dst, buf, lengths)
        else:
            _guided_walks(starts, walks_per_node, length, np.uint64(seed), tt.source, graph.type_ptr,
                          graph.dst, graph.rel, tt.ptr, tt.next_type, tt.next_state, tt.rel, buf, lengths)
    finally:
        numba.set_num_threads(previous)
    offsets = np.zeros(jobs + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    nodes = buf[np.arange(length)[None, :] < lengths[:, None]]
    logger.info("generated %d walks (%s), mean length %.1f", jobs, name,
                lengths.mean() if jobs else 0.0)
    return WalkCorpus(nodes, offsets, name, length, walks_per_node, seed)


def write_corpus(corpus: WalkCorpus, path, node_ids):
    """One walk per line as space-separated external ids, after a comment header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# policy={corpus.policy}\n# length={corpus.length}\n"
                 f"# walks_per_node={corpus.walks_per_node}\n# seed={corpus.seed}\n")
        for walk in corpus:
            fh.write(" ".join(node_ids[v] for v in walk))
            fh.write("\n")


def read_corpus(path, graph) -> WalkCorpus:
    header, walks = {}, []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
            elif line:
                walks.append([graph.index(v) for v in line.split(" ")])
    corpus = WalkCorpus.from_walks(walks, header.get("policy", "custom"),
                                   int(header.get("length", 0)), int(header.get("walks_per_node", 0)),
                                   int(header.get("seed", 0)))
    return corpus
