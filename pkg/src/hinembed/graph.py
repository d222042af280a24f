"""Typed graph model, schema and file ingestion for heterogeneous networks.

Nodes carry a type from the schema and directed edges carry a relation
label. Every forward relation ``(s, r, t)`` implies the reverse relation
``(t, r^-1, s)``; reverse edges are materialized when the graph is built, so
walkers never need to special-case direction.

Adjacency is stored in CSR form with each node's out-edges sorted by
(neighbor type, neighbor id, relation). ``type_ptr[v, k]:type_ptr[v, k+1]``
is the slice of node ``v``'s out-edges whose endpoint has type index ``k``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphError, SchemaError

logger = logging.getLogger(__name__)

REVERSE_SUFFIX = "^-1"


def reverse_label(label: str) -> str:
    if label.endswith(REVERSE_SUFFIX):
        return label[: -len(REVERSE_SUFFIX)]
    return label + REVERSE_SUFFIX


@dataclass(frozen=True)
class Schema:
    """Node types and forward relations ``(source type, label, target type)``.

    Reverse relations are derived, never declared. ``all_relations`` lists the
    forward relations followed by their reverses in the same order, so the
    reverse of relation id ``r`` is ``(r + R) % 2R``.
    """

    node_types: tuple[str, ...]
    relations: tuple[tuple[str, str, str], ...]
    all_relations: tuple[tuple[str, str, str], ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "node_types", tuple(self.node_types))
        object.__setattr__(self, "relations", tuple(tuple(r) for r in self.relations))
        if len(set(self.node_types)) != len(self.node_types):
            raise SchemaError("duplicate node type declaration")
        declared = set(self.node_types)
        seen = set()
        for src, label, dst in self.relations:
            if src not in declared or dst not in declared:
                raise SchemaError(f"relation {src} {label} {dst} references an undeclared node type")
            if label.endswith(REVERSE_SUFFIX):
                raise SchemaError(f"relation label {label!r} is reserved for reverse relations")
            if (src, label, dst) in seen:
                raise SchemaError(f"duplicate relation {src} {label} {dst}")
            seen.add((src, label, dst))
        reverse = tuple((dst, reverse_label(label), src) for src, label, dst in self.relations)
        object.__setattr__(self, "all_relations", self.relations + reverse)
        if len(set(self.all_relations)) != len(self.all_relations):
            raise SchemaError("relation labels must be unique per (source type, target type) pair")

    @property
    def num_types(self) -> int:
        return len(self.node_types)

    def type_index(self, name: str) -> int:
        try:
            return self.node_types.index(name)
        except ValueError:
            raise SchemaError(f"unknown node type {name!r}") from None

    def relation_id(self, src: str, label: str, dst: str) -> int:
        try:
            return self.all_relations.index((src, label, dst))
        except ValueError:
            raise SchemaError(f"relation {src} {label} {dst} is not in the schema") from None

    def reverse_id(self, rel: int) -> int:
        n = len(self.relations)
        return (rel + n) % (2 * n)

    def connects(self, src: str, dst: str, label: str | None = None) -> bool:
        """True if some forward or reverse relation goes from ``src`` to ``dst``."""
        return any(
            s == src and t == dst and (label is None or r == label)
            for s, r, t in self.all_relations
        )

    def to_text(self) -> str:
        lines = [f"nodetype {t}" for t in self.node_types]
        lines += [f"relation {s} {r} {t}" for s, r, t in self.relations]
        return "\n".join(lines) + "\n"


def parse_schema(text: str) -> Schema:
    types, relations = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "nodetype" and len(parts) == 2:
            types.append(parts[1])
        elif parts[0] == "relation" and len(parts) == 4:
            relations.append((parts[1], parts[2], parts[3]))
        else:
            raise SchemaError(f"schema line {lineno}: cannot parse {raw!r}")
    return Schema(tuple(types), tuple(relations))


def load_schema(path) -> Schema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


def bibliographic_schema(cite: bool = True) -> Schema:
    """Author/paper/venue schema with write, publish and optionally cite."""
    relations = [("A", "write", "P"), ("V", "publish", "P")]
    if cite:
        relations.append(("P", "cite", "P"))
    return Schema(("A", "P", "V"), tuple(relations))


class TypedGraph:
    """Immutable typed multigraph with materialized reverse edges.

    Build with :meth:`from_edges` or :func:`load_graph`. Node ids are dense
    integers; ``node_ids[i]`` is the external string id of node ``i``.
    """

    def __init__(self, schema, node_ids, node_type, src, dst, rel, labels=None,
                 duplicate_edges=0):
        self.schema = schema
        self.node_ids = tuple(node_ids)
        self.node_type = _frozen(np.asarray(node_type, dtype=np.int64))
        self.src = _frozen(src)
        self.dst = _frozen(dst)
        self.rel = _frozen(rel)
        self.labels = dict(labels) if labels else {}
        self.duplicate_edges = duplicate_edges

        n, k = len(self.node_ids), schema.num_types
        counts = np.bincount(src * k + self.node_type[dst], minlength=n * k).reshape(n, k)
        type_ptr = np.zeros((n, k + 1), dtype=np.int64)
        type_ptr[:, 1:] = np.cumsum(counts, axis=1)
        offsets = np.zeros(n, dtype=np.int64)
        offsets[1:] = np.cumsum(type_ptr[:-1, -1])
        type_ptr += offsets[:, None]
        self.type_ptr = _frozen(type_ptr)
        self.indptr = _frozen(np.append(type_ptr[:, 0], type_ptr[-1, -1]) if n else np.zeros(1, np.int64))
        self._index = {v: i for i, v in enumerate(self.node_ids)}

    @classmethod
    def from_edges(cls, schema, node_ids, node_types, edges, labels=None):
        """Build from forward edges only.

        ``node_types`` holds type names or type indices; ``edges`` is an
        iterable of ``(src, dst, relation label)`` with integer endpoints, or
        an ``(m, 3)`` integer array of ``(src, dst, forward relation id)``.
        Duplicate edges are collapsed; self-loops and relations outside the
        schema raise :class:`GraphError`.
        """
        node_ids = [str(v) for v in node_ids]
        if len(set(node_ids)) != len(node_ids):
            raise GraphError("duplicate node id")
        types = np.array(
            [t if isinstance(t, (int, np.integer)) else schema.type_index(t) for t in node_types],
            dtype=np.int64,
        )
        if len(types) != len(node_ids):
            raise GraphError("node_types and node_ids differ in length")
        if isinstance(edges, np.ndarray):
            triples = edges.astype(np.int64).reshape(-1, 3)
        else:
            rows = []
            for s, d, label in edges:
                s, d = int(s), int(d)
                key = (schema.node_types[types[s]], label, schema.node_types[types[d]])
                if key not in schema.relations:
                    raise GraphError(f"relation {key[0]} {key[1]} {key[2]} is not in the schema")
                rows.append((s, d, schema.relations.index(key)))
            triples = np.array(rows, dtype=np.int64).reshape(-1, 3)
        n = len(node_ids)
        if triples.size:
            if triples[:, :2].min() < 0 or triples[:, :2].max() >= n:
                raise GraphError("edge references an undeclared node")
            if np.any(triples[:, 0] == triples[:, 1]):
                raise GraphError("self-loops are not allowed")
            fwd = np.array([(schema.type_index(s), schema.type_index(d)) for s, _, d in schema.relations],
                           dtype=np.int64).reshape(-1, 2)
            ok = (fwd[triples[:, 2], 0] == types[triples[:, 0]]) & (fwd[triples[:, 2], 1] == types[triples[:, 1]])
            if not ok.all():
                raise GraphError("edge endpoint types do not match its relation")
        unique = np.unique(triples, axis=0)
        duplicates = len(triples) - len(unique)
        if duplicates:
            logger.warning("collapsed %d duplicate edges", duplicates)
        rev = np.array([schema.reverse_id(r) for r in range(len(schema.relations))], dtype=np.int64)
        src = np.concatenate([unique[:, 0], unique[:, 1]])
        dst = np.concatenate([unique[:, 1], unique[:, 0]])
        rel = np.concatenate([unique[:, 2], rev[unique[:, 2]] if len(unique) else unique[:, 2]])
        order = np.lexsort((rel, dst, types[dst], src))
        return cls(schema, node_ids, types, src[order], dst[order], rel[order],
                   labels=labels, duplicate_edges=duplicates)

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        """Stored directed edges, reverse edges included."""
        return len(self.src)

    def index(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise GraphError(f"unknown node id {node_id!r}") from None

    def type_name(self, node: int) -> str:
        return self.schema.node_types[self.node_type[node]]

    def nodes_of_type(self, t) -> np.ndarray:
        return np.flatnonzero(self.node_type == self._type(t))

    def out_degree(self, node: int) -> int:
        self._check(node)
        return int(self.indptr[node + 1] - self.indptr[node])

    def neighbors(self, node: int) -> np.ndarray:
        self._check(node)
        return self.dst[self.indptr[node]:self.indptr[node + 1]]

    def out_edges(self, node: int):
        """``(neighbor, relation label)`` pairs for ``node``."""
        self._check(node)
        lo, hi = self.indptr[node], self.indptr[node + 1]
        labels = self.schema.all_relations
        return [(int(d), labels[r][1]) for d, r in zip(self.dst[lo:hi], self.rel[lo:hi])]

    def neighbors_by_type(self, node: int, t) -> np.ndarray:
        """Out-neighbors of ``node`` having node type ``t``, sorted by id."""
        self._check(node)
        k = self._type(t)
        return self.dst[self.type_ptr[node, k]:self.type_ptr[node, k + 1]]

    def forward_edges(self):
        """Yield the input (non-reverse) edges as ``(src, dst, label)``."""
        nfwd = len(self.schema.relations)
        for s, d, r in zip(self.src, self.dst, self.rel):
            if r < nfwd:
                yield int(s), int(d), self.schema.all_relations[r][1]

    def with_edges_removed(self, mask: np.ndarray) -> "TypedGraph":
        """New graph without the forward edges selected by ``mask``.

        ``mask`` is indexed like the stored edge arrays; reverse twins of the
        selected forward edges are dropped as well.
        """
        nfwd = len(self.schema.relations)
        fwd = self.rel < nfwd
        keep = fwd & ~mask
        triples = np.stack([self.src[keep], self.dst[keep], self.rel[keep]], axis=1)
        return TypedGraph.from_edges(self.schema, self.node_ids, self.node_type, triples,
                                     labels=self.labels)

    def _type(self, t) -> int:
        if isinstance(t, (int, np.integer)):
            if not 0 <= t < self.schema.num_types:
                raise SchemaError(f"unknown node type index {t}")
            return int(t)
        return self.schema.type_index(t)

    def _check(self, node):
        if not 0 <= node < self.num_nodes:
            raise GraphError(f"unknown node {node}")

    def __eq__(self, other):
        if not isinstance(other, TypedGraph):
            return NotImplemented
        return (self.schema == other.schema and self.node_ids == other.node_ids
                and np.array_equal(self.node_type, other.node_type)
                and np.array_equal(self.src, other.src) and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.rel, other.rel))

    __hash__ = None

    def __repr__(self):
        return f"TypedGraph(nodes={self.num_nodes}, edges={self.num_edges}, types={self.schema.node_types})"


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.flags.writeable = False
    return a


def _records(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_graph(node_file, edge_file, schema: Schema) -> TypedGraph:
    """Read node and edge TSV files into a :class:`TypedGraph`."""
    ids, types, index = [], [], {}
    for lineno, parts in _records(node_file):
        if len(parts) != 2:
            raise GraphError(f"{node_file}:{lineno}: expected '<node_id>\\t<node_type>'")
        node_id, node_type = parts
        if node_type not in schema.node_types:
            raise GraphError(f"{node_file}:{lineno}: unknown node type {node_type!r}")
        if node_id in index:
            raise GraphError(f"{node_file}:{lineno}: duplicate node id {node_id!r}")
        index[node_id] = len(ids)
        ids.append(node_id)
        types.append(schema.type_index(node_type))

    forward = {(s, r, d): i for i, (s, r, d) in enumerate(schema.relations)}
    rows = []
    for lineno, parts in _records(edge_file):
        if len(parts) != 3:
            raise GraphError(f"{edge_file}:{lineno}: expected '<src>\\t<dst>\\t<relation>'")
        s, d, label = parts
        if s not in index or d not in index:
            missing = s if s not in index else d
            raise GraphError(f"{edge_file}:{lineno}: edge references undeclared node id {missing!r}")
        si, di = index[s], index[d]
        if si == di:
            raise GraphError(f"{edge_file}:{lineno}: self-loop on {s!r}")
        key = (schema.node_types[types[si]], label, schema.node_types[types[di]])
        if key not in forward:
            raise GraphError(f"{edge_file}:{lineno}: relation {' '.join(key)} is not in the schema")
        rows.append((si, di, forward[key]))
    graph = TypedGraph.from_edges(schema, ids, types, np.array(rows, dtype=np.int64).reshape(-1, 3))
    logger.info("loaded graph: %d nodes, %d edges (%d in file, %d duplicates)",
                graph.num_nodes, graph.num_edges, len(rows), graph.duplicate_edges)
    return graph


def save_graph(graph: TypedGraph, node_file, edge_file, schema_file=None):
    with open(node_file, "w", encoding="utf-8") as fh:
        for i, node_id in enumerate(graph.node_ids):
            fh.write(f"{node_id}\t{graph.type_name(i)}\n")
    with open(edge_file, "w", encoding="utf-8") as fh:
        for s, d, label in graph.forward_edges():
            fh.write(f"{graph.node_ids[s]}\t{graph.node_ids[d]}\t{label}\n")
    if schema_file is not None:
        Path(schema_file).write_text(graph.schema.to_text(), encoding="utf-8")


def load_labels(path, graph: TypedGraph | None = None) -> dict:
    """Read ``<node_id> TAB <label>`` lines.

    Keys are external ids, or dense node indices when ``graph`` is given.
    """
    labels = {}
    for lineno, parts in _records(path):
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected '<node_id>\\t<label>'")
        key = graph.index(parts[0]) if graph is not None else parts[0]
        labels[key] = parts[1]
    return labels


def save_labels(graph: TypedGraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        for node in sorted(graph.labels):
            fh.write(f"{graph.node_ids[node]}\t{graph.labels[node]}\n")
