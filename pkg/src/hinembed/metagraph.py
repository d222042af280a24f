"""Metagraphs: layered DAGs over node types that constrain random walks.

A metagraph has one source and one target meta-node of the same type, so
copies of it can be chained tail to head: the target of one copy is the
source of the next. A walk therefore lives on the infinite chain of copies
and carries a *recursive layer* index. Layer ``d`` of one copy and layer 1 of
the next are the same position, which gives a period of ``d - 1``::

    base_layer(i) = i                       for i <= d
    base_layer(i) = base_layer(i - (d - 1)) for i > d

Text format (``#`` starts a comment)::

    metagraph apvpa
    layers 5
    node a1 : A @ 1
    node p1 : P @ 2
    edge a1 -> p1 : write
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import MetagraphError


@dataclass(frozen=True, order=True)
class MetaNode:
    layer: int
    node_type: str
    alias: str


@dataclass(frozen=True)
class MetaEdge:
    src: str
    dst: str
    label: str | None = None


@dataclass(frozen=True)
class RecursiveLayerMap:
    """Maps recursive layer indices onto the base metagraph's layers."""

    d: int

    def __post_init__(self):
        if self.d < 2:
            raise MetagraphError("a metagraph needs at least 2 layers to recurse")

    @property
    def period(self) -> int:
        return self.d - 1

    def base_layer(self, i: int) -> int:
        if i < 1:
            raise MetagraphError(f"recursive layer must be >= 1, got {i}")
        if i == 1:
            return 1
        return (i - 2) % (self.d - 1) + 2


def base_layer(i: int, layer_map: RecursiveLayerMap) -> int:
    return layer_map.base_layer(i)


class TransitionTable(NamedTuple):
    """Array form of the recursive metagraph, consumed by the walk kernels.

    States are meta-node indices into ``MetaGraph.nodes``. Transitions of
    state ``s`` are ``ptr[s]:ptr[s+1]``; the target state reuses the source
    state's transitions (seam). ``rel`` is -1 when a meta-edge has no label.
    """

    state_type: np.ndarray
    state_layer: np.ndarray
    ptr: np.ndarray
    next_type: np.ndarray
    next_state: np.ndarray
    rel: np.ndarray
    delta: np.ndarray
    source: int
    target: int


class MetaGraph:
    """Validated metagraph. Nodes and edges are kept in canonical order."""

    def __init__(self, name, nodes, edges, layers=None):
        self.name = name
        self.nodes = tuple(sorted(MetaNode(n.layer, n.node_type, n.alias) for n in nodes))
        self.edges = tuple(edges)
        self.d = max((n.layer for n in self.nodes), default=0) if layers is None else layers
        self._by_alias = {}
        for n in self.nodes:
            if n.alias in self._by_alias:
                raise MetagraphError(f"duplicate alias {n.alias!r}")
            self._by_alias[n.alias] = n
        pos = {n.alias: k for k, n in enumerate(self.nodes)}
        for e in self.edges:
            for a in (e.src, e.dst):
                if a not in pos:
                    raise MetagraphError(f"edge refers to undeclared alias {a!r}")
        self.edges = tuple(sorted(self.edges, key=lambda e: (pos[e.src], pos[e.dst], e.label or "")))
        self._check_structure()
        self.source = next(n.alias for n in self.nodes if not self._in[n.alias])
        self.target = next(n.alias for n in self.nodes if not self._out[n.alias])
        self.layer_map = RecursiveLayerMap(self.d)

    def _check_structure(self):
        if not self.nodes:
            raise MetagraphError("metagraph has no nodes")
        for n in self.nodes:
            if not 1 <= n.layer <= self.d:
                raise MetagraphError(f"node {n.alias!r} has layer {n.layer} outside 1..{self.d}")
        for layer in range(1, self.d + 1):
            types = [n.node_type for n in self.nodes if n.layer == layer]
            if not types:
                raise MetagraphError(f"layer {layer} is empty")
            if len(set(types)) != len(types):
                raise MetagraphError(f"duplicate node type within layer {layer}")
        if len(set(self.edges)) != len(self.edges):
            raise MetagraphError("duplicate meta-edge")
        self._in = {n.alias: [] for n in self.nodes}
        self._out = {n.alias: [] for n in self.nodes}
        for e in self.edges:
            a, b = self._by_alias[e.src], self._by_alias[e.dst]
            if b.layer <= a.layer:
                raise MetagraphError(f"edge {e.src} -> {e.dst}: edge must increase layer")
            self._out[e.src].append(e)
            self._in[e.dst].append(e)
        # every edge strictly increases the layer, so the graph is acyclic
        sources = [n for n in self.nodes if not self._in[n.alias]]
        sinks = [n for n in self.nodes if not self._out[n.alias]]
        if len(sources) != 1:
            raise MetagraphError(f"expected exactly one source, found {len(sources)}")
        if len(sinks) != 1:
            raise MetagraphError(f"expected exactly one target, found {len(sinks)}")
        src, dst = sources[0], sinks[0]
        if src.layer != 1 or dst.layer != self.d:
            raise MetagraphError("source must sit on layer 1 and target on the last layer")
        if src.node_type != dst.node_type:
            raise MetagraphError(
                f"source type {src.node_type} differs from target type {dst.node_type}")
        for alias, out in self._out.items():
            types = [self._by_alias[e.dst].node_type for e in out]
            if len(set(types)) != len(types):
                raise MetagraphError(
                    f"node {alias!r} has two out-edges to the same node type; "
                    "the next layer would be ambiguous")

    def node(self, alias: str) -> MetaNode:
        return self._by_alias[alias]

    def nodes_in_layer(self, layer: int):
        return [n for n in self.nodes if n.layer == layer]

    def out_edges(self, alias: str):
        return list(self._out[alias])

    @property
    def source_type(self) -> str:
        return self._by_alias[self.source].node_type

    @property
    def is_chain(self) -> bool:
        return all(len(self.nodes_in_layer(i)) == 1 for i in range(1, self.d + 1))

    def occupied(self, recursive_layer: int, node_type: str | None = None) -> MetaNode:
        """Meta-node at ``recursive_layer`` with the given type.

        The type may be omitted when the layer holds a single meta-node.
        """
        b = self.layer_map.base_layer(recursive_layer)
        if b == self.d:
            b = 1
        candidates = self.nodes_in_layer(b)
        if node_type is None:
            if len(candidates) != 1:
                raise MetagraphError(f"layer {recursive_layer} holds several node types; give one")
            return candidates[0]
        for n in candidates:
            if n.node_type == node_type:
                return n
        raise MetagraphError(f"no meta-node of type {node_type} at recursive layer {recursive_layer}")

    def transition_table(self, schema) -> TransitionTable:
        pos = {n.alias: k for k, n in enumerate(self.nodes)}
        src_state, tgt_state = pos[self.source], pos[self.target]
        ptr = [0]
        next_type, next_state, rel, delta = [], [], [], []
        for k, n in enumerate(self.nodes):
            origin = self.nodes[src_state] if k == tgt_state else n
            for e in self._out[origin.alias]:
                dst = self._by_alias[e.dst]
                next_type.append(schema.type_index(dst.node_type))
                next_state.append(pos[e.dst])
                rel.append(-1 if e.label is None
                           else schema.relation_id(origin.node_type, e.label, dst.node_type))
                delta.append(dst.layer - origin.layer)
            ptr.append(len(next_type))
        as_array = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
        return TransitionTable(
            as_array([schema.type_index(n.node_type) for n in self.nodes]),
            as_array([n.layer for n in self.nodes]),
            as_array(ptr), as_array(next_type), as_array(next_state), as_array(rel),
            as_array(delta), src_state, tgt_state,
        )

    def serialize(self) -> str:
        lines = [f"metagraph {self.name}", f"layers {self.d}"]
        lines += [f"node {n.alias} : {n.node_type} @ {n.layer}" for n in self.nodes]
        for e in self.edges:
            tail = f" : {e.label}" if e.label else ""
            lines.append(f"edge {e.src} -> {e.dst}{tail}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        if not isinstance(other, MetaGraph):
            return NotImplemented
        return (self.name, self.d, self.nodes, self.edges) == (other.name, other.d, other.nodes, other.edges)

    __hash__ = None

    def __repr__(self):
        layers = " | ".join(",".join(n.node_type for n in self.nodes_in_layer(i)) for i in range(1, self.d + 1))
        return f"MetaGraph({self.name!r}, d={self.d}: {layers})"


_NAME = r"[A-Za-z_][\w.\-]*"
_LABEL = r"[A-Za-z_][\w.\-]*(?:\^-1)?"
_PATTERNS = {
    "metagraph": re.compile(rf"metagraph\s+(?P<name>{_NAME})\s*$"),
    "layers": re.compile(r"layers\s+(?P<d>\d+)\s*$"),
    "node": re.compile(rf"node\s+(?P<alias>{_NAME})\s*:\s*(?P<type>{_NAME})\s*@\s*(?P<layer>\d+)\s*$"),
    "edge": re.compile(rf"edge\s+(?P<src>{_NAME})\s*->\s*(?P<dst>{_NAME})(?:\s*:\s*(?P<label>{_LABEL}))?\s*$"),
}


def parse_metagraph(text: str) -> MetaGraph:
    """Parse the line-oriented metagraph language and validate the result."""
    name, layers = "metagraph", None
    nodes, edges = [], []
    aliases = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].rstrip()
        stripped = body.lstrip()
        if not stripped:
            continue
        col = len(body) - len(stripped) + 1
        keyword = stripped.split()[0]
        pattern = _PATTERNS.get(keyword)
        if pattern is None:
            raise MetagraphError(f"unknown statement {keyword!r}", lineno, col)
        m = pattern.match(stripped)
        if m is None:
            raise MetagraphError(f"malformed {keyword} statement", lineno, col)
        if keyword == "metagraph":
            name = m["name"]
        elif keyword == "layers":
            layers = int(m["d"])
        elif keyword == "node":
            if m["alias"] in aliases:
                raise MetagraphError(f"duplicate alias {m['alias']!r}", lineno, col + m.start("alias"))
            node = MetaNode(int(m["layer"]), m["type"], m["alias"])
            aliases[node.alias] = node
            nodes.append(node)
        else:
            edges.append((MetaEdge(m["src"], m["dst"], m["label"]), lineno, col, m))

    for edge, lineno, col, m in edges:
        for group in ("src", "dst"):
            if getattr(edge, group) not in aliases:
                raise MetagraphError(f"undeclared alias {getattr(edge, group)!r}", lineno, col + m.start(group))
        if aliases[edge.dst].layer <= aliases[edge.src].layer:
            raise MetagraphError(f"edge {edge.src} -> {edge.dst}: edge must increase layer", lineno, col)
    if layers is not None and nodes and layers < max(n.layer for n in nodes):
        raise MetagraphError(f"declared {layers} layers but a node sits on layer "
                             f"{max(n.layer for n in nodes)}")
    return MetaGraph(name, nodes, [e for e, *_ in edges], layers)


def load_metagraph(path) -> MetaGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_metagraph(fh.read())


def validate(mg: MetaGraph, schema) -> list[str]:
    """Check the metagraph against a schema; returns every violation found.

    An empty list means the metagraph is usable on graphs with this schema.
    """
    problems = []
    for n in mg.nodes:
        if n.node_type not in schema.node_types:
            problems.append(f"node {n.alias}: type {n.node_type} is not in the schema")
    for e in mg.edges:
        a, b = mg.node(e.src).node_type, mg.node(e.dst).node_type
        if not schema.connects(a, b, e.label):
            what = f"{a} -> {b}" + (f" labelled {e.label}" if e.label else "")
            problems.append(f"edge {e.src} -> {e.dst}: no schema relation {what}")
    return problems


def allowed_transitions(mg: MetaGraph, recursive_layer: int, node_type: str | None = None):
    """Set of ``(node_type, next recursive layer, label)`` reachable in one step.

    ``node_type`` picks the occupied meta-node when the layer holds several.
    At the seam (base layer ``d``) the transitions are those of the source.
    """
    here = mg.occupied(recursive_layer, node_type)
    out = set()
    for e in mg.out_edges(here.alias):
        dst = mg.node(e.dst)
        out.add((dst.node_type, recursive_layer + dst.layer - here.layer, e.label))
    return out


def chain_from_metapath(types, schema=None, name=None) -> MetaGraph:
    """Metagraph with one meta-node per position of a metapath."""
    types = list(types)
    if len(types) < 3:
        raise MetagraphError("a metapath needs at least three node types")
    if types[0] != types[-1]:
        raise MetagraphError(f"metapath must start and end on the same type ({types[0]} != {types[-1]})")
    if schema is not None:
        for a, b in zip(types, types[1:]):
            if not schema.connects(a, b):
                raise MetagraphError(f"no schema relation between {a} and {b}")
    nodes = [MetaNode(i + 1, t, f"n{i + 1}") for i, t in enumerate(types)]
    edges = [MetaEdge(f"n{i + 1}", f"n{i + 2}") for i in range(len(types) - 1)]
    return MetaGraph(name or "".join(types).lower(), nodes, edges)
