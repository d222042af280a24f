"""Synthetic bibliographic networks with planted research communities.

Every paper belongs to one community, is written by authors of that
community and appears at one of its venues. ``cross_prob`` swaps each
author slot and each venue for one drawn from another community, and
``venue_retention`` keeps a paper's venue link with that probability. Both
the venue route (A-P-V-P-A) and the co-author route (A-P-A-P-A) therefore
carry label signal. Authors are labelled with their community.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import GraphError
from .graph import TypedGraph, bibliographic_schema, save_graph, save_labels


@dataclass(frozen=True)
class SynthConfig:
    communities: int = 4
    authors: int = 500
    papers: int = 750
    venues: int = 5
    min_authors: int = 1
    max_authors: int = 3
    venue_retention: float = 1.0
    cross_prob: float = 0.0
    citations: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("communities", "authors", "papers", "venues", "min_authors", "max_authors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("venue_retention", "cross_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.citations < 0:
            raise ValueError("citations must be >= 0")
        if self.min_authors > self.max_authors:
            raise ValueError("min_authors exceeds max_authors")
        if self.max_authors > self.authors:
            raise ValueError("a paper cannot have more distinct authors than a community holds")
        if self.cross_prob > 0 and self.communities < 2:
            raise ValueError("cross-community links need at least two communities")

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown generator setting {key!r}")
            kwargs[key] = float(raw) if types[key] in ("float", float) else int(raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        """Read ``key=value`` lines; ``#`` starts a comment."""
        values = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, sep, value = line.partition("=")
                if not sep:
                    raise ValueError(f"{path}: expected key=value, got {line!r}")
                values[key] = value.strip()
        return cls.from_mapping(values)

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())


def _other(rng, c, k):
    """Uniformly random community other than ``c``."""
    o = int(rng.integers(k - 1))
    return o + (o >= c)


def generate_hin(config: SynthConfig) -> TypedGraph:
    """Build the network; ``graph.labels`` maps author nodes to communities."""
    rng = np.random.default_rng(config.seed)
    k, na, np_, nv = config.communities, config.authors, config.papers, config.venues
    n_auth, n_pap = k * na, k * np_
    author = lambda c, i: c * na + i  # noqa: E731
    paper = lambda c, i: n_auth + c * np_ + i  # noqa: E731
    venue = lambda c, i: n_auth + n_pap + c * nv + i  # noqa: E731

    node_ids = ([f"a{i}" for i in range(n_auth)] + [f"p{i}" for i in range(n_pap)]
                + [f"v{i}" for i in range(k * nv)])
    node_types = [0] * n_auth + [1] * n_pap + [2] * (k * nv)
    write, publish, cite = 0, 1, 2
    edges = []
    for c in range(k):
        # every author gets at least one paper in its own community
        first = rng.permutation(na)
        for j in range(np_):
            size = int(rng.integers(config.min_authors, config.max_authors + 1))
            chosen = set()
            if j < na and size > 0:
                chosen.add(author(c, int(first[j])))
            while len(chosen) < size:
                cc = _other(rng, c, k) if rng.random() < config.cross_prob else c
                chosen.add(author(cc, int(rng.integers(na))))
            p = paper(c, j)
            edges.extend((a, p, write) for a in sorted(chosen))
            if rng.random() < config.venue_retention:
                cc = _other(rng, c, k) if rng.random() < config.cross_prob else c
                edges.append((venue(cc, int(rng.integers(nv))), p, publish))
        if config.citations > 0:
            for j in range(1, np_):
                for _ in range(int(rng.poisson(config.citations))):
                    cc = _other(rng, c, k) if rng.random() < config.cross_prob else c
                    target = paper(cc, int(rng.integers(np_)))
                    if target != paper(c, j):
                        edges.append((paper(c, j), target, cite))
    schema = bibliographic_schema(cite=True)
    labels = {author(c, i): f"c{c}" for c in range(k) for i in range(na)}
    return TypedGraph.from_edges(schema, node_ids, node_types, np.array(edges, dtype=np.int64), labels=labels)


def sparsify_venues(graph: TypedGraph, removal_fraction: float, seed: int = 0,
                    paper_type: str = "P", relation: str = "publish") -> TypedGraph:
    """Drop the venue links of ``floor(f * #papers)`` uniformly chosen papers."""
    if not 0.0 <= removal_fraction <= 1.0:
        raise ValueError("removal fraction must lie in [0, 1]")
    papers = graph.nodes_of_type(paper_type)
    k = int(np.floor(removal_fraction * papers.size))
    chosen = np.random.default_rng(seed).choice(papers, size=k, replace=False)
    drop = np.zeros(graph.num_nodes, dtype=bool)
    drop[chosen] = True
    labels = np.array([r[1] for r in graph.schema.all_relations])
    is_publish = labels[graph.rel] == relation
    mask = is_publish & (drop[graph.src] | drop[graph.dst])
    if not any(r[1] == relation for r in graph.schema.relations):
        raise GraphError(f"schema has no {relation!r} relation")
    return graph.with_edges_removed(mask)


def write_hin(graph: TypedGraph, prefix):
    """Write ``<prefix>.nodes.tsv``, ``.edges.tsv``, ``.schema`` and ``.labels.tsv``."""
    prefix = str(prefix)
    save_graph(graph, prefix + ".nodes.tsv", prefix + ".edges.tsv", prefix + ".schema")
    save_labels(graph, prefix + ".labels.tsv")
    return {k: prefix + ext for k, ext in
            (("nodes", ".nodes.tsv"), ("edges", ".edges.tsv"), ("schema", ".schema"), ("labels", ".labels.tsv"))}
