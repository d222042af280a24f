"""Why a metagraph walks further than a metapath.

A tiny bibliographic network where paper p1 has lost its venue. The walk
a1 p1 a2 p2 a3 p4 v2 p5 a4 has to switch between the co-author route
(A-P-A) and the venue route (P-V-P) to get from a1 to a4. A single
metapath cannot do that; the two-branch metagraph can.

Run: python demos/01_guided_walks.py
"""
import numpy as np

from hinembed import TypedGraph, WalkState, allowed_transitions, generate_walk
from hinembed.graph import bibliographic_schema
from hinembed.presets import AUTHOR_METAGRAPH_TEXT, author_metagraph, coauthor_metapath, venue_metapath
from hinembed.walker import transition_distribution

names = ["a1", "a2", "a3", "a4", "p1", "p2", "p4", "p5", "v1", "v2"]
edges = [("a1", "p1", "write"), ("a2", "p1", "write"), ("a2", "p2", "write"), ("v1", "p2", "publish"),
         ("a3", "p2", "write"), ("a3", "p4", "write"), ("v2", "p4", "publish"), ("v2", "p5", "publish"),
         ("a4", "p5", "write")]
ix = {x: i for i, x in enumerate(names)}
graph = TypedGraph.from_edges(bibliographic_schema(), names, [x[0].upper() for x in names],
                              [(ix[u], ix[v], r) for u, v, r in edges])
print(f"{graph.num_nodes} nodes, {len(edges)} edges (p1 has no venue)\n")

print("The metagraph, in its text format:")
print(AUTHOR_METAGRAPH_TEXT)

mg = author_metagraph()
policies = {"metagraph": mg, "A-P-V-P-A": venue_metapath(), "A-P-A-P-A": coauthor_metapath()}


def layer_after(mg, state, node):
    t = graph.type_name(node)
    return next(j for tt, j, _ in allowed_transitions(mg, state.layer, graph.type_name(state.node)) if tt == t)


def path_probability(mg, path):
    state, p = WalkState(path[0]), 1.0
    for u in path[1:]:
        dist = transition_distribution(graph, mg, state)
        if u not in dist:
            return 0.0
        p *= dist[u]
        state = WalkState(u, layer_after(mg, state, u), state.steps + 1)
    return p


path = [ix[x] for x in "a1 p1 a2 p2 a3 p4 v2 p5 a4".split()]
print("Probability of emitting a1 p1 a2 p2 a3 p4 v2 p5 a4 from a1:")
for name, policy in policies.items():
    print(f"  {name:10s} {path_probability(policy, path):.5f}")

# At p2 (layer 2) both branches are open: venue v1 or another author.
# Each qualified type gets half the mass, split evenly inside the type.
state = WalkState(ix["p2"], 2)
dist = transition_distribution(graph, mg, state)
print("\nNext-step distribution at p2, layer 2:")
for node, p in sorted(dist.items()):
    print(f"  {names[node]}  {p:.3f}")

rng = np.random.default_rng(0)
print("\nFive metagraph walks of length 9 from a1:")
for _ in range(5):
    print("  " + " ".join(names[v] for v in generate_walk(graph, mg, ix["a1"], 9, rng)))
