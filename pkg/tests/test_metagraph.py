import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hinembed.errors import MetagraphError
from hinembed.graph import Schema, bibliographic_schema
from hinembed.metagraph import (MetaEdge, MetaGraph, MetaNode, RecursiveLayerMap, allowed_transitions,
                                base_layer, chain_from_metapath, parse_metagraph, validate)
from hinembed.presets import AUTHOR_METAGRAPH_TEXT

from oracles import UnrolledAutomaton, copies_needed


def test_author_metagraph_structure(mg):
    assert mg.d == 5
    assert [sorted(n.node_type for n in mg.nodes_in_layer(i)) for i in range(1, 6)] == [
        ["A"], ["P"], ["A", "V"], ["P"], ["A"]]
    assert len(mg.edges) == 6
    assert mg.node(mg.source).node_type == mg.node(mg.target).node_type == "A"
    assert not mg.is_chain


def test_metapath_chain(apvpa, apapa):
    assert apvpa.d == 5 and apvpa.is_chain
    assert [n.node_type for n in apvpa.nodes] == list("APVPA")
    assert [n.node_type for n in apapa.nodes] == list("APAPA")


@pytest.mark.parametrize("i, expected", [(1, 1), (2, 2), (4, 4), (5, 5), (6, 2), (8, 4), (9, 5), (10, 2), (13, 5)])
def test_base_layer_d5(i, expected):
    assert base_layer(i, RecursiveLayerMap(5)) == expected


def test_base_layer_d3():
    m = RecursiveLayerMap(3)
    assert m.period == 2
    assert [m.base_layer(i) for i in range(1, 8)] == [1, 2, 3, 2, 3, 2, 3]


def test_base_layer_errors():
    with pytest.raises(ValueError):
        RecursiveLayerMap(5).base_layer(0)
    with pytest.raises(ValueError):
        RecursiveLayerMap(1)


@settings(max_examples=200)
@given(st.integers(2, 12), st.integers(2, 500))
def test_base_layer_periodic_and_in_range(d, i):
    m = RecursiveLayerMap(d)
    assert 1 <= m.base_layer(i) <= d
    assert m.base_layer(i + d - 1) == m.base_layer(i)
    if i <= d:
        assert m.base_layer(i) == i


def test_allowed_transitions_examples(mg, apvpa):
    assert allowed_transitions(mg, 2) == {("V", 3, "publish^-1"), ("A", 3, "write^-1")}
    # layer 5 is the source of the next copy
    assert allowed_transitions(mg, 5) == {("P", 6, "write")}
    assert allowed_transitions(mg, 1) == {("P", 2, "write")}
    assert allowed_transitions(apvpa, 3) == {("P", 4, None)}
    assert allowed_transitions(mg, 3, "V") == {("P", 4, "publish")}
    assert allowed_transitions(mg, 7, "A") == {("P", 8, "write")}


@settings(max_examples=100)
@given(st.integers(1, 60))
def test_chain_has_at_most_one_transition(i):
    for chain in (chain_from_metapath("APVPA"), chain_from_metapath("APA"), chain_from_metapath("PAPVP")):
        assert len(allowed_transitions(chain, i)) <= 1


def test_parse_serialize_identity(mg):
    assert parse_metagraph(mg.serialize()) == mg
    text = mg.serialize()
    assert text.splitlines()[2:8] == [
        "node a1 : A @ 1", "node p1 : P @ 2", "node a2 : A @ 3", "node v : V @ 3",
        "node p2 : P @ 4", "node a3 : A @ 5"]


def test_parse_comments_and_whitespace():
    text = "# header\n" + AUTHOR_METAGRAPH_TEXT.replace("node a1 : A @ 1", "  node a1:A@1   # source")
    assert parse_metagraph(text) == parse_metagraph(AUTHOR_METAGRAPH_TEXT)


BASE = """metagraph t
layers 3
node a : A @ 1
node p : P @ 2
node b : A @ 3
"""


@pytest.mark.parametrize("text, message", [
    (BASE + "edge a -> p\nedge p -> b\nfrobnicate\n", "unknown statement"),
    (BASE + "edge a -> p\nedge p => b\n", "malformed edge"),
    (BASE + "edge a -> q\nedge p -> b\n", "undeclared alias"),
    (BASE + "edge a -> p\nedge b -> p\n", "edge must increase layer"),
    (BASE + "edge a -> p\n", "exactly one"),
    (BASE.replace("node b : A", "node b : V") + "edge a -> p\nedge p -> b\n", "differs from target type"),
    (BASE + "node c : P @ 2\nedge a -> p\nedge p -> b\nedge a -> c\nedge c -> b\n", "duplicate node type"),
    (BASE + "node q : V @ 2\n" + "edge a -> p\nedge p -> b\n", "exactly one source"),
    (BASE + "node a : P @ 2\n", "duplicate alias"),
])
def test_parse_errors(text, message):
    with pytest.raises(MetagraphError, match=message):
        parse_metagraph(text)


def test_parse_error_position():
    with pytest.raises(MetagraphError) as info:
        parse_metagraph(BASE + "edge a -> p\n  edge p -> zz\n")
    assert info.value.line == 7
    assert info.value.column == 13
    assert str(info.value).startswith("line 7, column 13: ")


def test_edge_from_layer_3_to_2():
    text = BASE.replace("layers 3", "layers 4") + "node q : P @ 4\nedge a -> p\nedge b -> p\nedge p -> q\n"
    with pytest.raises(MetagraphError, match="edge must increase layer"):
        parse_metagraph(text)


def test_determinism_condition_rejected():
    # a -> p at layer 2 and a -> p' at layer 3: the neighbor type P does not fix the layer
    text = """metagraph amb
layers 4
node a : A @ 1
node p : P @ 2
node v : V @ 3
node q : P @ 3
node b : A @ 4
edge a -> p
edge a -> q
edge p -> v
edge v -> b
edge q -> b
"""
    with pytest.raises(MetagraphError, match="ambiguous"):
        parse_metagraph(text)


def test_skip_layer_edges_supported():
    text = """metagraph skip
layers 4
node a : A @ 1
node p : P @ 2
node v : V @ 3
node b : A @ 4
edge a -> p
edge p -> v
edge v -> b
edge p -> b
"""
    m = parse_metagraph(text)
    assert allowed_transitions(m, 2) == {("V", 3, None), ("A", 4, None)}


def test_validate_fig1(mg, apvpa, apapa):
    for m in (mg, apvpa, apapa):
        assert validate(m, bibliographic_schema()) == []
        assert validate(m, bibliographic_schema(cite=False)) == []


def test_validate_reports_all_violations():
    m = MetaGraph("bad", [MetaNode(1, "A", "a"), MetaNode(2, "V", "v"), MetaNode(3, "P", "p"),
                          MetaNode(4, "A", "b")],
                  [MetaEdge("a", "v"), MetaEdge("v", "p"), MetaEdge("p", "b", "publish")])
    problems = validate(m, bibliographic_schema())
    assert len(problems) == 2
    assert "a -> v" in problems[0]
    assert "publish" in problems[1]


def test_validate_unknown_type():
    m = chain_from_metapath("AXA")
    assert len(validate(m, bibliographic_schema())) == 3


def test_chain_from_metapath_errors():
    with pytest.raises(MetagraphError, match="same type"):
        chain_from_metapath("APV")
    with pytest.raises(MetagraphError):
        chain_from_metapath("AA")
    with pytest.raises(MetagraphError, match="no schema relation"):
        chain_from_metapath("AVA", bibliographic_schema())
    assert chain_from_metapath("APA", bibliographic_schema()).d == 3


def test_labelled_cite_metagraph():
    schema = bibliographic_schema()
    text = """metagraph cited
layers 3
node p : P @ 1
node q : P @ 2
node r : P @ 3
edge p -> q : cite
edge q -> r : cite^-1
"""
    m = parse_metagraph(text)
    assert validate(m, schema) == []
    tt = m.transition_table(schema)
    assert sorted(tt.rel.tolist()) == sorted([schema.relation_id("P", "cite", "P"),
                                              schema.relation_id("P", "cite^-1", "P"),
                                              schema.relation_id("P", "cite", "P")])


# random valid metagraphs

TYPES = ["A", "P", "V", "T"]


@st.composite
def metagraphs(draw):
    d = draw(st.integers(2, 6))
    end = draw(st.sampled_from(TYPES))
    layers = [[end]]
    for _ in range(d - 2):
        layers.append(draw(st.lists(st.sampled_from(TYPES), min_size=1, max_size=3, unique=True)))
    layers.append([end])
    nodes = [MetaNode(i + 1, t, f"m{i + 1}{t}") for i, layer in enumerate(layers) for t in layer]
    by_layer = [[n for n in nodes if n.layer == i + 1] for i in range(d)]
    edges = set()
    for i in range(1, d):
        for n in by_layer[i]:
            edges.add((draw(st.sampled_from(by_layer[i - 1])).alias, n.alias))
        for n in by_layer[i - 1]:
            edges.add((n.alias, draw(st.sampled_from(by_layer[i])).alias))
    extras = draw(st.lists(st.tuples(st.sampled_from(nodes), st.sampled_from(nodes)), max_size=4))
    types = {n.alias: n.node_type for n in nodes}
    for a, b in extras:
        if a.layer < b.layer and (a.alias, b.alias) not in edges:
            if types[b.alias] not in {types[y] for x, y in edges if x == a.alias}:
                edges.add((a.alias, b.alias))
    return MetaGraph("rand", nodes, [MetaEdge(a, b) for a, b in sorted(edges)])


@settings(max_examples=100, deadline=None)
@given(metagraphs())
def test_parse_serialize_identity_random(m):
    assert parse_metagraph(m.serialize()) == m


def generable(m, types):
    """Follow ``allowed_transitions`` along a type sequence."""
    if types[0] != m.source_type:
        return False
    layer, here = 1, types[0]
    for t in types[1:]:
        nxt = [j for tt, j, _ in allowed_transitions(m, layer, here) if tt == t]
        if len(nxt) != 1:
            return False
        layer, here = nxt[0], t
    return True


@settings(max_examples=150, deadline=None)
@given(metagraphs(), st.data())
def test_walk_acceptance_matches_unrolled_automaton(m, data):
    length = data.draw(st.integers(1, 14))
    alphabet = sorted({n.node_type for n in m.nodes})
    if data.draw(st.booleans()):
        seq = data.draw(st.lists(st.sampled_from(alphabet), min_size=length, max_size=length))
    else:
        # follow random legal moves so accepted sequences are well represented
        seq, layer = [m.source_type], 1
        while len(seq) < length:
            opts = sorted(allowed_transitions(m, layer, seq[-1]), key=str)
            t, layer, _ = data.draw(st.sampled_from(opts))
            seq.append(t)
    auto = UnrolledAutomaton(m, copies_needed(m, length))
    assert generable(m, seq) == auto.accepts(seq)


def test_unrolled_automaton_three_copies(mg):
    auto = UnrolledAutomaton(mg, 3)
    assert auto.accepts(list("APVPAPAPA"))
    assert auto.accepts(list("APAPAPVPAPAPA"))
    assert not auto.accepts(list("APVA"))
    assert not auto.accepts(list("APAPVP"))


def test_schema_with_ambiguous_pair_requires_labels():
    schema = Schema(("A", "P"), (("A", "write", "P"), ("A", "review", "P")))
    m = parse_metagraph("metagraph w\nlayers 3\nnode a : A @ 1\nnode p : P @ 2\nnode b : A @ 3\n"
                        "edge a -> p : review\nedge p -> b : review^-1\n")
    assert validate(m, schema) == []
    assert validate(m, bibliographic_schema()) != []
