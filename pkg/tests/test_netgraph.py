import json

import numpy as np
import pytest

from nctomo.errors import (A1Violation, A2Violation, A3Violation, DegenerateComponent,
                           LabelMismatch, TopologyError)
from nctomo.netgraph import (Routing, TwoByTwoType, abilene, all_pair_types, classify_2x2_oracle,
                             dag_from_edges, enumerate_binary_trees, fig1_tree, generate_topology,
                             insert_degree_two, joining_point, line_graph_adjacency,
                             line_graph_from_pairs, logical_collapse, random_binary_tree,
                             random_routed_dag, read_topology, topologies_equal, tree_from_edges,
                             validate_routing, write_topology)
from nctomo.netgraph import io as nio
from nctomo.netgraph.generators import FIG9_S1_TREE


def test_abilene_is_valid_and_typed():
    topo, rt = abilene()
    validate_routing(topo, rt)
    assert len(rt.sources) == 2 and len(rt.receivers) == 9
    assert classify_2x2_oracle(rt, "S1", "S2", "R1", "R2") is TwoByTwoType.TYPE1
    assert classify_2x2_oracle(rt, "S1", "S2", "R1", "R3") is TwoByTwoType.TYPE4
    with pytest.raises(DegenerateComponent):
        classify_2x2_oracle(rt, "S1", "S2", "R1", "R1")


def _routing(paths):
    srcs = tuple(dict.fromkeys(s for s, _ in paths))
    rcvs = tuple(dict.fromkeys(r for _, r in paths))
    return Routing({k: tuple(v) for k, v in paths.items()}, srcs, rcvs)


def test_routing_violations():
    g = dag_from_edges([("S", "a"), ("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "R1"),
                        ("d", "R2"), ("T", "d")])
    bad_a2 = _routing({("S", "R1"): "S a b d R1".split(), ("S", "R2"): "S a c d R2".split()})
    with pytest.raises(A2Violation):
        validate_routing(g, bad_a2)
    g3 = dag_from_edges([("S", "x"), ("T", "x"), ("x", "y"), ("x", "z"), ("y", "R"), ("z", "R")])
    bad_a3 = _routing({("S", "R"): "S x y R".split(), ("T", "R"): "T x z R".split()})
    with pytest.raises(A3Violation):
        validate_routing(g3, bad_a3)
    with pytest.raises(A1Violation):
        validate_routing(g3, _routing({("S", "R"): "S y R".split()}))


def test_collapse_examples():
    chain = tree_from_edges([("1", "a"), ("a", "b"), ("b", "2")])
    c = logical_collapse(chain)
    assert len(c.edges) == 1 and set(c.edges[0].key) == {"1", "2"}
    t = fig1_tree()
    assert logical_collapse(t).node_ids == t.node_ids
    for s in range(20):
        base = random_binary_tree(7, s)
        noisy = insert_degree_two(base, 4, s)
        assert topologies_equal(noisy, base)
        once = logical_collapse(noisy)
        assert topologies_equal(logical_collapse(once), once)


def test_directed_tree_pairs_are_shared():
    tree = [("S1", "J"), ("S2", "J"), ("J", "B"), ("B", "R1"), ("B", "C"), ("C", "R2"), ("C", "R3")]
    g = dag_from_edges(tree)
    rt = _routing({(s, r): [s] + ["J", "B"] + (["C"] if r != "R1" else []) + [r]
                   for s in ("S1", "S2") for r in ("R1", "R2", "R3")})
    validate_routing(g, rt)
    assert set(all_pair_types(rt, "S1", "S2").values()) == {TwoByTwoType.TYPE1}


@pytest.mark.parametrize("seed", range(8))
def test_random_dag_shared_iff_same_join(seed):
    kind = ("erdos_renyi", "preferential")[seed % 2]
    topo, rt = random_routed_dag(kind, seed)
    validate_routing(topo, rt)
    for (a, b), t in all_pair_types(rt, "S1", "S2").items():
        same = joining_point(rt, a, "S1", "S2") == joining_point(rt, b, "S1", "S2")
        assert (t is TwoByTwoType.TYPE1) == same


def test_generators_deterministic():
    a, ra = generate_topology("erdos_renyi", 5)
    b, rb = generate_topology("erdos_renyi", 5)
    assert [e.key for e in a.edges] == [e.key for e in b.edges] and ra.paths == rb.paths
    assert len(ra.sources) == 2 and len(ra.receivers) == 7
    t = random_binary_tree(2, 0)
    assert len(t.edges) == 1


def test_line_graph_examples():
    F = line_graph_from_pairs(FIG9_S1_TREE)
    want = np.zeros((5, 5), dtype=np.uint8)
    for i, j in [(1, 2), (1, 3), (2, 4), (2, 5)]:
        want[i - 1, j - 1] = 1
    assert np.array_equal(F.matrix, want)
    assert line_graph_from_pairs([("a", "b")]).matrix.tolist() == [[0]]
    assert int(line_graph_from_pairs([("a", "b"), ("b", "c")]).matrix.sum()) == 1


def test_line_graph_nilpotent():
    topo, _ = abilene()
    m = line_graph_adjacency(topo).matrix.astype(np.int64)
    p = np.linalg.matrix_power(m, len(topo.edges))
    assert not p.any()


def test_equality():
    t = fig1_tree()
    assert topologies_equal(t, t)
    ren = t.relabel({n: f"x{n}" for n in t.node_ids if n not in t.leaves})
    assert topologies_equal(t, ren)
    swapped = t.relabel({"3": "5", "5": "3"})
    assert not topologies_equal(t, swapped)
    with pytest.raises(LabelMismatch):
        topologies_equal(t, random_binary_tree(4, 0))


def test_equality_is_equivalence_on_small_trees():
    trees = list(enumerate_binary_trees(5))
    for i, a in enumerate(trees):
        for j, b in enumerate(trees):
            assert topologies_equal(a, b) == (i == j)


def test_file_round_trip(tmp_path):
    topo, rt = abilene()
    path = tmp_path / "ab.json"
    write_topology(path, topo, rt, {"R1": ("CHI", "NYC")})
    t2, r2, joins = read_topology(path)
    assert [e.key for e in t2.edges] == [e.key for e in topo.edges]
    assert r2.paths == rt.paths and joins == {"R1": ("CHI", "NYC")}
    doc = json.loads(path.read_text())
    doc["edges"][0]["colour"] = "red"
    with pytest.raises(TopologyError):
        nio.from_document(doc)
