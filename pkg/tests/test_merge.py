import numpy as np
import pytest

from nctomo.errors import InconsistentTypes, MissingPair
from nctomo.merge import (MergedTopology, RootedTree, TwoByTwoMap, add_edge_in_F, add_source,
                          merge_with_tree, merge_without_tree, required_pairs_audit, routed_union,
                          source_tree, split_edge_in_F, true_join_links)
from nctomo.netgraph import (abilene, all_pair_types, fig9_fixture, generate_topology,
                             line_graph_adjacency, topologies_equal)
from nctomo.netgraph.logical import FMatrix, line_graph_from_pairs
from nctomo.netgraph.routing import TwoByTwoType as T


def _merge_oracle(routing):
    s1, s2 = routing.sources[:2]
    two = routing.restrict((s1, s2), routing.receivers)
    return two, merge_with_tree(source_tree(two, s1), TwoByTwoMap.from_routing(two, s1, s2),
                                new_source=s2, new_tree=source_tree(two, s2))


def test_abilene_walk():
    _, rt = abilene()
    _, merged = _merge_oracle(rt)
    first = merged.trace[:2]
    assert [(s.receiver, s.partner, s.type) for s in first] == [("R1", "R2", T.TYPE1),
                                                                ("R1", "R3", T.TYPE4)]
    assert merged.joins == true_join_links(rt, "S1", "S2")


def test_abilene_without_tree():
    _, rt = abilene()
    merged = merge_without_tree(TwoByTwoMap.from_routing(rt, "S1", "S2"))
    tree = merged.tree_of("S1")
    assert tree.children[tree.root] == ["B(R1,R3)"] or len(tree.children[tree.root]) == 1
    assert topologies_equal(merged.topology, routed_union(merged.routing))
    assert merged.F.same_as(line_graph_adjacency(merged.topology))


def _tree(edges, root="S1"):
    return RootedTree.from_edges(edges, root)


CATERPILLAR = [("S1", "a"), ("a", "R1"), ("a", "b"), ("b", "R2"), ("b", "c"), ("c", "R3"),
               ("c", "R4")]


def test_all_shared_puts_one_join_above_top_branch():
    tree = _tree(CATERPILLAR)
    types = {(x, y): T.TYPE1 for i, x in enumerate(tree.leaves) for y in tree.leaves[i + 1:]}
    merged = merge_with_tree(tree, types)
    assert set(merged.joins.values()) == {("S1", "a")}
    assert len(set(merged.join_nodes.values())) == 1


def test_two_receivers_type4():
    tree = _tree([("S1", "b"), ("b", "R1"), ("b", "R2")])
    merged = merge_with_tree(tree, {("R1", "R2"): T.TYPE4})
    assert merged.joins == {"R1": ("b", "R1"), "R2": ("b", "R2")}


def test_caterpillar_pattern():
    # S2 enters above R1's fork for R1 only, and at c's branch for R3/R4
    tree = _tree(CATERPILLAR)
    types = {("R1", "R2"): T.TYPE4, ("R1", "R3"): T.TYPE4, ("R1", "R4"): T.TYPE4,
             ("R2", "R3"): T.TYPE2, ("R2", "R4"): T.TYPE2, ("R3", "R4"): T.TYPE1}
    merged = merge_with_tree(tree, types)
    assert merged.joins == {"R1": ("a", "R1"), "R2": ("a", "b"), "R3": ("b", "c"),
                            "R4": ("b", "c")}


def test_missing_pair():
    tree = _tree(CATERPILLAR)
    with pytest.raises(MissingPair):
        merge_with_tree(tree, {("R1", "R2"): T.TYPE1})


def test_inconsistent_types():
    with pytest.raises(InconsistentTypes):
        TwoByTwoMap({("R1", "R2"): T.TYPE2, ("R2", "R1"): T.TYPE2})
    bad = TwoByTwoMap({("R1", "R2"): T.TYPE1, ("R2", "R3"): T.TYPE1, ("R1", "R3"): T.TYPE4})
    with pytest.raises(InconsistentTypes):
        bad.check_consistency()
    tree = _tree([("S1", "b"), ("b", "R1"), ("b", "c"), ("c", "R2"), ("c", "R3")])
    with pytest.raises(InconsistentTypes):
        merge_with_tree(tree, bad)


def test_map_lookup_either_order():
    m = TwoByTwoMap({("R1", "R2"): T.TYPE2})
    assert m["R2", "R1"] is T.TYPE3
    assert ("R2", "R1") in m


def test_split_and_add_in_F():
    F = line_graph_from_pairs([("S", "A"), ("A", "R")])
    F2 = split_edge_in_F(F, ("S", "A"), "J")
    assert F2.edges == (("S", "J"), ("A", "R"), ("J", "A"))
    want = line_graph_from_pairs([("S", "J"), ("A", "R"), ("J", "A")])
    assert F2.same_as(want)
    F3 = add_edge_in_F(F2, ("T", "J"))
    assert F3.same_as(line_graph_from_pairs([("S", "J"), ("A", "R"), ("J", "A"), ("T", "J")]))


def test_split_on_empty_row():
    F = FMatrix((("S", "R"),), np.zeros((1, 1), dtype=np.uint8))
    F2 = split_edge_in_F(F, ("S", "R"), "J")
    assert F2.matrix.tolist() == [[0, 1], [0, 0]]


def test_audit_star_and_single():
    star = _tree([("S1", "b")] + [("b", f"R{i}") for i in range(1, 6)])
    types = {(f"R{i}", f"R{j}"): T.TYPE4 for i in range(1, 6) for j in range(i + 1, 6)}
    merged = merge_with_tree(star, types)
    audit = required_pairs_audit(star, merged.trace)
    assert audit.consulted == 4 and audit.within_bounds
    single = _tree([("S1", "R1")])
    merged = merge_with_tree(single, {})
    assert required_pairs_audit(single, merged.trace).consulted == 0


@pytest.mark.parametrize("kind,seed", [(k, s) for k in ("erdos_renyi", "preferential")
                                       for s in range(8)])
def test_random_routed_merge(kind, seed):
    _, rt = generate_topology(kind, seed)
    two, merged = _merge_oracle(rt)
    assert merged.joins == true_join_links(two, *two.sources)
    assert topologies_equal(merged.topology, routed_union(two))
    assert merged.F.same_as(line_graph_adjacency(merged.topology))
    assert required_pairs_audit(source_tree(two, two.sources[0]), merged.trace).within_bounds
    assert all_pair_types(merged.routing, *two.sources) == all_pair_types(two, *two.sources)
    # every branching point of S1's tree is below some join or has one below it
    tree = source_tree(two, two.sources[0])
    join_ends = {b for _, b in merged.joins.values()} | {a for a, _ in merged.joins.values()}
    for b in tree.children:
        if b == tree.root or len(tree.children[b]) < 2:
            continue
        related = set(tree.ancestors(b)) | {b}
        below = {x for x in tree.parent if b in tree.ancestors(x)}
        assert join_ends & (related | below)


def test_merge_without_tree_random():
    for seed in range(6):
        _, rt = generate_topology("erdos_renyi", seed)
        two = rt.restrict(rt.sources[:2], rt.receivers)
        merged = merge_without_tree(TwoByTwoMap.from_routing(two, *two.sources))
        assert all_pair_types(merged.routing, *two.sources) == all_pair_types(two, *two.sources)
        assert merged.F.same_as(line_graph_adjacency(merged.topology))


def test_add_source_reduces_to_pairwise():
    _, rt = generate_topology("erdos_renyi", 3)
    two, direct = _merge_oracle(rt)
    base = MergedTopology.from_tree(source_tree(two, "S1"))
    via = add_source(base, [TwoByTwoMap.from_routing(two, "S1", "S2")], "S2",
                     new_tree=source_tree(two, "S2"))
    assert topologies_equal(via.topology, direct.topology)


def test_add_third_source():
    for seed in range(5):
        _, rt = generate_topology("erdos_renyi", seed, n_sources=3, n_receivers=6)
        two, merged = _merge_oracle(rt)
        maps = {s: TwoByTwoMap.from_routing(rt, s, "S3") for s in ("S1", "S2")}
        three = add_source(merged, maps, "S3", new_tree=source_tree(rt, "S3"))
        assert topologies_equal(three.topology, routed_union(rt))
        assert three.F.same_as(line_graph_adjacency(three.topology))


def test_fig9_matrix():
    topo, rt = fig9_fixture()
    s1 = _tree([("S1", "B12"), ("B12", "B23"), ("B12", "R1"), ("B23", "R2"), ("B23", "R3")])
    merged = merge_with_tree(s1, TwoByTwoMap.from_routing(rt, "S1", "S2"),
                             new_tree=source_tree(rt, "S2"))
    assert topologies_equal(merged.topology, routed_union(rt))
    assert merged.F.same_as(line_graph_adjacency(merged.topology))
