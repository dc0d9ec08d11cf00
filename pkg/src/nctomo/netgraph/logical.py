"""Degree-2 collapse, leaf-labelled equality, and line-graph adjacency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from ..errors import LabelMismatch, UnknownEdge
from .model import INTERNAL, LEAF, Edge, Node, Routing, Topology


def _merge(e1: Edge, e2: Edge, a: str, b: str) -> Edge:
    keep = (1.0 - e1.loss_prob) * (1.0 - e2.loss_prob)
    return Edge(a, b, e1.directed, e1.fixed_delay + e2.fixed_delay,
                e1.queue_delay_max + e2.queue_delay_max, 1.0 - keep)


def logical_collapse(topology: Topology) -> Topology:
    """Remove internal pass-through nodes, merging their two links."""
    roles = topology.roles
    edges: dict[tuple[str, str], Edge] = {e.key: e for e in topology.edges}
    alive = list(topology.node_ids)
    directed = topology.directed

    changed = True
    while changed:
        changed = False
        inc: dict[str, list[tuple[str, str]]] = {n: [] for n in alive}
        out: dict[str, list[tuple[str, str]]] = {n: [] for n in alive}
        for k in edges:
            out[k[0]].append(k)
            inc[k[1]].append(k)
        for n in alive:
            if roles[n] != INTERNAL:
                continue
            if directed:
                if len(inc[n]) != 1 or len(out[n]) != 1:
                    continue
                k1, k2 = inc[n][0], out[n][0]
                a, b = k1[0], k2[1]
                if (a, b) in edges:
                    continue
                new = _merge(edges[k1], edges[k2], a, b)
            else:
                touching = inc[n] + out[n]
                if len(touching) != 2:
                    continue
                k1, k2 = touching
                a = k1[0] if k1[1] == n else k1[1]
                b = k2[0] if k2[1] == n else k2[1]
                new = _merge(edges[k1], edges[k2], a, b)
            del edges[k1], edges[k2]
            edges[new.key] = new
            alive.remove(n)
            changed = True
            break
    alive_set = set(alive)
    nodes = tuple(nd for nd in topology.nodes if nd.id in alive_set)
    order = {n: i for i, n in enumerate(topology.node_ids)}
    ordered = sorted(edges.values(), key=lambda e: (order[e.a], order[e.b]))
    return Topology(nodes, tuple(ordered))


def collapse_routing(routing: Routing, topology: Topology) -> Routing:
    """Drop route nodes that no longer exist in a collapsed topology."""
    keep = set(topology.node_ids)
    paths = {k: tuple(n for n in p if n in keep) for k, p in routing.paths.items()}
    return Routing(paths, routing.sources, routing.receivers)


def tree_canonical_form(topology: Topology) -> str:
    """Leaf-labelled canonical string of an undirected tree (internal ids ignored)."""
    t = logical_collapse(topology)
    leaves = sorted(t.leaves)
    if not leaves:
        return "()"
    adj = t.adjacency
    roles = t.roles
    root = leaves[0]

    def canon(n: str, parent: str | None) -> str:
        if roles[n] == LEAF and parent is not None:
            return repr(n)
        parts = sorted(canon(m, n) for m in adj[n] if m != parent)
        return "(" + ",".join(parts) + ")"

    return repr(root) + canon(root, None)


def topologies_equal(a: Topology, b: Topology) -> bool:
    """True iff an isomorphism fixing leaf labels maps a onto b."""
    if set(a.leaves) != set(b.leaves):
        raise LabelMismatch(f"leaf sets differ: {sorted(set(a.leaves) ^ set(b.leaves))}")
    if a.directed != b.directed:
        return False
    if not a.directed:
        return tree_canonical_form(a) == tree_canonical_form(b)
    return _dag_isomorphic(logical_collapse(a), logical_collapse(b))


def _dag_isomorphic(a: Topology, b: Topology) -> bool:
    def build(t: Topology) -> nx.DiGraph:
        g = nx.DiGraph()
        for n in t.nodes:
            g.add_node(n.id, label=n.id if n.role == LEAF else None)
        g.add_edges_from(e.key for e in t.edges)
        return g

    return nx.is_isomorphic(build(a), build(b), node_match=lambda x, y: x["label"] == y["label"])


@dataclass(frozen=True, eq=False)
class FMatrix:
    """Line-graph adjacency: entry (i, j) is 1 iff edge j continues edge i."""

    edges: tuple[tuple[str, str], ...]
    matrix: np.ndarray

    def index(self, edge: tuple[str, str]) -> int:
        try:
            return self.edges.index(tuple(edge))
        except ValueError:
            raise UnknownEdge(f"edge {edge} not in F") from None

    def reorder(self, order: Sequence[tuple[str, str]]) -> "FMatrix":
        idx = [self.index(e) for e in order]
        if sorted(idx) != list(range(len(self.edges))):
            raise UnknownEdge("reorder must be a permutation of the edge set")
        m = self.matrix[np.ix_(idx, idx)]
        return FMatrix(tuple(tuple(e) for e in order), m)

    def same_as(self, other: "FMatrix") -> bool:
        if set(self.edges) != set(other.edges):
            return False
        return bool(np.array_equal(self.matrix, other.reorder(self.edges).matrix))


def line_graph_adjacency(topology: Topology) -> FMatrix:
    keys = tuple(e.key for e in topology.edges)
    n = len(keys)
    m = np.zeros((n, n), dtype=np.uint8)
    by_tail: dict[str, list[int]] = {}
    for j, (t, _) in enumerate(keys):
        by_tail.setdefault(t, []).append(j)
    for i, (_, h) in enumerate(keys):
        for j in by_tail.get(h, ()):
            m[i, j] = 1
    return FMatrix(keys, m)


def line_graph_from_pairs(pairs: Sequence[tuple[str, str]]) -> FMatrix:
    """F for a bare list of directed edges (no delay parameters needed)."""
    nodes = []
    for a, b in pairs:
        for x in (a, b):
            if x not in nodes:
                nodes.append(x)
    topo = Topology(tuple(Node(x) for x in nodes), tuple(Edge(a, b, True) for a, b in pairs))
    return line_graph_adjacency(topo)
