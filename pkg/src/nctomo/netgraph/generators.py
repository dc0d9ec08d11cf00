"""Topology fixtures and seeded generators."""

from __future__ import annotations

from itertools import combinations
from typing import Iterator

import networkx as nx
import numpy as np

from ..errors import GenerationFailure, TopologyError
from .model import (LEAF, Edge, Node, Routing, Topology, dag_from_edges, routing_from_trees,
                    tree_from_edges)
from .routing import joining_point, validate_routing

QUEUE_MAX_MS = 10.0
FIXED_RANGE_MS = (5.0, 10.0)
ABILENE_SEED = 0xAB11E


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)


def _with_delays(topo: Topology, rng: np.random.Generator, queue_max: float = QUEUE_MAX_MS) -> Topology:
    lo, hi = FIXED_RANGE_MS
    edges = tuple(
        Edge(e.a, e.b, e.directed, float(rng.uniform(lo, hi)), queue_max, e.loss_prob)
        for e in topo.edges
    )
    return Topology(topo.nodes, edges)


def uniform_delays(topo: Topology, fixed: float = 7.5, queue_max: float = 0.0) -> Topology:
    edges = tuple(Edge(e.a, e.b, e.directed, fixed, queue_max, e.loss_prob) for e in topo.edges)
    return Topology(topo.nodes, edges)


# ---------------------------------------------------------------- trees

FIG1_EDGES = [
    ("1", "A"), ("2", "A"), ("A", "C"), ("C", "B"), ("B", "3"), ("B", "4"),
    ("C", "D"), ("D", "7"), ("D", "E"), ("E", "5"), ("E", "6"),
]


def fig1_tree(fixed: float = 7.5, queue_max: float = 0.0) -> Topology:
    """The 7-leaf binary tree with internal nodes A-E used in the tree examples."""
    return tree_from_edges(FIG1_EDGES, fixed_delay=fixed, queue_delay_max=queue_max)


def star_tree(k: int, fixed: float = 7.5) -> Topology:
    return tree_from_edges([(str(i + 1), "c") for i in range(k)], fixed_delay=fixed)


def random_binary_tree(n_leaves: int, seed: int) -> Topology:
    if n_leaves < 2:
        raise GenerationFailure("a tree needs at least two leaves")
    rng = _rng(seed)
    labels = [str(i + 1) for i in range(n_leaves)]
    order = [labels[i] for i in rng.permutation(n_leaves)]
    if n_leaves == 2:
        return _with_delays(tree_from_edges([(order[0], order[1])]), rng)
    edges = [(order[0], "i0"), (order[1], "i0"), (order[2], "i0")]
    for k, leaf in enumerate(order[3:], start=1):
        a, b = edges.pop(int(rng.integers(len(edges))))
        mid = f"i{k}"
        edges += [(a, mid), (mid, b), (mid, leaf)]
    return _with_delays(tree_from_edges(edges, leaves=labels), rng)


def enumerate_binary_trees(n_leaves: int) -> Iterator[Topology]:
    """Every unrooted leaf-labelled binary tree on leaves 1..n, each exactly once."""
    labels = [str(i + 1) for i in range(n_leaves)]
    if n_leaves == 2:
        yield tree_from_edges([("1", "2")])
        return

    def grow(edges: list[tuple[str, str]], k: int) -> Iterator[list[tuple[str, str]]]:
        if k == n_leaves:
            yield edges
            return
        for i in range(len(edges)):
            a, b = edges[i]
            mid = f"i{k - 2}"
            rest = edges[:i] + edges[i + 1:]
            yield from grow(rest + [(a, mid), (mid, b), (mid, labels[k])], k + 1)

    for edges in grow([("1", "i0"), ("2", "i0"), ("3", "i0")], 3):
        yield tree_from_edges(edges, leaves=labels, fixed_delay=7.5)


def full_mary_tree(m: int, n_leaves: int, seed: int) -> Topology:
    """Full m-ary tree: every intermediate node has degree exactly m+1."""
    if m < 2 or n_leaves < m + 1 or (n_leaves - m - 1) % (m - 1):
        raise GenerationFailure(f"no full {m}-ary tree has {n_leaves} leaves")
    rng = _rng(seed)
    edges = [("c0", f"t{i}") for i in range(m + 1)]
    frontier = [f"t{i}" for i in range(m + 1)]
    counter = m + 1
    n_internal = 1
    while len(frontier) < n_leaves:
        node = frontier.pop(int(rng.integers(len(frontier))))
        for _ in range(m):
            frontier.append(f"t{counter}")
            edges.append((node, frontier[-1]))
            counter += 1
        n_internal += 1
    internal = {a for a, _ in edges}
    rename = {old: str(i + 1) for i, old in enumerate(sorted(frontier, key=lambda s: int(s[1:])))}
    rename.update({x: f"c{i}" for i, x in enumerate(sorted(internal))})
    edges = [(rename[a], rename[b]) for a, b in edges]
    return _with_delays(tree_from_edges(edges, leaves=[rename[f] for f in frontier]), rng)


def insert_degree_two(topo: Topology, count: int, seed: int) -> Topology:
    """Subdivide random edges with pass-through nodes (for collapse round trips)."""
    rng = _rng(seed)
    edges = list(topo.edges)
    nodes = list(topo.nodes)
    for k in range(count):
        e = edges.pop(int(rng.integers(len(edges))))
        mid = f"d{k}"
        nodes.append(Node(mid))
        half = dict(directed=e.directed, fixed_delay=e.fixed_delay / 2,
                    queue_delay_max=e.queue_delay_max / 2, loss_prob=e.loss_prob)
        edges += [Edge(e.a, mid, **half), Edge(mid, e.b, **half)]
    return Topology(tuple(nodes), tuple(edges))


# --------------------------------------------------------------- 2-by-2

TWO_BY_TWO_TREES = {
    1: ({"S1": [("S1", "J"), ("J", "B"), ("B", "R1"), ("B", "R2")],
         "S2": [("S2", "J"), ("J", "B"), ("B", "R1"), ("B", "R2")]}),
    2: ({"S1": [("S1", "J1"), ("J1", "B1"), ("B1", "R1"), ("B1", "J2"), ("J2", "R2")],
         "S2": [("S2", "B2"), ("B2", "J1"), ("J1", "B1"), ("B1", "R1"), ("B2", "J2"), ("J2", "R2")]}),
    3: ({"S1": [("S1", "J2"), ("J2", "B1"), ("B1", "R2"), ("B1", "J1"), ("J1", "R1")],
         "S2": [("S2", "B2"), ("B2", "J2"), ("J2", "B1"), ("B1", "R2"), ("B2", "J1"), ("J1", "R1")]}),
    4: ({"S1": [("S1", "B1"), ("B1", "J1"), ("B1", "J2"), ("J1", "R1"), ("J2", "R2")],
         "S2": [("S2", "B2"), ("B2", "J1"), ("B2", "J2"), ("J1", "R1"), ("J2", "R2")]}),
}


def routed_from_trees(trees: dict[str, list[tuple[str, str]]], receivers: list[str],
                      fixed: float | None = None, queue_max: float = 0.0,
                      seed: int | None = None) -> tuple[Topology, Routing]:
    pairs: list[tuple[str, str]] = []
    for tedges in trees.values():
        for e in tedges:
            if e not in pairs:
                pairs.append(e)
    topo = dag_from_edges(pairs)
    if seed is not None:
        topo = _with_delays(topo, _rng(seed), queue_max)
    else:
        topo = uniform_delays(topo, 7.5 if fixed is None else fixed, queue_max)
    routing = routing_from_trees(trees, receivers)
    return topo, validate_routing(topo, routing)


def two_by_two_fixture(kind: int, fixed: float = 7.5, queue_max: float = 0.0) -> tuple[Topology, Routing]:
    """One of the four 2-by-2 component shapes (S1,S2 -> R1,R2)."""
    return routed_from_trees(TWO_BY_TWO_TREES[kind], ["R1", "R2"], fixed=fixed, queue_max=queue_max)


# -------------------------------------------------------------- Abilene

_ABILENE_BELOW = [
    ("CHI.j", "NYC"), ("NYC", "R1"), ("NYC", "WDC"), ("WDC", "R2"),
    ("IND.j", "IND.b"), ("IND.b", "ATL"), ("IND.b", "KSC"), ("ATL", "R3"),
    ("KSC", "R4"), ("KSC", "HOU"), ("KSC", "DEN"), ("HOU", "R5"), ("HOU", "LAX"),
    ("LAX", "R9"), ("DEN", "R6"), ("DEN", "SEA"), ("DEN", "SNV"), ("SEA", "R7"), ("SNV", "R8"),
]
ABILENE_TREES = {
    "S1": [("S1", "CHI"), ("CHI", "CHI.j"), ("CHI", "IND.j")] + _ABILENE_BELOW,
    "S2": [("S2", "IND"), ("IND", "CHI.j"), ("IND", "IND.j")] + _ABILENE_BELOW,
}
ABILENE_RECEIVERS = [f"R{i}" for i in range(1, 10)]
ABILENE_SITES = {
    "R1": "New York", "R2": "Washington", "R3": "Atlanta", "R4": "Kansas City",
    "R5": "Houston", "R6": "Denver", "R7": "Seattle", "R8": "Sunnyvale", "R9": "Los Angeles",
}


def abilene() -> tuple[Topology, Routing]:
    """2-by-9 routed DAG on the Abilene backbone; sources at Chicago and Indianapolis.

    Routers where a source tree both branches and is joined are split into a
    branching node and a joining node (``CHI``/``CHI.j``, ``IND``/``IND.j``).
    """
    return routed_from_trees(ABILENE_TREES, ABILENE_RECEIVERS, queue_max=QUEUE_MAX_MS,
                             seed=ABILENE_SEED)


# ---------------------------------------------------------------- 2-by-3 merge example

FIG9_S1_TREE = [("S1", "B12"), ("B12", "B23"), ("B12", "R1"), ("B23", "R2"), ("B23", "R3")]
FIG9_TREES = {
    "S1": [("S1", "J1"), ("J1", "B12"), ("B12", "R1"), ("B12", "B23"), ("B23", "R2"),
           ("B23", "J3"), ("J3", "R3")],
    "S2": [("S2", "B2"), ("B2", "J1"), ("J1", "B12"), ("B12", "R1"), ("B12", "B23"),
           ("B23", "R2"), ("B2", "J3"), ("J3", "R3")],
}


def fig9_fixture() -> tuple[Topology, Routing]:
    return routed_from_trees(FIG9_TREES, ["R1", "R2", "R3"])


# ------------------------------------------------------- random routed DAGs

def _prefix_avoids(routing: Routing, si: str, sj: str) -> bool:
    """Before joining si's path, sj's path to each receiver avoids si's tree."""
    tree_nodes = {n for r in routing.receivers for n in routing.paths[(si, r)]}
    for r in routing.receivers:
        j = joining_point(routing, r, si, sj)
        path = routing.paths[(sj, r)]
        if any(n in tree_nodes for n in path[: path.index(j)]):
            return False
    return True


def random_routed_dag(kind: str, seed: int, n_sources: int = 2, n_receivers: int = 7,
                      n_routers: int = 16, edge_prob: float = 0.25, attach: int = 2,
                      max_tries: int = 500) -> tuple[Topology, Routing]:
    """Random router graph with hosts attached and shortest-delay routes.

    Link delays are continuous draws, so shortest paths are unique and the
    routes satisfy A1-A3 by construction; draws whose route union has a
    directed cycle, or where a later source touches an earlier source's tree
    before joining it, are rejected and redrawn.
    """
    if kind not in ("erdos_renyi", "preferential"):
        raise TopologyError(f"unknown random kind {kind!r}")
    if n_sources + n_receivers > n_routers:
        raise GenerationFailure("more end hosts than routers")
    rng = _rng(seed)
    lo, hi = FIXED_RANGE_MS
    for _ in range(max_tries):
        gseed = int(rng.integers(2**32))
        if kind == "erdos_renyi":
            g = nx.gnp_random_graph(n_routers, edge_prob, seed=gseed)
        else:
            g = nx.barabasi_albert_graph(n_routers, attach, seed=gseed)
        if not nx.is_connected(g):
            continue
        for a, b in sorted(g.edges()):
            g[a][b]["w"] = float(rng.uniform(lo, hi))
        picks = [int(x) for x in rng.choice(n_routers, n_sources + n_receivers, replace=False)]
        sources = [f"S{i + 1}" for i in range(n_sources)]
        receivers = [f"R{i + 1}" for i in range(n_receivers)]
        h = nx.relabel_nodes(g, {i: f"n{i}" for i in g.nodes})
        for host, router in zip(sources + receivers, picks):
            h.add_edge(host, f"n{router}", w=float(rng.uniform(lo, hi)))
        paths = {}
        for s in sources:
            dist_paths = nx.single_source_dijkstra_path(h, s, weight="w")
            for r in receivers:
                paths[(s, r)] = tuple(dist_paths[r])
        routing = Routing(paths, tuple(sources), tuple(receivers))
        pairs = routing.routed_edges()
        dg = nx.DiGraph(pairs)
        if not nx.is_directed_acyclic_graph(dg):
            continue
        if not all(_prefix_avoids(routing, a, b) for a, b in combinations(sources, 2)):
            continue
        nodes = []
        for a, b in pairs:
            for x in (a, b):
                if x not in nodes:
                    nodes.append(x)
        hosts = set(sources) | set(receivers)
        topo = Topology(
            tuple(Node(x, LEAF if x in hosts else "internal") for x in nodes),
            tuple(Edge(a, b, True, h[a][b]["w"], QUEUE_MAX_MS, 0.0) for a, b in pairs),
        )
        return topo, validate_routing(topo, routing)
    raise GenerationFailure(f"no admissible {kind} routing after {max_tries} draws")


def generate_topology(kind: str, seed: int = 0, **params) -> tuple[Topology, Routing | None]:
    """Dispatch on kind; trees come back with routing None."""
    if kind == "abilene":
        return abilene()
    if kind in ("erdos_renyi", "preferential"):
        if kind == "preferential":
            params.setdefault("n_receivers", 8)
        return random_routed_dag(kind, seed, **params)
    if kind == "random_binary_tree":
        return random_binary_tree(params.get("n_leaves", 7), seed), None
    if kind == "fig1":
        return fig1_tree(), None
    if kind == "fig9":
        return fig9_fixture()
    if kind.startswith("2x2-type"):
        return two_by_two_fixture(int(kind[-1]))
    raise TopologyError(f"unknown topology kind {kind!r}")
