"""Topology and routing types."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from ..errors import TopologyError

LEAF = "leaf"
INTERNAL = "internal"


@dataclass(frozen=True)
class Node:
    id: str
    role: str = INTERNAL

    def __post_init__(self) -> None:
        if self.role not in (LEAF, INTERNAL):
            raise TopologyError(f"node {self.id!r}: bad role {self.role!r}")


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    directed: bool = False
    fixed_delay: float = 0.0
    queue_delay_max: float = 0.0
    loss_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_prob <= 1.0:
            raise TopologyError(f"edge {self.a}-{self.b}: loss_prob {self.loss_prob} outside [0,1]")
        if self.fixed_delay < 0 or self.queue_delay_max < 0:
            raise TopologyError(f"edge {self.a}-{self.b}: negative delay")
        if self.a == self.b:
            raise TopologyError(f"self loop at {self.a}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class Topology:
    """Node/edge graph with per-edge delay and loss parameters.

    A topology is either an undirected tree (every edge undirected) or a
    DAG (every edge directed); mixed graphs are rejected.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise TopologyError("duplicate node ids")
        known = set(ids)
        seen = set()
        for e in self.edges:
            if e.a not in known or e.b not in known:
                raise TopologyError(f"edge {e.a}-{e.b} references unknown node")
            k = e.key if e.directed else frozenset(e.key)
            if k in seen:
                raise TopologyError(f"duplicate edge {e.a}-{e.b}")
            seen.add(k)
        kinds = {e.directed for e in self.edges}
        if len(kinds) > 1:
            raise TopologyError("mixed directed and undirected edges")
        if self.directed:
            self._check_acyclic()
        elif self.nodes:
            self._check_tree()

    # -- structure -------------------------------------------------------
    @property
    def directed(self) -> bool:
        return bool(self.edges) and self.edges[0].directed

    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @cached_property
    def roles(self) -> dict[str, str]:
        return {n.id: n.role for n in self.nodes}

    @cached_property
    def leaves(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.role == LEAF)

    @cached_property
    def adjacency(self) -> dict[str, list[str]]:
        """Undirected neighbour lists, in edge order."""
        adj: dict[str, list[str]] = {n: [] for n in self.node_ids}
        for e in self.edges:
            adj[e.a].append(e.b)
            adj[e.b].append(e.a)
        return adj

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.node_ids}
        for e in self.edges:
            out[e.a].append(e.b)
            if not e.directed:
                out[e.b].append(e.a)
        return out

    @cached_property
    def predecessors(self) -> dict[str, list[str]]:
        inc: dict[str, list[str]] = {n: [] for n in self.node_ids}
        for e in self.edges:
            inc[e.b].append(e.a)
            if not e.directed:
                inc[e.a].append(e.b)
        return inc

    @cached_property
    def _edge_index(self) -> dict[tuple[str, str], Edge]:
        idx = {}
        for e in self.edges:
            idx[e.key] = e
            if not e.directed:
                idx[(e.b, e.a)] = e
        return idx

    def edge(self, a: str, b: str) -> Edge:
        try:
            return self._edge_index[(a, b)]
        except KeyError:
            raise TopologyError(f"no edge {a}->{b}") from None

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self._edge_index

    def degree(self, n: str) -> int:
        return len(self.adjacency[n])

    def in_degree(self, n: str) -> int:
        return len(self.predecessors[n])

    def out_degree(self, n: str) -> int:
        return len(self.successors[n])

    def topological_order(self) -> list[str]:
        indeg = {n: 0 for n in self.node_ids}
        for e in self.edges:
            indeg[e.b] += 1
        ready = [n for n in self.node_ids if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for m in self.successors[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
        return order

    def _check_acyclic(self) -> None:
        if len(self.topological_order()) != len(self.nodes):
            raise TopologyError("directed topology has a cycle")

    def _check_tree(self) -> None:
        if len(self.edges) != len(self.nodes) - 1:
            raise TopologyError("undirected topology is not a tree (|E| != |V|-1)")
        start = self.nodes[0].id
        seen = {start}
        stack = [start]
        while stack:
            for m in self.adjacency[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        if len(seen) != len(self.nodes):
            raise TopologyError("undirected topology is not connected")

    # -- derived copies --------------------------------------------------
    def with_loss(self, p: float) -> "Topology":
        edges = tuple(
            Edge(e.a, e.b, e.directed, e.fixed_delay, e.queue_delay_max, p) for e in self.edges
        )
        return Topology(self.nodes, edges)

    def with_delay(self, a: str, b: str, fixed: float) -> "Topology":
        """Copy with the fixed delay of edge (a, b) replaced."""
        self.edge(a, b)
        edges = tuple(
            Edge(e.a, e.b, e.directed, fixed if {e.a, e.b} == {a, b} else e.fixed_delay,
                 e.queue_delay_max, e.loss_prob)
            for e in self.edges
        )
        return Topology(self.nodes, edges)

    def relabel(self, mapping: Mapping[str, str]) -> "Topology":
        nodes = tuple(Node(mapping.get(n.id, n.id), n.role) for n in self.nodes)
        edges = tuple(
            Edge(mapping.get(e.a, e.a), mapping.get(e.b, e.b), e.directed, e.fixed_delay,
                 e.queue_delay_max, e.loss_prob)
            for e in self.edges
        )
        return Topology(nodes, edges)

    def __repr__(self) -> str:
        kind = "DAG" if self.directed else "tree"
        return f"Topology({kind}, {len(self.nodes)} nodes, {len(self.edges)} edges)"


LogicalTopology = Topology


def tree_from_edges(pairs: Iterable[tuple[str, str]], leaves: Iterable[str] | None = None,
                    **edge_params) -> Topology:
    """Undirected tree from an edge list; degree-1 nodes are leaves unless given."""
    pairs = list(pairs)
    deg: dict[str, int] = defaultdict(int)
    order: list[str] = []
    for a, b in pairs:
        for x in (a, b):
            if x not in deg:
                order.append(x)
            deg[x] += 1
    leaf_set = set(leaves) if leaves is not None else {n for n in order if deg[n] == 1}
    nodes = tuple(Node(n, LEAF if n in leaf_set else INTERNAL) for n in order)
    edges = tuple(Edge(a, b, False, **edge_params) for a, b in pairs)
    return Topology(nodes, edges)


def dag_from_edges(pairs: Iterable[tuple[str, str]], leaves: Iterable[str] | None = None,
                   **edge_params) -> Topology:
    """Directed graph; nodes with no in- or no out-edges are leaves unless given."""
    pairs = list(pairs)
    indeg: dict[str, int] = defaultdict(int)
    outdeg: dict[str, int] = defaultdict(int)
    order: list[str] = []
    for a, b in pairs:
        for x in (a, b):
            if x not in indeg and x not in outdeg:
                order.append(x)
        outdeg[a] += 1
        indeg[b] += 1
    if leaves is None:
        leaf_set = {n for n in order if indeg[n] == 0 or outdeg[n] == 0}
    else:
        leaf_set = set(leaves)
    nodes = tuple(Node(n, LEAF if n in leaf_set else INTERNAL) for n in order)
    edges = tuple(Edge(a, b, True, **edge_params) for a, b in pairs)
    return Topology(nodes, edges)


@dataclass(frozen=True, eq=False)
class Routing:
    """Fixed source->receiver paths (lists of node ids, endpoints included)."""

    paths: Mapping[tuple[str, str], tuple[str, ...]]
    sources: tuple[str, ...]
    receivers: tuple[str, ...]

    def path(self, src: str, dst: str) -> tuple[str, ...]:
        return self.paths[(src, dst)]

    def __iter__(self) -> Iterator[tuple[tuple[str, str], tuple[str, ...]]]:
        return iter(self.paths.items())

    def restrict(self, sources: Iterable[str], receivers: Iterable[str]) -> "Routing":
        sources = tuple(sources)
        receivers = tuple(receivers)
        return Routing({(s, r): self.paths[(s, r)] for s in sources for r in receivers},
                       sources, receivers)

    def routed_edges(self) -> list[tuple[str, str]]:
        """Directed links used by at least one route, in first-use order."""
        seen: dict[tuple[str, str], None] = {}
        for s in self.sources:
            for r in self.receivers:
                p = self.paths[(s, r)]
                for a, b in zip(p, p[1:]):
                    seen.setdefault((a, b), None)
        return list(seen)


def routing_from_trees(trees: Mapping[str, Iterable[tuple[str, str]]],
                       receivers: Iterable[str]) -> Routing:
    """Routes obtained by following each source's tree of directed links."""
    receivers = tuple(receivers)
    paths = {}
    for s, tedges in trees.items():
        parent: dict[str, str] = {}
        for a, b in tedges:
            if b in parent:
                raise TopologyError(f"tree of {s} enters {b} twice")
            parent[b] = a
        for r in receivers:
            p = [r]
            while p[-1] != s:
                if p[-1] not in parent:
                    raise TopologyError(f"{r} not reachable in tree of {s}")
                p.append(parent[p[-1]])
            paths[(s, r)] = tuple(reversed(p))
    return Routing(paths, tuple(trees), receivers)
