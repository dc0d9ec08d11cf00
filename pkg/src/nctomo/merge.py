"""Build 2-by-N and M-by-N topologies out of 2-by-2 component types."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .errors import InconsistentTypes, MissingPair, TopologyError
from .netgraph import io as nio
from .netgraph.logical import FMatrix, line_graph_adjacency, logical_collapse
from .netgraph.model import INTERNAL, LEAF, Edge, Node, Routing, Topology, dag_from_edges
from .netgraph.routing import TwoByTwoType, classify_2x2_oracle, joining_point

T1, T2, T3, T4 = (TwoByTwoType.TYPE1, TwoByTwoType.TYPE2, TwoByTwoType.TYPE3,
                  TwoByTwoType.TYPE4)


def label_key(label: str):
    """Natural sort key: R2 < R10."""
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", label)]


# ----------------------------------------------------------------- pair map

class TwoByTwoMap:
    """Types of the (S_a, S_b, R_i, R_j) components, looked up in either receiver order."""

    def __init__(self, types: Mapping[tuple[str, str], TwoByTwoType] | None = None):
        self._types: dict[tuple[str, str], TwoByTwoType] = {}
        for (a, b), t in (types or {}).items():
            self[a, b] = t

    def __setitem__(self, pair, t) -> None:
        a, b = pair
        t = TwoByTwoType(t)
        if (b, a) in self._types:
            if self._types[(b, a)] != t.swapped():
                raise InconsistentTypes(f"pair {a},{b} given twice with different types")
            return
        self._types[(a, b)] = t

    def __getitem__(self, pair) -> TwoByTwoType:
        a, b = pair
        if (a, b) in self._types:
            return self._types[(a, b)]
        if (b, a) in self._types:
            return self._types[(b, a)].swapped()
        raise MissingPair(f"no 2-by-2 type for receivers {a},{b}")

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (a, b) in self._types or (b, a) in self._types

    def __len__(self) -> int:
        return len(self._types)

    def items(self):
        return self._types.items()

    @property
    def receivers(self) -> list[str]:
        return sorted({r for p in self._types for r in p}, key=label_key)

    def check_consistency(self) -> None:
        """Shared (type 1) must be transitive wherever all three pairs are known."""
        rs = self.receivers
        shared = {r: {r} for r in rs}
        for (a, b), t in self._types.items():
            if t == T1:
                shared[a].add(b)
                shared[b].add(a)
        for a in rs:
            for b in shared[a]:
                for c in shared[b]:
                    if c != a and (a, c) in self and self[a, c] != T1:
                        raise InconsistentTypes(f"{a}~{b} and {b}~{c} shared but {a},{c} is not")

    @classmethod
    def from_routing(cls, routing: Routing, s1: str, s2: str) -> "TwoByTwoMap":
        return cls({(a, b): classify_2x2_oracle(routing, s1, s2, a, b)
                    for a, b in combinations(routing.receivers, 2)})


# ----------------------------------------------------------------- F matrix

def split_edge_in_F(F: FMatrix, edge, node: str) -> FMatrix:
    """Break `edge` (u, v) at `node`: the old row becomes (u, node), a new last row (node, v)."""
    k = F.index(edge)
    u, v = F.edges[k]
    n = len(F.edges)
    m = np.zeros((n + 1, n + 1), dtype=F.matrix.dtype)
    m[:n, :n] = F.matrix
    m[n, :] = m[k, :]
    m[k, :] = 0
    m[k, n] = 1
    edges = list(F.edges)
    edges[k] = (u, node)
    edges.append((node, v))
    return FMatrix(tuple(edges), m)


def add_edge_in_F(F: FMatrix, edge) -> FMatrix:
    """Append a new edge, chained to the edges meeting it at either end."""
    a, b = edge
    if tuple(edge) in F.edges:
        raise TopologyError(f"edge {edge} already in F")
    n = len(F.edges)
    m = np.zeros((n + 1, n + 1), dtype=F.matrix.dtype)
    m[:n, :n] = F.matrix
    for j, (t, h) in enumerate(F.edges):
        if t == b:
            m[n, j] = 1
        if h == a:
            m[j, n] = 1
    return FMatrix(F.edges + ((a, b),), m)


def contract_edge_in_F(F: FMatrix, edge) -> FMatrix:
    """Remove edge (x, y) whose tail has no other out-edge; edges into x now end at y."""
    k = F.index(edge)
    x, y = F.edges[k]
    m = F.matrix.copy()
    edges = list(F.edges)
    for i, (t, h) in enumerate(F.edges):
        if h == x and i != k:
            m[i, :] = m[k, :]
            edges[i] = (t, y)
    keep = [i for i in range(len(edges)) if i != k]
    return FMatrix(tuple(edges[i] for i in keep), m[np.ix_(keep, keep)])


def _join_runs(pairs, leaves) -> list[tuple[str, str]]:
    """Links between two joining points with no branching point in between."""
    ins: dict[str, int] = {}
    outs: dict[str, int] = {}
    for a, b in pairs:
        outs[a] = outs.get(a, 0) + 1
        ins[b] = ins.get(b, 0) + 1
    return [(a, b) for a, b in pairs
            if a not in leaves and b not in leaves and outs[a] == 1
            and ins.get(a, 0) > 1 and ins[b] > 1]


# ----------------------------------------------------------------- rooted trees

class RootedTree:
    """Logical tree oriented away from its root source."""

    def __init__(self, topology: Topology, root: str | None = None):
        if topology.directed:
            t = logical_collapse(topology)
            roots = [n for n in t.node_ids if t.in_degree(n) == 0]
            if root is None:
                if len(roots) != 1:
                    raise TopologyError("directed tree needs exactly one root")
                root = roots[0]
            pairs = [e.key for e in t.edges]
        else:
            if root is None:
                raise TopologyError("undirected tree needs an explicit root")
            t = logical_collapse(topology)
            pairs, stack, seen = [], [root], {root}
            adj = t.adjacency
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        pairs.append((x, y))
                        stack.append(y)
        self.root = root
        self.edges: list[tuple[str, str]] = pairs
        self.parent = {b: a for a, b in pairs}
        self.children: dict[str, list[str]] = {}
        for a, b in pairs:
            self.children.setdefault(a, []).append(b)
        if len(self.parent) != len(pairs) or root in self.parent:
            raise TopologyError("not a tree rooted at " + root)
        self.leaves = sorted((n for n in self.parent if n not in self.children), key=label_key)
        self._below: dict[str, list[str]] = {}

    @classmethod
    def from_edges(cls, pairs, root: str) -> "RootedTree":
        return cls(dag_from_edges(pairs), root)

    def ancestors(self, n: str) -> list[str]:
        """Strict ancestors from the parent upwards, root included."""
        out = []
        while n in self.parent:
            n = self.parent[n]
            out.append(n)
        return out

    def receivers_below(self, n: str) -> list[str]:
        if n not in self._below:
            if n not in self.children:
                self._below[n] = [n]
            else:
                acc = []
                for c in self.children[n]:
                    acc.extend(self.receivers_below(c))
                self._below[n] = sorted(acc, key=label_key)
        return self._below[n]

    def child_towards(self, b: str, leaf: str) -> str:
        x = leaf
        while self.parent[x] != b:
            x = self.parent[x]
        return x

    def height(self) -> int:
        """Branching points on the longest root-to-receiver path."""
        return max((sum(1 for a in self.ancestors(r) if a != self.root) for r in self.leaves),
                   default=0)

    def path(self, leaf: str) -> list[str]:
        return list(reversed(self.ancestors(leaf))) + [leaf]

    def lca(self, nodes: Iterable[str]) -> str:
        paths = [self.path(n) for n in nodes]
        k = 0
        while all(len(p) > k for p in paths) and len({p[k] for p in paths}) == 1:
            k += 1
        return paths[0][k - 1]


def source_tree(routing: Routing, source: str) -> RootedTree:
    """Logical 1-by-N tree of one source, read off its routes."""
    pairs: dict[tuple[str, str], None] = {}
    for r in routing.receivers:
        p = routing.paths[(source, r)]
        for e in zip(p, p[1:]):
            pairs.setdefault(e, None)
    topo = dag_from_edges(list(pairs), leaves=[source, *routing.receivers])
    return RootedTree(topo, source)


def true_join_links(routing: Routing, s1: str, s2: str) -> dict[str, tuple[str, str]]:
    """Per receiver, the logical link of s1's tree that holds the s2 joining point."""
    tree = source_tree(routing, s1)
    kept = set(tree.parent) | {tree.root}
    out = {}
    for r in routing.receivers:
        p = routing.paths[(s1, r)]
        j = p.index(joining_point(routing, r, s1, s2))
        v = next(n for n in p[j:] if n in kept)
        u = next(n for n in reversed(p[:j]) if n in kept)
        out[r] = (u, v)
    return out


# ----------------------------------------------------------------- result type

@dataclass
class WalkStep:
    receiver: str
    branch: str
    partner: str
    type: TwoByTwoType
    verdict: str  # "above", "below" or "shared"


@dataclass
class MergedTopology:
    """Merged topology plus where each receiver's joining point sits."""

    topology: Topology
    routing: Routing
    joins: dict[str, tuple[str, str]]      # receiver -> host link in the joined source's tree
    join_nodes: dict[str, str]             # receiver -> join node id in `topology`
    F: FMatrix
    trace: list = field(default_factory=list)
    consulted: list = field(default_factory=list)

    @property
    def sources(self) -> tuple[str, ...]:
        return self.routing.sources

    @property
    def receivers(self) -> tuple[str, ...]:
        return self.routing.receivers

    @classmethod
    def from_tree(cls, tree: RootedTree) -> "MergedTopology":
        """A 1-by-N starting point for adding sources."""
        topo = dag_from_edges(tree.edges, leaves=[tree.root, *tree.leaves])
        paths = {(tree.root, r): tuple(tree.path(r)) for r in tree.leaves}
        return cls(topo, Routing(paths, (tree.root,), tuple(tree.leaves)), {}, {},
                   line_graph_adjacency(topo))

    def tree_of(self, source: str) -> RootedTree:
        return source_tree(self.routing, source)

    def to_document(self) -> dict:
        return nio.to_document(self.topology, self.routing, self.joins)

    def dumps(self) -> str:
        return nio.dumps(self.topology, self.routing, self.joins)


# ----------------------------------------------------------------- gluing a source on

def _fresh(prefix: str, taken: set, start: int = 1) -> str:
    k = start
    while f"{prefix}{k}" in taken:
        k += 1
    name = f"{prefix}{k}"
    taken.add(name)
    return name


def _glue(base: MergedTopology, source: str, entries: list, new_tree: RootedTree | None):
    """Attach `source` where each group enters the existing union.

    entries: list of ((a, b), members) with (a, b) an edge of base.topology.
    Returns (topology, routing, join_nodes, F).
    """
    taken = set(base.topology.node_ids)
    if source in taken:
        raise TopologyError(f"source {source} already present")
    taken.add(source)
    F = base.F
    edges = [e.key for e in base.topology.edges]
    paths = dict(base.routing.paths)
    join_of: dict[str, str] = {}
    group_join: list[str] = []
    tails: dict[str, tuple[str, ...]] = {}
    for (a, b), members in entries:
        x = _fresh("J", taken)
        group_join.append(x)
        F = split_edge_in_F(F, (a, b), x)
        i = edges.index((a, b))
        edges[i:i + 1] = [(a, x), (x, b)]
        for k, p in paths.items():
            for j in range(len(p) - 1):
                if p[j] == a and p[j + 1] == b:
                    paths[k] = p[:j + 1] + (x,) + p[j + 1:]
                    break
        for r in members:
            join_of[r] = x
            donor = next(p for (s, rr), p in paths.items() if rr == r and x in p)
            tails[r] = donor[donor.index(x):]

    # source side: edges from the new source down to the join nodes
    side: list[tuple[str, str]] = []
    head_path: dict[str, tuple[str, ...]] = {}
    if new_tree is None:
        if len(group_join) == 1:
            side = [(source, group_join[0])]
            head_path[group_join[0]] = (source,)
        else:
            hub = _fresh("B" + source + ".", taken) if ("B" + source) in taken else "B" + source
            taken.add(hub)
            side = [(source, hub)] + [(hub, x) for x in group_join]
            for x in group_join:
                head_path[x] = (source, hub)
    else:
        rename = {new_tree.root: source}
        cut: dict[str, str] = {}
        for ((_, _), members), x in zip(entries, group_join):
            top = new_tree.lca(members)
            if top == new_tree.root:
                if len(group_join) > 1:
                    raise InconsistentTypes("join groups overlap in the new source's tree")
                top = None
            if top is not None:
                if set(new_tree.receivers_below(top)) != set(members):
                    raise InconsistentTypes(f"join group {sorted(members)} is not a subtree of "
                                            f"{source}'s tree")
                cut[top] = x
        if not cut:
            side = [(source, group_join[0])]
            head_path[group_join[0]] = (source,)
        else:
            stack = [new_tree.root]
            while stack:
                n = stack.pop()
                for c in new_tree.children.get(n, ()):
                    if c in cut:
                        side.append((rename[n], cut[c]))
                        continue
                    if c not in rename:
                        rename[c] = c if c not in taken else _fresh(c + "@", taken)
                        taken.add(rename[c])
                    side.append((rename[n], rename[c]))
                    stack.append(c)
            parent = {b: a for a, b in side}
            for x in group_join:
                if x not in parent:
                    raise InconsistentTypes(f"{source}'s tree does not reach join {x}")
                hp, n = [], x
                while n in parent:
                    n = parent[n]
                    hp.append(n)
                head_path[x] = tuple(reversed(hp))
    for e in side:
        F = add_edge_in_F(F, e)
        edges.append(e)
    for r, x in join_of.items():
        paths[(source, r)] = head_path[x] + tails[r]

    leaves = set(base.routing.sources) | {source} | set(base.routing.receivers)
    # joins in a row cannot be ordered; fold each run into its lowest node
    runs = _join_runs(edges, leaves)
    while runs:
        x, y = runs[0]
        F = contract_edge_in_F(F, (x, y))
        edges = [(a, y if b == x else b) for a, b in edges if (a, b) != (x, y)]
        paths = {k: tuple(n for n in p if n != x) for k, p in paths.items()}
        join_of = {r: (y if j == x else j) for r, j in join_of.items()}
        runs = _join_runs(edges, leaves)
    order: list[str] = []
    for a, b in edges:
        for n in (a, b):
            if n not in order:
                order.append(n)
    topo = Topology(tuple(Node(n, LEAF if n in leaves else INTERNAL) for n in order),
                    tuple(Edge(a, b, True) for a, b in edges))
    routing = Routing(paths, base.routing.sources + (source,), base.routing.receivers)
    return topo, routing, join_of, F


def _verify(routing: Routing, s_old: str, s_new: str, types: TwoByTwoMap, pairs) -> None:
    for a, b in pairs:
        got = classify_2x2_oracle(routing, s_old, s_new, a, b)
        if got != types[a, b]:
            raise InconsistentTypes(f"placement gives {got.name} for {a},{b} "
                                    f"but the map says {types[a, b].name}")


# ----------------------------------------------------------------- walk over a known tree

class _Groups:
    """Union-find over receivers known to share a joining point."""

    def __init__(self):
        self.up: dict[str, str] = {}
        self.link: dict[str, tuple[str, str]] = {}

    def find(self, x: str) -> str:
        self.up.setdefault(x, x)
        while self.up[x] != x:
            self.up[x] = self.up[self.up[x]]
            x = self.up[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        la, lb = self.link.get(ra), self.link.get(rb)
        if la is not None and lb is not None and la != lb:
            raise InconsistentTypes(f"{a} and {b} are shared but were placed on different links")
        self.up[rb] = ra
        if la is None and lb is not None:
            self.link[ra] = lb


def locate_joins(tree: RootedTree, types: TwoByTwoMap):
    """Walk each receiver's branching points upwards until its join is on one link.

    Returns (links, trace, consulted) with links mapping receiver -> (upper, lower).
    """
    groups = _Groups()
    trace: list[WalkStep] = []
    consulted: list[tuple[str, str]] = []
    for r in tree.leaves:
        if groups.link.get(groups.find(r)) is not None:
            continue
        node, link = r, None
        while link is None:
            b = tree.parent[node]
            if b == tree.root:
                link = (b, node)
                break
            mine = set(tree.receivers_below(node))
            partner = next(x for x in tree.receivers_below(b) if x not in mine)
            t = types[r, partner]
            consulted.append((r, partner))
            if t in (T3, T4):
                trace.append(WalkStep(r, b, partner, t, "below"))
                link = (b, node)
            elif t == T1:
                trace.append(WalkStep(r, b, partner, t, "shared"))
                groups.union(r, partner)
                known = groups.link.get(groups.find(r))
                if known is not None:
                    if known[1] != b and known[1] not in tree.ancestors(b):
                        raise InconsistentTypes(f"{r} shares a join with {partner} placed at "
                                                f"{known}, which is not above {b}")
                    link = known
                node = b
            else:
                trace.append(WalkStep(r, b, partner, t, "above"))
                node = b
        groups.link[groups.find(r)] = link
    links = {r: groups.link[groups.find(r)] for r in tree.leaves}
    return links, trace, consulted


def _entries(links: dict[str, tuple[str, str]]) -> list:
    by_link: dict[tuple[str, str], list[str]] = {}
    for r in sorted(links, key=label_key):
        by_link.setdefault(links[r], []).append(r)
    return list(by_link.items())


def merge_with_tree(s1_tree, types: TwoByTwoMap | Mapping, new_source: str = "S2",
                    new_tree=None, source: str | None = None) -> MergedTopology:
    """Place every receiver's joining point for `new_source` on one link of the known tree.

    new_tree, if given, is the new source's own 1-by-N and fixes how it reaches
    the joins; otherwise the joins hang off a single branching point below it.
    """
    tree = s1_tree if isinstance(s1_tree, RootedTree) else RootedTree(s1_tree, source)
    types = types if isinstance(types, TwoByTwoMap) else TwoByTwoMap(types)
    types.check_consistency()
    if new_tree is not None and not isinstance(new_tree, RootedTree):
        new_tree = RootedTree(new_tree, new_source if not new_tree.directed else None)
    links, trace, consulted = locate_joins(tree, types)
    base = MergedTopology.from_tree(tree)
    topo, routing, join_nodes, F = _glue(base, new_source, _entries(links), new_tree)
    _verify(routing, tree.root, new_source, types, consulted)
    return MergedTopology(topo, routing, links, join_nodes, F, trace, consulted)


def routed_union(routing: Routing) -> Topology:
    """Logical topology of all routes, with join-and-branch nodes split in two.

    A router where paths both merge and fork becomes ``<id>.j -> <id>`` so it
    compares against merged topologies, where joins always sit on a link.
    """
    pairs = routing.routed_edges()
    ins: dict[str, int] = {}
    outs: dict[str, int] = {}
    for a, b in pairs:
        outs[a] = outs.get(a, 0) + 1
        ins[b] = ins.get(b, 0) + 1
    both = {n for n in ins if ins[n] > 1 and outs.get(n, 0) > 1}
    out = [(a, b + ".j" if b in both else b) for a, b in pairs] + [(n + ".j", n) for n in both]
    leaves = [*routing.sources, *routing.receivers]
    pairs = [e.key for e in logical_collapse(dag_from_edges(out, leaves=leaves)).edges]
    runs = _join_runs(pairs, set(leaves))
    while runs:
        x, y = runs[0]
        pairs = [(a, y if b == x else b) for a, b in pairs if (a, b) != (x, y)]
        runs = _join_runs(pairs, set(leaves))
    return dag_from_edges(pairs, leaves=leaves)


# ----------------------------------------------------------------- no known tree

def _shared_groups(types: TwoByTwoMap, receivers: list[str]) -> list[list[str]]:
    groups: list[list[str]] = []
    for r in receivers:
        for g in groups:
            if types[g[0], r] == T1:
                g.append(r)
                break
        else:
            groups.append([r])
    for g in groups:
        for a, b in combinations(g, 2):
            if types[a, b] != T1:
                raise InconsistentTypes(f"{a},{b} not shared although both share with {g[0]}")
    return groups


def merge_without_tree(types: TwoByTwoMap | Mapping, receivers=None, source: str = "S1",
                       new_source: str = "S2") -> MergedTopology:
    """Smallest 2-by-N consistent with every pair type; no 1-by-N needed.

    Shared receivers get one join and one branching point; a group whose join
    sits above another group's branching point nests that group below it;
    groups with no such relation fork at a common branching point.
    """
    types = types if isinstance(types, TwoByTwoMap) else TwoByTwoMap(types)
    receivers = sorted(receivers or types.receivers, key=label_key)
    for a, b in combinations(receivers, 2):
        types[a, b]  # raises MissingPair early
    groups = _shared_groups(types, receivers)
    n = len(groups)
    # above[i][j]: group i's join sits above the fork between i and j
    above = [[False] * n for _ in range(n)]
    for i, j in combinations(range(n), 2):
        seen = {types[a, b] for a in groups[i] for b in groups[j]}
        if len(seen) != 1:
            raise InconsistentTypes(f"groups {groups[i]} and {groups[j]} disagree on their type")
        t = seen.pop()
        if t == T1:
            raise InconsistentTypes("shared pair across groups")
        above[i][j] = t == T2
        above[j][i] = t == T3
    # the parent of a group is the tightest group above it
    below = [{j for j in range(n) if above[i][j]} for i in range(n)]
    parent: list[int | None] = []
    for j in range(n):
        ups = [i for i in range(n) if above[i][j]]
        for a, b in combinations(ups, 2):
            if not (above[a][b] or above[b][a]):
                raise InconsistentTypes(f"{groups[j]} sits below two unrelated joins")
        ups.sort(key=lambda i: len(below[i]))
        parent.append(ups[0] if ups else None)
    for i in range(n):
        for j in below[i]:
            if not below[j] <= below[i]:
                raise InconsistentTypes("join nesting is not transitive")

    taken = set(receivers) | {source, new_source}
    first = [min([*g, *(r for j in below[i] for r in groups[j])], key=label_key)
             for i, g in enumerate(groups)]

    def fork_name(units):
        # named after the two lowest receivers it separates, e.g. B(R1,R3)
        a, b = sorted(units, key=label_key)[:2]
        name = f"B({a},{b})"
        return name if name not in taken else _fresh(name + ".", taken)

    edges: list[tuple[str, str]] = []
    head = {}
    for i, g in enumerate(groups):
        kids = [j for j in range(n) if parent[j] == i]
        if len(g) == 1 and not kids:
            head[i] = g[0]
        else:
            head[i] = fork_name([*g, *(first[j] for j in kids)])
            taken.add(head[i])
    for i, g in enumerate(groups):
        if head[i] in g:
            continue
        edges.extend((head[i], r) for r in g)
        edges.extend((head[i], head[j]) for j in range(n) if parent[j] == i)
    tops = [i for i in range(n) if parent[i] is None]
    if len(tops) == 1:
        edges.insert(0, (source, head[tops[0]]))
    else:
        hub = fork_name([first[i] for i in tops])
        edges[:0] = [(source, hub)] + [(hub, head[i]) for i in tops]
    tree = RootedTree.from_edges(edges, source)
    links = {}
    for i, g in enumerate(groups):
        link = (tree.parent[head[i]], head[i])
        links.update({r: link for r in g})
    base = MergedTopology.from_tree(tree)
    topo, routing, join_nodes, F = _glue(base, new_source, _entries(links), None)
    pairs = list(combinations(receivers, 2))
    _verify(routing, source, new_source, types, pairs)
    return MergedTopology(topo, routing, links, join_nodes, F, [], pairs)


# ----------------------------------------------------------------- more sources

def _chain(routing: Routing, s: str, r: str, link) -> list[tuple[str, str]]:
    p = routing.paths[(s, r)]
    u, v = link
    seg = p[p.index(u):p.index(v) + 1]
    return list(zip(seg, seg[1:]))


def add_source(merged: MergedTopology, per_source_types, new_source: str,
               new_tree=None) -> MergedTopology:
    """Glue one more source onto a k-by-N, given its 2-by-2 map with every existing source.

    per_source_types: sequence aligned with merged.sources, or a mapping source -> map.
    """
    srcs = merged.routing.sources
    if isinstance(per_source_types, Mapping):
        maps = [per_source_types[s] for s in srcs]
    else:
        maps = list(per_source_types)
    if len(maps) != len(srcs):
        raise InconsistentTypes(f"need one map per existing source ({len(srcs)}), got {len(maps)}")
    maps = [m if isinstance(m, TwoByTwoMap) else TwoByTwoMap(m) for m in maps]
    if new_tree is not None and not isinstance(new_tree, RootedTree):
        new_tree = RootedTree(new_tree, new_source if not new_tree.directed else None)
    rt = merged.routing
    chains, trace, consulted = [], [], []
    for s, m in zip(srcs, maps):
        links, tr, cons = locate_joins(merged.tree_of(s), m)
        chains.append({r: _chain(rt, s, r, links[r]) for r in rt.receivers})
        trace.append(tr)
        consulted.append(cons)

    def suffix_from(e, r):
        for s in srcs:
            p = rt.paths[(s, r)]
            for j in range(len(p) - 1):
                if (p[j], p[j + 1]) == e:
                    return p[j + 1:]
        return None

    entry: dict[str, tuple[str, str]] = {}
    for r in rt.receivers:
        cands = []
        for ch in chains:
            for e in ch[r]:
                if e not in cands:
                    cands.append(e)
        best = None
        for e in cands:
            tail = suffix_from(e, r)
            ok = True
            for s, ch in zip(srcs, chains):
                if e in ch[r]:
                    continue
                p = rt.paths[(s, r)]
                meet = next((x for x in tail if x in p), None)
                inner = {b for _, b in ch[r]}
                if meet not in inner:
                    ok = False
                    break
            if ok and (best is None or len(tail) > len(best[1])):
                best = (e, tail)
        if best is None:
            raise InconsistentTypes(f"no link for {new_source}'s join towards {r} fits every map")
        entry[r] = best[0]
    topo, routing, join_nodes, F = _glue(merged, new_source, _entries(entry), new_tree)
    for s, m, cons in zip(srcs, maps, consulted):
        _verify(routing, s, new_source, m, cons)
    joins = dict(merged.joins)
    joins.update({f"{r}@{new_source}": e for r, e in entry.items()})
    return MergedTopology(topo, routing, joins, join_nodes, F, trace, consulted)


# ----------------------------------------------------------------- audit

@dataclass
class PairAudit:
    consulted: int
    bound: float
    max_steps: int
    height: int

    @property
    def within_bounds(self) -> bool:
        return self.consulted <= self.bound and self.max_steps <= self.height


def required_pairs_audit(s1_tree, trace, source: str | None = None) -> PairAudit:
    """Distinct pairs a walk consulted, against 2 N log2 N, and its longest walk against height."""
    tree = s1_tree if isinstance(s1_tree, RootedTree) else RootedTree(s1_tree, source)
    n = len(tree.leaves)
    pairs = {frozenset((st.receiver, st.partner)) for st in trace}
    steps: dict[str, int] = {}
    for st in trace:
        steps[st.receiver] = steps.get(st.receiver, 0) + 1
    bound = 2.0 * n * math.log2(n) if n > 1 else 0.0
    return PairAudit(len(pairs), bound, max(steps.values(), default=0), tree.height())
