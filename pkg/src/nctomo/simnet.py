"""Seeded discrete-event simulation of coded probe experiments on trees and DAGs."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import DagArrays, TreeArrays, Xoshiro, seed_state
from .errors import ConfigError, TooManySources, TopologyError
from .field import FieldSpec, ProbePacket, next_prime
from .netgraph.model import Routing, Topology

SCHEMES = ("additive", "mod1_distinct", "partial_order")


@dataclass(frozen=True)
class ExperimentTiming:
    """Spacing T, node window W, offset fraction f, S2 offset u, clock skew bound (all ms)."""

    T: float = 300.0
    W: float = 100.0
    f: float = 0.5
    u: float = 0.0
    clock_skew_bound: float = 0.0

    def __post_init__(self) -> None:
        if self.W <= 0:
            raise ConfigError("window must be positive")
        if self.T < 3 * self.W:
            raise ConfigError("experiment spacing must be at least 3W")
        if not 0.0 < self.f < 1.0:
            raise ConfigError("offset fraction must lie in (0, 1)")
        if self.u < 0 or self.clock_skew_bound < 0:
            raise ConfigError("offset and skew bound must be non-negative")


@dataclass(frozen=True)
class DelayModel:
    fixed: float
    queue_max: float = 0.0

    def __post_init__(self) -> None:
        if self.fixed < 0 or self.queue_max < 0:
            raise ConfigError("delays must be non-negative")


def sample_link_delay(model: DelayModel, rng) -> float:
    """Fixed part plus exponential queueing truncated at queue_max.

    `rng` is an Xoshiro generator or a 4-word state array (advanced in place).
    """
    if isinstance(rng, np.ndarray):
        gen = Xoshiro(rng)
        d = gen.delay(model.fixed, model.queue_max)
        gen.save()
        return d
    return rng.delay(model.fixed, model.queue_max)


def _state(seed) -> np.ndarray:
    if isinstance(seed, np.ndarray):
        return seed
    return seed_state(int(seed))


def _check_window(topology: Topology, timing: ExperimentTiming) -> None:
    worst = max((e.fixed_delay + e.queue_delay_max for e in topology.edges), default=0.0)
    if timing.W <= worst:
        raise ConfigError(f"window {timing.W} ms does not exceed the largest link delay {worst} ms")


def format_trace(trace: list) -> str:
    """One line per event: time_ms node event coefficients."""
    lines = []
    for t, node, event, vec in trace:
        coeffs = "-" if vec is None else ",".join(str(int(c)) for c in vec)
        lines.append(f"{t:.4f} {node} {event} {coeffs}")
    return "\n".join(lines)


# ------------------------------------------------------------------ trees

def tree_arrays(topology: Topology) -> TreeArrays:
    if topology.directed:
        raise TopologyError("tree simulation needs an undirected tree")
    ids = list(topology.node_ids)
    index = {n: i for i, n in enumerate(ids)}
    adj = topology.adjacency
    ptr = [0]
    nbr: list[int] = []
    params = []
    for n in ids:
        for m in adj[n]:
            nbr.append(index[m])
            e = topology.edge(n, m)
            params.append((e.fixed_delay, e.queue_delay_max, e.loss_prob))
        ptr.append(len(nbr))
    slot_of = {}
    for i, n in enumerate(ids):
        for s in range(ptr[i], ptr[i + 1]):
            slot_of[(i, nbr[s])] = s
    rev = [slot_of[(nbr[s], i)] for i in range(len(ids)) for s in range(ptr[i], ptr[i + 1])]
    roles = topology.roles
    arr = np.array(params, dtype=np.float64).reshape(-1, 3)
    return TreeArrays(
        node_ids=ids,
        is_leaf=np.array([roles[n] == "leaf" for n in ids], dtype=np.uint8),
        adj_ptr=np.array(ptr, dtype=np.int64),
        adj_nbr=np.array(nbr, dtype=np.int64),
        rev=np.array(rev, dtype=np.int64),
        fixed=np.ascontiguousarray(arr[:, 0]),
        qmax=np.ascontiguousarray(arr[:, 1]),
        loss=np.ascontiguousarray(arr[:, 2]),
    )


@dataclass
class TreeIterationResult:
    """Receptions of one tree iteration.

    `recv[r, i]` is the packet leaf i got in round r when `present[r, i]`.
    """

    node_ids: list
    sources: tuple
    recv: np.ndarray
    present: np.ndarray
    channel_counts: dict
    trace: list | None = None

    def first(self, leaf: str) -> tuple | None:
        i = self.node_ids.index(leaf)
        rounds = np.flatnonzero(self.present[:, i])
        if len(rounds) == 0:
            return None
        return tuple(int(c) for c in self.recv[rounds[0], i])

    def received(self, leaf: str) -> frozenset:
        i = self.node_ids.index(leaf)
        return frozenset(tuple(int(c) for c in self.recv[r, i])
                         for r in np.flatnonzero(self.present[:, i]))

    def observations(self, leaves, lossless: bool) -> dict:
        """Per leaf: frozenset of coefficient tuples (first packet only when lossless)."""
        out = {}
        for leaf in leaves:
            if lossless:
                p = self.first(leaf)
                out[leaf] = frozenset() if p is None else frozenset([p])
            else:
                out[leaf] = self.received(leaf)
        return out

    def packet(self, leaf: str) -> ProbePacket | None:
        p = self.first(leaf)
        return None if p is None else ProbePacket(p)


class TreeSimulator:
    """Reusable simulator for iterations over one undirected tree."""

    def __init__(self, topology: Topology, timing: ExperimentTiming | None = None,
                 scheme: str = "additive", q: int | None = None, max_sources: int | None = None,
                 backend: str | None = None):
        self.topology = topology
        self.timing = timing or ExperimentTiming()
        _check_window(topology, self.timing)
        if scheme not in ("additive", "mod1_distinct"):
            raise ConfigError(f"tree scheme must be additive or mod1_distinct, not {scheme!r}")
        self.scheme = engine.DISTINCT if scheme == "mod1_distinct" else engine.PLAIN
        max_deg = max(topology.degree(n) for n in topology.node_ids)
        if q is None:
            q = next_prime(max_deg) if scheme == "mod1_distinct" else 2
        self.field = FieldSpec(q)
        self.max_sources = max_sources
        self.arrays = tree_arrays(topology)
        self.index = {n: i for i, n in enumerate(self.arrays.node_ids)}
        self.backend_name = backend
        self._leaf_set = set(topology.leaves)

    def iteration(self, sources, n_probes: int, state: np.ndarray, trace: bool = False
                  ) -> TreeIterationResult:
        sources = tuple(sources)
        if len(sources) < 2:
            raise ConfigError("an iteration needs at least two sources")
        if self.max_sources is not None and len(sources) > self.max_sources:
            raise TooManySources(f"{len(sources)} sources exceed the limit of {self.max_sources}")
        for s in sources:
            if s not in self._leaf_set:
                raise ConfigError(f"source {s} is not a leaf")
        if n_probes < 1:
            raise ConfigError("at least one probe per iteration")
        events = [] if trace else None
        be = engine.python_backend if trace else engine.get_backend(self.backend_name)
        recv, present, counts = be.tree_iteration(
            self.arrays, [self.index[s] for s in sources], n_probes, self.timing.W,
            self.timing.clock_skew_bound, self.scheme, self.field.q, state, events)
        a = self.arrays
        chan = {}
        for i, n in enumerate(a.node_ids):
            for s in range(a.adj_ptr[i], a.adj_ptr[i + 1]):
                chan[(n, a.node_ids[a.adj_nbr[s]])] = int(counts[s])
        return TreeIterationResult(a.node_ids, sources, recv, present, chan, events)


def run_tree_iteration(topology: Topology, sources, n_probes: int = 1,
                       timing: ExperimentTiming | None = None, seed=0, scheme: str = "additive",
                       max_sources: int | None = None, trace: bool = False
                       ) -> TreeIterationResult:
    """Run one iteration of `n_probes` rounds from `sources` on an undirected tree."""
    sim = TreeSimulator(topology, timing, scheme, max_sources=max_sources)
    return sim.iteration(sources, n_probes, _state(seed), trace)


# ------------------------------------------------------------------- DAGs

def _routed_graph(routing: Routing):
    links = routing.routed_edges()
    preds: dict[str, list[str]] = defaultdict(list)
    succs: dict[str, list[str]] = defaultdict(list)
    for a, b in links:
        succs[a].append(b)
        preds[b].append(a)
    return links, preds, succs


def _topo_order(links, preds) -> list[str]:
    nodes = []
    for a, b in links:
        for x in (a, b):
            if x not in nodes:
                nodes.append(x)
    indeg = {n: len(preds[n]) for n in nodes}
    out = defaultdict(list)
    for a, b in links:
        out[a].append(b)
    ready = [n for n in nodes if indeg[n] == 0]
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return order


def max_joins_on_path(routing: Routing) -> int:
    """Largest number of joining nodes (routed in-degree >= 2) on one route."""
    _, preds, _ = _routed_graph(routing)
    return max((sum(1 for n in path if len(preds[n]) >= 2) for _, path in routing), default=0)


def coefficient_bound(routing: Routing, coefs: dict | None = None, distinct: bool = False) -> int:
    """Upper bound on any integer-lifted coefficient a receiver can observe."""
    links, preds, succs = _routed_graph(routing)
    coefs = coefs or {}
    bound: dict[str, list[int]] = {}
    k = len(routing.sources)
    worst = 1
    for n in _topo_order(links, preds):
        if n in routing.sources:
            bound[n] = [1 if s == n else 0 for s in routing.sources]
            continue
        vec = [0] * k
        mult = 1
        for j, p in enumerate(preds[n]):
            c = coefs.get((p, n), 1)
            for i in range(k):
                vec[i] += c * mult * bound[p][i]
            if distinct:
                mult *= max(1, len(succs[n]))
        bound[n] = vec
        worst = max(worst, max(vec))
    return worst


def field_for_routing(routing: Routing, coefs: dict | None = None, distinct: bool = False
                      ) -> FieldSpec:
    """Prime q exceeding both maxJoin+1 and every reachable coefficient."""
    need = max(coefficient_bound(routing, coefs, distinct), max_joins_on_path(routing) + 1, 2)
    return FieldSpec(next_prime(need + 1))


def partial_order_coefficients(routing: Routing, seed: int | None = None,
                               table: dict | None = None, spread: int = 2) -> dict:
    """Per-link coefficients at joining points, ordered along the DAG.

    `table` maps a joining node to (S1-side coefficient, S2-side coefficient).
    Without a table, coefficients are drawn so that every joining point's
    smallest coefficient is at least the largest one of any joining point
    upstream of it.
    """
    links, preds, _ = _routed_graph(routing)
    s1 = routing.sources[0]
    s1_links = {(a, b) for r in routing.receivers
                for a, b in zip(routing.paths[(s1, r)], routing.paths[(s1, r)][1:])}
    rng = np.random.default_rng(seed)
    coefs: dict = {}
    top: dict[str, int] = {}  # largest coefficient at or above each node
    for n in _topo_order(links, preds):
        above = max((top.get(p, 1) for p in preds[n]), default=1)
        if len(preds[n]) >= 2:
            if table is not None and n in table:
                pair = table[n]
                for p in preds[n]:
                    coefs[(p, n)] = int(pair[0] if (p, n) in s1_links else pair[1])
            elif table is None:
                for p in preds[n]:
                    coefs[(p, n)] = int(rng.integers(above, above + spread + 1))
            top[n] = max([above] + [coefs.get((p, n), 1) for p in preds[n]])
        else:
            top[n] = above
    return coefs


def dag_arrays(routing: Routing, topology: Topology, coefs: dict | None = None) -> DagArrays:
    links, _, _ = _routed_graph(routing)
    nodes: list[str] = list(routing.sources)
    for a, b in links:
        for x in (a, b):
            if x not in nodes:
                nodes.append(x)
    index = {n: i for i, n in enumerate(nodes)}
    k = len(routing.sources)
    mask = np.zeros((len(links), k), dtype=np.uint8)
    link_index = {lk: i for i, lk in enumerate(links)}
    for si, s in enumerate(routing.sources):
        for r in routing.receivers:
            p = routing.paths[(s, r)]
            for lk in zip(p, p[1:]):
                mask[link_index[lk], si] = 1
    out_ptr, out_link, in_ptr, in_link = [0], [], [0], []
    for n in nodes:
        out_link += [i for i, (a, _) in enumerate(links) if a == n]
        in_link += [i for i, (_, b) in enumerate(links) if b == n]
        out_ptr.append(len(out_link))
        in_ptr.append(len(in_link))
    edges = [topology.edge(a, b) for a, b in links]
    recv_of = np.full(len(nodes), -1, dtype=np.int64)
    for j, r in enumerate(routing.receivers):
        recv_of[index[r]] = j
    coefs = coefs or {}
    return DagArrays(
        node_ids=nodes,
        link_src=np.array([index[a] for a, _ in links], dtype=np.int64),
        link_dst=np.array([index[b] for _, b in links], dtype=np.int64),
        fixed=np.array([e.fixed_delay for e in edges], dtype=np.float64),
        qmax=np.array([e.queue_delay_max for e in edges], dtype=np.float64),
        loss=np.array([e.loss_prob for e in edges], dtype=np.float64),
        out_ptr=np.array(out_ptr, dtype=np.int64),
        out_link=np.array(out_link, dtype=np.int64),
        in_ptr=np.array(in_ptr, dtype=np.int64),
        in_link=np.array(in_link, dtype=np.int64),
        mask=mask,
        in_coef=np.array([coefs.get(lk, 1) for lk in links], dtype=np.int64),
        sources=np.array([index[s] for s in routing.sources], dtype=np.int64),
        receivers=np.array([index[r] for r in routing.receivers], dtype=np.int64),
        recv_of_node=recv_of,
    )


@dataclass
class DagObservation:
    """Per receiver: coefficient vector, or None when nothing arrived."""

    receivers: tuple
    vectors: dict
    link_counts: dict
    trace: list | None = None

    def __getitem__(self, receiver: str) -> tuple | None:
        return self.vectors[receiver]

    def packet(self, receiver: str) -> ProbePacket | None:
        v = self.vectors[receiver]
        return None if v is None else ProbePacket(v)


class DagSimulator:
    """Reusable simulator of probe experiments over one routed DAG."""

    def __init__(self, topology: Topology, routing: Routing, timing: ExperimentTiming | None = None,
                 scheme: str = "additive", field: FieldSpec | None = None, coefs: dict | None = None,
                 seed: int | None = None, backend: str | None = None):
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown coding scheme {scheme!r}")
        self.topology = topology
        self.routing = routing
        self.timing = timing or ExperimentTiming()
        _check_window(topology, self.timing)
        if scheme == "partial_order" and coefs is None:
            coefs = partial_order_coefficients(routing, seed)
        self.coefs = coefs or {}
        distinct = scheme == "mod1_distinct"
        self.scheme = engine.DISTINCT if distinct else engine.PLAIN
        self.field = field or field_for_routing(routing, self.coefs, distinct)
        self.arrays = dag_arrays(routing, topology, self.coefs)
        self.backend_name = backend

    def experiment(self, u: float | None, state: np.ndarray, trace: bool = False) -> DagObservation:
        """S1 starts at 0, the other sources at u (default: timing.u)."""
        u = self.timing.u if u is None else u
        k = len(self.routing.sources)
        starts = [0.0] + [float(u)] * (k - 1)
        events = [] if trace else None
        be = engine.python_backend if trace else engine.get_backend(self.backend_name)
        recv, present, counts = be.dag_experiment(
            self.arrays, starts, self.timing.W, self.timing.clock_skew_bound, self.scheme,
            self.field.q, state, events)
        vectors = {r: (tuple(int(c) for c in recv[j]) if present[j] else None)
                   for j, r in enumerate(self.routing.receivers)}
        a = self.arrays
        lc = {(a.node_ids[a.link_src[i]], a.node_ids[a.link_dst[i]]): int(counts[i])
              for i in range(a.n_links)}
        return DagObservation(self.routing.receivers, vectors, lc, events)

    def trial(self, count_max: int, lossy: bool, state: np.ndarray, checkpoints=None):
        """All-pairs shared-stream inference; returns (types[C, P], experiments used)."""
        if len(self.routing.sources) != 2:
            raise ConfigError("pair inference needs exactly two sources")
        be = engine.get_backend(self.backend_name)
        return be.dag_trial(self.arrays, int(count_max), bool(lossy), self.timing.W,
                            self.timing.f, self.timing.clock_skew_bound, self.scheme,
                            self.field.q, state, checkpoints)


def run_dag_experiment(topology: Topology, routing: Routing, u: float = 0.0,
                       timing: ExperimentTiming | None = None, scheme: str = "additive",
                       field: FieldSpec | None = None, seed=0, coefs: dict | None = None,
                       trace: bool = False) -> DagObservation:
    """One experiment: S1 sends at t=0, S2 at t=u; joins add, branches route."""
    coef_seed = None if isinstance(seed, np.ndarray) else int(seed)
    sim = DagSimulator(topology, routing, timing, scheme, field, coefs, coef_seed)
    return sim.experiment(u, _state(seed), trace)
