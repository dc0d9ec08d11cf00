"""Top-down tree inference from coded-probe iterations.

Each iteration picks sources inside the current component, groups the
component's terminals by what they observed, and splits the component into
regions around the coding points (or around the edge where the probes
crossed). Everything outside a component is represented by an aggregate
terminal whose observation is the union of its member leaves' observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import InferenceFailure, OracleFailure, TooManySources
from .netgraph.logical import logical_collapse
from .netgraph.model import Topology, tree_from_edges

Oracle = Callable[[tuple], dict]


@dataclass(frozen=True)
class Aggregate:
    """Stand-in terminal for a set of leaves outside the current component."""

    id: str
    members: frozenset


@dataclass
class LeafPartition:
    L1: set
    L2: set
    L3: set
    attach: tuple = ()

    def as_tuple(self):
        return self.L1, self.L2, self.L3


@dataclass
class InferenceState:
    iterations: int = 0
    fallbacks: int = 0
    fragments: list = field(default_factory=list)  # (n_classes, crossed) per iteration


def _unit(i: int, k: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(k))


def _support(v: tuple) -> frozenset:
    return frozenset(i for i, c in enumerate(v) if c)


def _indicator(s: Iterable[int], k: int) -> tuple:
    s = set(s)
    return tuple(1 if j in s else 0 for j in range(k))


def _classify(obs: frozenset, k: int, distinct: bool) -> tuple | None:
    """Class vector of one terminal from all packets it received (None: silent)."""
    if not obs:
        return None
    if not distinct:
        sup = set()
        for v in obs:
            sup |= _support(v)
        return _indicator(sup, k)
    coded = [v for v in obs if len(_support(v)) >= 2]
    if coded:
        return max(coded)
    sup = set()
    for v in obs:
        sup |= _support(v)
    if len(sup) == 1:
        return _indicator(sup, k)
    return _indicator(sup, k)  # saw pure packets of several sources only


def group_terminals(term_obs: dict, sources: tuple, k: int, distinct: bool,
                    rng: np.random.Generator) -> dict:
    """Map class vector -> list of terminals; silent terminals placed at random."""
    classes: dict[tuple, list] = {}
    silent = []
    for i, s in enumerate(sources):
        classes.setdefault(_unit(i, k), []).append(s)
    for t, o in term_obs.items():
        if t in sources:
            continue
        c = _classify(o, k, distinct)
        if c is None:
            silent.append(t)
        else:
            classes.setdefault(c, []).append(t)
    if silent:
        keys = sorted(classes)
        for t in silent:
            classes[keys[int(rng.integers(len(keys)))]].append(t)
    return classes


def partition_leaves(observations: dict, sources: tuple, mode: str = "lossless",
                     seed: int | np.random.Generator = 0) -> LeafPartition:
    """Split leaves into the S1 side, the S2 side and the coded side.

    `observations` maps each leaf to a ProbePacket/coefficient tuple/None
    (lossless) or to an iterable of received packets (lossy).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    norm = {}
    for leaf, o in observations.items():
        if o is None:
            norm[leaf] = frozenset()
        elif hasattr(o, "coeffs"):
            norm[leaf] = frozenset([tuple(o.coeffs)])
        elif mode == "lossless" and o and isinstance(next(iter(o)), int):
            norm[leaf] = frozenset([tuple(o)])
        else:
            norm[leaf] = frozenset(tuple(getattr(p, "coeffs", p)) for p in o)
    classes = group_terminals(norm, tuple(sources), 2, False, rng)
    part = LeafPartition(set(classes.get((1, 0), [])), set(classes.get((0, 1), [])),
                         set(classes.get((1, 1), [])))
    return part


# -------------------------------------------------------------- meta tree
#
# The classes of one iteration are arranged as a small tree of "regions"
# (one per class) joined through peers: a coding point ("code", key) or an
# edge crossed by two probes ("cross", key). Each entry is (class, peer,
# role) where role is "in" for a region feeding a coding point and "out"
# for a region receiving its output.

def _meta_additive(classes: dict, k: int):
    """Arrangement for plain-sum coding, or None when it is not unique."""
    sups = {c: _support(c) for c in classes}
    coded = [c for c in classes if len(sups[c]) >= 2]
    links = []

    def parent(c):
        best = None
        for d in coded:
            if sups[c] < sups[d] and (best is None or sups[d] < sups[best]):
                best = d
        return best

    for t in coded:
        kids = [c for c in classes if sups[c] < sups[t] and parent(c) == t]
        cover: set = set()
        for c in kids:
            if cover & sups[c]:
                return None
            cover |= sups[c]
        if cover != sups[t] or len(kids) < 2:
            return None  # some merge happened where no leaf could see it
        links.append((t, ("code", t), "out"))
        for c in sorted(kids):
            links.append((c, ("code", t), "in"))
    roots = [c for c in classes if parent(c) is None]
    if len(roots) == 1:
        if len(sups[roots[0]]) < 2:
            return None
    elif len(roots) == 2 and all(len(sups[r]) == 1 for r in roots):
        a, b = sorted(roots)
        links.append((a, ("cross", (a, b)), "in"))
        links.append((b, ("cross", (a, b)), "in"))
    else:
        return None
    return links


def _meta_distinct(classes: dict, k: int):
    coded = [c for c in classes if len(_support(c)) >= 2]
    pure = [c for c in classes if len(_support(c)) == 1]
    if k != 2 or len(pure) != 2:
        return None
    a, b = sorted(pure)
    if coded:
        return ([(a, ("code", "meet"), "in"), (b, ("code", "meet"), "in")]
                + [(c, ("code", "meet"), "out") for c in sorted(coded)])
    return [(a, ("cross", (a, b)), "in"), (b, ("cross", (a, b)), "in")]


# ---------------------------------------------------------------- inference

class _TreeBuilder:
    def __init__(self, oracle: Oracle, leaves, lossless: bool, rng: np.random.Generator,
                 n_sources: int, arity: int, distinct: bool, max_iterations: int):
        self.oracle = oracle
        self.leaves = tuple(leaves)
        self.lossless = lossless
        self.rng = rng
        self.n_sources = n_sources
        self.arity = arity
        self.distinct = distinct
        self.max_iterations = max_iterations
        self.state = InferenceState()
        self._ids = 0

    def new_id(self, prefix: str) -> str:
        self._ids += 1
        return f"_{prefix}{self._ids}"

    @staticmethod
    def members(t) -> frozenset:
        return t.members if isinstance(t, Aggregate) else frozenset([t])

    def probe(self, sources: tuple) -> dict:
        self.state.iterations += 1
        if self.state.iterations > self.max_iterations:
            raise InferenceFailure(f"no convergence after {self.max_iterations} iterations")
        try:
            obs = self.oracle(sources)
        except OracleFailure:
            raise
        except Exception as exc:  # pragma: no cover - defensive
            raise OracleFailure(str(exc)) from exc
        return obs

    def pick_sources(self, terms: list, k: int, widen: bool):
        """Uniform choice among real leaves; aggregates join the pool on retries.

        An aggregate used as a source sends from one of its member leaves,
        so the probe enters the component through the aggregate's link.
        """
        reals = [t for t in terms if not isinstance(t, Aggregate)]
        pool = reals if len(reals) >= k and not widen else list(terms)
        idx = self.rng.choice(len(pool), size=k, replace=False)
        chosen = [pool[int(i)] for i in idx]
        leaves = []
        for t in chosen:
            if isinstance(t, Aggregate):
                mem = sorted(t.members)
                leaves.append(mem[int(self.rng.integers(len(mem)))])
            else:
                leaves.append(t)
        return chosen, tuple(leaves)

    def solve(self, terms: list) -> list[tuple[str, str]]:
        ids = [t.id if isinstance(t, Aggregate) else t for t in terms]
        if len(terms) == 2:
            return [(ids[0], ids[1])]
        if len(terms) <= self.arity + 1:
            c = self.new_id("n")
            return [(c, x) for x in ids]
        attempts = 0
        while True:
            attempts += 1
            k = min(self.n_sources, len(terms))
            if attempts > 1 and k > 2:
                k = 2
                self.state.fallbacks += 1
            edges = self.try_split(terms, k, attempts > 2)
            if edges is not None:
                return edges
            if attempts > 50:
                raise InferenceFailure("component could not be split")

    def try_split(self, terms: list, k: int, widen: bool = False):
        chosen, src_leaves = self.pick_sources(terms, k, widen)
        obs = self.probe(src_leaves)
        term_obs = {}
        for t in terms:
            if t in chosen:
                continue
            acc: frozenset = frozenset()
            for m in self.members(t):
                acc = acc | obs.get(m, frozenset())
            term_obs[t] = acc
        classes = group_terminals(term_obs, tuple(chosen), k, self.distinct, self.rng)
        meta = (_meta_distinct if self.distinct else _meta_additive)(classes, k)
        if meta is None:
            return None
        crossed = any(peer[0] == "cross" for _, peer, _ in meta)
        self.state.fragments.append((len(classes), crossed))
        adj: dict = {}
        inputs: dict = {}
        for c, peer, role in meta:
            adj.setdefault(("r", c), set()).add(("p", peer))
            adj.setdefault(("p", peer), set()).add(("r", c))
            if role == "in":
                inputs.setdefault(peer, []).append(c)

        def side(x, away) -> frozenset:
            """Leaves reachable from meta node x without passing through `away`."""
            seen = {x, away}
            stack = [x]
            mem: set = set()
            while stack:
                y = stack.pop()
                if y[0] == "r":
                    for t in classes[y[1]]:
                        mem |= self.members(t)
                for z in adj.get(y, ()):
                    if z not in seen:
                        seen.add(z)
                        stack.append(z)
            return frozenset(mem)

        def expanded(peer) -> bool:
            # a coding point with two or more outgoing links lies inside the
            # region it feeds; give that region one aggregate per input link
            return (not self.distinct and peer[0] == "code"
                    and self.arity + 1 - len(inputs.get(peer, ())) >= 2)

        plans = []
        for c, terms_c in classes.items():
            region = list(terms_c)
            subs = []
            for c2, peer, role in meta:
                if c2 != c:
                    continue
                if expanded(peer) and role == "out":
                    for src in inputs[peer]:
                        agg = Aggregate(self.new_id("v"), side(("r", src), ("p", peer)))
                        region.append(agg)
                        subs.append((agg.id, ("link", src, peer)))
                    continue
                agg = Aggregate(self.new_id("v"), side(("p", peer), ("r", c)))
                region.append(agg)
                if expanded(peer):
                    subs.append((agg.id, ("link", c, peer)))
                else:
                    subs.append((agg.id, peer))
            if len(region) >= len(terms):
                return None  # no progress: retry with other sources
            plans.append((region, subs))
        glue_ids: dict = {}
        edges: list[tuple[str, str]] = []
        for region, subs in plans:
            sub_edges = self.solve(region)
            rename = {}
            for vid, key in subs:
                if key not in glue_ids:
                    glue_ids[key] = self.new_id("n")
                rename[vid] = glue_ids[key]
            edges += [(rename.get(a, a), rename.get(b, b)) for a, b in sub_edges]
        return edges


def _finish(edges, leaves) -> Topology:
    topo = tree_from_edges(edges, leaves=leaves, fixed_delay=1.0)
    return logical_collapse(topo)


def _run(oracle, leaves, lossless, seed, n_sources, arity, distinct, max_iterations):
    leaves = list(leaves)
    if len(leaves) < 2:
        raise InferenceFailure("need at least two leaves")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if max_iterations is None:
        max_iterations = 20 * len(leaves) + 20
    b = _TreeBuilder(oracle, leaves, lossless, rng, n_sources, arity, distinct, max_iterations)
    edges = b.solve(list(leaves))
    return _finish(edges, leaves), b.state


def infer_tree(probe_oracle: Oracle, leaves, mode: str = "lossless", seed=0,
               max_iterations: int | None = None, return_state: bool = False):
    """Infer a logical binary (or general) tree with two sources per iteration.

    `probe_oracle(sources)` runs one iteration and returns, for every leaf,
    the frozenset of coefficient tuples it observed.
    """
    if mode not in ("lossless", "lossy"):
        raise ValueError(f"unknown mode {mode!r}")
    topo, state = _run(probe_oracle, leaves, mode == "lossless", seed, 2, 2, False, max_iterations)
    return (topo, state) if return_state else topo


def infer_mary(probe_oracle: Oracle, leaves, variant: str, m: int, mode: str = "lossless",
               seed=0, n_sources: int | None = None, max_iterations: int | None = None,
               return_state: bool = False):
    """m-ary inference: "modI" (two sources, distinct combinations per link)
    or "modII" (up to m sources, plain sums) on full m-ary trees."""
    if variant == "modI":
        topo, state = _run(probe_oracle, leaves, mode == "lossless", seed, 2, m, True,
                           max_iterations)
    elif variant == "modII":
        k = m if n_sources is None else n_sources
        if k > m:
            raise TooManySources(f"{k} sources cannot resolve a full {m}-ary tree")
        topo, state = _run(probe_oracle, leaves, mode == "lossless", seed, k, m, False,
                           max_iterations)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return (topo, state) if return_state else topo


def simulator_oracle(sim, n_probes: int, lossless: bool, state: np.ndarray) -> Oracle:
    """Wrap a TreeSimulator as an oracle; the RNG state advances across calls."""
    leaves = tuple(sim.topology.leaves)
    index = sim.index

    def oracle(sources):
        res = sim.iteration(sources, n_probes, state)
        out = {}
        rec = res.recv
        pres = res.present
        for leaf in leaves:
            i = index[leaf]
            rounds = np.flatnonzero(pres[:, i])
            if len(rounds) == 0:
                out[leaf] = frozenset()
            elif lossless:
                out[leaf] = frozenset([tuple(rec[rounds[0], i].tolist())])
            else:
                out[leaf] = frozenset(tuple(rec[r, i].tolist()) for r in rounds)
        return out

    return oracle
