"""Monte Carlo sweeps over loss rate, probes per iteration and countMax."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import engine
from .dag_infer import infer_all_2x2_simulated
from .errors import ConfigError, TomographyError
from .netgraph import (all_pair_types, fig1_tree, generate_topology, random_binary_tree,
                       read_topology, topologies_equal)
from .simnet import DagSimulator, ExperimentTiming, TreeSimulator
from .tree_infer import group_terminals, infer_tree, simulator_oracle

TREE_MODES = ("tree-lossless", "tree-lossy", "tree-iter1", "tree-iter2")
DAG_MODES = ("dag-lossless", "dag-lossy")
MODES = TREE_MODES + DAG_MODES
RANDOM_KINDS = ("erdos_renyi", "preferential", "random_binary_tree")
COLUMNS = ("topology", "mode", "p", "M", "countMax", "trials", "errors", "error_rate",
           "stderr", "wall_ms")

# scripted first two iterations on the seven-leaf example tree:
# (sources, aggregates, expected class -> terminals)
FIG1_SCRIPT = (
    (("1", "7"), {}, {(1, 0): {"1", "2"}, (0, 1): {"5", "6", "7"}, (1, 1): {"3", "4"}}),
    (("5", "6"), {"_a": frozenset({"1", "2", "3", "4"})},
     {(1, 0): {"5"}, (0, 1): {"6"}, (1, 1): {"7", "_a"}}),
)


@dataclass
class SweepConfig:
    topology: str = "fig1"
    mode: str = "tree-lossy"
    p: list = field(default_factory=lambda: [0.0])
    M: list = field(default_factory=lambda: [1])
    countMax: list = field(default_factory=lambda: [250])
    trials: int = 1000
    seed: int = 0
    window_ms: float = 100.0
    offset_frac: float = 0.5
    clock_skew_ms: float = 5.0  # coarse source synchronization
    queue_max_ms: float = 10.0
    pool: int = 0  # random kinds: number of distinct topologies cycled through (0 = one per trial)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        for p in self.p:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"loss probability {p} outside [0, 1]")
        if self.mode in DAG_MODES and self.topology in ("fig1", "random_binary_tree"):
            raise ConfigError(f"{self.mode} needs a routed DAG topology")
        self.p = [float(x) for x in self.p]
        self.M = [int(x) for x in self.M]
        self.countMax = sorted(int(x) for x in self.countMax)

    @property
    def timing(self) -> ExperimentTiming:
        return ExperimentTiming(T=3 * self.window_ms, W=self.window_ms, f=self.offset_frac,
                                clock_skew_bound=self.clock_skew_ms)


@dataclass
class ResultRow:
    topology: str
    mode: str
    p: float
    M: int
    countMax: int
    trials: int
    errors: int
    error_rate: float
    stderr: float
    wall_ms: float

    @classmethod
    def from_counts(cls, topology, mode, p, M, countMax, trials, errors, wall_ms):
        rate = errors / trials
        se = math.sqrt(rate * (1.0 - rate) / trials)
        return cls(topology, mode, p, M, countMax, trials, errors, rate, se, wall_ms)

    def merge(self, other: "ResultRow") -> "ResultRow":
        """Combine two disjoint batches of the same grid point."""
        return ResultRow.from_counts(self.topology, self.mode, self.p, self.M, self.countMax,
                                     self.trials + other.trials, self.errors + other.errors,
                                     self.wall_ms + other.wall_ms)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def lookup(self, **key) -> ResultRow:
        for r in self.rows:
            if all(getattr(r, k) == v for k, v in key.items()):
                return r
        raise KeyError(key)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([getattr(r, c) for c in COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        types = {f.name: f.type for f in fields(ResultRow)}
        conv = {"str": str, "int": int, "float": float}
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(ResultRow(**{k: conv[types[k]](v) for k, v in rec.items()}))
        return cls(rows)

    def to_json(self) -> str:
        return json.dumps({"columns": list(COLUMNS), "rows": [asdict(r) for r in self.rows]},
                          indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        return cls([ResultRow(**r) for r in doc["rows"]])


def emit_report(table: ResultTable, path=None, fmt: str = "csv") -> str:
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown report format {fmt!r}")
    text = table.to_csv() if fmt == "csv" else table.to_json()
    if path is not None:
        Path(path).write_text(text)
    return text


def load_report(path) -> ResultTable:
    text = Path(path).read_text()
    return ResultTable.from_json(text) if text.lstrip().startswith("{") else ResultTable.from_csv(text)


# ------------------------------------------------------------------ topology source

class _Topologies:
    """Topology for trial r: fixed, or drawn from a seeded pool of random instances."""

    def __init__(self, cfg: SweepConfig):
        self.cfg = cfg
        self.cache: dict[int, tuple] = {}
        name = cfg.topology
        self.fixed = None
        if name.endswith(".json"):
            topo, routing, _ = read_topology(name)
            self.fixed = (topo, routing)
        elif name == "fig1":
            self.fixed = (fig1_tree(queue_max=cfg.queue_max_ms), None)
        elif name not in RANDOM_KINDS:
            self.fixed = generate_topology(name, cfg.seed, **cfg.params)

    def get(self, r: int):
        if self.fixed is not None:
            return self.fixed
        slot = r % self.cfg.pool if self.cfg.pool else r
        if slot not in self.cache:
            s = engine.mix_seed(self.cfg.seed, 0x70, slot)
            if self.cfg.topology == "random_binary_tree":
                self.cache[slot] = (random_binary_tree(self.cfg.params.get("n_leaves", 7), s), None)
            else:
                self.cache[slot] = generate_topology(self.cfg.topology, s, **self.cfg.params)
        return self.cache[slot]


# ------------------------------------------------------------------ per-trial scoring

def scripted_iteration_error(sim: TreeSimulator, step, n_probes: int, state, rng) -> bool:
    """One scripted iteration; True when its partition differs from the expected one."""
    sources, aggregates, expected = step
    res = sim.iteration(sources, n_probes, state)
    inside = set().union(*aggregates.values()) if aggregates else set()
    obs = {leaf: res.received(leaf) for leaf in sim.topology.leaves if leaf not in inside}
    for name, members in aggregates.items():
        obs[name] = frozenset().union(*(res.received(m) for m in members))
    classes = group_terminals(obs, tuple(sources), 2, False, rng)
    got = {k: set(v) for k, v in classes.items()}
    return got != expected


def _tree_trial(cfg: SweepConfig, sim: TreeSimulator, topo, M: int, r: int, p_idx: int) -> bool:
    state = engine.seed_state(engine.mix_seed(cfg.seed, 1, p_idx, M, r))
    if cfg.mode in ("tree-iter1", "tree-iter2"):
        step = FIG1_SCRIPT[0 if cfg.mode == "tree-iter1" else 1]
        rng = np.random.default_rng(engine.mix_seed(cfg.seed, 2, p_idx, M, r))
        return scripted_iteration_error(sim, step, M, state, rng)
    lossless = cfg.mode == "tree-lossless"
    oracle = simulator_oracle(sim, M, lossless, state)
    try:
        out = infer_tree(oracle, topo.leaves, "lossless" if lossless else "lossy",
                         seed=engine.mix_seed(cfg.seed, 2, p_idx, M, r))
    except TomographyError:
        return True
    return not topologies_equal(out, topo)


def run_sweep(cfg: SweepConfig, progress=None) -> ResultTable:
    """Evaluate every (p, M, countMax) grid point with cfg.trials seeded trials."""
    if cfg.mode in ("tree-iter1", "tree-iter2") and cfg.topology != "fig1":
        raise ConfigError("scripted iterations are defined on the fig1 tree only")
    topos = _Topologies(cfg)
    table = ResultTable()
    for pi, p in enumerate(cfg.p):
        if cfg.mode in TREE_MODES:
            for M in cfg.M:
                t0 = time.perf_counter()
                errors = 0
                sims: dict[int, TreeSimulator] = {}
                for r in range(cfg.trials):
                    topo, _ = topos.get(r)
                    key = id(topo)
                    if key not in sims:
                        sims[key] = TreeSimulator(topo.with_loss(p), cfg.timing)
                    errors += _tree_trial(cfg, sims[key], topo, M, r, pi)
                wall = (time.perf_counter() - t0) * 1000.0
                table.rows.append(ResultRow.from_counts(cfg.topology, cfg.mode, p, M, 0,
                                                        cfg.trials, errors, wall))
                if progress:
                    progress(table.rows[-1])
        else:
            t0 = time.perf_counter()
            errors = np.zeros(len(cfg.countMax), dtype=np.int64)
            lossy = cfg.mode == "dag-lossy"
            sims: dict[int, tuple] = {}
            for r in range(cfg.trials):
                topo, routing = topos.get(r)
                key = id(topo)
                if key not in sims:
                    s1, s2 = routing.sources[:2]
                    truth = all_pair_types(routing, s1, s2)
                    sims[key] = (DagSimulator(topo.with_loss(p), routing, cfg.timing), truth)
                sim, truth = sims[key]
                state = engine.seed_state(engine.mix_seed(cfg.seed, 3, pi, r))
                maps = infer_all_2x2_simulated(sim, cfg.countMax[-1], lossy, state, cfg.countMax)
                for c, m in enumerate(maps):
                    errors[c] += any(m[q] != t for q, t in truth.items())
            wall = (time.perf_counter() - t0) * 1000.0
            for c, cm in enumerate(cfg.countMax):
                table.rows.append(ResultRow.from_counts(cfg.topology, cfg.mode, p, 1, cm,
                                                        cfg.trials, int(errors[c]), wall))
                if progress:
                    progress(table.rows[-1])
    return table

