"""Command line entry point: nctomo <subcommand> [flags]."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import engine
from .dag_infer import (infer_2x2_lossless, infer_2x2_lossy, infer_all_2x2_simulated,
                        simulator_oracle as dag_oracle)
from .errors import ConfigError, TomographyError
from .harness import MODES, SweepConfig, emit_report, load_report, run_sweep
from .merge import (TwoByTwoMap, merge_with_tree, merge_without_tree, source_tree,
                    true_join_links)
from .netgraph import (all_pair_types, generate_topology, read_topology, topologies_equal,
                       write_topology)
from .netgraph import io as nio
from .simnet import DagSimulator, ExperimentTiming, TreeSimulator, format_trace
from .tree_infer import infer_tree, simulator_oracle as tree_oracle


def _load(arg: str, seed: int):
    if arg.endswith(".json") or Path(arg).is_file():
        topo, routing, _ = read_topology(arg)
        return topo, routing
    return generate_topology(arg, seed)


def _timing(a) -> ExperimentTiming:
    return ExperimentTiming(T=3 * a.window_ms, W=a.window_ms, f=a.offset_frac)


def _emit(a, text: str) -> None:
    if a.out:
        Path(a.out).write_text(text)
    else:
        print(text)


def _first(xs, default):
    return xs[0] if xs else default


# ------------------------------------------------------------------ subcommands

def cmd_gen(a) -> int:
    topo, routing = _load(a.topology, a.seed)
    if a.out:
        write_topology(a.out, topo, routing)
    else:
        print(nio.dumps(topo, routing))
    return 0


def cmd_sim(a) -> int:
    topo, routing = _load(a.topology, a.seed)
    topo = topo.with_loss(_first(a.p, 0.0))
    state = engine.seed_state(a.seed)
    if routing is None:
        sources = a.sources.split(",") if a.sources else list(topo.leaves[:2])
        res = TreeSimulator(topo, _timing(a)).iteration(sources, _first(a.probes, 1), state,
                                                        trace=True)
        print(format_trace(res.trace))
        for leaf in topo.leaves:
            got = sorted(res.received(leaf))
            print(f"{leaf}: {got}")
    else:
        obs = DagSimulator(topo, routing, _timing(a)).experiment(a.u, state, trace=True)
        print(format_trace(obs.trace))
        for r in routing.receivers:
            print(f"{r}: {obs[r]}")
    return 0


def cmd_infer_tree(a) -> int:
    topo, routing = _load(a.topology, a.seed)
    if routing is not None:
        raise ConfigError("infer-tree needs an undirected tree topology")
    lossless = a.mode == "lossless"
    sim = TreeSimulator(topo.with_loss(_first(a.p, 0.0)), _timing(a))
    oracle = tree_oracle(sim, _first(a.probes, 1), lossless, engine.seed_state(a.seed))
    out = infer_tree(oracle, topo.leaves, "lossless" if lossless else "lossy", seed=a.seed)
    for e in out.edges:
        print(f"{e.a} -- {e.b}")
    print(f"matches input: {topologies_equal(out, topo)}")
    if a.out:
        write_topology(a.out, out)
    return 0


def cmd_infer_2x2(a) -> int:
    topo, routing = _load(a.topology, a.seed)
    if routing is None or len(routing.sources) < 2:
        raise ConfigError("infer-2x2 needs a routed topology with two sources")
    pair = a.pair.split(",") if a.pair else list(routing.receivers[:2])
    sim = DagSimulator(topo.with_loss(_first(a.p, 0.0)), routing, _timing(a))
    oracle = dag_oracle(sim, engine.seed_state(a.seed), receivers=pair)
    cm = _first(a.countmax, 250)
    if a.mode == "lossless":
        t, n = infer_2x2_lossless(oracle, cm, a.offset_frac, a.window_ms, a.seed, return_count=True)
    else:
        t, n = infer_2x2_lossy(oracle, cm, a.offset_frac, a.window_ms, a.seed, return_count=True)
    truth = all_pair_types(routing.restrict(routing.sources[:2], pair), *routing.sources[:2])
    print(f"{pair[0]},{pair[1]}: {t.name} after {n} experiments "
          f"(structural: {truth[tuple(pair)].name})")
    return 0


def _inferred_map(a, topo, routing) -> TwoByTwoMap:
    sim = DagSimulator(topo.with_loss(_first(a.p, 0.0)), routing, _timing(a))
    maps = infer_all_2x2_simulated(sim, _first(a.countmax, 250), a.mode != "lossless",
                                   engine.seed_state(a.seed))
    return TwoByTwoMap(maps[0])


def cmd_infer_2xn(a) -> int:
    topo, routing = _load(a.topology, a.seed)
    if routing is None:
        raise ConfigError("infer-2xn needs a routed topology")
    got = _inferred_map(a, topo, routing)
    truth = all_pair_types(routing, *routing.sources[:2])
    wrong = 0
    for (r1, r2), t in truth.items():
        mark = "" if got[r1, r2] == t else "  <-- structural " + t.name
        wrong += bool(mark)
        print(f"{r1},{r2}: {got[r1, r2].name}{mark}")
    print(f"{wrong} of {len(truth)} pairs differ from the structure")
    return 0


def cmd_merge(a) -> int:
    topo, routing = _load(a.topology, a.seed)
    if routing is None:
        raise ConfigError("merge needs a routed topology")
    s1, s2 = routing.sources[:2]
    two = routing.restrict((s1, s2), routing.receivers)
    types = TwoByTwoMap.from_routing(two, s1, s2) if a.oracle else _inferred_map(a, topo, two)
    if a.no_tree:
        merged = merge_without_tree(types, source=s1, new_source=s2)
    else:
        merged = merge_with_tree(source_tree(two, s1), types, new_source=s2)
        truth = true_join_links(two, s1, s2)
        bad = [r for r in truth if merged.joins[r] != truth[r]]
        print(f"joins localized correctly: {len(truth) - len(bad)}/{len(truth)}", file=sys.stderr)
    _emit(a, merged.dumps())
    return 0


def cmd_sweep(a) -> int:
    cfg = SweepConfig(topology=a.topology, mode=a.mode or "tree-lossy", p=a.p or [0.0],
                      M=a.probes or [1], countMax=a.countmax or [250], trials=a.trials, seed=a.seed,
                      window_ms=a.window_ms, offset_frac=a.offset_frac, pool=a.pool)

    def progress(row):
        print(f"{row.mode} p={row.p:g} M={row.M} countMax={row.countMax}: "
              f"{row.errors}/{row.trials} = {row.error_rate:.4f}", file=sys.stderr)

    table = run_sweep(cfg, progress)
    text = emit_report(table, a.out, a.format or "csv")
    if not a.out:
        print(text)
    return 0


def cmd_report(a) -> int:
    table = load_report(a.input)
    if a.out or a.format:
        text = emit_report(table, a.out, a.format or "csv")
        if not a.out:
            print(text)
        return 0
    print(f"{'topology':<14}{'mode':<15}{'p':>6}{'M':>4}{'countMax':>9}{'error':>9}{'stderr':>9}")
    for r in table.rows:
        print(f"{r.topology:<14}{r.mode:<15}{r.p:>6.2f}{r.M:>4}{r.countMax:>9}"
              f"{r.error_rate:>9.4f}{r.stderr:>9.4f}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--topology", default="fig1",
                        help="topology file (.json) or generator kind (fig1, abilene, ...)")
    common.add_argument("--mode", help="lossless/lossy; for sweep one of the sweep modes")
    common.add_argument("--p", type=float, nargs="+", help="link loss probabilities")
    common.add_argument("--probes", type=int, nargs="+", help="probes per iteration (M)")
    common.add_argument("--countmax", type=int, nargs="+", help="experiment budgets")
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--window-ms", type=float, default=100.0)
    common.add_argument("--offset-frac", type=float, default=0.5)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))

    p = argparse.ArgumentParser(prog="nctomo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write a topology file").set_defaults(fn=cmd_gen)
    s = sub.add_parser("sim", parents=[common], help="one experiment with event trace")
    s.add_argument("--sources", help="comma separated tree sources")
    s.add_argument("--u", type=float, default=0.0, help="offset of the second source (ms)")
    s.set_defaults(fn=cmd_sim)
    sub.add_parser("infer-tree", parents=[common]).set_defaults(fn=cmd_infer_tree)
    s = sub.add_parser("infer-2x2", parents=[common])
    s.add_argument("--pair", help="two receivers, comma separated")
    s.set_defaults(fn=cmd_infer_2x2)
    sub.add_parser("infer-2xn", parents=[common]).set_defaults(fn=cmd_infer_2xn)
    s = sub.add_parser("merge", parents=[common])
    s.add_argument("--oracle", action="store_true", help="use structural pair types")
    s.add_argument("--no-tree", action="store_true", help="merge without the S1 tree")
    s.set_defaults(fn=cmd_merge)
    s = sub.add_parser("sweep", parents=[common], help=f"Monte Carlo sweep; modes: {MODES}")
    s.add_argument("--pool", type=int, default=0, help="distinct random topologies (0: one per trial)")
    s.set_defaults(fn=cmd_sweep)
    s = sub.add_parser("report", parents=[common], help="print or convert a sweep report")
    s.add_argument("input")
    s.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TomographyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
