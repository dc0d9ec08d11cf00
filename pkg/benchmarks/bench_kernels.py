"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from nctomo import engine
from nctomo.netgraph import abilene, fig1_tree
from nctomo.simnet import DagSimulator, ExperimentTiming, TreeSimulator


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    timing = ExperimentTiming()
    tree = fig1_tree(queue_max=10.0).with_loss(0.1)
    topo, routing = abilene()
    topo = topo.with_loss(0.05)

    def tree_iterations(backend):
        sim = TreeSimulator(tree, timing, backend=backend)
        st = engine.seed_state(1)
        return lambda: [sim.iteration(("1", "7"), 5, st) for _ in range(500)]

    def dag_experiments(backend):
        sim = DagSimulator(topo, routing, timing, backend=backend)
        st = engine.seed_state(2)
        rng = np.random.default_rng(0)
        return lambda: [sim.experiment(float(rng.uniform(50, 100)), st) for _ in range(500)]

    def dag_trial(backend):
        sim = DagSimulator(topo, routing, timing, backend=backend)
        st = engine.seed_state(3)
        return lambda: [sim.trial(250, True, st) for _ in range(5)]

    return [("tree iteration x500 (M=5)", tree_iterations),
            ("dag experiment x500 (Abilene)", dag_experiments),
            ("dag all-pairs trial x5 (countMax 250)", dag_trial)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    if engine.compiled_backend is None:
        print("compiled kernels not built; only the Python fallback is available")
    print(f"{'case':<40}{'python s':>10}{'compiled s':>12}{'speedup':>9}")
    for name, make in cases():
        py = _time(make("python"), a.repeat)
        if engine.compiled_backend is None:
            print(f"{name:<40}{py:>10.3f}{'-':>12}{'-':>9}")
            continue
        cc = _time(make("compiled"), a.repeat)
        print(f"{name:<40}{py:>10.3f}{cc:>12.4f}{py / cc:>8.1f}x")


if __name__ == "__main__":
    main()
