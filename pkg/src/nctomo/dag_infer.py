"""Identify the type of 2-by-2 components from receiver observations.

Observations are coefficient vectors over (x1, x2) as integer tuples, or
None when a receiver got nothing in that experiment.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import DegenerateProbability, NoEvidence, OracleFailure
from .field import ProbePacket
from .netgraph.routing import TwoByTwoType
from .simnet import DagSimulator

DEFAULT_COUNT_MAX = 250

X1 = (1, 0)
X2 = (0, 1)
X12 = (1, 1)
X1_2X2 = (1, 2)


class Group(enum.IntEnum):
    LOSS = 1       # at least one receiver empty
    EQUAL = 2      # R1 == R2
    DIFFERENT = 3  # R1 != R2


@dataclass(frozen=True)
class ObservationGroup:
    group: Group
    sign: int = 0  # sign of c12 - c22, only meaningful for DIFFERENT


def _vec(obs):
    if obs is None:
        return None
    if isinstance(obs, ProbePacket):
        return None if obs.is_zero() else tuple(int(c) for c in obs.coeffs)
    return tuple(int(c) for c in obs)


def classify_observation(obs1, obs2) -> ObservationGroup:
    a, b = _vec(obs1), _vec(obs2)
    if a is None or b is None:
        return ObservationGroup(Group.LOSS)
    if a == b:
        return ObservationGroup(Group.EQUAL)
    diff = a[1] - b[1]
    return ObservationGroup(Group.DIFFERENT, (diff > 0) - (diff < 0))


@dataclass
class EvidenceState:
    """Running estimate of the lossy decision procedure."""

    estimate: int = 0
    used: int = 0
    done: bool = False

    def update(self, og: ObservationGroup) -> None:
        self.used += 1
        if self.done or og.group is Group.LOSS:
            return
        if og.group is Group.DIFFERENT and og.sign < 0:
            if self.estimate == 3:
                self.estimate, self.done = 4, True
            else:
                self.estimate = 2
        elif og.group is Group.DIFFERENT and og.sign > 0:
            if self.estimate == 2:
                self.estimate, self.done = 4, True
            else:
                self.estimate = 3
        elif og.group is Group.EQUAL and self.estimate == 0:
            self.estimate = 1

    @property
    def type(self) -> TwoByTwoType:
        return TwoByTwoType(self.estimate)


def _offsets(rng, W: float, f: float):
    """0 first, then uniform over [f*W, W]."""
    yield 0.0
    while True:
        yield W * (f + (1.0 - f) * rng.random())


def _gen(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _call(oracle, u):
    try:
        r1, r2 = oracle(u)
    except OracleFailure:
        raise
    except Exception as exc:
        raise OracleFailure(f"experiment at offset {u:.3f} failed: {exc}") from exc
    return _vec(r1), _vec(r2)


def infer_2x2_lossless(oracle: Callable, count_max: int = DEFAULT_COUNT_MAX, f: float = 0.5,
                       W: float = 100.0, seed=None, return_count: bool = False):
    """Synchronized probe first; then random offsets until the receivers differ.

    A first experiment with equal x2 coefficients but different vectors is
    taken as evidence of two joining points.
    """
    rng = _gen(seed)
    result, n = TwoByTwoType.TYPE1, 0
    for n, u in enumerate(_offsets(rng, W, f), start=1):
        if n > count_max:
            n = count_max
            break
        a, b = _call(oracle, u)
        if a is None or b is None:
            raise OracleFailure("lossless experiment lost a probe")
        if n == 1 and b[1] > a[1]:
            result = TwoByTwoType.TYPE2
            break
        if n == 1 and b[1] < a[1]:
            result = TwoByTwoType.TYPE3
            break
        if a != b:
            result = TwoByTwoType.TYPE4
            break
    return (result, n) if return_count else result


def infer_2x2_lossy(oracle: Callable, count_max: int = DEFAULT_COUNT_MAX, f: float = 0.5,
                    W: float = 100.0, seed=None, strict: bool = False, return_count: bool = False):
    """Accumulate sign evidence over up to count_max experiments."""
    rng = _gen(seed)
    state = EvidenceState()
    for u in _offsets(rng, W, f):
        if state.used >= count_max or state.done:
            break
        state.update(classify_observation(*_call(oracle, u)))
    if strict and state.estimate == 0:
        raise NoEvidence(f"no usable observation in {state.used} experiments")
    return (state.type, state.used) if return_count else state.type


def infer_all_2x2(oracle: Callable, receivers, count_max: int = DEFAULT_COUNT_MAX,
                  f: float = 0.5, W: float = 100.0, seed=None, lossy: bool = True) -> dict:
    """Classify every receiver pair from one shared stream of experiments.

    `oracle(u)` returns a mapping receiver -> observation.
    """
    receivers = list(receivers)
    pairs = list(combinations(receivers, 2))
    rng = _gen(seed)
    states = {p: EvidenceState() for p in pairs}
    lossless = {p: None for p in pairs}
    for n, u in enumerate(_offsets(rng, W, f), start=1):
        if n > count_max:
            break
        try:
            obs = {r: _vec(v) for r, v in oracle(u).items()}
        except Exception as exc:
            raise OracleFailure(str(exc)) from exc
        busy = False
        for p in pairs:
            a, b = obs.get(p[0]), obs.get(p[1])
            if lossy:
                st = states[p]
                if not st.done:
                    st.update(classify_observation(a, b))
                    busy = busy or not st.done
            elif lossless[p] is None:
                busy = True
                if n == 1 and a is not None and b is not None and b[1] != a[1]:
                    lossless[p] = TwoByTwoType.TYPE2 if b[1] > a[1] else TwoByTwoType.TYPE3
                elif a != b:
                    lossless[p] = TwoByTwoType.TYPE4
        if not busy:
            break
    if lossy:
        return {p: st.type for p, st in states.items()}
    return {p: (t if t is not None else TwoByTwoType.TYPE1) for p, t in lossless.items()}


def infer_all_2x2_simulated(sim: DagSimulator, count_max: int = DEFAULT_COUNT_MAX,
                            lossy: bool = True, state=None, checkpoints=None):
    """Fast path of infer_all_2x2 running inside the simulation kernel.

    Returns a list of pair maps, one per checkpoint (default: count_max only).
    """
    from .simnet import _state
    st = _state(0 if state is None else state)
    snaps, _ = sim.trial(count_max, lossy, st, checkpoints)
    pairs = list(combinations(sim.routing.receivers, 2))
    return [{p: TwoByTwoType(int(row[i])) for i, p in enumerate(pairs)} for row in snaps]


def simulator_oracle(sim: DagSimulator, state, receivers=None):
    """Adapter: oracle(u) -> (R1, R2), or a full map when receivers is None."""
    def run(u):
        obs = sim.experiment(u, state)
        if receivers is None:
            return obs.vectors
        return tuple(obs[r] for r in receivers)
    return run


def countmax_for_confidence(alpha: float, p_same: float) -> int:
    """Experiments needed so that a two-join component is told apart with probability alpha."""
    if not 0.5 < alpha < 1.0:
        raise DegenerateProbability(f"alpha must lie in (0.5, 1), got {alpha}")
    if p_same == 0.0:
        return 1
    if not 0.0 < p_same < 1.0:
        raise DegenerateProbability(f"p_same must lie in (0, 1), got {p_same}")
    c = math.log(alpha / (1.0 - alpha)) / -math.log(p_same)
    # guard float noise just above an integer
    return max(1, math.ceil(c - 1e-9))


def confidence_after(count_max: int, p_same: float) -> float:
    return 1.0 / (1.0 + p_same ** count_max)


def type4_same_probability(d1: float, d2: float, W: float, f: float = 0.5) -> float:
    """Idealized chance that a type-4 component yields equal observations at a random offset."""
    return min(1.0, max(0.0, 1.0 - abs(d1 - d2) / ((1.0 - f) * W)))


# --------------------------------------------------------------- reference tables

def _swap(rows):
    return {(b, a) for a, b in rows}


_LOSS_ROWS = {(None, None), (None, X12), (None, X1), (None, X2), (X12, None), (X1, None), (X2, None)}
_EQUAL_ROWS = {(X12, X12), (X1, X1), (X2, X2)}

LOSSLESS_OBSERVATIONS = {
    TwoByTwoType.TYPE1: {(X12, X12), (X1, X1)},
    TwoByTwoType.TYPE2: {(X12, X1_2X2)},
    TwoByTwoType.TYPE3: {(X1_2X2, X12)},
    TwoByTwoType.TYPE4: {(X12, X12), (X1, X1), (X12, X1), (X1, X12)},
}

_TYPE2_LOSSY = ({(None, X1_2X2), (None, X12), (None, X1), (None, X2), (X12, None), (X1, None),
                 (X2, None), (None, None)}
                | _EQUAL_ROWS
                | {(X12, X1_2X2), (X1, X12), (X1, X2), (X12, X2)})

LOSSY_OBSERVATIONS = {
    TwoByTwoType.TYPE1: _LOSS_ROWS | _EQUAL_ROWS,
    TwoByTwoType.TYPE2: _TYPE2_LOSSY,
    TwoByTwoType.TYPE3: _swap(_TYPE2_LOSSY),
    TwoByTwoType.TYPE4: (_LOSS_ROWS | _EQUAL_ROWS
                         | {(X1, X12), (X12, X1), (X1, X2), (X2, X1), (X12, X2), (X2, X12)}),
}

# upstream joining point codes with (1, 1), downstream (or the R2 one) with (2, 3)
PARTIAL_ORDER_PAIR = {"low": (1, 1), "high": (2, 3)}

_TYPE2_RANDOM = {((1, 1), (2, 2)), ((1, 0), (2, 0)), ((0, 1), (0, 3)), ((1, 1), (2, 5)),
                 ((1, 0), (2, 3)), ((1, 0), (0, 3)), ((1, 1), (0, 3))}

PARTIAL_ORDER_OBSERVATIONS = {
    TwoByTwoType.TYPE1: {(X12, X12), (X1, X1), (X2, X2)},
    TwoByTwoType.TYPE2: _TYPE2_RANDOM,
    TwoByTwoType.TYPE3: _swap(_TYPE2_RANDOM),
    TwoByTwoType.TYPE4: {((1, 1), (2, 3)), ((1, 0), (2, 0)), ((0, 1), (0, 3)), ((1, 0), (2, 3)),
                         ((1, 1), (2, 0)), ((1, 0), (0, 3)), ((0, 1), (2, 0)), ((1, 1), (0, 3)),
                         ((0, 1), (2, 3))},
}


def partial_order_table(kind: int) -> dict:
    """Join-node coefficient table for the 2-by-2 fixture of the given type."""
    low, high = PARTIAL_ORDER_PAIR["low"], PARTIAL_ORDER_PAIR["high"]
    if kind == 1:
        return {"J": low}
    if kind == 3:
        # the join feeding R2 sits upstream here
        return {"J2": low, "J1": high}
    return {"J1": low, "J2": high}
