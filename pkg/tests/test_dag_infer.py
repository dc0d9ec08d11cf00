import math

import pytest
from hypothesis import given, strategies as st

from nctomo import engine
from nctomo.dag_infer import (LOSSLESS_OBSERVATIONS, LOSSY_OBSERVATIONS, PARTIAL_ORDER_OBSERVATIONS,
                              Group, classify_observation, confidence_after, countmax_for_confidence,
                              infer_2x2_lossless, infer_2x2_lossy, infer_all_2x2,
                              infer_all_2x2_simulated, partial_order_table, simulator_oracle,
                              type4_same_probability)
from nctomo.errors import DegenerateProbability, NoEvidence, OracleFailure
from nctomo.netgraph import abilene, all_pair_types, two_by_two_fixture
from nctomo.netgraph.routing import TwoByTwoType as T
from nctomo.simnet import DagSimulator, ExperimentTiming


def _fixture(kind, p=0.0):
    topo, rt = two_by_two_fixture(kind)
    if kind == 4:
        topo = topo.with_delay("B2", "J2", 20.0)
    return DagSimulator(topo.with_loss(p), rt, ExperimentTiming()), rt


@pytest.mark.parametrize("kind", [1, 2, 3, 4])
def test_lossless_recovers_each_type(kind):
    sim, _ = _fixture(kind)
    oracle = simulator_oracle(sim, engine.seed_state(kind), receivers=("R1", "R2"))
    got, n = infer_2x2_lossless(oracle, 250, seed=kind, return_count=True)
    assert got == T(kind)
    if kind in (2, 3):
        assert n == 1


@pytest.mark.parametrize("kind", [1, 2, 3, 4])
def test_lossy_recovers_each_type(kind):
    sim, _ = _fixture(kind, p=0.05)
    oracle = simulator_oracle(sim, engine.seed_state(10 + kind), receivers=("R1", "R2"))
    assert infer_2x2_lossy(oracle, 250, seed=kind) == T(kind)


def test_lossless_rejects_loss():
    with pytest.raises(OracleFailure):
        infer_2x2_lossless(lambda u: (None, (1, 1)))


def test_oracle_exceptions_are_wrapped():
    def broken(u):
        raise RuntimeError("boom")
    with pytest.raises(OracleFailure):
        infer_2x2_lossy(broken)


def test_no_evidence():
    with pytest.raises(NoEvidence):
        infer_2x2_lossy(lambda u: (None, None), 20, strict=True)
    assert infer_2x2_lossy(lambda u: (None, None), 20) is T.UNKNOWN


def test_classification_groups():
    assert classify_observation(None, (1, 1)).group is Group.LOSS
    assert classify_observation((1, 1), (1, 1)).group is Group.EQUAL
    og = classify_observation((1, 1), (1, 2))
    assert og.group is Group.DIFFERENT and og.sign < 0


def _replay(rows, lossy):
    it = iter(rows)
    fn = infer_2x2_lossy if lossy else infer_2x2_lossless
    return fn(lambda u: next(it), len(rows))


def test_observation_tables_are_consistent():
    # after a synchronized first experiment, each lossless row keeps or reaches its type
    sync = {T.TYPE1: ((1, 1), (1, 1)), T.TYPE2: None, T.TYPE3: None, T.TYPE4: ((1, 1), (1, 1))}
    for t, rows in LOSSLESS_OBSERVATIONS.items():
        for row in rows:
            got = _replay([r for r in (sync[t], row) if r is not None], lossy=False)
            assert got == t or (t is T.TYPE4 and got is T.TYPE1 and row[0] == row[1])
    # lossy rows never push the estimate past the true type
    for t, rows in LOSSY_OBSERVATIONS.items():
        for row in rows:
            got = _replay([row], lossy=True)
            assert t is T.TYPE4 or int(got) in (0, 1, int(t))
    assert PARTIAL_ORDER_OBSERVATIONS[T.TYPE3] == {(b, a) for a, b in PARTIAL_ORDER_OBSERVATIONS[T.TYPE2]}


def test_partial_order_tables():
    assert partial_order_table(1) == {"J": (1, 1)}
    assert partial_order_table(2) == {"J1": (1, 1), "J2": (2, 3)}
    assert partial_order_table(3) == {"J2": (1, 1), "J1": (2, 3)}


def test_countmax_for_confidence():
    assert countmax_for_confidence(0.99, 0.0) == 1
    assert countmax_for_confidence(0.99, 0.5) == math.ceil(math.log(99) / math.log(2))
    with pytest.raises(DegenerateProbability):
        countmax_for_confidence(0.5, 0.5)
    with pytest.raises(DegenerateProbability):
        countmax_for_confidence(0.9, 1.0)


@given(st.floats(0.51, 0.999), st.floats(0.01, 0.99))
def test_countmax_reaches_confidence(alpha, p_same):
    c = countmax_for_confidence(alpha, p_same)
    assert confidence_after(c, p_same) >= alpha - 1e-12
    if c > 1:
        assert confidence_after(c - 1, p_same) < alpha + 1e-12


def test_type4_same_probability():
    assert type4_same_probability(10.0, 10.0, 100.0) == 1.0
    assert type4_same_probability(0.0, 20.0, 100.0) == pytest.approx(0.6)


def test_all_pairs_abilene_lossless():
    topo, rt = abilene()
    sim = DagSimulator(topo, rt, ExperimentTiming())
    truth = all_pair_types(rt, "S1", "S2")
    (got,) = infer_all_2x2_simulated(sim, 250, False, engine.seed_state(0))
    assert got == truth


def test_all_pairs_generic_matches_fast_path():
    topo, rt = abilene()
    sim = DagSimulator(topo, rt, ExperimentTiming())
    oracle = simulator_oracle(sim, engine.seed_state(1))
    got = infer_all_2x2(oracle, rt.receivers, 250, seed=1, lossy=False)
    assert got == all_pair_types(rt, "S1", "S2")
