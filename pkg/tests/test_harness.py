import pytest

from nctomo.errors import ConfigError
from nctomo.harness import ResultRow, ResultTable, SweepConfig, emit_report, load_report, run_sweep


def test_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(mode="nope")
    with pytest.raises(ConfigError):
        SweepConfig(p=[1.5])
    with pytest.raises(ConfigError):
        SweepConfig(trials=0)
    with pytest.raises(ConfigError):
        SweepConfig(topology="fig1", mode="dag-lossy")
    with pytest.raises(ConfigError):
        run_sweep(SweepConfig(topology="abilene", mode="tree-iter1"))


def test_row_merge_pools_counts():
    a = ResultRow.from_counts("fig1", "tree-lossy", 0.1, 2, 0, 100, 10, 1.0)
    b = ResultRow.from_counts("fig1", "tree-lossy", 0.1, 2, 0, 300, 20, 2.0)
    m = a.merge(b)
    assert (m.trials, m.errors, m.error_rate) == (400, 30, 0.075)
    assert m.stderr == pytest.approx((0.075 * 0.925 / 400) ** 0.5)


def test_report_round_trip(tmp_path):
    cfg = SweepConfig(mode="tree-iter1", p=[0.0, 0.1], M=[1, 3], trials=40, seed=3)
    table = run_sweep(cfg)
    assert len(table.rows) == 4
    assert table.lookup(p=0.0, M=1).errors == 0
    for fmt in ("csv", "json"):
        path = tmp_path / f"r.{fmt}"
        emit_report(table, path, fmt)
        back = load_report(path)
        assert [(r.p, r.M, r.errors, r.error_rate) for r in back.rows] == \
               [(r.p, r.M, r.errors, r.error_rate) for r in table.rows]
    with pytest.raises(ConfigError):
        emit_report(table, None, "xml")
    assert ResultTable.from_csv(table.to_csv()).rows[0].topology == "fig1"


def test_sweep_is_seeded():
    cfg = dict(mode="tree-lossy", p=[0.1], M=[2], trials=30, seed=9)
    assert run_sweep(SweepConfig(**cfg)).rows[0].errors == run_sweep(SweepConfig(**cfg)).rows[0].errors


def test_dag_sweep_checkpoints():
    cfg = SweepConfig(topology="abilene", mode="dag-lossless", countMax=[250, 5], trials=20)
    table = run_sweep(cfg)
    assert [r.countMax for r in table.rows] == [5, 250]
    assert table.rows[1].errors <= table.rows[0].errors
