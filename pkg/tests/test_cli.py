import json

import pytest

from nctomo.cli import main


def test_gen_round_trips(tmp_path, capsys):
    out = tmp_path / "a.json"
    assert main(["gen", "--topology", "abilene", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert "nodes" in doc or "topology" in doc
    assert main(["infer-2xn", "--topology", str(out), "--mode", "lossless"]) == 0
    assert "0 of 36 pairs differ" in capsys.readouterr().out


def test_infer_tree(capsys):
    assert main(["infer-tree", "--mode", "lossless"]) == 0
    assert "matches input: True" in capsys.readouterr().out


def test_sim_trace(capsys):
    assert main(["sim", "--topology", "2x2-type2"]) == 0
    assert "R2: (1, 2)" in capsys.readouterr().out


def test_merge_oracle(capsys):
    assert main(["merge", "--topology", "abilene", "--oracle"]) == 0
    cap = capsys.readouterr()
    assert "9/9" in cap.err
    assert json.loads(cap.out)


def test_sweep_and_report(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--mode", "tree-iter2", "--p", "0", "0.1", "--trials", "20",
                 "--out", str(out)]) == 0
    assert main(["report", str(out)]) == 0
    assert "tree-iter2" in capsys.readouterr().out


def test_errors_exit_with_two(capsys):
    assert main(["infer-tree", "--topology", "abilene"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["bogus"])
