import json

import pytest

from diracgraph.cli import build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_help_documents_units(capsys):
    for cmd in ("spectrum", "sweep", "check-inequalities"):
        with pytest.raises(SystemExit):
            main([cmd, "--help"])
        assert "nondimensional" in capsys.readouterr().out


def test_validate_graph(capsys):
    code, out, _ = run(capsys, "validate-graph", "figure")
    assert code == 0 and out["half_lines"] == 3


def test_validate_graph_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate-graph", str(tmp_path / "nope.json"))
    assert code == 1 and "IoError" in err


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--graph", "line", "--m", "1", "--c", "5", "--h", "0.05", "--L", "2")
    assert code == 0 and out["gap_ok"] and min(out["lowest_positive"]) >= 25 * (1 - 1e-8)


def test_solve_nlse(capsys):
    code, out, _ = run(capsys, "solve-nlse", "--graph", "line", "--m", "1", "--p", "3", "--h", "0.02", "--L", "30")
    assert code == 0 and out["lambda"] == pytest.approx(-0.2775, abs=2e-3) and out["mass"] == pytest.approx(1)


def test_solve_nlde(capsys):
    code, out, _ = run(capsys, "solve-nlde", "--h", "0.02", "--L", "30", "--c-list", "10", "20")
    assert code == 0
    assert [s["c"] for s in out["solutions"]] == [10.0, 20.0]
    assert all(s["residual"] <= 1e-10 for s in out["solutions"])


def test_sweep_and_config(capsys, tmp_path):
    cfg = {"graph": "line", "m": 1.0, "p": 3.0, "c_list": [10.0, 20.0, 40.0], "h": 0.02,
           "trunc_length": 30.0, "seed": 0, "out_dir": str(tmp_path / "o")}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "sweep", "--config", str(tmp_path / "c.json"), "--no-plot")
    assert code == 0 and out["rows"] == 3 and out["status"] == "ok"
    assert (tmp_path / "o" / "sweep.csv").exists() and not (tmp_path / "o" / "sweep.gp").exists()


def test_sweep_bad_config(capsys, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"graph": "line", "c_list": []}))
    code, _, err = run(capsys, "sweep", "--config", str(tmp_path / "c.json"))
    assert code == 2 and "config error" in err


def test_estimate_ec(capsys):
    code, out, _ = run(capsys, "estimate-ec", "--c", "10", "--p", "4", "--h", "0.04", "--L", "2", "--n-grid", "16")
    assert code == 0 and out["monotone"] and out["estimate_minus_half_mc2"] > -50


def test_check_inequalities(capsys):
    code, out, _ = run(capsys, "check-inequalities", "--c", "10", "--p", "4", "--h", "0.05", "--L", "2",
                       "--samples", "40")
    assert code == 0
    assert {r["inequality"] for r in out} >= {"support", "gn_S_p", "projector"}


def test_parser_lists_all_subcommands():
    text = build_parser().format_help()
    for cmd in ("validate-graph", "spectrum", "solve-nlse", "solve-nlde", "sweep", "estimate-ec",
                "check-inequalities"):
        assert cmd in text
