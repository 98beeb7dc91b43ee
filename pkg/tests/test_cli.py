import json

import pytest

from latentpeer.cli import main
from latentpeer.data import load_panel
from latentpeer.npl import npl_fit


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--G", "12", "--n", "30", "--seed", "4", "--out", str(out)]) == 0
    return out


def test_simulate_is_byte_identical(tmp_path, data_dir):
    assert main(["simulate", "--G", "12", "--n", "30", "--seed", "4", "--out", str(tmp_path)]) == 0
    for name in ("nodes.csv", "edges.csv", "truth.json"):
        assert (tmp_path / name).read_bytes() == (data_dir / name).read_bytes()
    assert json.loads((tmp_path / "truth.json").read_text())["format_version"] == 1


def test_validation_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--G", "0", "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "nodes.csv"
    bad.write_text("group_id,individual_id,y,x_1\nA,1,7,0\n")
    edges = tmp_path / "edges.csv"
    edges.write_text("group_id,from_id,to_id\n")
    assert main(["pipeline", "--nodes", str(bad), "--edges", str(edges), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_file_exits_4(tmp_path):
    code = main(["pipeline", "--nodes", str(tmp_path / "none.csv"), "--edges", str(tmp_path / "e.csv"), "--out", str(tmp_path / "o")])
    assert code == 4


def test_bad_flag_values_exit_2(tmp_path, data_dir):
    base = ["pipeline", "--nodes", str(data_dir / "nodes.csv"), "--edges", str(data_dir / "edges.csv"), "--out", str(tmp_path)]
    assert main(base + ["--alpha", "1.5"]) == 2
    assert main(base + ["--k-max", "0"]) == 2
    assert main(base + ["--ccp-tol", "-1"]) == 2


def test_pipeline_end_to_end(tmp_path, data_dir):
    out = tmp_path / "run"
    args = ["pipeline", "--nodes", str(data_dir / "nodes.csv"), "--edges", str(data_dir / "edges.csv"),
            "--boot-reps", "20", "--k-max", "3", "--seed", "1"]
    assert main(args + ["--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["format_version"] == 1 and rep["kind"] == "pipeline_report"
    assert 1 <= rep["selection"]["selected_k"] <= 3
    assert len(rep["selection"]["ic_table"]) == 3
    for name in ("report.txt", "ic.csv", "membership.csv", "estimates.csv", "ic.png", "slopes.png"):
        assert (out / name).stat().st_size > 0
    ic = (out / "ic.csv").read_text().splitlines()
    assert ic[0] == "# format_version=1" and ic[1] == "k,ic,fit_term,penalty"
    for c in rep["clusters"]:
        if not c.get("empty"):
            for r in c["inference"]:
                assert r["ci"][0] <= r["debiased"] <= r["ci"][1]
    # same seed, same report bytes
    out2 = tmp_path / "run2"
    assert main(args + ["--out", str(out2), "--no-figures"]) == 0
    assert (out2 / "report.json").read_bytes() == (out / "report.json").read_bytes()
    assert not (out2 / "ic.png").exists()


def test_single_cluster_pipeline_equals_pooled_fit(tmp_path, data_dir):
    out = tmp_path / "k1"
    args = ["pipeline", "--nodes", str(data_dir / "nodes.csv"), "--edges", str(data_dir / "edges.csv"),
            "--out", str(out), "--k-max", "1", "--boot-reps", "5", "--no-figures"]
    assert main(args) == 0
    rep = json.loads((out / "report.json").read_text())
    pooled = npl_fit(load_panel(data_dir / "nodes.csv", data_dir / "edges.csv"))
    est = rep["clusters"][0]["estimate"]
    assert [est["peer_effect"], est["x_1"]] == pooled.theta.tolist()


@pytest.mark.parametrize("preset,csv_name", [("table1", "table1.csv"), ("table2-oracle", "table2.csv"), ("table3", "table3.csv")])
def test_montecarlo_presets(tmp_path, preset, csv_name):
    out = tmp_path / preset
    args = ["montecarlo", "--preset", preset, "--reps", "1", "--G", "10", "--n", "25",
            "--boot-reps", "10", "--k-max", "3", "--out", str(out)]
    assert main(args) == 0
    js = json.loads((out / "summary.json").read_text())
    assert js["format_version"] == 1 and js["replications"] == 1
    assert (out / csv_name).read_text().startswith("# format_version=1\n")
    assert any(p.suffix == ".png" for p in out.iterdir())
