import json

import numpy as np
import pytest

from aggsampling import cli
from aggsampling.graphs_io import load_results, strip_volatile


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def results(out, name):
    return load_results(out / f"{name}.json")["results"]


def test_decompose_cycle_order(tmp_path):
    code, out = run(tmp_path, "decompose", "--graph", "cycle:4")
    assert code == 0
    rec = results(out, "decompose")[0]
    assert np.allclose(rec["eigenvalues"], [1, -1j, 1j, -1], atol=1e-12)
    assert rec["is_normal"]
    assert (out / "eigenvalues.csv").read_text().startswith("index,re,im,modulus\n")


def test_decompose_identity_shift(tmp_path):
    edges = tmp_path / "e.csv"
    edges.write_text("src,dst,weight\n1,2,1.0\n")
    code, out = run(tmp_path, "decompose", "--graph", str(edges), "--shift", "identity_minus_adjacency")
    assert code == 0


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["recover", "--no-such-flag"])
    assert exc.value.code == 1
    assert cli.main(["decompose", "--graph", str(tmp_path / "missing.csv")]) == 3
    assert cli.main(["recover", "--graph", "cycle:6", "--bandwidth", "3", "--node", "7"]) == 1
    edges = tmp_path / "jordan.csv"
    edges.write_text("src,dst,weight\n1,2,1.0\n")
    # a single directed edge has a defective adjacency matrix
    assert cli.main(["decompose", "--graph", str(edges), "--directed"]) == 2


def test_recover_noiseless(tmp_path):
    code, out = run(tmp_path, "recover", "--graph", "er:15:0.3", "--bandwidth", "3", "--trials", "20",
                    "--seed", "2", "--node", "4")
    assert code == 0
    assert results(out, "recover")[0]["success_rate"] == 1.0
    lines = (out / "recover_trials.csv").read_text().splitlines()
    assert lines[0] == "trial,node,error,success" and len(lines) == 21


def test_zero_noise_matches_noiseless(tmp_path):
    base = ["recover", "--graph", "er:12:0.3", "--bandwidth", "2", "--trials", "5", "--seed", "3"]
    assert cli.main(base + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(base + ["--noise", "observation", "--sigma2", "0", "--out", str(tmp_path / "b")]) == 0
    a = load_results(tmp_path / "a" / "recover.json")["results"][0]
    b = load_results(tmp_path / "b" / "recover.json")["results"][0]
    assert a["success_rate"] == b["success_rate"] == 1.0
    assert np.isclose(a["max_error"], b["max_error"], rtol=0, atol=1e-12)


def test_support_id_zero_observations(tmp_path):
    code, out = run(tmp_path, "support-id", "--graphs", "2", "--nodes-per-graph", "2", "--observations", "0,6",
                    "--probabilities", "0.2", "--shifts", "adjacency")
    assert code == 0
    rows = (out / "support_rates.csv").read_text().splitlines()
    assert rows[0] == "p,shift,observations,rate,instances"
    assert rows[1].split(",")[3] == "0.0"


def test_design_frequency_noise_all_tied(tmp_path):
    code, out = run(tmp_path, "design", "--graph", "er:10:0.4", "--bandwidth", "3", "--noise", "frequency")
    assert code == 0
    assert results(out, "design")[0]["all_tied"]


def test_design_observation_tables(tmp_path):
    code, out = run(tmp_path, "design", "--graph", "er:10:0.4", "--bandwidth", "2", "--spacing", "2",
                    "--plan", "offset:0:2")
    assert code == 0
    recs = results(out, "design")
    assert recs[0]["ranking"][0]["rank"] == 1
    assert recs[1]["name"] == "offset_choice"
    assert (out / "design_nodes.csv").read_text().startswith("rank,node,score,tied_with_best,e1,e2,e3,e4")


def test_spaceshift_rows(tmp_path):
    code, out = run(tmp_path, "spaceshift", "--graph", "hub:14:0.2", "--trials", "6", "--bandwidth", "3")
    assert code == 0
    names = [r["strategy"] for r in results(out, "spaceshift")]
    assert names[:2] == ["aggregation", "selection"] and "mixed" in names
    assert cli.main(["spaceshift", "--graph", "cycle:6"]) == 1


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 11, "graph": "er:12:0.3", "bandwidth": 2, "trials": 4}))
    code, out = run(tmp_path, "recover", "--config", str(cfg), "--trials", "3")
    assert code == 0
    doc = load_results(out / "recover.json")
    assert doc["seed"] == 11 and doc["config"]["bandwidth"] == 2 and doc["config"]["trials"] == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    assert cli.main(["decompose", "--config", str(bad)]) == 1


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GSP_SEED", "77")
    code, out = run(tmp_path, "decompose", "--graph", "er:6:0.5")
    assert code == 0 and load_results(out / "decompose.json")["seed"] == 77


def test_rerun_is_identical(tmp_path):
    args = ["recover", "--graph", "er:12:0.2", "--bandwidth", "3", "--trials", "10", "--noise", "signal",
            "--sigma2", "0.01", "--seed", "7"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = (json.loads((tmp_path / d / "recover.json").read_text()) for d in "ab")
    assert strip_volatile(a) == strip_volatile(b)
    assert (tmp_path / "a" / "recover_trials.csv").read_bytes() == (tmp_path / "b" / "recover_trials.csv").read_bytes()
