import numpy as np
import pytest

from aggsampling import experiments as ex
from aggsampling.errors import IOFailure
from aggsampling.noisy import NoiseModel
from aggsampling.sampling import SelectionPlan

from conftest import er_system


def test_parse_graph_forms(tmp_path):
    assert ex.parse_graph("cycle:5", 0).node_count == 5
    assert ex.parse_graph("star:3", 0).node_count == 4
    assert ex.parse_graph("er:10:0.3", 4).edges == ex.parse_graph("er:10:0.3", 4).edges
    with pytest.raises(IOFailure):
        ex.parse_graph(str(tmp_path / "nope.csv"), 0)
    with pytest.raises(ValueError):
        ex.parse_graph("er:ten:0.3", 0)


def test_small_recovery_sweep():
    sweep = ex.recovery_sweep(3, graphs=15)
    assert sweep.cases == len(sweep.records) > 0
    assert sweep.conditional_rate == 1.0
    assert sweep.success_rate >= 0.95


def test_support_sweep_small_is_monotone_and_paired():
    s = ex.support_sweep(4, graphs=3, nodes_per_graph=3, observations=range(0, 8),
                         shifts=("adjacency", "half_adjacency_squared"))
    for name in s.shifts:
        out = s.outcomes[name]
        assert out.shape == (s.instances, 8)
        assert not out[:, 0].any()
        assert np.all(np.diff(out.astype(int), axis=1) >= 0)
        assert np.allclose(s.rates[name], out.mean(axis=0))


def test_support_sweep_l0_with_2k_observations():
    s = ex.support_sweep(6, graphs=3, N=10, K=2, nodes_per_graph=3, observations=(4,), method="l0",
                         shifts=("adjacency",))
    assert s.rates["adjacency"][0] >= 0.5


def test_design_and_offset_tables():
    _, d = er_system(10, 0.4, 1)
    model = NoiseModel("observation", 1.0)
    rows = ex.design_table(d, (0, 1), SelectionPlan.first(2, 2), model)
    assert [r["rank"] for r in rows] == list(range(1, 11))
    assert set(rows[0]) >= {"node", "score", "e1", "e2", "e3", "e4", "tied_with_best"}
    table, choice = ex.n0_table(d, (0, 1), rows[0]["node"], 2, 6, model)
    assert [r["n0"] for r in table] == list(choice.candidates)
    assert sum(r["chosen"] for r in table) == 1


def test_recover_trials_noisy_prediction():
    S, d = er_system(12, 0.3, 2)
    recs = ex.recover_trials(S, d, 0, 2, SelectionPlan.first(2, 2), NoiseModel("observation", 0.01), 400, 5)
    emp = np.mean([r["squared_error"] for r in recs])
    assert abs(emp / recs[0]["predicted_mse"] - 1) < 0.25


def test_strategy_study_summary():
    study = ex.strategy_study(1, trials=5, N=14, K=3)
    names = [r["strategy"] for r in study.summary]
    assert names[0] == "aggregation" and "selection" in names
    for r in study.summary:
        assert r["trials"] == 5 and r["min"] <= r["median"]
