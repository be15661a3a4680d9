import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggsampling.errors import ConditionsViolated, IndexOutOfRange, SingularSystem
from aggsampling.graphs_io import directed_cycle, path_graph, rng_stream, shift_from_graph
from aggsampling.sampling import (
    SelectionPlan, admissible_selections, aggregate, aggregate_spectral, aggregation_interpolate,
    aggregation_sample, build_psi_i, check_recovery_conditions, selection_interpolate, solve_vandermonde,
)
from aggsampling.spectral import build_psi, decompose, gft, synthesize_bandlimited

from conftest import er_system, rel


def test_cycle_aggregation_reverses_signal():
    x = np.arange(1, 7, dtype=float)
    y = aggregate(shift_from_graph(directed_cycle(6)), x, 0, 6).values
    assert np.array_equal(y.real, [1, 6, 5, 4, 3, 2])


def test_identity_aggregation_is_constant():
    x = np.array([3.0, -1.0, 2.0])
    assert np.allclose(aggregate(np.eye(3), x, 1, 5).values, -1)


def test_aggregate_matches_spectral_on_er():
    S, d = er_system(15, 0.2, 3)
    rng = rng_stream(3)
    x = rng.standard_normal(15)
    xh = gft(d, x).coefficients
    for node in range(15):
        a = aggregate(S, x, node, 15).values
        b = aggregate_spectral(d, xh, node, 15).values
        assert rel(a, b) < 1e-10


def test_aggregate_spectral_single_frequency(er12):
    _, d = er12
    y = aggregate_spectral(d, np.eye(12)[0], 4, 6).values
    assert np.allclose(y, d.eigenvalues[0] ** np.arange(6) * d.eigenvectors[4, 0])
    assert np.allclose(aggregate_spectral(d, np.zeros(12), 4, 6).values, 0)


def test_aggregation_sample_plans():
    seq = aggregate(np.eye(6) * 2, np.ones(6), 0, 6)
    assert np.allclose(aggregation_sample(seq, SelectionPlan.first(3, 6)), [1, 2, 4])
    assert np.allclose(aggregation_sample(seq, SelectionPlan.full(6)), seq.values)
    # rows 2, 4, 6 in 1-based terms
    assert np.allclose(aggregation_sample(seq, SelectionPlan.structured_plan(1, 2, 3, 6)), [2, 8, 32])


def test_selection_plan_validation():
    with pytest.raises(IndexOutOfRange):
        SelectionPlan.structured_plan(2, 2, 3, 6)
    with pytest.raises(ValueError):
        SelectionPlan(4, (1, 1))


def test_selection_interpolation_cycle():
    S = shift_from_graph(directed_cycle(6))
    d = decompose(S, mode="analytic_cycle")
    sup = (0, 2, 4)
    x = synthesize_bandlimited(d, sup, rng=rng_stream(7))
    plan = SelectionPlan(6, (0, 2, 4))
    out = selection_interpolate(d, sup, plan, x[[0, 2, 4]])
    assert rel(out.signal, x) < 1e-12


def test_selection_interpolation_full_plan(er12):
    _, d = er12
    x = rng_stream(2).standard_normal(12)
    out = selection_interpolate(d, range(12), SelectionPlan.full(12), x)
    assert rel(out.signal, x) < 1e-10


def test_selection_interpolation_er():
    _, d = er_system(20, 0.2, 4)
    x = synthesize_bandlimited(d, (0, 1, 2), rng=rng_stream(4))
    plan = SelectionPlan(20, (3, 9, 15))
    out = selection_interpolate(d, (0, 1, 2), plan, plan.apply(x))
    assert rel(out.signal, x) < 1e-8


def test_one_bandlimited_from_single_value(er12):
    S, d = er12
    k = 3
    x = 2.5 * d.eigenvectors[:, k]
    node = 6
    out = aggregation_interpolate(d, (k,), node, SelectionPlan.first(1, 1), [x[node]])
    assert np.isclose(out.coefficients[0], x[node] / d.eigenvectors[node, k])
    assert rel(out.signal, x) < 1e-12


def test_cycle_aggregation_interpolation():
    S = shift_from_graph(directed_cycle(6))
    d = decompose(S, mode="analytic_cycle")
    sup = (0, 1, 2)
    x = synthesize_bandlimited(d, sup, rng=rng_stream(9))
    y = aggregation_sample(aggregate(S, x, 0, 3), SelectionPlan.first(3, 3))
    assert rel(aggregation_interpolate(d, sup, 0, SelectionPlan.first(3, 3), y).signal, x) < 1e-12


@pytest.mark.parametrize("method", ["direct", "factorized"])
def test_aggregation_interpolation_er(method):
    S, d = er_system(20, 0.2, 11)
    sup = (0, 1, 2)
    x = synthesize_bandlimited(d, sup, rng=rng_stream(11))
    plan = SelectionPlan.first(3, 3)
    y = aggregation_sample(aggregate(S, x, 3, 3), plan)
    assert rel(aggregation_interpolate(d, sup, 3, plan, y, method=method).signal, x) < 1e-8


def test_factorized_matches_direct():
    S, d = er_system(12, 0.4, 2)
    sup = (0, 2, 5)
    plan = SelectionPlan.structured_plan(1, 2, 3, 6)
    x = synthesize_bandlimited(d, sup, rng=rng_stream(5))
    y = aggregation_sample(aggregate(S, x, 7, 6), plan)
    a = aggregation_interpolate(d, sup, 7, plan, y, method="direct").coefficients
    b = aggregation_interpolate(d, sup, 7, plan, y, method="factorized").coefficients
    assert rel(a, b) < 1e-10


def test_recovery_conditions_examples():
    assert not check_recovery_conditions(decompose(np.eye(3)), (0, 1), 0).distinct_eigenvalues
    d = decompose(shift_from_graph(path_graph(3)))
    report = check_recovery_conditions(d, (2,), 1)
    assert not report.nonzero_pattern and report.offending_indices == (2,)
    dc = decompose(shift_from_graph(directed_cycle(7)), mode="analytic_cycle")
    for node in range(7):
        assert check_recovery_conditions(dc, range(7), node).passed


def test_conditions_enforced():
    d = decompose(shift_from_graph(path_graph(3)))
    with pytest.raises((ConditionsViolated, SingularSystem)):
        aggregation_interpolate(d, (0, 2), 1, SelectionPlan.first(2, 2), [1.0, 1.0], enforce_conditions=True)


def test_admissible_selections_small():
    assert [p.picks for p in admissible_selections(4, 2)] == [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)]
    assert [p.picks for p in admissible_selections(5, 5)] == [(0, 1, 2, 3, 4)]


def test_admissible_selections_against_filter():
    got = {p.picks for p in admissible_selections(6, 3)}
    brute = {c for c in itertools.combinations(range(6), 3) if c[1] - c[0] == c[2] - c[1]}
    assert got == brute and len(got) == 6


def test_build_psi_i_definition(er12):
    _, d = er12
    sup = [1, 4, 7]
    naive = build_psi(d, 8) @ np.diag(d.eigenvectors[5]) @ np.eye(12)[:, sup]
    assert np.allclose(build_psi_i(d, 5, sup, 8), naive, atol=1e-14)


def test_vandermonde_solver_matches_dense():
    rng = rng_stream(4)
    nodes = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    rhs = rng.standard_normal(6)
    dense = np.linalg.solve(np.vander(nodes, increasing=True).T, rhs)
    assert rel(solve_vandermonde(nodes, rhs), dense) < 1e-10


def test_structured_plans_invertible_small_graphs():
    S, d = er_system(10, 0.4, 8)
    sup = (0, 1, 2)
    for plan in admissible_selections(10, 3):
        lamN0 = d.eigenvalues[list(sup)] ** plan.structured[1]
        if np.min(np.abs(lamN0[:, None] - lamN0[None, :]) + np.eye(3)) < 1e-6:
            continue
        M = plan.apply(build_psi(d, 10)[:, list(sup)])
        assert np.linalg.cond(M) < 1e12


@settings(max_examples=30, deadline=None)
@given(st.integers(6, 18), st.integers(1, 4), st.integers(0, 2**31))
def test_round_trip_property(N, K, seed):
    S, d = er_system(N, 0.35, seed)
    rng = rng_stream(seed, 1)
    sup = tuple(range(K))
    node = int(rng.integers(N))
    if not check_recovery_conditions(d, sup, node).passed:
        return
    x = synthesize_bandlimited(d, sup, rng=rng)
    plan = SelectionPlan.first(K, K)
    y = aggregation_sample(aggregate(S, x, node, K), plan)
    try:
        out = aggregation_interpolate(d, sup, node, plan, y)
    except SingularSystem:
        return
    if out.condition_number < 1e6:
        assert rel(out.signal, x) < 1e-8
