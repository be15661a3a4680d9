import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggsampling.errors import BudgetExceeded, Infeasible, ZeroColumn
from aggsampling.graphs_io import directed_cycle, path_graph, rng_stream, shift_from_graph
from aggsampling.sampling import SelectionPlan
from aggsampling.sparse import (
    SensingSystem, brute_force_l0, check_identifiability, coherence, is_full_spark, l1_recover, sensing_matrix,
    sensing_system,
)
from aggsampling.spectral import decompose

from conftest import er_system, rel


def planted(d, node, plan, support, rng):
    xh = np.zeros(d.size, dtype=complex if not d.is_real else float)
    xh[list(support)] = rng.choice([-1, 1], len(support)) * rng.uniform(0.5, 1.5, len(support))
    M = sensing_matrix(d, node, plan)
    return xh, sensing_system(d, node, plan, M @ xh)


def cycle(N):
    return decompose(shift_from_graph(directed_cycle(N)), mode="analytic_cycle")


def test_zero_samples_give_empty_support(er12):
    _, d = er12
    sys = sensing_system(d, 0, SelectionPlan.first(4, 4), np.zeros(4))
    support, x = brute_force_l0(sys, 2)
    assert support == () and np.all(x == 0)
    for mode in ("equality_constrained", "penalized"):
        res = l1_recover(sys, 2, mode=mode, gamma=0.1)
        assert np.all(res.coefficients == 0)


def test_one_sparse_from_eigenvalue_ratio():
    d = cycle(7)
    k, alpha = 3, 1.7
    y = alpha * d.eigenvectors[0, k] * d.eigenvalues[k] ** np.arange(2)
    sys = sensing_system(d, 0, SelectionPlan.first(2, 2), y)
    support, x = brute_force_l0(sys, 1)
    assert support == (k,)
    assert np.isclose(y[1] / y[0], d.eigenvalues[k])
    assert np.isclose(x[k], y[0] / d.eigenvectors[0, k])
    res = l1_recover(sys, 1)
    assert res.success and res.support == (k,) and np.allclose(res.coefficients, x, atol=1e-8)


def test_l0_recovers_planted_support_er():
    rng = rng_stream(31)
    hits = 0
    for seed in range(40):
        _, d = er_system(10, 0.2, seed)
        plan = SelectionPlan.first(4, 4)
        node = int(rng.integers(10))
        if not check_identifiability(d, node, plan, 2).passed:
            continue
        sup = tuple(sorted(rng.choice(10, 2, replace=False)))
        xh, sys = planted(d, node, plan, sup, rng)
        assert brute_force_l0(sys, 2)[0] == sup
        hits += 1
    assert hits >= 5


def test_l0_budget_and_infeasible():
    _, d = er_system(31, 0.3, 1)
    with pytest.raises(BudgetExceeded):
        brute_force_l0(sensing_system(d, 0, SelectionPlan.first(2, 2), [1.0, 2.0]), 1)
    d = cycle(6)
    M = sensing_matrix(d, 0, SelectionPlan.first(4, 4))
    b = M[:, :3].sum(axis=1)
    with pytest.raises(Infeasible):
        brute_force_l0(SensingSystem(M, b, 0, SelectionPlan.first(4, 4)), 2)


def test_identifiability_examples():
    assert not check_identifiability(decompose(np.eye(4)), 0, SelectionPlan.first(2, 2), 1).passed
    rep = check_identifiability(decompose(shift_from_graph(path_graph(3))), 0, SelectionPlan.first(2, 2), 1)
    assert not rep.nonzero_eigenvalues and not rep.passed
    for N in (5, 7, 8):
        d = cycle(N)
        for node in range(N):
            rep = check_identifiability(d, node, SelectionPlan.first(4, 4), 2)
            assert rep.nonzero_pattern and rep.nonzero_eigenvalues and rep.distinct_powers
            assert rep.full_spark and rep.passed


def test_identifiability_restricted_verdict():
    d = decompose(shift_from_graph(path_graph(3)))
    rep = check_identifiability(d, 0, SelectionPlan.first(2, 2), 1, support=(0,))
    assert rep.restricted_passed and not rep.passed


def test_full_spark():
    assert is_full_spark(np.vander([1.0, 2.0, 3.0, 4.0], 2, increasing=True).T)
    assert not is_full_spark(np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 1.0]]))


def test_coherence_examples():
    c = coherence(np.eye(3))
    assert c.mu == 0
    M = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]])
    c = coherence(M)
    assert np.isclose(c.mu, 1) and c.bound == 1
    with pytest.raises(ZeroColumn):
        coherence(np.array([[1.0, 0.0], [1.0, 0.0]]))


def test_coherence_matches_direct_computation(er12):
    _, d = er12
    M = sensing_matrix(d, 2, SelectionPlan.first(6, 6))
    G = np.abs(M.conj().T @ M) / np.outer(np.linalg.norm(M, axis=0), np.linalg.norm(M, axis=0))
    np.fill_diagonal(G, 0)
    assert np.isclose(coherence(M).mu, G.max())


def test_coherence_bound_implies_l1_success():
    # on a cycle the DFT-like sensing columns are incoherent enough for K = 1
    d = cycle(8)
    rng = rng_stream(4)
    plan = SelectionPlan.first(8, 8)
    c = coherence(sensing_matrix(d, 0, plan))
    assert c.bound >= 1
    for k in range(8):
        xh, sys = planted(d, 0, plan, (k,), rng)
        res = l1_recover(sys, 1)
        assert res.success and res.support == (k,)


def test_l1_success_matches_l0_small_graphs():
    rng = rng_stream(77)
    checked = 0
    for seed in range(30):
        _, d = er_system(10, 0.3, seed)
        node = int(rng.integers(10))
        plan = SelectionPlan.first(6, 6)
        sup = tuple(sorted(rng.choice(10, 2, replace=False)))
        xh, sys = planted(d, node, plan, sup, rng)
        res = l1_recover(sys, 2, normalize=False)
        if not res.success:
            continue
        support, x = brute_force_l0(sys, 2)
        assert res.support == support
        assert np.allclose(res.coefficients, x, atol=1e-8 * np.abs(x).max())
        checked += 1
    assert checked >= 10


def test_penalized_path_and_complex_fista():
    d = cycle(6)
    rng = rng_stream(8)
    plan = SelectionPlan.first(4, 4)
    xh, sys = planted(d, 1, plan, (2,), rng)
    res = l1_recover(sys, 1, mode="penalized_path")
    assert res.success and res.support == (2,)
    res = l1_recover(sys, 1, mode="penalized", gamma=1e-6)
    assert res.support == (2,)


def test_certified_uniqueness_witness():
    d = cycle(7)
    plan = SelectionPlan.first(4, 4)
    assert check_identifiability(d, 3, plan, 2).passed
    rng = rng_stream(6)
    for _ in range(100):
        xh, sys = planted(d, 3, plan, (1, 5), rng)
        assert brute_force_l0(sys, 2)[0] == (1, 5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_l0_oracle_on_certified_systems(seed, K):
    rng = rng_stream(seed)
    N = int(rng.integers(2 * K + 1, 11))
    _, d = er_system(N, 0.45, seed)
    node = int(rng.integers(N))
    plan = SelectionPlan.first(2 * K, 2 * K)
    if not check_identifiability(d, node, plan, K).passed:
        return
    sup = tuple(sorted(rng.choice(N, K, replace=False)))
    xh, sys = planted(d, node, plan, sup, rng)
    support, x = brute_force_l0(sys, K)
    assert support == sup
    assert rel(x, xh) < 1e-6


def test_squared_shift_coherence_comparison():
    # measured outcome, frozen: squaring the adjacency does not lower the
    # coherence of the node-0 sensing matrix on most ER(20, 0.2) draws
    from aggsampling.graphs_io import erdos_renyi

    lower = 0
    for seed in range(50):
        g = erdos_renyi(20, 0.2, seed)
        mu = [coherence(sensing_matrix(decompose(shift_from_graph(g, kind)), 0, SelectionPlan.first(6, 6))).mu
              for kind in ("adjacency", "half_adjacency_squared")]
        lower += mu[1] <= mu[0]
    assert lower == 9
