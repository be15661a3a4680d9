import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggsampling.errors import DefectiveOrIllConditioned, DimensionMismatch, IndexOutOfRange, InvalidSupport
from aggsampling.graphs_io import directed_cycle, path_graph, rng_stream, shift_from_graph
from aggsampling.spectral import (
    build_psi, canonical_order, decompose, gft, igft, node_pattern, synthesize_bandlimited, vandermonde,
)

from conftest import er_system, rel


def test_identity_decomposition():
    d = decompose(np.eye(3))
    assert np.allclose(d.eigenvalues, 1)
    assert d.is_normal
    assert np.allclose(np.abs(d.eigenvectors), np.eye(3))


def test_cycle_canonical_order():
    d = decompose(shift_from_graph(directed_cycle(4)))
    assert np.allclose(d.eigenvalues, [1, -1j, 1j, -1], atol=1e-12)


def test_cycle_analytic_basis_is_dft():
    N = 4
    d = decompose(shift_from_graph(directed_cycle(N)), mode="analytic_cycle")
    assert np.allclose(d.eigenvalues, np.exp(-2j * np.pi * np.arange(N) / N))
    F = np.exp(2j * np.pi * np.outer(np.arange(N), np.arange(N)) / N) / np.sqrt(N)
    assert np.allclose(d.eigenvectors, F)
    assert np.allclose(node_pattern(d, 0), 0.5)
    assert np.allclose(gft(d, np.ones(4)).coefficients, [2, 0, 0, 0])
    assert np.allclose(igft(d, [2, 0, 0, 0]), 1)


def test_path3_eigenvalues():
    d = decompose(shift_from_graph(path_graph(3)))
    assert np.allclose(d.eigenvalues, [np.sqrt(2), -np.sqrt(2), 0], atol=1e-12)


def test_defective_shift_rejected():
    with pytest.raises(DefectiveOrIllConditioned):
        decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_symmetric_mode_requires_hermitian():
    with pytest.raises(DefectiveOrIllConditioned):
        decompose(np.array([[0.0, 1.0], [0.0, 0.0]]), mode="symmetric")


def test_tie_break_by_phase():
    order = canonical_order(np.array([-1, 1j, -1j, 1, 0.5]))
    assert order[:4] == [3, 2, 1, 0]
    assert order[4] == 4


@pytest.mark.parametrize("rows, lam, expected", [
    (3, [1, 2], [[1, 1], [1, 2], [1, 4]]),
    (2, [1, -1], [[1, 1], [1, -1]]),
    (4, [0.5], [[1], [0.5], [0.25], [0.125]]),
])
def test_vandermonde_rows(rows, lam, expected):
    assert np.array_equal(vandermonde(lam, rows), np.array(expected, dtype=complex))


def test_build_psi_recurrence(er12):
    _, d = er12
    psi = build_psi(d, 20)
    assert np.array_equal(psi[0], np.ones(12))
    assert np.array_equal(psi[1:], psi[:-1] * d.eigenvalues)


def test_gft_basis_vector(er12):
    _, d = er12
    xh = gft(d, d.eigenvectors[:, 0]).coefficients
    assert np.allclose(xh, np.eye(12)[0], atol=1e-12)


def test_synthesize_bandlimited():
    _, d = er_system(20, 0.2, 1)
    x = synthesize_bandlimited(d, (0, 3, 7), rng=rng_stream(1))
    xh = gft(d, x).coefficients
    mask = np.ones(20, bool)
    mask[[0, 3, 7]] = False
    assert np.max(np.abs(xh[mask])) < 1e-12
    assert np.allclose(synthesize_bandlimited(d, (2,), [0.0]), 0)
    assert np.allclose(synthesize_bandlimited(d, (0,), [3.0]), 3 * d.eigenvectors[:, 0])


def test_errors(er12):
    _, d = er12
    with pytest.raises(DimensionMismatch):
        gft(d, np.ones(5))
    with pytest.raises(IndexOutOfRange):
        node_pattern(d, 12)
    with pytest.raises(InvalidSupport):
        synthesize_bandlimited(d, (1, 1), [1, 2])


def test_user_supplied_columns_normalised():
    S = np.array([[2.0, 1.0], [0.0, 1.0]])
    lam, V = np.linalg.eig(S)
    d = decompose(S, mode="user_supplied", eigenvectors=V * 3, eigenvalues=lam)
    assert np.allclose(np.linalg.norm(d.eigenvectors, axis=0), 1)
    assert rel(d.reconstruct(), S) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 16), st.integers(0, 2**31), st.booleans())
def test_decomposition_properties(N, seed, symmetric):
    rng = rng_stream(seed)
    A = rng.standard_normal((N, N))
    S = A + A.T if symmetric else A
    d = decompose(S)
    assert rel(d.reconstruct(), S) <= 1e-10
    x = rng.standard_normal(N)
    assert rel(igft(d, gft(d, x).coefficients), x) <= 1e-10
    if d.is_normal:
        assert np.linalg.norm(d.inverse_eigenvectors - d.eigenvectors.conj().T) <= 1e-10
    again = decompose(S)
    assert np.array_equal(again.eigenvalues, d.eigenvalues)
    mod = np.abs(d.eigenvalues)
    assert np.all(np.diff(mod) <= 1e-12 * max(mod.max(), 1))
