"""Graph-shift eigendecomposition, graph Fourier transform and Vandermonde blocks.

Everything here is computed in complex arithmetic, including real symmetric
shifts, so directed graphs and the DFT case share one code path.  Node and
frequency indices are 0-based throughout the Python API.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DefectiveOrIllConditioned,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidSupport,
)

RECONSTRUCTION_TOL = 1e-10
NORMALITY_TOL = 1e-10
HERMITIAN_TOL = 1e-12
MAX_CONDITION = 1e12
# relative tolerance under which two moduli/phases are considered tied
ORDER_TIE_TOL = 1e-9

MODES = ("auto", "symmetric", "analytic_cycle", "user_supplied", "general")


@dataclass(frozen=True)
class ShiftOperator:
    """Dense graph-shift matrix plus the sparsity pattern it was built from."""

    matrix: np.ndarray
    pattern: frozenset = field(default=None)

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=complex)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
            raise DimensionMismatch(f"shift must be a non-empty square matrix, got {S.shape}")
        S.setflags(write=False)
        object.__setattr__(self, "matrix", S)
        if self.pattern is None:
            rows, cols = np.nonzero(S)
            object.__setattr__(self, "pattern", frozenset(zip(rows.tolist(), cols.tolist())))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SpectralDecomposition:
    """S = V diag(lambda) V^-1 with eigenvalues in a deterministic order.

    ``ordering[k]`` is the index, in the raw solver output, of the k-th
    eigenpair kept here.
    """

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    inverse_eigenvectors: np.ndarray
    is_normal: bool
    condition_number: float
    ordering: tuple
    mode: str = "general"

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def is_real(self) -> bool:
        """True when V and lambda carry no imaginary part (noise can then be real)."""
        return bool(
            np.all(self.eigenvalues.imag == 0)
            and np.all(self.eigenvectors.imag == 0)
            and np.all(self.inverse_eigenvectors.imag == 0)
        )

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.inverse_eigenvectors


@dataclass(frozen=True)
class FrequencyRepresentation:
    coefficients: np.ndarray
    support: tuple = ()

    @property
    def bandwidth(self) -> int:
        return len(self.support)


def _as_matrix(shift) -> np.ndarray:
    if isinstance(shift, ShiftOperator):
        return shift.matrix
    S = np.asarray(shift, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise DimensionMismatch(f"shift must be a non-empty square matrix, got {S.shape}")
    return S


def _phase(z: complex, scale: float) -> float:
    """Phase in (-pi, pi], snapping numerically real values onto the axis."""
    if abs(z.imag) <= ORDER_TIE_TOL * scale:
        return np.pi if z.real < 0 else 0.0
    p = float(np.angle(z))
    return np.pi if p <= -np.pi else p


def canonical_order(eigenvalues) -> list:
    """Indices sorting eigenvalues by decreasing modulus.

    Modulus ties are broken by increasing |phase|, then increasing phase,
    then original index, so 1 < -j < j < -1 on the unit circle and complex
    conjugate pairs always come out with the negative phase first.
    """
    lam = np.asarray(eigenvalues, dtype=complex)
    scale = max(float(np.max(np.abs(lam))), 1.0) if lam.size else 1.0
    tol = ORDER_TIE_TOL * scale
    mods = np.abs(lam)
    phases = [_phase(z, scale) for z in lam]

    def cmp(a, b):
        if abs(mods[a] - mods[b]) > tol:
            return -1 if mods[a] > mods[b] else 1
        pa, pb = abs(phases[a]), abs(phases[b])
        if abs(pa - pb) > ORDER_TIE_TOL:
            return -1 if pa < pb else 1
        if abs(phases[a] - phases[b]) > ORDER_TIE_TOL:
            return -1 if phases[a] < phases[b] else 1
        return (a > b) - (a < b)

    return sorted(range(lam.size), key=functools.cmp_to_key(cmp))


def _fix_phase(V: np.ndarray) -> np.ndarray:
    """Unit-norm columns whose first significant entry is real positive."""
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    out = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        mags = np.abs(col)
        j = int(np.argmax(mags > 1e-6 * mags.max()))
        out[:, k] = col * (np.conj(col[j]) / mags[j])
    return out


def dft_matrix(N: int) -> np.ndarray:
    """F[i, j] = exp(+2j*pi*i*j/N) / sqrt(N)."""
    idx = np.arange(N)
    return np.exp(2j * np.pi * np.outer(idx, idx) / N) / np.sqrt(N)


def is_normal_matrix(S: np.ndarray, tol: float = NORMALITY_TOL) -> bool:
    scale = max(np.linalg.norm(S) ** 2, 1.0)
    return bool(np.linalg.norm(S @ S.conj().T - S.conj().T @ S) <= tol * scale)


def decompose(shift, mode: str = "auto", eigenvectors=None, eigenvalues=None,
              order: str | None = None) -> SpectralDecomposition:
    """Eigendecompose a graph-shift operator.

    ``mode`` is one of ``auto`` (symmetric solver for Hermitian shifts, general
    solver otherwise), ``symmetric``, ``analytic_cycle`` (DFT basis, valid for
    any circulant shift), ``user_supplied`` (pass ``eigenvectors`` and
    ``eigenvalues``) or ``general``.

    ``order`` is ``"canonical"`` (see :func:`canonical_order`) or ``"native"``
    (solver order).  The default is native for ``analytic_cycle``, which keeps
    V equal to the DFT matrix and lambda_k = exp(-2j*pi*k/N) for the directed
    cycle, and canonical for every other mode.

    Raises DefectiveOrIllConditioned when cond(V) > 1e12 or the relative
    reconstruction residual exceeds 1e-10.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    S = _as_matrix(shift)
    N = S.shape[0]
    hermitian = np.allclose(S, S.conj().T, rtol=0, atol=HERMITIAN_TOL * max(1.0, np.abs(S).max()))
    if mode == "auto":
        mode = "symmetric" if hermitian else "general"
    if order is None:
        order = "native" if mode == "analytic_cycle" else "canonical"
    normal = is_normal_matrix(S)

    if mode == "symmetric":
        if not hermitian:
            raise DefectiveOrIllConditioned("symmetric mode requires a Hermitian shift")
        lam, V = np.linalg.eigh(S)
        lam = lam.astype(complex)
        if np.all(S.imag == 0):
            V = V.real.astype(complex)
        normal = True
    elif mode == "analytic_cycle":
        V = dft_matrix(N)
        D = V.conj().T @ S @ V
        lam = np.diag(D).copy()
        offdiag = np.linalg.norm(D - np.diag(lam))
        if offdiag > RECONSTRUCTION_TOL * max(np.linalg.norm(S), 1.0):
            raise DefectiveOrIllConditioned("shift is not diagonalised by the DFT basis (not circulant)")
        normal = True
    elif mode == "user_supplied":
        if eigenvectors is None or eigenvalues is None:
            raise ValueError("user_supplied mode needs eigenvectors and eigenvalues")
        V = np.asarray(eigenvectors, dtype=complex)
        lam = np.asarray(eigenvalues, dtype=complex).ravel()
        if V.shape != (N, N) or lam.shape != (N,):
            raise DimensionMismatch("supplied eigenpairs do not match the shift size")
        if not np.all(np.isfinite(V)) or np.linalg.cond(V) > MAX_CONDITION:
            raise DefectiveOrIllConditioned("supplied eigenvector matrix is singular or ill-conditioned")
        V = V / np.linalg.norm(V, axis=0, keepdims=True)
    else:
        if normal:
            # complex Schur form of a normal matrix is diagonal with unitary Z
            T, V = scipy.linalg.schur(S.astype(complex), output="complex")
            lam = np.diag(T).copy()
        else:
            lam, V = np.linalg.eig(S)
            lam = lam.astype(complex)
        V = V.astype(complex)

    if order == "canonical":
        perm = canonical_order(lam)
    elif order == "native":
        perm = list(range(N))
    else:
        raise ValueError(f"unknown order {order!r}")
    lam = lam[perm]
    V = V[:, perm]
    if mode in ("symmetric", "general"):
        V = _fix_phase(V)

    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise DefectiveOrIllConditioned(f"eigenvector matrix condition number {cond:.3g} exceeds 1e12")
    Vinv = V.conj().T if normal and mode != "user_supplied" else np.linalg.inv(V)
    if mode == "user_supplied" and normal and np.linalg.norm(Vinv - V.conj().T) <= NORMALITY_TOL:
        Vinv = V.conj().T

    residual = np.linalg.norm(S - (V * lam) @ Vinv)
    scale = np.linalg.norm(S)
    if residual > RECONSTRUCTION_TOL * (scale if scale > 0 else 1.0):
        raise DefectiveOrIllConditioned(
            f"reconstruction residual {residual / (scale or 1.0):.3g} exceeds tolerance; "
            "the shift is numerically defective")
    for arr in (V, lam, Vinv):
        arr.setflags(write=False)
    return SpectralDecomposition(V, lam, Vinv, bool(normal), cond, tuple(int(p) for p in perm), mode)


def validate_support(support, N: int) -> tuple:
    try:
        sup = tuple(int(k) for k in support)
    except TypeError as exc:
        raise InvalidSupport("support must be an iterable of indices") from exc
    if len(set(sup)) != len(sup):
        raise InvalidSupport(f"support has repeated indices: {sup}")
    if any(k < 0 or k >= N for k in sup):
        raise InvalidSupport(f"support indices must lie in [0, {N - 1}]: {sup}")
    return sup


def _check_node(node: int, N: int) -> int:
    node = int(node)
    if node < 0 or node >= N:
        raise IndexOutOfRange(f"node {node} outside [0, {N - 1}]")
    return node


def gft(decomp: SpectralDecomposition, x) -> FrequencyRepresentation:
    x = np.asarray(x, dtype=complex)
    if x.shape != (decomp.size,):
        raise DimensionMismatch(f"signal of shape {x.shape} does not match N={decomp.size}")
    return FrequencyRepresentation(decomp.inverse_eigenvectors @ x)


def igft(decomp: SpectralDecomposition, xhat) -> np.ndarray:
    coeffs = xhat.coefficients if isinstance(xhat, FrequencyRepresentation) else xhat
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != (decomp.size,):
        raise DimensionMismatch(f"coefficients of shape {coeffs.shape} do not match N={decomp.size}")
    return decomp.eigenvectors @ coeffs


def vandermonde(eigenvalues, rows: int) -> np.ndarray:
    """Column-wise Vandermonde block, entry (l, k) = lambda_k**l, by the row recurrence."""
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    if rows < 1:
        raise ValueError("rows must be >= 1")
    psi = np.empty((rows, lam.size), dtype=complex)
    psi[0] = 1.0
    for l in range(1, rows):
        psi[l] = psi[l - 1] * lam
    return psi


def build_psi(decomp: SpectralDecomposition, rows: int | None = None) -> np.ndarray:
    return vandermonde(decomp.eigenvalues, decomp.size if rows is None else rows)


def node_pattern(decomp: SpectralDecomposition, node: int) -> np.ndarray:
    """Row ``node`` of V, unconjugated: how much the node takes part in each frequency."""
    return decomp.eigenvectors[_check_node(node, decomp.size)].copy()


def synthesize_bandlimited(decomp: SpectralDecomposition, support, coeffs=None, rng=None) -> np.ndarray:
    """x = V[:, support] @ coeffs.  Draws Gaussian coefficients from ``rng`` when none are given."""
    sup = validate_support(support, decomp.size)
    if coeffs is None:
        rng = np.random.default_rng() if rng is None else rng
        coeffs = rng.standard_normal(len(sup))
        if not decomp.is_real:
            coeffs = coeffs + 1j * rng.standard_normal(len(sup))
    coeffs = np.asarray(coeffs, dtype=complex).ravel()
    if coeffs.shape != (len(sup),):
        raise InvalidSupport(f"{coeffs.size} coefficients for a support of size {len(sup)}")
    return decomp.eigenvectors[:, list(sup)] @ coeffs
