"""Joint support identification and recovery when the active frequencies are unknown.

The node-local system is M xhat = b with M = C Psi diag(u_i) (all N frequency
columns) and b the selected aggregated samples.  ``brute_force_l0`` is the
exact oracle; the l1 routines are relaxations checked against it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import BudgetExceeded, DimensionMismatch, Infeasible, NoConvergence, ZeroColumn
from .sampling import TOL_EIG, TOL_UPSILON, SelectionPlan
from .spectral import SpectralDecomposition, _check_node, build_psi

L0_RESIDUAL = 1e-8
L1_RESIDUAL = 1e-6
MAX_L0_NODES = 30
MAX_L0_SPARSITY = 5
SPARK_ENUMERATION_LIMIT = 12
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SensingSystem:
    matrix: np.ndarray
    samples: np.ndarray
    node: int | None = None
    plan: SelectionPlan | None = None

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        b = np.asarray(self.samples, dtype=complex).ravel()
        if M.ndim != 2 or M.shape[0] != b.size:
            raise DimensionMismatch(f"matrix {M.shape} does not match {b.size} samples")
        if self.plan is not None and len(self.plan) != b.size:
            raise DimensionMismatch("plan length differs from sample count")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "samples", b)

    @property
    def shape(self):
        return self.matrix.shape

    def equilibrated(self) -> "SensingSystem":
        """Same equations with every row scaled to unit norm.

        Aggregated rows grow like |lambda|^l, so residuals relative to ||b||
        would be blind to the early shifts without this rescaling.
        """
        scale = np.linalg.norm(self.matrix, axis=1)
        scale[scale == 0] = 1.0
        return SensingSystem(self.matrix / scale[:, None], self.samples / scale, self.node, self.plan)

    @property
    def is_real(self) -> bool:
        scale = max(np.abs(self.matrix).max(initial=0.0), np.abs(self.samples).max(initial=0.0), 1.0)
        return bool(np.abs(self.matrix.imag).max(initial=0.0) <= 1e-12 * scale
                    and np.abs(self.samples.imag).max(initial=0.0) <= 1e-12 * scale)


def sensing_matrix(decomp: SpectralDecomposition, node: int, plan: SelectionPlan) -> np.ndarray:
    node = _check_node(node, decomp.size)
    return plan.apply(build_psi(decomp, plan.total) * decomp.eigenvectors[node])


def sensing_system(decomp: SpectralDecomposition, node: int, plan: SelectionPlan, samples) -> SensingSystem:
    return SensingSystem(sensing_matrix(decomp, node, plan), samples, node, plan)


def _support_lstsq(M, b, support):
    cols = list(support)
    coef = np.linalg.lstsq(M[:, cols], b, rcond=None)[0]
    x = np.zeros(M.shape[1], dtype=complex)
    x[cols] = coef
    return x, float(np.linalg.norm(M[:, cols] @ coef - b))


def brute_force_l0(system: SensingSystem, K: int):
    """Sparsest x with M x = b and at most K nonzeros, by exhaustive search.

    Supports are tried by increasing size and in lexicographic order within a
    size; the first support whose least-squares residual is at most
    1e-8 * ||b|| wins, measured on the row-equilibrated system.  Returns
    ``(support, coefficients)``.
    """
    eq = system.equilibrated()
    M, b = eq.matrix, eq.samples
    m, N = M.shape
    if N > MAX_L0_NODES or K > MAX_L0_SPARSITY:
        raise BudgetExceeded(f"exhaustive search limited to N <= {MAX_L0_NODES}, K <= {MAX_L0_SPARSITY}")
    if K < 0 or m < K:
        raise ValueError(f"need at least K={K} samples, got {m}")
    tol = L0_RESIDUAL * np.linalg.norm(b)
    if np.linalg.norm(b) == 0:
        return (), np.zeros(N, dtype=complex)
    for size in range(1, K + 1):
        for support in itertools.combinations(range(N), size):
            x, res = _support_lstsq(M, b, support)
            if res <= tol:
                return support, x
    raise Infeasible(f"no support with at most {K} frequencies reproduces the samples")


@dataclass(frozen=True)
class IdentifiabilityReport:
    nonzero_pattern: bool
    nonzero_eigenvalues: bool
    distinct_powers: bool
    full_spark: bool | None
    restricted_passed: bool | None = None
    offending_pairs: tuple = ()
    offending_indices: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = self.nonzero_pattern and self.nonzero_eigenvalues and self.distinct_powers
        return bool(ok and self.full_spark is not False)


def _analytic_clauses(lam, upsilon, N0, tol_eig, tol_upsilon):
    powered = lam ** N0
    scale = max(np.abs(powered).max(initial=0.0), np.finfo(float).tiny)
    pairs = tuple((a, b) for a, b in itertools.combinations(range(lam.size), 2)
                  if abs(powered[a] - powered[b]) <= tol_eig * scale)
    lam_scale = max(np.abs(lam).max(initial=0.0), np.finfo(float).tiny)
    zero_eigs = tuple(int(k) for k in np.flatnonzero(np.abs(lam) <= tol_eig * lam_scale))
    u_scale = max(np.linalg.norm(upsilon), np.finfo(float).tiny)
    zero_u = tuple(int(k) for k in np.flatnonzero(np.abs(upsilon) <= tol_upsilon * u_scale))
    return pairs, zero_eigs, zero_u


def is_full_spark(M: np.ndarray, max_condition: float = MAX_CONDITION) -> bool:
    """True when every set of m columns of the m x N matrix M is nonsingular."""
    m, N = M.shape
    if m > N:
        return False
    if m == 0:
        return True
    subsets = np.array(list(itertools.combinations(range(N), m)))
    for chunk in np.array_split(subsets, max(1, len(subsets) // 2000)):
        s = np.linalg.svd(M[:, chunk].transpose(1, 0, 2), compute_uv=False)
        if np.any(s[:, -1] <= s[:, 0] / max_condition):
            return False
    return True


def check_identifiability(decomp: SpectralDecomposition, node: int, plan: SelectionPlan, K: int,
                          support=None, tol_eig: float = TOL_EIG, tol_upsilon: float = TOL_UPSILON,
                          enumerate_spark: bool | None = None) -> IdentifiabilityReport:
    """Sufficient conditions for the sparsest solution to be unique and equal the signal.

    Checks, over all N frequencies: nonzero node pattern, nonzero
    eigenvalues and pairwise distinct lambda^N0.  For N <= 12 every set of
    2K columns of the sensing matrix is also tested for nonsingularity.
    When ``support`` is given the same analytic clauses are re-evaluated on
    those frequencies only and reported as ``restricted_passed``.
    """
    if plan.structured is None:
        raise ValueError("identifiability check expects a structured plan C_2K(n0, N0)")
    n0, N0, rows = plan.structured
    if rows != 2 * K:
        raise ValueError(f"plan keeps {rows} rows, expected 2K = {2 * K}")
    node = _check_node(node, decomp.size)
    lam = decomp.eigenvalues
    u = decomp.eigenvectors[node]
    pairs, zero_eigs, zero_u = _analytic_clauses(lam, u, N0, tol_eig, tol_upsilon)
    if enumerate_spark is None:
        enumerate_spark = decomp.size <= SPARK_ENUMERATION_LIMIT
    spark = is_full_spark(sensing_matrix(decomp, node, plan)) if enumerate_spark else None
    restricted = None
    if support is not None:
        sup = list(support)
        rp, rz, ru = _analytic_clauses(lam[sup], u[sup], N0, tol_eig, tol_upsilon)
        restricted = not (rp or rz or ru)
    return IdentifiabilityReport(
        nonzero_pattern=not zero_u,
        nonzero_eigenvalues=not zero_eigs,
        distinct_powers=not pairs,
        full_spark=spark,
        restricted_passed=restricted,
        offending_pairs=pairs,
        offending_indices=tuple(sorted(set(zero_eigs) | set(zero_u))),
        details={"zero_eigenvalues": zero_eigs, "zero_pattern": zero_u},
    )


@dataclass(frozen=True)
class Coherence:
    mu: float
    bound: int


def coherence(system_or_matrix) -> Coherence:
    """Mutual coherence of the columns and the sparsity level it certifies."""
    M = getattr(system_or_matrix, "matrix", system_or_matrix)
    M = np.asarray(M, dtype=complex)
    norms = np.linalg.norm(M, axis=0)
    zero = np.flatnonzero(norms <= np.finfo(float).tiny)
    if zero.size:
        raise ZeroColumn(f"zero columns {zero.tolist()}", zero.tolist())
    if M.shape[1] < 2:
        return Coherence(0.0, M.shape[1])
    G = np.abs((M / norms).conj().T @ (M / norms))
    np.fill_diagonal(G, 0.0)
    mu = float(min(G.max(), 1.0))
    bound = M.shape[1] if mu == 0 else int(math.floor((1 + 1 / mu) / 2 + 1e-12))
    return Coherence(mu, bound)


@dataclass(frozen=True)
class L1Result:
    coefficients: np.ndarray
    support: tuple
    success: bool
    residual: float
    mode: str
    solver: str
    diagnostics: dict = field(default_factory=dict)


def _soft_threshold(z, thresh):
    mag = np.abs(z)
    scale = np.where(mag > thresh, 1 - thresh / np.where(mag > 0, mag, 1), 0.0)
    return z * scale


def _fista(A, b, gamma, weights, x0, max_iter, tol):
    """Proximal gradient for ||A x - b||^2 + gamma * sum(weights * |x|)."""
    lip = 2 * np.linalg.norm(A, 2) ** 2
    if lip == 0:
        return np.zeros(A.shape[1], dtype=complex), 0, True
    step = 1.0 / lip
    x = x0.copy()
    y, t = x.copy(), 1.0
    AH = A.conj().T
    for it in range(1, max_iter + 1):
        x_new = _soft_threshold(y - step * 2 * (AH @ (A @ y - b)), step * gamma * weights)
        change = np.linalg.norm(x_new - x)
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if change <= tol * max(1.0, np.linalg.norm(x)):
            return x, it, True
    return x, max_iter, False


def _polish(M, b, x, K, rel=1e-6):
    """Least squares on the significant entries of x; returns (x, support, residual, ok).

    An entry is significant when its contribution |x_k| ||m_k|| to the fit
    exceeds ``rel`` times the largest contribution.
    """
    mag = np.abs(x) * np.linalg.norm(M, axis=0)
    if mag.max(initial=0.0) == 0:
        res = float(np.linalg.norm(b))
        return np.zeros(M.shape[1], dtype=complex), (), res, res <= L1_RESIDUAL * np.linalg.norm(b)
    support = tuple(int(k) for k in np.flatnonzero(mag > rel * mag.max()))
    if len(support) > max(K, M.shape[0]):
        return x, support, float(np.linalg.norm(M @ x - b)), False
    xp, res = _support_lstsq(M, b, support)
    ok = len(support) <= K and res <= L1_RESIDUAL * np.linalg.norm(b)
    return xp, support, res, bool(ok)


def _active_columns(M):
    """Columns that carry information; the others are pinned to zero."""
    norms = np.linalg.norm(M, axis=0)
    return np.flatnonzero(norms > TOL_UPSILON * max(norms.max(initial=0.0), np.finfo(float).tiny))


def _basis_pursuit_lp(M, b, weights):
    """Exact min sum(w |x|) s.t. M x = b for real data as a linear program.

    The LP runs on c = d * x with d the column norms of M, so the constraint
    matrix has unit columns; the equality system is then replaced by the
    equivalent well-conditioned V_r^T c = S_r^-1 U_r^T b from a truncated SVD,
    dropping directions below the numerical rank threshold.
    """
    d = np.linalg.norm(M.real, axis=0)
    A = M.real / d
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > max(A.shape) * np.finfo(float).eps * sv[0])) if sv.size else 0
    A_eq = Vt[:rank]
    rhs = (U[:, :rank].T @ b.real) / sv[:rank]
    N = M.shape[1]
    cost = weights / d
    cost = np.concatenate([cost, cost]) / cost.max()
    A_eq = np.hstack([A_eq, -A_eq])
    tight = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    for options in (tight, {}):
        res = linprog(cost, A_eq=A_eq, b_eq=rhs, bounds=(0, None), method="highs", options=options)
        if res.status == 0:
            break
    if res.status != 0:
        raise NoConvergence(f"linear program failed: {res.message}", {"status": res.status})
    c = res.x[:N] - res.x[N:]
    return (c / d).astype(complex), {"lp_status": res.status, "lp_iterations": res.nit, "rank": rank}


def l1_recover(system: SensingSystem, K: int, mode: str = "equality_constrained", gamma: float | None = None,
               noise_covariance=None, solver: str = "auto", normalize: bool = True,
               max_iter: int = 100_000, tol: float = 1e-9, path_points: int = 30,
               path_ratio: float = 1e-4) -> L1Result:
    """1-norm relaxation of the sparse recovery problem.

    Modes:
      ``equality_constrained``  min ||D x||_1 subject to M x = b
      ``penalized``             min ||W (M x - b)||^2 + gamma ||D x||_1
      ``penalized_path``        the penalized problem on a decreasing gamma grid,
                                stopping at the first point whose polished
                                solution is K-sparse and fits the samples

    D holds the column norms when ``normalize`` is set (plain 1-norm
    otherwise) and W = R^-1/2 for the given noise covariance (identity when
    omitted).  For equality_constrained, ``solver="lp"`` solves real systems
    exactly as a linear program, ``"path"`` follows the penalized path with
    decreasing gamma, and ``"auto"`` uses the LP whenever the data are real.
    Rows are equilibrated to unit norm first, which leaves the solution set
    unchanged; columns that vanish after that are pinned to zero.  Every
    result is polished by least squares on its significant entries;
    ``success`` means at most K nonzeros and residual <= 1e-6 ||b|| on the
    equilibrated rows.
    """
    N = system.matrix.shape[1]
    if np.linalg.norm(system.samples) == 0:
        return L1Result(np.zeros(N, dtype=complex), (), True, 0.0, mode, "trivial")
    scale = np.linalg.norm(system.matrix, axis=1)
    scale[scale == 0] = 1.0
    if noise_covariance is not None:
        noise_covariance = np.asarray(noise_covariance, dtype=complex) / np.outer(scale, scale)
    system = system.equilibrated()
    active = _active_columns(system.matrix)
    reduced = SensingSystem(system.matrix[:, active], system.samples)
    res = _l1_active(reduced, K, mode, gamma, noise_covariance, solver, normalize,
                     max_iter, tol, path_points, path_ratio)
    x = np.zeros(N, dtype=complex)
    x[active] = res.coefficients
    support = tuple(int(active[k]) for k in res.support)
    diag = dict(res.diagnostics, dropped_columns=tuple(int(k) for k in np.setdiff1d(np.arange(N), active)))
    return L1Result(x, support, res.success, res.residual, res.mode, res.solver, diag)


def _l1_active(system, K, mode, gamma, noise_covariance, solver, normalize, max_iter, tol,
               path_points, path_ratio) -> L1Result:
    M, b = system.matrix, system.samples
    N = M.shape[1]
    weights = np.linalg.norm(M, axis=0) if normalize else np.ones(N)

    if noise_covariance is not None:
        R = np.asarray(noise_covariance, dtype=complex)
        evals, evecs = np.linalg.eigh((R + R.conj().T) / 2)
        if evals.min() <= evals.max() / MAX_CONDITION:
            raise ValueError("noise covariance is singular")
        W = (evecs / np.sqrt(evals)) @ evecs.conj().T
    else:
        W = np.eye(M.shape[0])
    A, bw = W @ M, W @ b

    if mode == "equality_constrained":
        if solver == "auto":
            solver = "lp" if system.is_real else "path"
        if solver == "lp":
            if not system.is_real:
                raise ValueError("the LP solver handles real systems only")
            x, diag = _basis_pursuit_lp(M, b, weights)
            xp, support, res, ok = _polish(M, b, x, K)
            return L1Result(xp, support, ok, res, mode, "lp", diag)
        if solver != "path":
            raise ValueError(f"unknown solver {solver!r}")
        return _path(M, b, A, bw, K, weights, max_iter, tol, path_points, path_ratio, mode)
    if mode == "penalized_path":
        return _path(M, b, A, bw, K, weights, max_iter, tol, path_points, path_ratio, mode)
    if mode == "penalized":
        if gamma is None or gamma <= 0:
            raise ValueError("penalized mode needs gamma > 0")
        x, iters, converged = _fista(A, bw, gamma, weights, np.zeros(N, dtype=complex), max_iter, tol)
        diag = {"iterations": iters, "gamma": gamma}
        if not converged:
            raise NoConvergence(f"proximal gradient did not converge in {max_iter} iterations", diag)
        xp, support, res, ok = _polish(M, b, x, K)
        return L1Result(xp, support, ok, res, mode, "fista", diag)
    raise ValueError(f"unknown mode {mode!r}")


def gamma_grid(A, bw, weights, points: int = 30, ratio: float = 1e-4) -> np.ndarray:
    gmax = float(np.max(np.abs(A.conj().T @ bw) / weights))
    return gmax * np.logspace(0, np.log10(ratio), points)


def _path(M, b, A, bw, K, weights, max_iter, tol, points, ratio, mode) -> L1Result:
    x = np.zeros(M.shape[1], dtype=complex)
    history = []
    last = None
    for gamma in gamma_grid(A, bw, weights, points, ratio):
        x, iters, converged = _fista(A, bw, gamma, weights, x, max_iter, tol)
        xp, support, res, ok = _polish(M, b, x, K)
        history.append({"gamma": float(gamma), "iterations": iters, "converged": converged,
                        "support_size": len(support), "residual": res})
        last = (xp, support, res, converged)
        if ok:
            return L1Result(xp, support, True, res, mode, "fista_path", {"path": history})
    xp, support, res, converged = last
    if not converged:
        raise NoConvergence("proximal gradient did not converge at the end of the gamma path",
                            {"path": history})
    return L1Result(xp, support, False, res, mode, "fista_path", {"path": history})
