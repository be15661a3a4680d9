"""Selection and aggregation sampling, noiseless interpolation and recovery checks.

Selection matrices never exist as dense 0/1 arrays: a :class:`SelectionPlan`
is a list of row indices and applying it is row gathering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    ConditionsViolated,
    DimensionMismatch,
    IndexOutOfRange,
    SingularSystem,
)
from .spectral import (
    FrequencyRepresentation,
    SpectralDecomposition,
    _as_matrix,
    _check_node,
    build_psi,
    validate_support,
)

MAX_CONDITION = 1e12
TOL_EIG = 1e-8
TOL_UPSILON = 1e-10


@dataclass(frozen=True)
class SelectionPlan:
    """Rows ``picks`` (0-based) out of a vector of length ``total``.

    ``structured`` is ``(n0, N0, K)`` when the plan keeps rows
    n0, n0 + N0, ..., n0 + (K-1) N0; n0 is 0-based, so for aggregation
    sampling it is the number of shifts applied before the first sample.
    """

    total: int
    picks: tuple
    structured: tuple | None = None

    def __post_init__(self):
        picks = tuple(int(p) for p in self.picks)
        object.__setattr__(self, "picks", picks)
        if self.total < 1:
            raise ValueError("total must be positive")
        if len(set(picks)) != len(picks):
            raise ValueError(f"picks must be distinct: {picks}")
        if any(p < 0 or p >= self.total for p in picks):
            raise IndexOutOfRange(f"picks {picks} outside [0, {self.total - 1}]")
        if self.structured is not None:
            n0, N0, K = self.structured
            if picks != tuple(n0 + m * N0 for m in range(K)):
                raise ValueError("picks do not match the structured (n0, N0, K) triple")

    @classmethod
    def structured_plan(cls, n0: int, N0: int, K: int, total: int) -> "SelectionPlan":
        if N0 < 1 or K < 1 or n0 < 0:
            raise ValueError("need n0 >= 0, N0 >= 1, K >= 1")
        if n0 + (K - 1) * N0 >= total:
            raise IndexOutOfRange(f"C_K(n0={n0}, N0={N0}) with K={K} does not fit in {total} rows")
        return cls(total, tuple(n0 + m * N0 for m in range(K)), (n0, N0, K))

    @classmethod
    def first(cls, K: int, total: int) -> "SelectionPlan":
        return cls.structured_plan(0, 1, K, total)

    @classmethod
    def full(cls, total: int) -> "SelectionPlan":
        return cls.first(total, total)

    def __len__(self):
        return len(self.picks)

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[0] != self.total:
            raise DimensionMismatch(f"plan expects {self.total} rows, got {values.shape[0]}")
        return values[list(self.picks)]


@dataclass(frozen=True)
class AggregationSequence:
    """Successive shifts observed at one node: values[l] = [S^l x]_node."""

    node: int
    values: np.ndarray

    @property
    def length(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class RecoveryReport:
    distinct_eigenvalues: bool
    nonzero_pattern: bool
    nonzero_eigenvalues: bool = True
    offending_pairs: tuple = ()
    offending_indices: tuple = ()
    min_pattern_ratio: float = float("inf")

    @property
    def passed(self) -> bool:
        return self.distinct_eigenvalues and self.nonzero_pattern and self.nonzero_eigenvalues


@dataclass(frozen=True)
class Interpolation:
    signal: np.ndarray
    coefficients: np.ndarray
    condition_number: float
    report: RecoveryReport | None = None
    extras: dict = field(default_factory=dict)


def aggregate(shift, x, node: int, length: int) -> AggregationSequence:
    """Observe x, Sx, ..., S^(L-1)x at ``node`` using only matrix-vector products."""
    S = _as_matrix(shift)
    x = np.asarray(x, dtype=complex)
    if x.shape != (S.shape[0],):
        raise DimensionMismatch("signal length does not match the shift")
    node = _check_node(node, S.shape[0])
    if length < 1:
        raise ValueError("length must be >= 1")
    values = np.empty(length, dtype=complex)
    y = x
    values[0] = y[node]
    for l in range(1, length):
        y = S @ y
        values[l] = y[node]
    return AggregationSequence(node, values)


def aggregate_spectral(decomp: SpectralDecomposition, xhat, node: int, length: int) -> AggregationSequence:
    """Same sequence through the spectral route, Psi diag(upsilon_i) xhat."""
    coeffs = xhat.coefficients if isinstance(xhat, FrequencyRepresentation) else np.asarray(xhat, dtype=complex)
    if coeffs.shape != (decomp.size,):
        raise DimensionMismatch("frequency vector does not match N")
    node = _check_node(node, decomp.size)
    upsilon = decomp.eigenvectors[node]
    return AggregationSequence(node, build_psi(decomp, length) @ (upsilon * coeffs))


def build_psi_i(decomp: SpectralDecomposition, node: int, support, rows: int | None = None) -> np.ndarray:
    """Node-local sensing matrix Psi diag(upsilon_i) E_K, shape (rows, K)."""
    sup = list(validate_support(support, decomp.size))
    node = _check_node(node, decomp.size)
    psi = build_psi(decomp, rows)
    return psi[:, sup] * decomp.eigenvectors[node, sup]


def aggregation_sample(seq: AggregationSequence, plan: SelectionPlan) -> np.ndarray:
    if plan.total != seq.length:
        raise DimensionMismatch(f"plan over {plan.total} rows applied to a sequence of length {seq.length}")
    return plan.apply(seq.values)


def _gated_solve(A: np.ndarray, b: np.ndarray, what: str):
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystem(f"{what} is singular (cond={cond:.3g})", cond)
    return np.linalg.solve(A, b), cond


def selection_interpolate(decomp: SpectralDecomposition, support, plan: SelectionPlan, samples) -> Interpolation:
    """x = V_K (C V_K)^-1 xbar for samples taken at the nodes in ``plan``."""
    sup = list(validate_support(support, decomp.size))
    if len(plan) != len(sup):
        raise DimensionMismatch(f"{len(plan)} samples for bandwidth {len(sup)}")
    if plan.total != decomp.size:
        raise DimensionMismatch("selection plan must range over the N nodes")
    VK = decomp.eigenvectors[:, sup]
    coeffs, cond = _gated_solve(VK[list(plan.picks)], np.asarray(samples, dtype=complex),
                                "C V_K (this node subset cannot recover the support)")
    return Interpolation(VK @ coeffs, coeffs, cond)


def solve_vandermonde(nodes, rhs) -> np.ndarray:
    """Solve W a = rhs with W[m, k] = nodes[k]**m in O(K^2) (Bjorck-Pereyra)."""
    x = np.asarray(nodes, dtype=complex)
    b = np.array(rhs, dtype=complex)
    n = x.size - 1
    if b.shape[0] != x.size:
        raise DimensionMismatch("rhs length must equal the number of nodes")
    for k in range(n):
        for i in range(n, k, -1):
            b[i] = b[i] - x[k] * b[i - 1]
    for k in range(n - 1, -1, -1):
        for i in range(k + 1, n + 1):
            d = x[i] - x[i - k - 1]
            if d == 0:
                raise SingularSystem("repeated Vandermonde nodes")
            b[i] = b[i] / d
        for i in range(k, n):
            b[i] = b[i] - b[i + 1]
    return b


def check_recovery_conditions(decomp: SpectralDecomposition, support, node: int,
                              tol_eig: float = TOL_EIG, tol_upsilon: float = TOL_UPSILON,
                              plan: SelectionPlan | None = None) -> RecoveryReport:
    """Diagnose the two recovery conditions for a known support at one node.

    Eigenvalues on the support must be pairwise distinct (relative to the
    largest eigenvalue modulus) and the node's pattern must be nonzero on the
    support.  For a structured plan C_K(n0, N0) the distinctness test runs on
    lambda**N0 and, when n0 > 0, the support eigenvalues must be nonzero.
    """
    sup = validate_support(support, decomp.size)
    node = _check_node(node, decomp.size)
    lam = decomp.eigenvalues
    n0, N0 = 0, 1
    if plan is not None and plan.structured is not None:
        n0, N0, _ = plan.structured
    powered = lam ** N0
    scale = float(np.max(np.abs(powered))) if lam.size else 0.0
    pairs = tuple(
        (a, b) for i, a in enumerate(sup) for b in sup[i + 1:]
        if not abs(powered[a] - powered[b]) > tol_eig * scale
    )
    upsilon = decomp.eigenvectors[node]
    norm = float(np.linalg.norm(upsilon))
    bad = tuple(k for k in sup if not abs(upsilon[k]) > tol_upsilon * norm)
    ratios = [abs(upsilon[k]) / norm for k in sup] if norm > 0 else [0.0]
    nonzero_eig = True
    if n0 > 0:
        lam_scale = float(np.max(np.abs(lam)))
        nonzero_eig = all(abs(lam[k]) > tol_eig * lam_scale for k in sup)
    return RecoveryReport(
        distinct_eigenvalues=not pairs,
        nonzero_pattern=not bad,
        nonzero_eigenvalues=nonzero_eig,
        offending_pairs=pairs,
        offending_indices=bad,
        min_pattern_ratio=float(min(ratios)) if ratios else float("inf"),
    )


def aggregation_interpolate(decomp: SpectralDecomposition, support, node: int, plan: SelectionPlan,
                            samples, method: str = "direct", enforce_conditions: bool = False) -> Interpolation:
    """Recover x from K aggregated samples: x = V_K (C Psi_i)^-1 ybar.

    ``method="direct"`` solves the K x K system C Psi_i at once.
    ``method="factorized"`` splits it into the Vandermonde part C Psi E_K
    (solved in closed form for structured plans) and the diagonal node
    pattern, then applies V_K.

    The recovery conditions are always evaluated and attached to the result;
    they only block the solve when ``enforce_conditions`` is true.
    """
    sup = list(validate_support(support, decomp.size))
    K = len(sup)
    if len(plan) != K:
        raise DimensionMismatch(f"{len(plan)} samples for bandwidth {K}")
    samples = np.asarray(samples, dtype=complex)
    report = check_recovery_conditions(decomp, sup, node, plan=plan)
    if enforce_conditions and not report.passed:
        clause = "distinct eigenvalues" if not report.distinct_eigenvalues else (
            "nonzero node pattern" if not report.nonzero_pattern else "nonzero eigenvalues")
        raise ConditionsViolated(f"recovery condition failed: {clause}", report)

    psi = build_psi(decomp, plan.total)
    W = psi[list(plan.picks)][:, sup]
    upsilon_K = decomp.eigenvectors[node, sup]
    VK = decomp.eigenvectors[:, sup]
    A = W * upsilon_K
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystem(f"C Psi_i is singular (cond={cond:.3g})", cond)

    if method == "direct":
        coeffs = np.linalg.solve(A, samples)
    elif method == "factorized":
        if plan.structured is not None:
            n0, N0, _ = plan.structured
            lam = decomp.eigenvalues[sup]
            u = solve_vandermonde(lam ** N0, samples)
            a = u / lam ** n0 if n0 else u
        else:
            a, _ = _gated_solve(W, samples, "C Psi E_K")
        coeffs = a / upsilon_K
    else:
        raise ValueError(f"unknown method {method!r}")
    return Interpolation(VK @ coeffs, coeffs, cond, report)


def admissible_selections(total: int, K: int) -> Iterator[SelectionPlan]:
    """Every C_K(n0, N0) with N0 <= total // K, ordered by (N0, n0).

    For K = 1 the spacing is irrelevant, so only N0 = 1 is produced.
    """
    if K < 1 or K > total:
        raise ValueError(f"need 1 <= K <= total, got K={K}, total={total}")
    max_spacing = 1 if K == 1 else total // K
    for N0 in range(1, max_spacing + 1):
        for n0 in range(0, total - N0 * (K - 1)):
            yield SelectionPlan.structured_plan(n0, N0, K, total)
