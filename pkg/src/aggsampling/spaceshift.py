"""Space-shift sampling: observations [S^l x]_i at arbitrary (node, shift) pairs.

The stacked vector collects, node after node, the shifts 0..L-1 seen at that
node, so pair (i, l) sits at flat index i * L + l (0-based).  Nothing of size
N^2 is ever formed here: every row of the stacked system is the row l of the
node-local matrix Psi_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, InvalidModel, IsolatedNode, SingularSystem
from .noisy import EstimationReport, NoiseKind, NoiseModel, blue_report
from .spectral import SpectralDecomposition, _as_matrix, build_psi, validate_support


@dataclass(frozen=True)
class ObservationPlan:
    node_count: int
    length: int
    picks: tuple

    def __post_init__(self):
        picks = tuple((int(i), int(l)) for i, l in self.picks)
        if not picks:
            raise ValueError("observation plan is empty")
        if len(set(picks)) != len(picks):
            raise ValueError("observation plan repeats a (node, shift) pair")
        for i, l in picks:
            if not (0 <= i < self.node_count and 0 <= l < self.length):
                raise IndexOutOfRange(f"pair ({i}, {l}) outside {self.node_count} nodes x {self.length} shifts")
        object.__setattr__(self, "picks", picks)

    def __len__(self):
        return len(self.picks)

    @property
    def flat_indices(self) -> tuple:
        return tuple(i * self.length + l for i, l in self.picks)

    @classmethod
    def aggregation(cls, node: int, shifts, node_count: int, length: int | None = None) -> "ObservationPlan":
        shifts = list(shifts)
        return cls(node_count, length or max(shifts) + 1, tuple((node, l) for l in shifts))

    @classmethod
    def selection(cls, nodes, node_count: int, shift: int = 0, length: int | None = None) -> "ObservationPlan":
        return cls(node_count, length or shift + 1, tuple((n, shift) for n in nodes))


@dataclass(frozen=True)
class StructuredPlan:
    center: int
    depth: int
    neighbors: tuple

    @property
    def neighbor_count(self) -> int:
        return len(self.neighbors)

    @property
    def row_count(self) -> int:
        return 1 + self.depth * (1 + self.neighbor_count)

    @property
    def rank_bound(self) -> int:
        return 1 + self.depth * self.neighbor_count


@dataclass(frozen=True)
class RankReport:
    rank: int
    bound: int
    rows: int
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def within_bound(self) -> bool:
        return self.rank <= self.bound


def build_upsilon(decomp: SpectralDecomposition, support):
    """Stacked diagonal node patterns: (N^2 x N, NK x K).

    Block i of the first matrix is diag(u_i); block i of the second keeps
    only the support.  Both are materialised, so use them for small N only.
    """
    sup = list(validate_support(support, decomp.size))
    N, K = decomp.size, len(sup)
    V = decomp.eigenvectors
    full = np.zeros((N * N, N), dtype=complex)
    reduced = np.zeros((N * K, K), dtype=complex)
    for i in range(N):
        full[i * N:(i + 1) * N] = np.diag(V[i])
        reduced[i * K:(i + 1) * K] = np.diag(V[i, sup])
    return full, reduced


def build_stacked_system(decomp: SpectralDecomposition, support, plan: ObservationPlan) -> np.ndarray:
    """Rows of the stacked system for the picked pairs; row (i, l) = [Psi_i]_l."""
    sup = list(validate_support(support, decomp.size))
    if plan.node_count != decomp.size:
        raise ValueError("plan and decomposition sizes differ")
    psi = build_psi(decomp, plan.length)[:, sup]
    nodes = [i for i, _ in plan.picks]
    shifts = [l for _, l in plan.picks]
    return psi[shifts] * decomp.eigenvectors[np.ix_(nodes, sup)]


def _full_rows(decomp: SpectralDecomposition, plan: ObservationPlan) -> np.ndarray:
    """Rows e_i^T S^l V (all N frequencies) for the picked pairs."""
    psi = build_psi(decomp, plan.length)
    nodes = [i for i, _ in plan.picks]
    shifts = [l for _, l in plan.picks]
    return psi[shifts] * decomp.eigenvectors[nodes]


def stacked_noise_factor(model: NoiseModel, decomp: SpectralDecomposition, support,
                         plan: ObservationPlan) -> np.ndarray | None:
    """B with unit-power covariance B B^H of the picked stacked noise (None for custom)."""
    if model.kind is NoiseKind.OBSERVATION:
        return np.eye(len(plan), dtype=complex)
    if model.kind is NoiseKind.SIGNAL:
        return _full_rows(decomp, plan) @ decomp.inverse_eigenvectors
    if model.kind is NoiseKind.FREQUENCY:
        return build_stacked_system(decomp, support, plan)
    return None


def stacked_noise_shape(model: NoiseModel, decomp: SpectralDecomposition, support,
                        plan: ObservationPlan) -> np.ndarray:
    """Covariance of the picked stacked noise entries for unit noise power."""
    B = stacked_noise_factor(model, decomp, support, plan)
    if B is not None:
        R = B @ B.conj().T
        return (R + R.conj().T) / 2
    R = model.custom_covariance
    if R.shape != (len(plan), len(plan)):
        raise InvalidModel(f"custom covariance must be {len(plan)} x {len(plan)} for this plan")
    return R


def spaceshift_blue(decomp: SpectralDecomposition, support, plan: ObservationPlan, model: NoiseModel,
                    samples) -> EstimationReport:
    """BLUE of the active coefficients from space-shift samples, with covariances and metrics."""
    sup = list(validate_support(support, decomp.size))
    A = build_stacked_system(decomp, sup, plan)
    B = stacked_noise_factor(model, decomp, sup, plan)
    shape = stacked_noise_shape(model, decomp, sup, plan)
    power = 1.0 if model.kind is NoiseKind.CUSTOM else model.sigma2
    return blue_report(A, shape, power, decomp.eigenvectors[:, sup], samples, factor=B)


def observe(shift, x, plan: ObservationPlan) -> np.ndarray:
    """Noiseless samples [S^l x]_i for the picked pairs, by repeated shifting."""
    S = _as_matrix(shift)
    y = np.asarray(x, dtype=complex)
    needed = max(l for _, l in plan.picks)
    powers = [y]
    for _ in range(needed):
        y = S @ y
        powers.append(y)
    return np.array([powers[l][i] for i, l in plan.picks])


def numerical_rank(M: np.ndarray):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    tol = max(M.shape) * np.finfo(float).eps * sv[0]
    return int(np.sum(sv > tol)), sv


def structured_plan(shift, decomp: SpectralDecomposition, center: int, depth: int):
    """Observations of a node and its incoming neighbors up to ``depth`` shifts.

    The center contributes shifts 0..depth and every incoming neighbor j
    (S[center, j] != 0) shifts 0..depth-1.  Since [S^l x]_center is a
    combination of [S^(l-1) x]_j over those neighbors, the system has rank at
    most 1 + depth * N1.  Returns the plan description, the observation plan
    and the numerical rank of its system over all N frequencies.
    """
    S = _as_matrix(shift)
    N = S.shape[0]
    if not 0 <= center < N:
        raise IndexOutOfRange(f"center {center} outside 0..{N - 1}")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    neighbors = tuple(int(j) for j in np.flatnonzero(S[center]) if j != center)
    if depth > 0 and not neighbors:
        raise IsolatedNode(f"node {center} has no incoming neighbors to aggregate from")
    desc = StructuredPlan(center, depth, neighbors)
    picks = [(center, l) for l in range(depth + 1)]
    picks += [(j, l) for j in neighbors for l in range(depth)]
    plan = ObservationPlan(N, depth + 1, tuple(picks))
    rank, sv = numerical_rank(_full_rows(decomp, plan))
    return desc, plan, RankReport(rank, desc.rank_bound, desc.row_count, sv)


STRATEGIES = ("aggregation", "selection", "selection_shifted", "mixed")


def table_strategies(nodes, K: int, node_count: int) -> dict:
    """The strategy family compared in the space-shift study, for bandwidth K.

    ``nodes`` lists at least K distinct nodes, the first being the
    aggregating one.  Strategies: all K shifts at nodes[0]; shift 0 at K
    nodes; shift s at K nodes for s = 1..K-1; shifts 0 and 1 at ceil(K/2)
    nodes.
    """
    nodes = list(nodes)
    if len(set(nodes[:K])) < K:
        raise ValueError(f"need {K} distinct nodes")
    out = {"aggregation": ObservationPlan.aggregation(nodes[0], range(K), node_count, K)}
    out["selection"] = ObservationPlan.selection(nodes[:K], node_count, 0, K)
    for s in range(1, K):
        out[f"selection_shift{s}"] = ObservationPlan.selection(nodes[:K], node_count, s, K)
    pairs = [(n, l) for n in nodes[: (K + 1) // 2] for l in (0, 1)][:K]
    out["mixed"] = ObservationPlan(node_count, K, tuple(pairs))
    return out


def lowpass_signal(decomp: SpectralDecomposition, K: int, rng, dominant: int = 2,
                   in_band: float = 0.1, leak: float = 0.01) -> tuple:
    """Approximately bandlimited signal dominated by the leading frequencies.

    The first ``dominant`` frequencies (largest |lambda| in canonical order)
    get unit-variance coefficients, the rest of the first K get ``in_band``
    and all other frequencies ``leak``.  Returns (x, xhat).
    """
    N = decomp.size
    scale = np.full(N, leak)
    scale[:K] = in_band
    scale[:dominant] = 1.0
    xhat = scale * rng.standard_normal(N)
    if not decomp.is_real:
        xhat = xhat.astype(complex)
    return decomp.eigenvectors @ xhat, xhat


def relative_error(x, estimate) -> float:
    x = np.asarray(x)
    return float(np.sum(np.abs(x - estimate) ** 2) / np.sum(np.abs(x) ** 2))


def reconstruct(decomp: SpectralDecomposition, K: int, plan: ObservationPlan, samples,
                max_condition: float = 1e12) -> np.ndarray:
    """Least-squares interpolation onto the first K frequencies from space-shift samples."""
    A = build_stacked_system(decomp, range(K), plan)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularSystem(f"space-shift system is singular (cond={cond:.3g})", cond)
    coef = np.linalg.lstsq(A, np.asarray(samples, dtype=complex), rcond=None)[0]
    return decomp.eigenvectors[:, :K] @ coef
