"""BLUE interpolation from noisy aggregated samples and sampling-set design.

Observation model at node i with selection C:

    zbar = C Psi_i xhat_K + C w_i,        x = V_K xhat_K

Every inverse is done as a linear solve behind a condition-number gate of 1e12.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidModel,
    NotPositiveDefinite,
    SingularNoiseCovariance,
    SingularNormalEquations,
)
from .graphs_io import rng_stream
from .sampling import SelectionPlan, build_psi_i
from .spectral import SpectralDecomposition, _check_node, build_psi, validate_support

MAX_CONDITION = 1e12
CHUNK = 1000


class NoiseKind(str, enum.Enum):
    OBSERVATION = "observation"  # white noise added to the observed samples
    SIGNAL = "signal"            # white noise added to x before shifting
    FREQUENCY = "frequency"      # white noise added to the active coefficients
    CUSTOM = "custom"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind
    sigma2: float = 1.0
    custom_covariance: np.ndarray | None = None

    def __post_init__(self):
        try:
            kind = NoiseKind(self.kind)
        except ValueError as exc:
            raise InvalidModel(f"unknown noise kind {self.kind!r}") from exc
        object.__setattr__(self, "kind", kind)
        if not self.sigma2 >= 0:
            raise InvalidModel("sigma2 must be nonnegative")
        if kind is NoiseKind.CUSTOM:
            R = self.custom_covariance
            if R is None:
                raise InvalidModel("custom noise needs a covariance matrix")
            R = np.asarray(R, dtype=complex)
            if R.ndim != 2 or R.shape[0] != R.shape[1]:
                raise InvalidModel("custom covariance must be square")
            scale = max(np.abs(R).max(), 1.0)
            if np.abs(R - R.conj().T).max() > 1e-12 * scale:
                raise InvalidModel("custom covariance must be Hermitian")
            if np.linalg.eigvalsh((R + R.conj().T) / 2).min() < -1e-10 * scale:
                raise InvalidModel("custom covariance must be positive semidefinite")
            object.__setattr__(self, "custom_covariance", R)


@dataclass(frozen=True)
class EstimationReport:
    estimate_frequency: np.ndarray
    estimate_time: np.ndarray
    cov_frequency: np.ndarray
    cov_time: np.ndarray
    metrics: dict
    condition_number: float


def _gate(M: np.ndarray, exc, what: str) -> float:
    cond = float(np.linalg.cond(M)) if M.size else 0.0
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise exc(f"{what} is singular or ill-conditioned (cond={cond:.3g})", cond)
    return cond


def _hermitian(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2


def covariance_factor(model: NoiseModel, decomp: SpectralDecomposition, node: int, support,
                      rows: int | None = None) -> np.ndarray | None:
    """B with unit-power noise covariance B B^H over the aggregated sequence (None for custom)."""
    rows = decomp.size if rows is None else rows
    node = _check_node(node, decomp.size)
    if model.kind is NoiseKind.OBSERVATION:
        return np.eye(rows, dtype=complex)
    if model.kind is NoiseKind.SIGNAL:
        return (build_psi(decomp, rows) * decomp.eigenvectors[node]) @ decomp.inverse_eigenvectors
    if model.kind is NoiseKind.FREQUENCY:
        return build_psi_i(decomp, node, support, rows)
    return None


def covariance_shape(model: NoiseModel, decomp: SpectralDecomposition, node: int, support,
                     rows: int | None = None) -> np.ndarray:
    """Noise covariance of the full aggregated sequence for unit noise power."""
    rows = decomp.size if rows is None else rows
    B = covariance_factor(model, decomp, node, support, rows)
    if B is not None:
        return _hermitian(B @ B.conj().T)
    R = model.custom_covariance
    if R.shape != (rows, rows):
        raise InvalidModel(f"custom covariance is {R.shape}, expected {(rows, rows)}")
    return R


def noise_covariance(model: NoiseModel, decomp: SpectralDecomposition, node: int, support,
                     rows: int | None = None) -> np.ndarray:
    """R_w for the aggregated sequence at ``node``.

    White observation noise gives sigma2 * I; white signal noise gives
    sigma2 * Psi diag(u) V^-1 V^-H diag(u)^H Psi^H (u the node pattern);
    white frequency noise gives sigma2 * Psi_i Psi_i^H.  A custom model
    returns its matrix unchanged.
    """
    shape = covariance_shape(model, decomp, node, support, rows)
    if model.kind is NoiseKind.CUSTOM:
        return shape
    return model.sigma2 * shape


def reduce_covariance(R: np.ndarray, plan: SelectionPlan) -> np.ndarray:
    idx = list(plan.picks)
    return R[np.ix_(idx, idx)]


def _whiten(A: np.ndarray, reduced_cov: np.ndarray):
    """Return (L^-1 A, L) for the Cholesky factor L of the noise covariance."""
    _gate(reduced_cov, SingularNoiseCovariance, "reduced noise covariance")
    try:
        L = np.linalg.cholesky(_hermitian(reduced_cov))
    except np.linalg.LinAlgError as exc:
        raise SingularNoiseCovariance("reduced noise covariance is not positive definite") from exc
    return np.linalg.solve(L, A), L


def _fisher(A: np.ndarray, reduced_cov: np.ndarray):
    At, L = _whiten(A, reduced_cov)
    F = _hermitian(At.conj().T @ At)
    cond = _gate(F, SingularNormalEquations, "normal-equations matrix")
    return F, At, L, cond


def blue_estimate(psi_i: np.ndarray, plan: SelectionPlan, reduced_cov: np.ndarray, samples,
                  method: str = "weighted") -> np.ndarray:
    """Best linear unbiased estimate of the active coefficients.

    ``method="weighted"`` evaluates (A^H R^-1 A)^-1 A^H R^-1 z with
    A = C Psi_i; ``method="square"`` solves A xhat = z and needs exactly
    K picks.  Both agree when the plan keeps exactly K rows.
    """
    A = plan.apply(psi_i)
    z = np.asarray(samples, dtype=complex)
    if A.shape[0] < A.shape[1]:
        raise SingularNormalEquations(f"{A.shape[0]} samples cannot determine {A.shape[1]} coefficients")
    if method == "square":
        if A.shape[0] != A.shape[1]:
            raise ValueError("square BLUE needs exactly K picks")
        _gate(A, SingularNormalEquations, "C Psi_i")
        return np.linalg.solve(A, z)
    if method != "weighted":
        raise ValueError(f"unknown method {method!r}")
    F, At, L, _ = _fisher(A, reduced_cov)
    return np.linalg.solve(F, At.conj().T @ np.linalg.solve(L, z))


def error_covariances(psi_i: np.ndarray, plan: SelectionPlan, reduced_cov: np.ndarray, VK: np.ndarray):
    """Frequency and time error covariances (R_hat, V_K R_hat V_K^H)."""
    F, _, _, _ = _fisher(plan.apply(psi_i), reduced_cov)
    R_hat = _hermitian(np.linalg.inv(F))
    R_time = _hermitian(VK @ R_hat @ VK.conj().T)
    return R_hat, R_time


def error_metrics(R_hat: np.ndarray, R_time: np.ndarray) -> dict:
    """e1 = tr(R_e), e2 = lambda_max(R_e), e3 = log det(R_hat), e4 = 1 / tr(R_hat^-1).

    e3 and e4 use the K x K frequency covariance because the time covariance
    has rank at most K.
    """
    R_hat = _hermitian(np.asarray(R_hat, dtype=complex))
    try:
        Lc = np.linalg.cholesky(R_hat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("frequency error covariance is not positive definite") from exc
    diag = np.abs(np.diag(Lc))
    if diag.min() <= 0:
        raise NotPositiveDefinite("frequency error covariance is singular")
    Linv = np.linalg.inv(Lc)
    return {
        "e1": float(np.trace(R_time).real),
        "e2": float(max(np.linalg.eigvalsh(_hermitian(R_time)).max(), 0.0)),
        "e3": float(2 * np.sum(np.log(diag))),
        "e4": float(1.0 / np.sum(np.abs(Linv) ** 2)),
    }


def blue_interpolate(decomp: SpectralDecomposition, support, node: int, plan: SelectionPlan,
                     model: NoiseModel, samples) -> EstimationReport:
    """Full BLUE pipeline at one node: estimate, covariances and metrics.

    The weighting only depends on the shape of the noise covariance, so a
    zero noise power still yields the (exact) estimate with zero covariances.
    """
    sup = validate_support(support, decomp.size)
    psi_i = build_psi_i(decomp, node, sup, plan.total)
    B = covariance_factor(model, decomp, node, sup, plan.total)
    if B is None:
        shape = reduce_covariance(covariance_shape(model, decomp, node, sup, plan.total), plan)
    else:
        B = plan.apply(B)
        shape = _hermitian(B @ B.conj().T)
    power = 1.0 if model.kind is NoiseKind.CUSTOM else model.sigma2
    return blue_report(plan.apply(psi_i), shape, power, decomp.eigenvectors[:, list(sup)], samples, factor=B)


def blue_report(A: np.ndarray, shape: np.ndarray, power: float, VK: np.ndarray, samples,
                factor: np.ndarray | None = None) -> EstimationReport:
    """BLUE for zbar = A xhat_K + noise with covariance power * shape.

    Shared by node-local and space-shift sampling; ``A`` is already reduced
    to the selected rows.  With a square ``A`` the estimate is A^-1 zbar for
    any weighting; if the caller also passes ``factor`` (shape = B B^H) the
    covariance is formed as (A^-1 B)(A^-1 B)^H, which avoids squaring the
    condition number of A.
    """
    F, At, L, _ = _fisher(A, shape)
    z = np.asarray(samples, dtype=complex)
    if factor is not None and A.shape[0] == A.shape[1]:
        est = np.linalg.solve(A, z)
        X = np.linalg.solve(A, factor)
        R_hat = power * _hermitian(X @ X.conj().T)
    else:
        est = np.linalg.solve(F, At.conj().T @ np.linalg.solve(L, z))
        R_hat = power * _hermitian(np.linalg.inv(F))
    R_time = _hermitian(VK @ R_hat @ VK.conj().T)
    if power > 0:
        metrics = error_metrics(R_hat, R_time)
    else:
        metrics = {"e1": 0.0, "e2": 0.0, "e3": float("-inf"), "e4": 0.0}
    cond = float(np.linalg.cond(A))
    return EstimationReport(est, VK @ est, R_hat, R_time, metrics, cond)


@dataclass(frozen=True)
class NodeScore:
    node: int
    score: float
    metrics: dict | None
    tied_with_best: bool = False


def _geometric_weight(mod2: float, n0: int, N0: int, K: int) -> float:
    """sum_{m<K} |lambda|^(2(n0 + m N0)) given mod2 = |lambda|^2."""
    r = mod2 ** N0
    if abs(1.0 - r) < 1e-12:
        return float(sum(mod2 ** (n0 + m * N0) for m in range(K)))
    return float((mod2 ** n0 - mod2 ** (n0 + N0 * K)) / (1.0 - r))


def closed_form_node_scores(decomp: SpectralDecomposition, support, plan: SelectionPlan) -> np.ndarray:
    """Trace of the unit-noise information matrix at every node, for C = C_K(n0, N0).

    Larger is better: under white observation noise the node maximising this
    score minimises e4.
    """
    if plan.structured is None:
        raise ValueError("closed-form scores need a structured plan C_K(n0, N0)")
    sup = list(validate_support(support, decomp.size))
    n0, N0, K = plan.structured
    weights = np.array([_geometric_weight(abs(decomp.eigenvalues[k]) ** 2, n0, N0, K) for k in sup])
    return (np.abs(decomp.eigenvectors[:, sup]) ** 2) @ weights


def select_sampling_node(decomp: SpectralDecomposition, support, plan: SelectionPlan, model: NoiseModel,
                         metric: str = "e4", method: str = "auto", tie_tol: float = 1e-10) -> list:
    """Rank every node as a sampling node, best first.

    ``method="closed_form"`` (white observation noise, structured plan) ranks
    by the geometric-sum score; ``"exhaustive"`` ranks by ``metric`` computed
    from the error covariance of each node.  ``"auto"`` picks the closed form
    when it applies.  Nodes whose system is singular are ranked last with an
    infinite metric.  Every entry carries all four metrics when computable.
    """
    sup = validate_support(support, decomp.size)
    if method == "auto":
        method = "closed_form" if (model.kind is NoiseKind.OBSERVATION and plan.structured) else "exhaustive"
    all_metrics = []
    for i in range(decomp.size):
        try:
            rep = blue_interpolate(decomp, sup, i, plan, model, np.zeros(len(plan)))
            all_metrics.append(rep.metrics)
        except (SingularNormalEquations, SingularNoiseCovariance, NotPositiveDefinite):
            all_metrics.append(None)
    if method == "closed_form":
        if model.kind is not NoiseKind.OBSERVATION:
            raise InvalidModel("the closed-form node score assumes white observation noise")
        scores = closed_form_node_scores(decomp, sup, plan)
        keyed = [(-s, i) for i, s in enumerate(scores)]
    elif method == "exhaustive":
        scores = np.array([m[metric] if m is not None else np.inf for m in all_metrics])
        keyed = [(s, i) for i, s in enumerate(scores)]
    else:
        raise ValueError(f"unknown method {method!r}")
    keyed.sort()
    best = keyed[0][0]
    out = []
    for value, i in keyed:
        tied = bool(np.isfinite(best) and abs(value - best) <= tie_tol * max(abs(best), 1.0))
        out.append(NodeScore(i, float(scores[i]), all_metrics[i], tied))
    return out


@dataclass(frozen=True)
class N0Choice:
    n0: int
    amplification: float
    candidates: tuple


def select_n0(decomp: SpectralDecomposition, support, N0: int, max_rows: int, model: NoiseModel,
              tol: float = 1e-10) -> N0Choice:
    """Offset minimising det of the frequency error covariance for C_K(n0, N0).

    Moving the window one shift later multiplies that determinant by
    1 / prod |lambda_k|^2, so n0 = 0 when the product is <= 1 and the largest
    offset that fits in ``max_rows`` otherwise.  A product within ``tol`` of
    1 (unit-modulus spectra, up to round-off) counts as 1: every offset is
    then equally good and the earliest is kept.
    """
    if model.kind is not NoiseKind.OBSERVATION:
        raise InvalidModel("the n0 rule is derived for white observation noise only")
    sup = validate_support(support, decomp.size)
    K = len(sup)
    n0_max = max_rows - 1 - (K - 1) * N0
    if n0_max < 0:
        raise ValueError(f"C_K(., {N0}) with K={K} does not fit in {max_rows} rows")
    product = float(np.prod(np.abs(decomp.eigenvalues[list(sup)]) ** 2))
    return N0Choice(0 if product <= 1 + tol else n0_max, product, tuple(range(n0_max + 1)))


@dataclass(frozen=True)
class SimulationResult:
    empirical_mse: float
    theoretical_mse: float
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray
    mean_error: np.ndarray
    standard_error: np.ndarray
    trials: int
    extras: dict = field(default_factory=dict)


def _draw(rng, shape, complex_noise: bool, sigma2: float) -> np.ndarray:
    if complex_noise:
        return np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return np.sqrt(sigma2) * rng.standard_normal(shape)


def _shift_rows(S: np.ndarray, node: int, length: int) -> np.ndarray:
    """Rows e_i^T S^l for l < length, by repeated vector-matrix products."""
    N = S.shape[0]
    rows = np.empty((length, N), dtype=complex)
    r = np.zeros(N, dtype=complex)
    r[node] = 1.0
    for l in range(length):
        rows[l] = r
        r = r @ S
    return rows


def draw_noisy_samples(shift, decomp: SpectralDecomposition, support, node: int, plan: SelectionPlan,
                       model: NoiseModel, xhat_K, count: int, rng) -> np.ndarray:
    """``count`` noisy realisations (as columns) of the selected aggregated samples.

    Noise is injected where the model says it lives: on the observed samples,
    on x before shifting, or on the active coefficients.  Shifted signals are
    propagated with S itself, never through the eigendecomposition.  Noise
    is real Gaussian when the decomposition and coefficients are real and
    circular complex Gaussian otherwise.
    """
    sup = list(validate_support(support, decomp.size))
    node = _check_node(node, decomp.size)
    S = np.asarray(getattr(shift, "matrix", shift), dtype=complex)
    xhat_K = np.asarray(xhat_K, dtype=complex)
    VK = decomp.eigenvectors[:, sup]
    x = VK @ xhat_K
    complex_noise = not (decomp.is_real and np.all(xhat_K.imag == 0))
    R = _shift_rows(S, node, plan.total)[list(plan.picks)]
    clean = (R @ x)[:, None]
    m, N = len(plan), decomp.size
    if model.kind is NoiseKind.OBSERVATION:
        return clean + _draw(rng, (m, count), complex_noise, model.sigma2)
    if model.kind is NoiseKind.SIGNAL:
        return R @ (x[:, None] + _draw(rng, (N, count), complex_noise, model.sigma2))
    if model.kind is NoiseKind.FREQUENCY:
        return R @ (x[:, None] + VK @ _draw(rng, (len(sup), count), complex_noise, model.sigma2))
    evals, evecs = np.linalg.eigh(model.custom_covariance)
    root = evecs * np.sqrt(np.clip(evals, 0, None))
    return clean + root @ _draw(rng, (m, count), complex_noise, 1.0)


def simulate_estimation(decomp: SpectralDecomposition, support, node: int, plan: SelectionPlan,
                        model: NoiseModel, xhat_K, trials: int, seed: int, shift=None) -> SimulationResult:
    """Monte-Carlo check of the BLUE error covariance.

    Samples come from ``draw_noisy_samples`` (S is rebuilt from the
    decomposition when ``shift`` is omitted).  Trials run in chunks of 1000,
    chunk c drawing from ``rng_stream(seed, c)``, so results do not depend on
    execution order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sup = list(validate_support(support, decomp.size))
    node = _check_node(node, decomp.size)
    S = decomp.reconstruct() if shift is None else shift
    xhat_K = np.asarray(xhat_K, dtype=complex)
    VK = decomp.eigenvectors[:, sup]

    A = plan.apply(build_psi_i(decomp, node, sup, plan.total))
    shape = reduce_covariance(covariance_shape(model, decomp, node, sup, plan.total), plan)
    power = 1.0 if model.kind is NoiseKind.CUSTOM else model.sigma2
    F, At, Lc, _ = _fisher(A, shape)
    gain = np.linalg.solve(F, At.conj().T @ np.linalg.inv(Lc))  # K x m estimator matrix

    errors = []
    for c, start in enumerate(range(0, trials, CHUNK)):
        n = min(CHUNK, trials - start)
        Z = draw_noisy_samples(S, decomp, sup, node, plan, model, xhat_K, n, rng_stream(seed, c))
        errors.append(gain @ Z - xhat_K[:, None])
    E = np.concatenate(errors, axis=1)
    time_err = VK @ E
    emp_cov = (E @ E.conj().T) / trials
    R_hat = power * _hermitian(np.linalg.inv(F))
    return SimulationResult(
        empirical_mse=float(np.mean(np.sum(np.abs(time_err) ** 2, axis=0))),
        theoretical_mse=float(np.trace(VK @ R_hat @ VK.conj().T).real),
        empirical_cov=emp_cov,
        theoretical_cov=R_hat,
        mean_error=E.mean(axis=1),
        standard_error=E.std(axis=1, ddof=1) / np.sqrt(trials) if trials > 1 else np.full(len(sup), np.inf),
        trials=trials,
    )
