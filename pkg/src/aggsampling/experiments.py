"""Seeded experiment drivers behind the command-line interface.

Every driver takes a master seed and derives one Philox stream per unit of
work (graph, trial) with ``rng_stream(seed, tag, index)``, so results do not
depend on the order in which units are processed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphSamplingError, IOFailure, NoConvergence, NumericalFailure
from .graphs_io import (
    EdgeListGraph,
    directed_cycle,
    erdos_renyi,
    hub_graph,
    path_graph,
    read_edge_csv,
    rng_stream,
    shift_from_graph,
    star_graph,
)
from .noisy import NoiseKind, NoiseModel, blue_interpolate, draw_noisy_samples, select_n0, select_sampling_node
from .sampling import SelectionPlan, aggregate, aggregation_interpolate, check_recovery_conditions
from .spaceshift import lowpass_signal, observe, reconstruct, relative_error, table_strategies
from .sparse import SensingSystem, brute_force_l0, l1_recover, sensing_matrix
from .spectral import SpectralDecomposition, decompose

# stream tags, one per experiment family
TAG_RECOVERY, TAG_SUPPORT, TAG_TRIALS, TAG_STRATEGY = 1, 2, 3, 4


def parse_graph(spec: str, seed: int, directed: bool = False) -> EdgeListGraph:
    """Graph from a compact spec or an edge-list CSV path.

    Specs: ``er:N:p``, ``hub:N:p``, ``cycle:N``, ``path:N``, ``star:leaves``.
    Anything else is read as an edge-list CSV, directed if asked.
    """
    parts = spec.split(":")
    kind = parts[0].lower()
    try:
        if kind == "er" and len(parts) == 3:
            return erdos_renyi(int(parts[1]), float(parts[2]), seed)
        if kind == "hub" and len(parts) == 3:
            return hub_graph(int(parts[1]), float(parts[2]), seed)
        if kind == "cycle" and len(parts) == 2:
            return directed_cycle(int(parts[1]))
        if kind == "path" and len(parts) == 2:
            return path_graph(int(parts[1]))
        if kind == "star" and len(parts) == 2:
            return star_graph(int(parts[1]))
    except ValueError as exc:
        raise ValueError(f"bad graph spec {spec!r}: {exc}") from exc
    if not Path(spec).exists():
        raise IOFailure(f"graph spec {spec!r} is neither a known form nor an existing file")
    return read_edge_csv(spec, directed=directed)


def _planted(decomp: SpectralDecomposition, K: int, rng) -> np.ndarray:
    coeffs = rng.standard_normal(K)
    if not decomp.is_real:
        coeffs = coeffs + 1j * rng.standard_normal(K)
    return coeffs.astype(complex)


@dataclass
class RecoverySweep:
    records: list
    cases: int
    passed_conditions: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.cases if self.cases else 0.0

    @property
    def conditional_rate(self) -> float:
        return self.successes / self.passed_conditions if self.passed_conditions else 0.0


def recovery_sweep(seed: int, graphs: int = 1000, sizes=(10, 30), bandwidths=(1, 5), probabilities=(0.15, 0.25),
                   shift: str = "adjacency", tol: float = 1e-8, method: str = "direct") -> RecoverySweep:
    """Noiseless recovery at every node of random ER graphs.

    Each graph draws N, K and p uniformly from the given ranges, plants a
    signal on the K leading frequencies and tries to recover it from K
    aggregated samples at every node.  A case succeeds when the recovery
    conditions hold and the relative error is below ``tol``.
    """
    records = []
    passed = successes = 0
    for g in range(graphs):
        rng = rng_stream(seed, TAG_RECOVERY, g)
        N = int(rng.integers(sizes[0], sizes[1] + 1))
        K = int(rng.integers(bandwidths[0], bandwidths[1] + 1))
        p = float(rng.uniform(*probabilities))
        graph = erdos_renyi(N, p, seed, rng=rng)
        S = shift_from_graph(graph, shift)
        decomp = decompose(S)
        support = tuple(range(K))
        x = decomp.eigenvectors[:, :K] @ _planted(decomp, K, rng)
        plan = SelectionPlan.first(K, K)
        for node in range(N):
            report = check_recovery_conditions(decomp, support, node, plan=plan)
            error, reason = float("nan"), ""
            try:
                samples = aggregate(S, x, node, K).values
                rec = aggregation_interpolate(decomp, support, node, plan, samples, method=method)
                error = float(np.linalg.norm(rec.signal - x) / np.linalg.norm(x))
            except NumericalFailure as exc:
                reason = type(exc).__name__
            ok = bool(report.passed and error < tol)
            passed += report.passed
            successes += ok
            records.append({"graph": g, "N": N, "K": K, "p": p, "node": node,
                            "conditions": bool(report.passed), "error": error, "success": ok, "failure": reason})
    return RecoverySweep(records, len(records), passed, successes)


@dataclass
class SupportSweep:
    observations: tuple
    shifts: tuple
    rates: dict          # shift -> array of success rates per observation count
    outcomes: dict       # shift -> bool array (instances x observation counts)
    instances: int


def support_sweep(seed: int, graphs: int = 10, N: int = 20, K: int = 3, p: float = 0.2,
                  shifts=("adjacency", "identity_minus_adjacency", "half_adjacency_squared"),
                  observations=range(0, 11), nodes_per_graph: int | None = None,
                  method: str = "l1", normalize: bool = False) -> SupportSweep:
    """Success rate of support identification versus the number of observations.

    Every instance (graph, node, planted coefficients) is shared by all
    shift operators; the signal lives on the K leading frequencies of the
    shift at hand.  Observation count m uses the first m aggregated
    samples.  Success means the declared solution has exactly the planted
    support and matches the planted coefficients to 1e-6 relative.  The l1
    method minimises the plain 1-norm unless ``normalize`` asks for column
    weighting; only the plain objective makes per-instance success monotone
    in the number of observations.
    """
    observations = tuple(int(m) for m in observations)
    L = max(max(observations), 1)
    outcomes = {s: [] for s in shifts}
    for g in range(graphs):
        rng = rng_stream(seed, TAG_SUPPORT, int(round(p * 1000)), g)
        graph = erdos_renyi(N, p, seed, rng=rng)
        nodes = range(N) if nodes_per_graph is None else sorted(rng.choice(N, nodes_per_graph, replace=False))
        nodes = [int(i) for i in nodes]
        coeffs = {i: rng.standard_normal(K) for i in nodes}
        for kind in shifts:
            S = shift_from_graph(graph, kind)
            decomp = decompose(S)
            for i in nodes:
                xhat = np.zeros(N, dtype=complex)
                xhat[:K] = coeffs[i]
                x = decomp.eigenvectors @ xhat
                y = aggregate(S, x, i, L).values
                M = sensing_matrix(decomp, i, SelectionPlan.first(L, L))
                row = []
                for m in observations:
                    row.append(m > 0 and _identified(M[:m], y[:m], K, xhat, method, normalize))
                outcomes[kind].append(row)
    outcomes = {k: np.array(v, dtype=bool) for k, v in outcomes.items()}
    rates = {k: v.mean(axis=0) for k, v in outcomes.items()}
    return SupportSweep(observations, tuple(shifts), rates, outcomes, len(next(iter(outcomes.values()))))


def _identified(M, y, K, xhat, method, normalize=False) -> bool:
    truth = tuple(int(k) for k in np.flatnonzero(xhat))
    system = SensingSystem(M, y)
    try:
        if method == "l0":
            if M.shape[0] < K:
                return False
            support, x = brute_force_l0(system, K)
        else:
            res = l1_recover(system, K, normalize=normalize)
            if not res.success:
                return False
            support, x = res.support, res.coefficients
    except (NoConvergence, GraphSamplingError):
        return False
    return tuple(support) == truth and np.linalg.norm(x - xhat) <= 1e-6 * np.linalg.norm(xhat)


def design_table(decomp: SpectralDecomposition, support, plan: SelectionPlan, model: NoiseModel,
                 metric: str = "e4", method: str = "auto") -> list:
    """Ranked sampling nodes with all four error metrics."""
    rows = []
    ranking = select_sampling_node(decomp, support, plan, model, metric=metric, method=method)
    for rank, entry in enumerate(ranking, start=1):
        metrics = entry.metrics or {"e1": float("inf"), "e2": float("inf"), "e3": float("inf"), "e4": float("inf")}
        rows.append({"rank": rank, "node": entry.node, "score": entry.score, "tied_with_best": entry.tied_with_best,
                     **metrics})
    return rows


def n0_table(decomp: SpectralDecomposition, support, node: int, N0: int, max_rows: int, model: NoiseModel) -> tuple:
    """log det of the frequency error covariance for every admissible offset, plus the rule's choice."""
    choice = select_n0(decomp, support, N0, max_rows, model)
    rows = []
    for n0 in choice.candidates:
        plan = SelectionPlan.structured_plan(n0, N0, len(tuple(support)), max_rows)
        try:
            e3 = blue_interpolate(decomp, support, node, plan, model, np.zeros(len(plan))).metrics["e3"]
        except NumericalFailure:
            e3 = float("nan")
        rows.append({"n0": n0, "N0": N0, "e3": e3, "chosen": n0 == choice.n0})
    return rows, choice


def recover_trials(shift, decomp: SpectralDecomposition, node: int, K: int, plan: SelectionPlan,
                   model: NoiseModel | None, trials: int, seed: int, tol: float = 1e-8) -> list:
    """Plant a fresh signal on the K leading frequencies per trial and recover it.

    Without a noise model (or with zero noise power) recovery uses the exact
    interpolator and counts as a success below ``tol`` relative error.  With
    noise, one realisation per trial is drawn and the BLUE is applied; its
    predicted mean squared error trace(R_e) is recorded next to the
    realised squared error.
    """
    support = tuple(range(K))
    records = []
    noiseless = model is None or (model.kind is not NoiseKind.CUSTOM and model.sigma2 == 0)
    for t in range(trials):
        rng = rng_stream(seed, TAG_TRIALS, t)
        coeffs = _planted(decomp, K, rng)
        x = decomp.eigenvectors[:, :K] @ coeffs
        rec = {"trial": t, "node": node}
        try:
            if noiseless:
                samples = plan.apply(aggregate(shift, x, node, plan.total).values)
                if len(plan) == K:
                    est = aggregation_interpolate(decomp, support, node, plan, samples).signal
                else:
                    est = blue_interpolate(decomp, support, node, plan, NoiseModel("observation", 0.0),
                                           samples).estimate_time
                err = float(np.linalg.norm(est - x) / np.linalg.norm(x))
                rec.update(error=err, success=err < tol)
            else:
                z = draw_noisy_samples(shift, decomp, support, node, plan, model, coeffs, 1, rng)[:, 0]
                rep = blue_interpolate(decomp, support, node, plan, model, z)
                sq = float(np.sum(np.abs(rep.estimate_time - x) ** 2))
                rec.update(error=float(np.sqrt(sq) / np.linalg.norm(x)), squared_error=sq,
                           predicted_mse=rep.metrics["e1"], success=True)
        except NumericalFailure as exc:
            rec.update(error=float("nan"), success=False, failure=type(exc).__name__)
        records.append(rec)
    return records


@dataclass
class StrategyStudy:
    errors: dict                 # strategy -> list of relative errors (nan when singular)
    summary: list = field(default_factory=list)


def strategy_study(seed: int, trials: int = 100, N: int = 20, p: float = 0.2, K: int = 4, family: str = "hub",
                   hubs: int = 2, backbone_weight: float = 0.1, sigma2: float = 0.0, dominant: int = 2,
                   in_band: float = 0.1, leak: float = 0.01) -> StrategyStudy:
    """Compare space-shift sampling strategies on approximately bandlimited signals.

    Each trial draws a graph (``family`` "hub" or "er"), the adjacency shift,
    a signal whose energy sits mostly on the ``dominant`` leading frequencies
    and K distinct non-hub nodes.  Every strategy observes K samples
    (plus white observation noise of power ``sigma2``) and interpolates onto
    the K leading frequencies; the error is ||x - x_rec||^2 / ||x||^2.
    """
    errors = {}
    first = 0
    for t in range(trials):
        rng = rng_stream(seed, TAG_STRATEGY, t)
        if family == "hub":
            graph = hub_graph(N, p, seed, hubs=hubs, backbone_weight=backbone_weight, rng=rng)
            first = hubs
        elif family == "er":
            graph = erdos_renyi(N, p, seed, rng=rng)
        else:
            raise ValueError(f"unknown graph family {family!r}")
        S = shift_from_graph(graph, "adjacency")
        decomp = decompose(S)
        x, _ = lowpass_signal(decomp, K, rng, dominant=dominant, in_band=in_band, leak=leak)
        nodes = first + rng.choice(N - first, K, replace=False)
        for name, plan in table_strategies(nodes, K, N).items():
            z = observe(S, x, plan)
            if sigma2 > 0:
                z = z + np.sqrt(sigma2) * rng.standard_normal(z.shape)
            try:
                err = relative_error(x, reconstruct(decomp, K, plan, z))
            except NumericalFailure:
                err = float("nan")
            errors.setdefault(name, []).append(err)
    summary = []
    for name, vals in errors.items():
        v = np.array(vals)
        ok = v[~np.isnan(v)]
        summary.append({"strategy": name, "min": float(ok.min()) if ok.size else float("nan"),
                        "median": float(np.median(ok)) if ok.size else float("nan"),
                        "singular": int(np.isnan(v).sum()), "trials": int(v.size)})
    return StrategyStudy(errors, summary)
