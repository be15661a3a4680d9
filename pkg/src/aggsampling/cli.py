"""Command-line entry point: ``aggsampling <subcommand> [options]``.

Nodes are 1-based on the command line and in every file written here.
Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 IO failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import GraphSamplingError, IOFailure, NumericalFailure, SchemaMismatch
from .graphs_io import SHIFT_KINDS, ExperimentConfig, default_seed, dumps_results, shift_from_graph
from .noisy import NoiseModel
from .sampling import SelectionPlan
from .spectral import decompose

log = logging.getLogger("aggsampling")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# options that a --config file may fill in when absent from the command line
_DEFAULTS = {"graph": "er:20:0.2", "shift": "adjacency", "bandwidth": 3, "trials": 100,
             "noise": "none", "sigma2": 0.0, "plan": "first"}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="er:N:p, hub:N:p, cycle:N, path:N, star:leaves or an edge-list CSV")
    p.add_argument("--directed", action="store_true", help="read an edge-list CSV as directed")
    p.add_argument("--shift", choices=[k for k in SHIFT_KINDS if k != "custom"])
    p.add_argument("--seed", type=int, help="master seed (default: $GSP_SEED or 0)")
    p.add_argument("--config", help="JSON experiment config; command-line options take precedence")
    p.add_argument("--out", help="output directory (default: JSON on stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aggsampling", description="Aggregation sampling of bandlimited graph signals.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="eigendecomposition of the shift")
    _common(p)

    p = sub.add_parser("recover", help="plant bandlimited signals and recover them from one node")
    _common(p)
    p.add_argument("--node", type=int, default=1)
    p.add_argument("--bandwidth", type=int)
    p.add_argument("--plan", help="first | offset:n0:N0 (n0 shifts skipped, spacing N0)")
    p.add_argument("--length", type=int, help="aggregated samples available (default: minimum needed)")
    p.add_argument("--noise", choices=["none", "observation", "signal", "frequency"])
    p.add_argument("--sigma2", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--sweep", action="store_true", help="random-graph sweep over N, K and p instead of one graph")
    p.add_argument("--graphs", type=int, default=1000, help="graphs in the sweep")
    p.add_argument("--full", action="store_true", help="full-size sweep (10^4 graphs)")

    p = sub.add_parser("support-id", help="recovery rate with unknown frequency support")
    _common(p)
    p.add_argument("--bandwidth", type=int)
    p.add_argument("--observations", default="0-10", help="range a-b or comma list of observation counts")
    p.add_argument("--method", choices=["l0", "l1"], default="l1")
    p.add_argument("--shifts", default="adjacency,identity_minus_adjacency,half_adjacency_squared")
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--probabilities", default="0.15,0.2,0.25")
    p.add_argument("--graphs", type=int, default=10)
    p.add_argument("--nodes-per-graph", type=int)
    p.add_argument("--weighted", action="store_true", help="weight the 1-norm by column norms")

    p = sub.add_parser("design", help="rank sampling nodes and shift offsets")
    _common(p)
    p.add_argument("--bandwidth", type=int)
    p.add_argument("--noise", choices=["observation", "signal", "frequency"], default="observation")
    p.add_argument("--sigma2", type=float)
    p.add_argument("--plan", help="first | offset:n0:N0")
    p.add_argument("--length", type=int, help="aggregated samples available (default: minimum needed)")
    p.add_argument("--metric", choices=["e1", "e2", "e3", "e4"], default="e4")
    p.add_argument("--spacing", type=int, default=1, help="N0 for the offset table")

    p = sub.add_parser("spaceshift", help="compare space-shift sampling strategies")
    _common(p)
    p.add_argument("--bandwidth", type=int, default=4)
    p.add_argument("--strategies", default="all", help="comma list of strategy names or 'all'")
    p.add_argument("--trials", type=int)
    p.add_argument("--sigma2", type=float)
    return parser


def _resolve(args) -> argparse.Namespace:
    """Fill unset options from --config, then from built-in defaults."""
    cfg = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"config is not JSON: {exc}") from exc
        conf = ExperimentConfig.from_dict(data)
        cfg = {"graph": conf.graph, "shift": conf.shift, "bandwidth": conf.bandwidth, "trials": conf.trials,
               "seed": conf.seed, "noise": conf.noise.get("kind", "none"), "sigma2": conf.noise.get("sigma2", 0.0),
               "plan": _plan_spec(conf.plan)}
    for key, default in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, cfg.get(key, default))
    if args.seed is None:
        args.seed = cfg.get("seed", default_seed(0))
    return args


def _plan_spec(plan: dict) -> str:
    if plan.get("kind", "first") == "first":
        return "first"
    return f"offset:{plan.get('n0', 0)}:{plan.get('N0', 1)}"


def _plan(spec: str, K: int, length: int | None) -> SelectionPlan:
    if spec == "first":
        return SelectionPlan.first(K, length or K)
    parts = spec.split(":")
    if parts[0] == "offset" and len(parts) == 3:
        n0, N0 = int(parts[1]), int(parts[2])
        need = n0 + N0 * (K - 1) + 1
        return SelectionPlan.structured_plan(n0, N0, K, length or need)
    raise UsageError(f"bad plan {spec!r}; use 'first' or 'offset:n0:N0'")


def _model(kind: str, sigma2: float):
    if kind in (None, "none"):
        return None
    return NoiseModel(kind, sigma2)


def _int_list(text: str) -> list:
    if "-" in text and "," not in text:
        a, b = text.split("-")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",") if v]


def _csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _emit(args, name: str, records: list, config: dict, tables: dict | None = None) -> None:
    text = dumps_results(records, config, args.seed)
    if not args.out:
        sys.stdout.write(text + "\n")
        return
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n", encoding="utf-8")
        for table, rows in (tables or {}).items():
            (out / f"{table}.csv").write_text(_csv(rows), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    log.info("wrote %s", out)


def _graph_and_decomp(args):
    graph = ex.parse_graph(args.graph, args.seed, args.directed)
    S = shift_from_graph(graph, args.shift)
    return graph, S, decompose(S)


def _config(args, **extra) -> dict:
    keys = ("command", "graph", "shift", "seed", "bandwidth", "noise", "sigma2", "plan", "trials")
    cfg = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    cfg.update(extra)
    return cfg


def cmd_decompose(args) -> None:
    _, S, d = _graph_and_decomp(args)
    record = {"name": "decomposition", "eigenvalues": list(d.eigenvalues), "is_normal": d.is_normal,
              "condition_number": d.condition_number, "mode": d.mode, "nodes": d.size}
    rows = [{"index": k + 1, "re": float(v.real), "im": float(v.imag), "modulus": float(abs(v))}
            for k, v in enumerate(d.eigenvalues)]
    _emit(args, "decompose", [record], _config(args), {"eigenvalues": rows})


def cmd_recover(args) -> None:
    model = _model(args.noise, args.sigma2)
    if args.sweep:
        graphs = 10_000 if args.full else args.graphs
        sweep = ex.recovery_sweep(args.seed, graphs=graphs, shift=args.shift)
        summary = {"name": "recovery_sweep", "graphs": graphs, "cases": sweep.cases,
                   "conditions_passed": sweep.passed_conditions, "successes": sweep.successes,
                   "success_rate": sweep.success_rate, "conditional_rate": sweep.conditional_rate}
        rows = [dict(r, node=r["node"] + 1) for r in sweep.records]
        _emit(args, "recover", [summary], _config(args, graphs=graphs), {"recover_cases": rows})
        return
    _, S, d = _graph_and_decomp(args)
    node = _node(args.node, d.size)
    K = args.bandwidth
    if not 1 <= K <= d.size:
        raise UsageError(f"bandwidth must lie in 1..{d.size}")
    plan = _plan(args.plan, K, args.length)
    records = ex.recover_trials(S, d, node, K, plan, model, args.trials, args.seed)
    for r in records:
        r["node"] = node + 1
    errs = np.array([r["error"] for r in records], dtype=float)
    summary = {"name": "recover_summary", "trials": len(records),
               "success_rate": float(np.mean([r["success"] for r in records])),
               "mean_error": float(np.nanmean(errs)) if np.any(~np.isnan(errs)) else float("nan"),
               "max_error": float(np.nanmax(errs)) if np.any(~np.isnan(errs)) else float("nan")}
    if model is not None and records and "predicted_mse" in records[0]:
        summary["empirical_mse"] = float(np.mean([r["squared_error"] for r in records]))
        summary["predicted_mse"] = records[0]["predicted_mse"]
    _emit(args, "recover", [summary], _config(args, node=node + 1), {"recover_trials": records})


def cmd_support(args) -> None:
    observations = _int_list(args.observations)
    shifts = [s for s in args.shifts.split(",") if s]
    for s in shifts:
        if s not in SHIFT_KINDS or s == "custom":
            raise UsageError(f"unknown shift {s!r}")
    probs = [float(v) for v in args.probabilities.split(",") if v]
    rows, records = [], []
    for p in probs:
        sweep = ex.support_sweep(args.seed, graphs=args.graphs, N=args.nodes, K=args.bandwidth, p=p,
                                 shifts=shifts, observations=observations, nodes_per_graph=args.nodes_per_graph,
                                 method=args.method, normalize=args.weighted)
        for s in shifts:
            for m, rate in zip(observations, sweep.rates[s]):
                rows.append({"p": p, "shift": s, "observations": m, "rate": float(rate),
                             "instances": sweep.instances})
            records.append({"name": f"rate_{s}_p{p}", "p": p, "shift": s, "observations": observations,
                            "rates": [float(r) for r in sweep.rates[s]], "instances": sweep.instances})
    _emit(args, "support_id", records,
          _config(args, method=args.method, graphs=args.graphs, nodes=args.nodes, probabilities=probs),
          {"support_rates": rows})


def cmd_design(args) -> None:
    _, S, d = _graph_and_decomp(args)
    K = args.bandwidth
    if not 1 <= K <= d.size:
        raise UsageError(f"bandwidth must lie in 1..{d.size}")
    sigma2 = 1.0 if args.sigma2 in (None, 0.0) else args.sigma2
    model = NoiseModel(args.noise, sigma2)
    plan = _plan(args.plan, K, args.length)
    support = tuple(range(K))
    ranking = ex.design_table(d, support, plan, model, metric=args.metric)
    for r in ranking:
        r["node"] += 1
    records = [{"name": "node_ranking", "metric": args.metric, "ranking": ranking,
                "all_tied": all(r["tied_with_best"] for r in ranking)}]
    tables = {"design_nodes": ranking}
    if args.noise == "observation":
        best = ranking[0]["node"] - 1
        rows_total = max(plan.total, K * args.spacing)
        n0_rows, choice = ex.n0_table(d, support, best, args.spacing, rows_total, model)
        records.append({"name": "offset_choice", "node": best + 1, "N0": args.spacing, "n0": choice.n0,
                        "amplification": choice.amplification, "table": n0_rows})
        tables["design_offsets"] = n0_rows
    _emit(args, "design", records, _config(args, metric=args.metric), tables)


def cmd_spaceshift(args) -> None:
    parts = args.graph.split(":")
    if parts[0] not in ("hub", "er") or len(parts) != 3:
        raise UsageError("spaceshift draws a fresh graph per trial; use --graph hub:N:p or er:N:p")
    N, p = int(parts[1]), float(parts[2])
    study = ex.strategy_study(args.seed, trials=args.trials, N=N, p=p, K=args.bandwidth, family=parts[0],
                              sigma2=args.sigma2 or 0.0)
    wanted = None if args.strategies == "all" else set(args.strategies.split(","))
    summary = [r for r in study.summary if wanted is None or r["strategy"] in wanted]
    if wanted and len(summary) != len(wanted):
        known = [r["strategy"] for r in study.summary]
        raise UsageError(f"unknown strategy in {sorted(wanted)}; known: {known}")
    rows = [{"trial": t, "strategy": name, "error": e}
            for name, errs in study.errors.items() if wanted is None or name in wanted
            for t, e in enumerate(errs)]
    records = [dict(r, name=r["strategy"]) for r in summary]
    _emit(args, "spaceshift", records, _config(args, strategies=args.strategies),
          {"spaceshift_summary": summary, "spaceshift_trials": rows})


def _node(value: int, N: int) -> int:
    if not 1 <= value <= N:
        raise UsageError(f"node must lie in 1..{N}")
    return value - 1


COMMANDS = {"decompose": cmd_decompose, "recover": cmd_recover, "support-id": cmd_support,
            "design": cmd_design, "spaceshift": cmd_spaceshift}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = _resolve(args)
        COMMANDS[args.command](args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (IOFailure, OSError) as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, GraphSamplingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
