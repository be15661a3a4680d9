"""Graph construction, shift operators, table ingestion and result persistence.

Files use 1-based node indices; the in-memory API is 0-based.

Edge convention: an edge ``(src, dst, w)`` lets ``dst`` read the value at
``src``, so it lands in the shift as ``S[dst, src] = w``.  Node i therefore
aggregates over its incoming neighbours, the row pattern of S.

Random streams come from numpy's Philox4x64-10 counter-based generator, keyed
through ``SeedSequence(master_seed, spawn_key=keys)``.  Deriving a stream from
``(seed, experiment_index, ...)`` makes every experiment reproducible on its
own, independent of the order in which experiments are run.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConnectivityBudgetExceeded,
    IOFailure,
    MalformedTable,
    SchemaMismatch,
)
from .spectral import ShiftOperator

EDGE_HEADER = ["src", "dst", "weight"]
SIGNAL_HEADER = ["node", "value_re", "value_im"]
SHIFT_KINDS = ("adjacency", "identity_minus_adjacency", "half_adjacency_squared", "laplacian", "custom")


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox stream for (seed, *keys)."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get("GSP_SEED")
    return int(value) if value not in (None, "") else fallback


@dataclass(frozen=True)
class EdgeListGraph:
    node_count: int
    edges: tuple
    directed: bool = False

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("graph needs at least one node")
        seen = set()
        clean = []
        for src, dst, w in self.edges:
            src, dst = int(src), int(dst)
            if not (0 <= src < self.node_count and 0 <= dst < self.node_count):
                raise ValueError(f"edge ({src}, {dst}) outside [0, {self.node_count - 1}]")
            key = (src, dst) if self.directed else (min(src, dst), max(src, dst))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((key[0], key[1], float(w)))
        object.__setattr__(self, "edges", tuple(clean))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.node_count, self.node_count))
        for src, dst, w in self.edges:
            A[dst, src] = w
            if not self.directed:
                A[src, dst] = w
        return A

    def incoming_neighbors(self, node: int) -> list:
        A = self.adjacency()
        return [j for j in np.flatnonzero(A[node]).tolist() if j != node]

    def is_connected(self) -> bool:
        """Undirected reachability on the symmetrised pattern."""
        A = self.adjacency()
        n, _ = connected_components((A != 0) | (A.T != 0), directed=False)
        return n == 1


def erdos_renyi(N: int, p: float, seed: int, require_connected: bool = True, symmetric: bool = True,
                max_attempts: int = 10_000, rng: np.random.Generator | None = None) -> EdgeListGraph:
    """Unweighted Erdos-Renyi graph; disconnected draws are discarded and redrawn."""
    if not 0 < p < 1:
        raise ValueError("edge probability must lie in (0, 1)")
    rng = rng_stream(seed, 0) if rng is None else rng
    if symmetric:
        iu, ju = np.triu_indices(N, k=1)
    else:
        iu, ju = np.nonzero(~np.eye(N, dtype=bool))
    for _ in range(max_attempts):
        keep = rng.random(iu.size) < p
        g = EdgeListGraph(N, tuple((int(a), int(b), 1.0) for a, b in zip(iu[keep], ju[keep])),
                          directed=not symmetric)
        if not require_connected or g.is_connected():
            return g
    raise ConnectivityBudgetExceeded(f"no connected ER({N}, {p}) draw in {max_attempts} attempts")


def hub_graph(N: int, p: float, seed: int, hubs: int = 2, backbone_weight: float = 0.1,
              rng: np.random.Generator | None = None) -> EdgeListGraph:
    """Weighted graph where a few hub nodes link to every other node.

    Nodes 0..hubs-1 are hubs joined to all non-hub nodes with weights drawn
    uniformly from [0.5, 1.5]; non-hub pairs are joined with probability p
    and weight ``backbone_weight`` times a uniform [0.5, 1.5] draw.  This
    mimics input-output tables with aggregate rows such as value added and
    final use.  Always connected when hubs >= 1.
    """
    if not 0 < p < 1:
        raise ValueError("edge probability must lie in (0, 1)")
    if not 0 <= hubs < N:
        raise ValueError("need 0 <= hubs < N")
    rng = rng_stream(seed, 0) if rng is None else rng
    edges = [(h, j, float(rng.uniform(0.5, 1.5))) for h in range(hubs) for j in range(hubs, N)]
    iu, ju = np.triu_indices(N - hubs, k=1)
    keep = rng.random(iu.size) < p
    weights = backbone_weight * rng.uniform(0.5, 1.5, size=int(keep.sum()))
    edges += [(int(a) + hubs, int(b) + hubs, float(w)) for a, b, w in zip(iu[keep], ju[keep], weights)]
    return EdgeListGraph(N, tuple(edges))


def directed_cycle(N: int) -> EdgeListGraph:
    """Edges i -> i+1 (mod N): the shift moves the value at node i to node i+1."""
    return EdgeListGraph(N, tuple((i, (i + 1) % N, 1.0) for i in range(N)) if N > 1 else (), directed=True)


def path_graph(N: int) -> EdgeListGraph:
    return EdgeListGraph(N, tuple((i, i + 1, 1.0) for i in range(N - 1)))


def star_graph(leaves: int) -> EdgeListGraph:
    """Node 0 is the centre."""
    return EdgeListGraph(leaves + 1, tuple((0, j, 1.0) for j in range(1, leaves + 1)))


def shift_from_graph(graph: EdgeListGraph, kind: str = "adjacency", matrix=None) -> ShiftOperator:
    A = graph.adjacency()
    N = graph.node_count
    pattern_A = A != 0
    if kind == "adjacency":
        return ShiftOperator(A)
    if kind == "identity_minus_adjacency":
        return ShiftOperator(np.eye(N) - A)
    if kind == "half_adjacency_squared":
        two_hop = (pattern_A.astype(int) @ pattern_A.astype(int)) > 0
        rows, cols = np.nonzero(two_hop)
        return ShiftOperator(0.5 * (A @ A), frozenset(zip(rows.tolist(), cols.tolist())))
    if kind == "laplacian":
        return ShiftOperator(np.diag(A.sum(axis=1)) - A)
    if kind == "custom":
        if matrix is None:
            raise ValueError("custom shift needs an explicit matrix")
        return ShiftOperator(matrix)
    raise ValueError(f"unknown shift kind {kind!r}; expected one of {SHIFT_KINDS}")


@dataclass(frozen=True)
class IngestResult:
    graph: EdgeListGraph
    labels: tuple
    dropped: int


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def ingest_weighted_table(source, symmetrize: bool = True, threshold: float = 0.01) -> IngestResult:
    """Square weight table -> weighted graph.

    ``source`` is a path, a CSV string, or a sequence of rows.  A non-numeric
    first row is taken as a header and a non-numeric first column as row
    labels.  Entry (i, j) becomes S[i, j].  With ``symmetrize`` the weights are
    replaced by (U[i, j] + U[j, i]) / 2 before thresholding; entries strictly
    below ``threshold`` are zeroed and counted in ``dropped``.
    """
    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        with open(source, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    elif isinstance(source, str):
        rows = list(csv.reader(io.StringIO(source)))
    else:
        rows = [list(map(str, r)) for r in source]
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise MalformedTable("empty table")
    labels = ()
    if any(c.strip() and not _is_number(c) for c in rows[0][1:]):
        header, rows = rows[0], rows[1:]
        labels = tuple(c.strip() for c in header[-len(rows):]) if rows else ()
    if rows and all(not _is_number(r[0]) for r in rows):
        labels = tuple(r[0].strip() for r in rows)
        rows = [r[1:] for r in rows]
    try:
        U = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise MalformedTable(f"non-numeric entry: {exc}") from exc
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] == 0:
        raise MalformedTable(f"table must be square, got {U.shape}")
    if symmetrize:
        U = (U + U.T) / 2
    N = U.shape[0]
    low = (U != 0) & (U < threshold)
    if symmetrize:
        dropped = int(np.count_nonzero(np.triu(low)))
    else:
        dropped = int(np.count_nonzero(low))
    U = np.where(low, 0.0, U)
    if symmetrize:
        edges = tuple((j, i, U[i, j]) for i in range(N) for j in range(i, N) if U[i, j] != 0)
        graph = EdgeListGraph(N, edges, directed=False)
    else:
        edges = tuple((j, i, U[i, j]) for i in range(N) for j in range(N) if U[i, j] != 0)
        graph = EdgeListGraph(N, edges, directed=True)
    return IngestResult(graph, labels if len(labels) == N else (), dropped)


def write_edge_csv(path, graph: EdgeListGraph) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EDGE_HEADER)
            for src, dst, weight in graph.edges:
                w.writerow([src + 1, dst + 1, repr(float(weight))])
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def read_edge_csv(path, directed: bool = False, node_count: int | None = None) -> EdgeListGraph:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    if not rows or [c.strip() for c in rows[0]] != EDGE_HEADER:
        raise MalformedTable(f"edge list must start with header {','.join(EDGE_HEADER)}")
    merged = {}
    for r in rows[1:]:
        if not r:
            continue
        try:
            src, dst, weight = int(r[0]) - 1, int(r[1]) - 1, float(r[2])
        except (ValueError, IndexError) as exc:
            raise MalformedTable(f"bad edge row {r}") from exc
        if src < 0 or dst < 0:
            raise MalformedTable(f"node indices are 1-based: {r}")
        key = (src, dst) if directed else (min(src, dst), max(src, dst))
        if key in merged and merged[key] != weight:
            raise MalformedTable(f"conflicting weights for undirected edge {key}")
        merged[key] = weight
    n = max((max(s, d) for s, d in merged), default=-1) + 1
    n = max(n, node_count or 0)
    return EdgeListGraph(n, tuple((s, d, w) for (s, d), w in merged.items()), directed=directed)


def write_signal_csv(path, x) -> None:
    x = np.asarray(x, dtype=complex)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SIGNAL_HEADER)
            for i, v in enumerate(x):
                w.writerow([i + 1, repr(float(v.real)), repr(float(v.imag))])
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def read_signal_csv(path) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    if not rows or [c.strip() for c in rows[0]] != SIGNAL_HEADER:
        raise MalformedTable(f"signal file must start with header {','.join(SIGNAL_HEADER)}")
    entries = {}
    for r in rows[1:]:
        if r:
            entries[int(r[0]) - 1] = complex(float(r[1]), float(r[2]))
    if sorted(entries) != list(range(len(entries))):
        raise MalformedTable("signal file must list nodes 1..N exactly once")
    return np.array([entries[i] for i in range(len(entries))], dtype=complex)


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment."""

    seed: int = 0
    graph: str = "er:20:0.2"
    shift: str = "adjacency"
    support: list | None = None
    bandwidth: int = 3
    noise: dict = field(default_factory=lambda: {"kind": "none", "sigma2": 0.0})
    plan: dict = field(default_factory=lambda: {"kind": "first"})
    trials: int = 100

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise SchemaMismatch(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def _encode(value):
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_encode(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def _decode(value):
    if isinstance(value, dict):
        if set(value) == {"re", "im"}:
            return complex(value["re"], value["im"])
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def _versions() -> dict:
    from . import __version__
    return {"aggsampling": __version__, "numpy": np.__version__}


def dumps_results(records, config=None, seed=None, timestamp: bool = True) -> str:
    """Serialise to the result schema.

    Floats are written with Python's shortest round-trip repr (at most 17
    significant digits), so every numeric field loads back bit-exact.
    """
    doc = {
        "config": _encode(config or {}),
        "results": [_encode(r) for r in records],
        "versions": _versions(),
        "seed": seed,
    }
    if timestamp:
        doc["created"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    for r in doc["results"]:
        if not isinstance(r, dict) or "name" not in r:
            raise SchemaMismatch("every result record needs a 'name'")
    return json.dumps(doc, indent=1, sort_keys=True)


def save_results(path, records, config=None, seed=None, timestamp: bool = True) -> None:
    text = dumps_results(records, config, seed, timestamp)
    try:
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def load_results(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"not JSON: {exc}") from exc
    missing = {"config", "results", "versions", "seed"} - set(doc if isinstance(doc, dict) else ())
    if missing:
        raise SchemaMismatch(f"result file lacks {sorted(missing)}")
    if not isinstance(doc["results"], list) or any(
            not isinstance(r, dict) or "name" not in r for r in doc["results"]):
        raise SchemaMismatch("'results' must be a list of records with a 'name'")
    return _decode(doc)


def strip_volatile(doc: dict) -> dict:
    """Drop fields that legitimately differ between reruns (the timestamp)."""
    return {k: v for k, v in doc.items() if k != "created"}
