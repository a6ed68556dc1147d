"""Simulation presets, the political-blogs pipeline and report emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as sbm_io
from .graph import Graph, build_graph, largest_connected_component, average_degree
from .metrics import misclassified_count
from .refine import PenaltyMode, iterate_refinement, refine_full, refine_simplified
from .sbm import GeneralSbmParams, sample_general_sbm
from .spectral import DEFAULT_MU, SpectralInitializer, TauPolicy

log = logging.getLogger(__name__)

SCHEMA = "sbmrefine.report/1"
DATA_ENV = "SBMREFINE_DATA"
POLBLOGS_NODES = 1222

CSV_COLUMNS = ["preset", "replication", "seed", "n", "method", "initializer",
               "refinement", "misclassified", "loss", "t", "rho", "fallbacks"]


def _planted(k: int, within: float, between: float) -> np.ndarray:
    B = np.full((k, k), between)
    np.fill_diagonal(B, within)
    return B


PRESETS = {
    "balanced": {
        "sizes": (250,) * 10,
        "B": _planted(10, 0.48, 0.32),
    },
    "imbalanced": {
        "sizes": (200, 400, 600, 800),
        "B": np.array([[0.50, 0.29, 0.35, 0.25],
                       [0.29, 0.45, 0.25, 0.30],
                       [0.35, 0.25, 0.50, 0.35],
                       [0.25, 0.30, 0.35, 0.45]]),
    },
    "sparse": {
        "sizes": (400,) * 10,
        "B": _planted(10, 0.032, 0.005),
    },
}

DEFAULT_INITIALIZERS = ("usc:inf", "usc:2d", "nsc:0", "nsc:1d")


def parse_initializer(text: str, mu: float = DEFAULT_MU, a: float | None = None
                      ) -> SpectralInitializer:
    """``usc:inf``, ``usc:2d``, ``nsc:0``, ``nsc:1d``, ``nsc:0.5`` ..."""
    method, _, tau = text.partition(":")
    method = method.strip().lower()
    if method not in ("usc", "nsc"):
        raise ValueError(f"unknown initializer {text!r}")
    default = "2d" if method == "usc" else "1d"
    return SpectralInitializer(method, TauPolicy.parse(tau or default), mu, a)


@dataclass
class ExperimentSpec:
    preset: str = "balanced"
    replications: int = 20
    seed_base: int = 0
    initializers: tuple[str, ...] = DEFAULT_INITIALIZERS
    refinements: tuple[str, ...] | None = None
    penalty: PenaltyMode = field(default_factory=PenaltyMode)
    mu: float = DEFAULT_MU
    workers: int = 1
    max_iters: int = 20
    B: np.ndarray | None = None
    sizes: tuple[int, ...] | None = None
    data_dir: str | None = None
    polblogs_edges: str | None = None
    polblogs_labels: str | None = None

    def __post_init__(self):
        if self.preset not in (*PRESETS, "polblogs", "custom"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        for r in self.refinements or ():
            if r not in ("simplified", "full", "iterated"):
                raise ValueError(f"unknown refinement {r!r}")
        if self.preset == "custom" and (self.B is None or self.sizes is None):
            raise ValueError("custom preset needs B and sizes")

    def model(self) -> GeneralSbmParams:
        if self.preset == "custom":
            return GeneralSbmParams(np.asarray(self.B, dtype=float), tuple(self.sizes))
        p = PRESETS[self.preset]
        return GeneralSbmParams(p["B"], p["sizes"])

    def resolved_refinements(self, n: int) -> tuple[str, ...]:
        if self.refinements is not None:
            return tuple(self.refinements)
        # leave-one-out refinement reruns the initializer n times
        return ("simplified",) if n > 1000 else ("simplified", "full")


@dataclass
class ExperimentReport:
    preset: str
    rows: list[dict] = field(default_factory=list)
    trajectories: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r["method"] not in seen:
                seen.append(r["method"])
        return seen

    def counts(self, method: str) -> np.ndarray:
        return np.array([r["misclassified"] for r in self.rows if r["method"] == method])

    def summary(self) -> dict:
        out = {}
        for m in self.methods():
            c = self.counts(m).astype(float)
            q = np.quantile(c, [0, 0.25, 0.5, 0.75, 1.0])
            out[m] = {"count": int(c.size), "mean": float(c.mean()),
                      "min": float(q[0]), "q25": float(q[1]), "median": float(q[2]),
                      "q75": float(q[3]), "max": float(q[4])}
        return out

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "preset": self.preset, "rows": self.rows,
                "trajectories": self.trajectories, "timings": self.timings,
                "meta": self.meta, "summary": self.summary()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(preset=d["preset"], rows=d["rows"], trajectories=d["trajectories"],
                   timings=d["timings"], meta=d["meta"])

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _num(x) -> float | None:
    # nan would break report equality after a JSON round trip
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def emit_report(report: ExperimentReport, path, fmt: str = "csv") -> Path:
    """Write the report as CSV (one row per replication and method, timings
    omitted so reruns are byte-identical) or as JSON."""
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in report.rows:
                    w.writerow([_fmt(r.get(c, "")) for c in CSV_COLUMNS])
        elif fmt == "json":
            with open(path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2, sort_keys=True, allow_nan=True)
                fh.write("\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"could not write report to {path}: {exc}") from exc
    return path


def load_report(path) -> ExperimentReport:
    with open(path) as fh:
        return ExperimentReport.from_dict(json.load(fh))


def _score_rows(base: dict, truth, k, init_name, init_labels, refined: dict) -> list[dict]:
    n = truth.size
    rows = []
    m0 = misclassified_count(truth, init_labels, k)
    rows.append({**base, "method": init_name, "initializer": init_name, "refinement": "none",
                 "misclassified": m0, "loss": m0 / n, "t": None,
                 "rho": None, "fallbacks": 0})
    for kind, res in refined.items():
        m = misclassified_count(truth, res["labels"], k)
        rows.append({**base, "method": f"{init_name}+{kind}", "initializer": init_name,
                     "refinement": kind, "misclassified": m, "loss": m / n,
                     "t": _num(res["t"]), "rho": _num(res["rho"]),
                     "fallbacks": int(res["fallbacks"])})
    return rows


def _evaluate_graph(g: Graph, truth: np.ndarray, k: int, spec: ExperimentSpec,
                    base: dict) -> tuple[list[dict], list[dict], list[dict]]:
    rows, trajectories, timings = [], [], []
    kinds = spec.resolved_refinements(g.n)
    for text in spec.initializers:
        init = parse_initializer(text, spec.mu)
        start = time.perf_counter()
        labels = init(g, k)
        timing = {**base, "initializer": init.name, "init_seconds": time.perf_counter() - start}
        refined = {}
        for kind in kinds:
            start = time.perf_counter()
            if kind == "simplified":
                res = refine_simplified(g, k, labels, spec.penalty)
                d = res.nodes[0]
                refined[kind] = {"labels": res.labels, "t": d.t, "rho": d.rho,
                                 "fallbacks": res.fallback_count}
            elif kind == "full":
                res = refine_full(g, k, init, spec.penalty)
                s = res.summary()
                refined[kind] = {"labels": res.labels, "t": s["t_median"],
                                 "rho": s["rho_median"], "fallbacks": res.fallback_count}
            else:
                it = iterate_refinement(g, k, labels, spec.penalty, spec.max_iters)
                d = it.penalties[-1]
                refined[kind] = {"labels": it.labels, "t": d.t, "rho": d.rho,
                                 "fallbacks": sum(p.degenerate for p in it.penalties)}
                trajectories.append({
                    **base, "initializer": init.name,
                    "misclassified": [misclassified_count(truth, h, k) for h in it.history],
                    "changes": it.changes, "converged": it.converged, "cycle": it.cycle})
            timing[f"{kind}_seconds"] = time.perf_counter() - start
        rows.extend(_score_rows(base, truth, k, init.name, labels, refined))
        timings.append(timing)
    return rows, trajectories, timings


def _run_replication(args):
    spec, rep = args
    model = spec.model()
    seed = spec.seed_base + rep
    g, truth = sample_general_sbm(model, seed)
    base = {"preset": spec.preset, "replication": rep, "seed": seed, "n": g.n}
    return _evaluate_graph(g, truth, model.k, spec, base)


def run_preset(spec: ExperimentSpec) -> ExperimentReport:
    """Run every replication of a simulation preset.

    Replication ``r`` samples its graph with seed ``seed_base + r``, so
    results do not depend on execution order or worker count.
    """
    if spec.preset == "polblogs":
        return run_polblogs(spec=spec)
    jobs = [(spec, r) for r in range(spec.replications)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_replication, jobs))
    else:
        results = [_run_replication(j) for j in jobs]
    report = ExperimentReport(preset=spec.preset)
    for rows, traj, timing in results:
        report.rows.extend(rows)
        report.trajectories.extend(traj)
        report.timings.extend(timing)
    model = spec.model()
    report.meta = {"n": model.n, "k": model.k, "sizes": list(model.sizes),
                   "B": model.connectivity.tolist(), "replications": spec.replications,
                   "seed_base": spec.seed_base, "mu": spec.mu,
                   "penalty": asdict(spec.penalty),
                   "initializers": list(spec.initializers),
                   "refinements": list(spec.resolved_refinements(model.n))}
    return report


# ---------------------------------------------------------------------------
# political blogs

def _parse_gml(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimal GML reader for node ``id``/``value`` and edge ``source``/``target``."""
    text = Path(path).read_text(errors="replace")
    ids, values, pairs = [], [], []
    for block in re.finditer(r"\bnode\s*\[(.*?)\]", text, re.S):
        body = block.group(1)
        ids.append(int(re.search(r"\bid\s+(-?\d+)", body).group(1)))
        v = re.search(r"\bvalue\s+(-?\d+)", body)
        values.append(int(v.group(1)) if v else 0)
    for block in re.finditer(r"\bedge\s*\[(.*?)\]", text, re.S):
        body = block.group(1)
        pairs.append((int(re.search(r"\bsource\s+(-?\d+)", body).group(1)),
                      int(re.search(r"\btarget\s+(-?\d+)", body).group(1))))
    return np.array(ids), np.array(values), np.array(pairs, dtype=np.int64).reshape(-1, 2)


def load_polblogs(edges_path=None, labels_path=None, data_dir=None,
                  one_based: bool | None = None) -> tuple[Graph, np.ndarray]:
    """Load the political-blogs network with labels in ``{1, 2}``.

    Accepts the GML release (node ``value`` 0 = liberal, 1 = conservative)
    or an edge list plus a label file. Directed links are symmetrized: an
    edge is kept if either direction is present.
    """
    if edges_path is None:
        root = Path(data_dir or os.environ.get(DATA_ENV, "data"))
        for cand in ("polblogs.gml", "polblogs/polblogs.gml"):
            if (root / cand).exists():
                edges_path = root / cand
                break
        else:
            edges_path = root / "polblogs_edges.txt"
            labels_path = labels_path or root / "polblogs_labels.txt"
    edges_path = Path(edges_path)
    if not edges_path.exists():
        raise FileNotFoundError(
            f"political-blogs data not found at {edges_path}; set ${DATA_ENV} or pass paths")
    if edges_path.suffix == ".gml":
        ids, values, pairs = _parse_gml(edges_path)
        index = {int(v): i for i, v in enumerate(ids)}
        pairs = np.array([(index[s], index[t]) for s, t in pairs], dtype=np.int64).reshape(-1, 2)
        g = build_graph(len(ids), pairs)
        labels = values.astype(np.int64) + 1
        return g, labels
    if labels_path is None:
        raise FileNotFoundError("an edge-list input needs a label file")
    labels = sbm_io.read_labels(labels_path)
    if labels.min(initial=1) == 0:
        labels = labels + 1
    if one_based is None:
        raw = np.loadtxt(edges_path, comments="#", dtype=np.int64, ndmin=2)
        one_based = raw.size > 0 and raw.min() >= 1 and raw.max() == labels.size
    g = sbm_io.read_edge_list(edges_path, n=labels.size, one_based=one_based)
    return g, labels


def run_polblogs(edges_path=None, labels_path=None, spec: ExperimentSpec | None = None
                 ) -> ExperimentReport:
    """Largest component of the blog network, the four initializers applied
    directly and with refinement, plus iterated refinement trajectories."""
    spec = spec or ExperimentSpec(preset="polblogs", replications=1)
    edges_path = edges_path or spec.polblogs_edges
    labels_path = labels_path or spec.polblogs_labels
    g_raw, labels_raw = load_polblogs(edges_path, labels_path, spec.data_dir)
    g, index = largest_connected_component(g_raw)
    keep = np.array(sorted(index, key=index.get), dtype=np.int64)
    truth = labels_raw[keep]
    if g.n != POLBLOGS_NODES:
        warnings.warn(f"largest component has {g.n} nodes, expected {POLBLOGS_NODES}",
                      stacklevel=2)
    refinements = spec.refinements or ("simplified", "iterated")
    sub = ExperimentSpec(preset="polblogs", replications=1, initializers=spec.initializers,
                         refinements=tuple(refinements), penalty=spec.penalty, mu=spec.mu,
                         max_iters=spec.max_iters)
    base = {"preset": "polblogs", "replication": 0, "seed": 0, "n": g.n}
    rows, traj, timings = _evaluate_graph(g, truth, 2, sub, base)
    report = ExperimentReport("polblogs", rows, traj, timings)
    report.meta = {"raw_nodes": g_raw.n, "n": g.n, "edges": g.num_edges,
                   "average_degree": average_degree(g),
                   "community_sizes": np.bincount(truth, minlength=3)[1:].tolist(),
                   "initializers": list(spec.initializers), "refinements": list(refinements)}
    return report
