"""Readers and writers for edge lists, label files, embeddings and
flat key-value parameter files."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, build_graph


def read_edge_list(path, n: int | None = None, one_based: bool = False,
                   skip_header: int = 0) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` are ignored. Directed input is symmetrized:
    an edge is kept if either direction appears. When ``n`` is omitted it
    is inferred as one more than the largest index.
    """
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            if lineno < skip_header:
                continue
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) < 2:
                raise GraphError(f"{path}:{lineno + 1}: expected a node pair")
            pairs.append((int(parts[0]), int(parts[1])))
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if one_based:
        arr = arr - 1
    if n is None:
        n = int(arr.max()) + 1 if arr.size else 0
    return build_graph(n, arr)


def write_edge_list(g: Graph, path, one_based: bool = False) -> None:
    off = 1 if one_based else 0
    with open(path, "w") as fh:
        fh.write(f"# n={g.n} m={g.num_edges}\n")
        for u, v in g.edges:
            fh.write(f"{u + off} {v + off}\n")


def read_labels(path) -> np.ndarray:
    """Read labels: one integer per line, or a CSV with ``node,label`` columns."""
    text = Path(path).read_text().splitlines()
    rows = [r for r in text if r.strip() and not r.lstrip().startswith("#")]
    if rows and "," in rows[0]:
        reader = csv.reader(rows)
        header = next(reader)
        if [h.strip() for h in header] != ["node", "label"]:
            raise ValueError(f"{path}: CSV labels need a 'node,label' header")
        entries = [(int(a), int(b)) for a, b in reader]
        labels = np.zeros(len(entries), dtype=np.int64)
        nodes = np.array([e[0] for e in entries], dtype=np.int64)
        if sorted(nodes.tolist()) != list(range(len(entries))):
            raise ValueError(f"{path}: node column must cover 0..n-1 exactly once")
        labels[nodes] = [e[1] for e in entries]
        return labels
    return np.array([int(r) for r in rows], dtype=np.int64)


def write_labels(labels, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "label"])
        for u, lab in enumerate(np.asarray(labels)):
            w.writerow([u, int(lab)])


def write_embedding(rows: np.ndarray, path) -> None:
    rows = np.asarray(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"u{j}" for j in range(rows.shape[1])])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def read_embedding(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def read_params(path) -> dict:
    """Parse a flat ``key = value`` parameter file.

    Recognized keys: ``n, k, a, b, beta, epsilon`` (numbers), ``sizes``
    (comma/space-separated integers) and ``B`` rows given as repeated
    ``B = ...`` lines or ``B1, B2, ...`` keys. Unknown keys are kept as
    strings.
    """
    out: dict = {}
    b_rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = (s.strip() for s in line.split("=", 1))
        else:
            key, val = (s.strip() for s in line.split(":", 1))
        if key == "B" or (key.startswith("B") and key[1:].isdigit()):
            b_rows.append([float(x) for x in val.replace(",", " ").split()])
        elif key == "sizes":
            out["sizes"] = [int(x) for x in val.replace(",", " ").split()]
        elif key in ("n", "k"):
            out[key] = int(val)
        elif key in ("a", "b", "beta", "epsilon", "tau", "mu", "epsilon0"):
            out[key] = float(val)
        else:
            out[key] = val
    if b_rows:
        out["B"] = np.array(b_rows, dtype=np.float64)
    return out
