"""Penalized neighbor-voting refinement of an initial community assignment.

Two variants are provided. ``refine_full`` reruns the initializer on the
graph with each node left out, votes that node's label against the
leave-one-out assignment, and reconciles the ``n`` label systems through
a consensus step. ``refine_simplified`` runs the initializer once and
re-votes every node against that single assignment; ``iterate_refinement``
repeats it to a fixed point.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .graph import Graph, check_labels, community_sizes, subgraph_excluding

Initializer = Callable[[Graph, int], np.ndarray]


class EstimationError(ValueError):
    """No community is large enough to estimate a within-block density."""


class DegeneratePenaltyError(ValueError):
    """The tilt ``t`` is not a positive finite number."""


# ---------------------------------------------------------------------------
# connectivity estimation

@dataclass(frozen=True)
class ConnectivityEstimate:
    B_hat: np.ndarray
    a_hat: float
    b_hat: float
    excluded: tuple[int, ...]
    n: int


def block_edge_counts(g: Graph, labels: np.ndarray, k: int) -> np.ndarray:
    """Symmetric k x k edge counts; within-block counts sit on the diagonal
    (each edge once). Label 0 is ignored."""
    if g.num_edges == 0:
        return np.zeros((k, k), dtype=np.int64)
    lu = labels[g.edges[:, 0]]
    lv = labels[g.edges[:, 1]]
    keep = (lu > 0) & (lv > 0)
    lu, lv = lu[keep] - 1, lv[keep] - 1
    M = np.bincount(lu * k + lv, minlength=k * k).reshape(k, k)
    off = M + M.T
    np.fill_diagonal(off, np.diag(M))
    return off


def estimate_connectivity(g: Graph, labels, k: int) -> ConnectivityEstimate:
    """Block densities of ``g`` under ``labels`` (zeros are left out).

    Communities with at most one member are excluded from the within-rate
    minimum; pairs with an empty side are skipped in the between-rate
    maximum. ``a_hat``/``b_hat`` are ``n`` times that minimum/maximum, with
    ``nan`` when nothing qualifies for ``b_hat``.
    """
    labels = check_labels(labels, k, n=g.n, partial=True)
    sizes = community_sizes(labels, k).astype(np.float64)
    E = block_edge_counts(g, labels, k).astype(np.float64)
    B = np.full((k, k), np.nan)
    pair_sizes = np.outer(sizes, sizes)
    within_pairs = sizes * (sizes - 1) / 2
    ok = within_pairs > 0
    B[np.diag_indices(k)] = np.where(ok, np.diag(E) / np.where(ok, within_pairs, 1), np.nan)
    off = ~np.eye(k, dtype=bool) & (pair_sizes > 0)
    B[off] = E[off] / pair_sizes[off]
    excluded = tuple(int(i) + 1 for i in np.flatnonzero(~ok))
    if len(excluded) == k:
        raise EstimationError("every community has fewer than two members")
    diag = np.diag(B)
    a_hat = g.n * float(np.nanmin(diag))
    b_hat = g.n * float(B[off].max()) if off.any() else math.nan
    return ConnectivityEstimate(B_hat=B, a_hat=a_hat, b_hat=b_hat, excluded=excluded, n=g.n)


# ---------------------------------------------------------------------------
# penalties

@dataclass(frozen=True)
class PenaltyMode:
    """``adaptive`` uses estimated rates, ``truncated`` additionally caps the
    tilt at ``log(2/epsilon0)``, ``known`` plugs in the true ``a`` and ``b``
    (optionally with the cap via ``epsilon0``)."""

    kind: str = "adaptive"
    epsilon0: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in ("adaptive", "truncated", "known"):
            raise ValueError(f"unknown penalty mode {self.kind!r}")
        if self.kind == "truncated" and self.epsilon0 is None:
            object.__setattr__(self, "epsilon0", 0.1)
        if self.epsilon0 is not None and not 0 < self.epsilon0 < 2:
            raise ValueError("epsilon0 must lie in (0, 2)")
        if self.kind == "known" and (self.a is None or self.b is None):
            raise ValueError("known mode needs both a and b")

    @property
    def cap(self) -> float | None:
        return None if self.epsilon0 is None else math.log(2 / self.epsilon0)


@dataclass(frozen=True)
class PenaltyParams:
    t: float
    rho: float
    degenerate: bool
    a_hat: float
    b_hat: float
    cap: float | None = None


def penalty_t(a_hat: float, b_hat: float, n: float, mode: PenaltyMode | None = None) -> float:
    """Tilt ``t = 0.5 log[a(1-b/n) / (b(1-a/n))]``, capped under truncation.

    Returns ``inf`` when ``b_hat = 0`` or ``a_hat = n`` (before the cap),
    a nonpositive value when ``a_hat <= b_hat`` and ``nan`` if either
    estimate is undefined.
    """
    mode = mode or PenaltyMode()
    if mode.kind == "known":
        a_hat, b_hat = mode.a, mode.b
    if math.isnan(a_hat) or math.isnan(b_hat):
        return math.nan
    p, q = a_hat / n, b_hat / n
    num = p * (1 - q)
    den = q * (1 - p)
    if num == 0 and den == 0:
        t = math.nan
    elif den == 0:
        t = math.inf
    elif num == 0:
        t = -math.inf
    elif p == q:
        t = 0.0
    else:
        t = 0.5 * (math.log(p) + math.log1p(-q) - math.log(q) - math.log1p(-p))
    if mode.cap is not None and not math.isnan(t):
        t = min(t, mode.cap)
    return t


def penalty_rho(a_hat: float, b_hat: float, n: float, t: float) -> float:
    """Penalty solving ``exp(-2 t rho) = (p e^{-t} + 1 - p) / (q e^{t} + 1 - q)``
    with ``p = a_hat/n`` and ``q = b_hat/n``."""
    if not (t > 0 and math.isfinite(t)):
        raise DegeneratePenaltyError(f"tilt must be positive and finite, got {t}")
    p, q = a_hat / n, b_hat / n
    log_num = math.log1p(p * math.expm1(-t))
    log_den = math.log1p(q * math.expm1(t))
    return -(log_num - log_den) / (2 * t)


def penalty_params(a_hat: float, b_hat: float, n: float,
                   mode: PenaltyMode | None = None) -> PenaltyParams:
    """Tilt and penalty; a degenerate tilt falls back to ``rho = 0``."""
    mode = mode or PenaltyMode()
    if mode.kind == "known":
        a_hat, b_hat = mode.a, mode.b
    t = penalty_t(a_hat, b_hat, n, mode)
    if t > 0 and math.isfinite(t):
        return PenaltyParams(t, penalty_rho(a_hat, b_hat, n, t), False, a_hat, b_hat, mode.cap)
    return PenaltyParams(t, 0.0, True, a_hat, b_hat, mode.cap)


# ---------------------------------------------------------------------------
# voting and consensus

def penalized_vote(g: Graph, u: int, labels, rho: float, k: int | None = None) -> int:
    """``argmax_l`` of (neighbors of ``u`` labeled ``l``) minus ``rho`` times
    (number of nodes labeled ``l``); lowest label wins ties."""
    labels = np.asarray(labels, dtype=np.int64)
    if k is None:
        k = int(labels.max())
    counts = np.bincount(labels[g.neighbors(u)], minlength=k + 1)[1:k + 1]
    sizes = community_sizes(labels, k)
    return int(np.argmax(counts - rho * sizes)) + 1


def vote_all(g: Graph, labels: np.ndarray, rho: float, k: int) -> np.ndarray:
    """``penalized_vote`` for every node against the same labels."""
    labels = np.asarray(labels, dtype=np.int64)
    valid = labels > 0
    onehot = sp.csr_matrix((np.ones(int(valid.sum())), (np.flatnonzero(valid), labels[valid] - 1)),
                           shape=(g.n, k))
    counts = (g.to_sparse() @ onehot).toarray()
    scores = counts - rho * community_sizes(labels, k)[None, :]
    return np.argmax(scores, axis=1).astype(np.int64) + 1


def consensus_align(reference, other, k: int) -> tuple[np.ndarray, bool]:
    """Map each label ``i`` of ``other`` to the ``reference`` label it overlaps
    most (lowest label on ties).

    Returns ``xi`` as an array with ``xi[0] = 0`` (so ``xi[other]`` relabels a
    vector) and whether ``xi`` is a permutation.
    """
    ref = np.asarray(reference, dtype=np.int64)
    oth = np.asarray(other, dtype=np.int64)
    keep = (ref > 0) & (oth > 0)
    C = np.bincount((oth[keep] - 1) * k + (ref[keep] - 1), minlength=k * k).reshape(k, k)
    xi = np.concatenate([[0], np.argmax(C, axis=1) + 1]).astype(np.int64)
    return xi, bool(np.unique(xi[1:]).size == k)


# ---------------------------------------------------------------------------
# refinement drivers

@dataclass
class NodeDiagnostics:
    t: float
    rho: float
    a_hat: float
    b_hat: float
    degenerate: bool
    aligned_permutation: bool = True


@dataclass
class RefineResult:
    labels: np.ndarray
    nodes: list[NodeDiagnostics] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def fallback_count(self) -> int:
        return sum(d.degenerate for d in self.nodes)

    @property
    def non_permutation_count(self) -> int:
        return sum(not d.aligned_permutation for d in self.nodes)

    def summary(self) -> dict:
        t = np.array([d.t for d in self.nodes], dtype=float)
        rho = np.array([d.rho for d in self.nodes], dtype=float)
        return {
            "nodes": len(self.nodes),
            "fallbacks": self.fallback_count,
            "non_permutation_alignments": self.non_permutation_count,
            "t_median": float(np.nanmedian(t)) if t.size and np.isfinite(t).any() else None,
            "rho_median": float(np.median(rho)) if rho.size else None,
            "elapsed": self.elapsed,
        }


def _leave_one_out_vote(g: Graph, u: int, k: int, initializer: Initializer,
                        mode: PenaltyMode) -> tuple[np.ndarray, NodeDiagnostics]:
    sub, keep = subgraph_excluding(g, u)
    try:
        init = check_labels(initializer(sub, k), k, n=g.n - 1)
    except Exception as exc:
        raise RuntimeError(f"initializer failed on the graph without node {u}: {exc}") from exc
    labels = np.zeros(g.n, dtype=np.int64)
    labels[keep] = init
    if mode.kind == "known":
        pen = penalty_params(math.nan, math.nan, g.n, mode)
    else:
        est = estimate_connectivity(g, labels, k)
        pen = penalty_params(est.a_hat, est.b_hat, g.n, mode)
    labels[u] = penalized_vote(g, u, labels, pen.rho, k)
    return labels, NodeDiagnostics(pen.t, pen.rho, pen.a_hat, pen.b_hat, pen.degenerate)


def _aligned_votes(args) -> list[tuple[int, NodeDiagnostics]]:
    g, nodes, k, initializer, mode, reference = args
    out = []
    for u in nodes:
        labels, diag = _leave_one_out_vote(g, u, k, initializer, mode)
        xi, is_perm = consensus_align(reference, labels, k)
        diag.aligned_permutation = is_perm
        out.append((int(xi[labels[u]]), diag))
    return out


def refine_full(g: Graph, k: int, initializer: Initializer,
                mode: PenaltyMode | None = None, workers: int = 1) -> RefineResult:
    """Leave-one-out penalized neighbor voting followed by consensus.

    Node ``u`` is labeled by voting against ``initializer`` applied to the
    graph without ``u``; the resulting label is then translated into the
    label system of node 0's assignment by maximum overlap. With
    ``workers > 1`` nodes are processed in a process pool; output does not
    depend on the worker count.
    """
    if not 2 <= k <= g.n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={g.n}")
    mode = mode or PenaltyMode()
    start = time.perf_counter()
    reference, diag0 = _leave_one_out_vote(g, 0, k, initializer, mode)
    final = np.zeros(g.n, dtype=np.int64)
    final[0] = reference[0]
    diags = [diag0]
    rest = list(range(1, g.n))
    if workers <= 1:
        results = _aligned_votes((g, rest, k, initializer, mode, reference))
    else:
        chunks = [rest[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_aligned_votes,
                                  [(g, c, k, initializer, mode, reference) for c in chunks]))
        results = [None] * len(rest)
        for w, part in enumerate(parts):
            for j, item in enumerate(part):
                results[w + j * workers] = item
    for u, (lab, diag) in zip(rest, results):
        final[u] = lab
        diags.append(diag)
    return RefineResult(final, diags, time.perf_counter() - start)


def refine_simplified(g: Graph, k: int, init_labels, mode: PenaltyMode | None = None
                      ) -> RefineResult:
    """Re-vote every node against one initial assignment of the whole graph.

    A single ``(t, rho)`` is computed from ``init_labels``; each node's own
    label counts toward the community sizes in its vote.
    """
    mode = mode or PenaltyMode()
    start = time.perf_counter()
    init = check_labels(init_labels, k, n=g.n)
    if mode.kind == "known":
        pen = penalty_params(math.nan, math.nan, g.n, mode)
    else:
        est = estimate_connectivity(g, init, k)
        pen = penalty_params(est.a_hat, est.b_hat, g.n, mode)
    labels = vote_all(g, init, pen.rho, k)
    diag = NodeDiagnostics(pen.t, pen.rho, pen.a_hat, pen.b_hat, pen.degenerate)
    return RefineResult(labels, [diag], time.perf_counter() - start)


@dataclass
class IterationResult:
    labels: np.ndarray
    changes: list[int]
    converged: bool
    cycle: bool
    history: list[np.ndarray] = field(default_factory=list, repr=False)
    penalties: list[NodeDiagnostics] = field(default_factory=list, repr=False)


def iterate_refinement(g: Graph, k: int, init_labels, mode: PenaltyMode | None = None,
                       max_iters: int = 20) -> IterationResult:
    """Apply ``refine_simplified`` until the labels stop changing.

    Stops early on a fixed point, or when a previously visited labeling
    recurs (a cycle). ``changes[i]`` is the number of nodes relabeled in
    iteration ``i``; ``history[0]`` is the input.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    current = check_labels(init_labels, k, n=g.n)
    seen = {current.tobytes()}
    history = [current]
    changes, penalties = [], []
    converged = cycle = False
    for _ in range(max_iters):
        res = refine_simplified(g, k, current, mode)
        new = res.labels
        penalties.append(res.nodes[0])
        changes.append(int(np.count_nonzero(new != current)))
        if changes[-1] == 0:
            converged = True
            break
        history.append(new)
        current = new
        key = new.tobytes()
        if key in seen:
            cycle = True
            break
        seen.add(key)
    return IterationResult(current, changes, converged, cycle, history, penalties)


# ---------------------------------------------------------------------------
# exhaustive maximum likelihood (tiny graphs only)

MLE_MAX_ASSIGNMENTS = 10 ** 7


def brute_force_mle(g: Graph, k: int, balanced: bool = True, chunk: int = 1 << 16) -> np.ndarray:
    """Assignment maximizing the number of within-community edges.

    All ``k**n`` assignments are scanned in lexicographic order (node 0 is
    the most significant digit) and the first maximizer is returned. With
    ``balanced=True`` only assignments whose community sizes form the
    most-equal split of ``n`` are admissible; without that constraint the
    single-community assignment always maximizes the count.
    """
    total = k ** g.n
    if total > MLE_MAX_ASSIGNMENTS:
        raise ValueError(f"k**n = {total} exceeds the enumeration limit")
    powers = k ** np.arange(g.n - 1, -1, -1, dtype=np.int64)
    target = np.sort(np.bincount(np.arange(g.n) % k, minlength=k))
    best_score, best_idx = -1, 0
    eu, ev = g.edges[:, 0], g.edges[:, 1]
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % k
        score = (digits[:, eu] == digits[:, ev]).sum(axis=1) if eu.size else np.zeros(idx.size, int)
        if balanced:
            counts = np.sort(np.stack([(digits == c).sum(axis=1) for c in range(k)], 1), axis=1)
            score = np.where((counts == target).all(axis=1), score, -1)
        j = int(np.argmax(score))
        if score[j] > best_score:
            best_score, best_idx = int(score[j]), int(idx[j])
    return (best_idx // powers) % k + 1


# ---------------------------------------------------------------------------
# options front end

@dataclass
class RefineOptions:
    """``algorithm`` is ``full``, ``simplified``, ``iterated`` or ``auto``
    (simplified above ``full_max_n`` nodes, full otherwise)."""

    algorithm: str = "auto"
    penalty: PenaltyMode = field(default_factory=PenaltyMode)
    max_iters: int = 20
    workers: int = 1
    full_max_n: int = 1000

    def __post_init__(self):
        if self.algorithm not in ("auto", "full", "simplified", "iterated"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def resolve(self, n: int) -> str:
        if self.algorithm == "auto":
            return "simplified" if n > self.full_max_n else "full"
        return self.algorithm
