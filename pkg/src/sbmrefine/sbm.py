"""Stochastic block model parameters, sampling and rate diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, _from_canonical, BuildStats, check_labels, community_sizes


class ParameterError(ValueError):
    """Raised for invalid SBM parameters."""


def equal_sizes(n: int, k: int) -> list[int]:
    """Most-equal split of ``n`` nodes; the first ``n mod k`` blocks get one extra."""
    if k < 1:
        raise ParameterError("k must be at least 1")
    q, r = divmod(n, k)
    return [q + 1 if i < r else q for i in range(k)]


def size_window(n: int, k: int, beta: float) -> tuple[float, float]:
    return n / (beta * k) - 1, beta * n / k + 1


@dataclass(frozen=True)
class PlantedPartitionParams:
    """Planted partition: within-block rate ``a/n``, between-block rate ``b/n``."""

    n: int
    k: int
    a: float
    b: float
    beta: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ParameterError("n and k must be positive")
        if self.beta < 1:
            raise ParameterError(f"beta must be >= 1, got {self.beta}")
        lo, hi = size_window(self.n, self.k, self.beta)
        if math.ceil(lo) > math.floor(hi):
            raise ParameterError("community size window is empty")
        for name in ("a", "b"):
            v = getattr(self, name)
            if not 0 <= v <= self.n:
                raise ParameterError(f"{name}/n must lie in [0, 1], got {name}={v}")

    def theta0_violations(self) -> list[str]:
        """Violations of ``0 < b < a <= (1-eps) n`` and ``k >= 2``."""
        out = []
        if self.k < 2:
            out.append("k < 2")
        if not 0 < self.b:
            out.append("b <= 0")
        if not self.b < self.a:
            out.append("a <= b")
        if self.a > (1 - self.epsilon) * self.n:
            out.append("a > (1 - epsilon) n")
        return out

    def connectivity(self) -> np.ndarray:
        B = np.full((self.k, self.k), self.b / self.n)
        np.fill_diagonal(B, self.a / self.n)
        return B


@dataclass(frozen=True)
class GeneralSbmParams:
    """General SBM with connectivity ``B`` and explicit community sizes."""

    connectivity: np.ndarray
    sizes: tuple[int, ...]
    alpha: float = 1.0
    lam: float | None = None

    def __post_init__(self):
        B = np.asarray(self.connectivity, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ParameterError("connectivity matrix must be square")
        if not np.all(np.isfinite(B)) or B.min() < 0 or B.max() > 1:
            raise ParameterError("connectivity entries must lie in [0, 1]")
        if not np.allclose(B, B.T, rtol=0, atol=1e-12):
            raise ParameterError("connectivity matrix must be symmetric")
        if len(self.sizes) != B.shape[0]:
            raise ParameterError("need one size per community")
        if any(s <= 0 for s in self.sizes):
            raise ParameterError("community sizes must be positive")
        object.__setattr__(self, "connectivity", B)
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def k(self) -> int:
        return self.connectivity.shape[0]

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def a(self) -> float:
        return self.n * float(np.min(np.diag(self.connectivity)))

    @property
    def b(self) -> float:
        if self.k < 2:
            return 0.0
        off = self.connectivity[~np.eye(self.k, dtype=bool)]
        return self.n * float(off.max())

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(1, self.k + 1), self.sizes)


def _block_rng(seed: int, i: int, j: int) -> np.random.Generator:
    # counter-based stream keyed by (seed, block pair)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i, j])))


def _sample_blocks(B: np.ndarray, sizes, seed: int) -> Graph:
    sizes = np.asarray(sizes, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    n = int(starts[-1])
    k = sizes.size
    chunks = []
    for i in range(k):
        for j in range(i, k):
            p = B[i, j]
            if p <= 0:
                continue
            rng = _block_rng(seed, i, j)
            if i == j:
                m = int(sizes[i])
                if m < 2:
                    continue
                iu, iv = np.triu_indices(m, k=1)
                hit = rng.random(iu.size) < p
                chunks.append(np.column_stack([iu[hit], iv[hit]]) + starts[i])
            else:
                draw = rng.random((int(sizes[i]), int(sizes[j]))) < p
                iu, iv = np.nonzero(draw)
                chunks.append(np.column_stack([iu + starts[i], iv + starts[j]]))
    if chunks:
        edges = np.concatenate(chunks).astype(np.int64)
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return _from_canonical(n, edges, BuildStats(input_pairs=int(edges.shape[0])))


def sample_planted_partition(params: PlantedPartitionParams, sizes=None,
                             seed: int = 0) -> tuple[Graph, np.ndarray]:
    """Sample a planted-partition graph.

    Nodes ``0..sizes[0]-1`` form community 1, the next block community 2,
    and so on. Each block pair draws from its own Philox stream, so the
    result depends only on ``(params, sizes, seed)``.
    """
    if sizes is None:
        sizes = equal_sizes(params.n, params.k)
    sizes = [int(s) for s in sizes]
    if len(sizes) != params.k or sum(sizes) != params.n:
        raise ParameterError(f"sizes must be {params.k} integers summing to {params.n}")
    lo, hi = size_window(params.n, params.k, params.beta)
    bad = [i + 1 for i, s in enumerate(sizes) if not lo <= s <= hi]
    if bad:
        raise ParameterError(f"communities {bad} violate the size window [{lo:g}, {hi:g}]")
    g = _sample_blocks(params.connectivity(), sizes, seed)
    return g, np.repeat(np.arange(1, params.k + 1), sizes)


def sample_general_sbm(params: GeneralSbmParams, seed: int = 0) -> tuple[Graph, np.ndarray]:
    return _sample_blocks(params.connectivity, params.sizes, seed), params.labels()


def population_matrix(B, sigma) -> np.ndarray:
    """Dense ``P[u, v] = B[sigma(u), sigma(v)]``, diagonal included."""
    B = np.asarray(B, dtype=np.float64)
    k = B.shape[0]
    sigma = check_labels(sigma, k) - 1
    return B[np.ix_(sigma, sigma)]


def population_lambda_k(B, sigma) -> float:
    """k-th largest singular value of the population matrix."""
    P = population_matrix(B, sigma)
    k = np.asarray(B).shape[0]
    s = np.sort(np.abs(np.linalg.eigvalsh(P)))[::-1]
    return float(s[k - 1])


def renyi_divergence(a: float, b: float, n: float) -> float:
    """Order-1/2 Renyi divergence between Bern(a/n) and Bern(b/n).

    Returns ``inf`` for mutually singular pairs (e.g. ``a = n, b = 0``).
    """
    if n <= 0:
        raise ParameterError("n must be positive")
    for name, v in (("a", a), ("b", b)):
        if not 0 <= v <= n:
            raise ParameterError(f"{name} must lie in [0, n], got {v}")
    if a == b:
        return 0.0
    p, q = a / n, b / n
    # 1 - affinity, written as a sum of squares to keep precision near a == b
    h = 0.5 * ((math.sqrt(p) - math.sqrt(q)) ** 2
               + (math.sqrt(1 - p) - math.sqrt(1 - q)) ** 2)
    if h >= 1.0:
        return math.inf
    return max(0.0, -2.0 * math.log1p(-h))


def minimax_rate(n: int, k: int, a: float, b: float, beta: float = 1.0) -> float:
    """Minimax misclassification envelope with the vanishing exponent
    correction dropped: ``exp(-n I*/2)`` for k=2, ``exp(-n I*/(beta k))`` otherwise."""
    if k < 2:
        raise ParameterError("minimax rate needs k >= 2")
    i_star = renyi_divergence(a, b, n)
    if math.isinf(i_star):
        return 0.0
    denom = 2.0 if k == 2 else beta * k
    return math.exp(-n * i_star / denom)


@dataclass
class RateReport:
    """Finite-n values of the quantities gating the asymptotic results.

    Only numbers are reported; none of these has a finite-sample threshold.
    """

    I_star: float
    minimax_rate: float
    snr_theta0: float
    weak_consistency_snr: float
    strong_consistency_margin: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "I_star": self.I_star,
            "minimax_rate": self.minimax_rate,
            "snr_theta0": self.snr_theta0,
            "weak_consistency_snr": self.weak_consistency_snr,
            "strong_consistency_margin": self.strong_consistency_margin,
        }
        d.update(self.extra)
        return d


def _div(x: float, y: float) -> float:
    if y == 0:
        return math.inf if x > 0 else (0.0 if x == 0 else -math.inf)
    return x / y


def truncation_constants(epsilon: float) -> tuple[float, float]:
    """``(C_eps, c_eps)`` controlling the capped-tilt error exponent."""
    C = (10.0 / 3.0) * (2 - epsilon) / ((epsilon / 2) * math.log(2 / epsilon))
    c = min(1 / (10 * C), epsilon / (2 - epsilon))
    return C, c


def condition_diagnostics(params, lam: float | None = None) -> RateReport:
    """Evaluate every rate/SNR quantity for planted-partition or general params.

    ``lam`` is a lower bound on the k-th population eigenvalue; for planted
    partitions it defaults to ``(a-b)/(2 beta k)``.
    """
    if isinstance(params, GeneralSbmParams):
        n, k, a, b = params.n, params.k, params.a, params.b
        sizes = np.asarray(params.sizes)
        beta = float(max(sizes.max() * k / n, n / (k * sizes.min())))
        eps = 0.01
        if lam is None:
            lam = params.lam
    else:
        n, k, a, b, beta, eps = params.n, params.k, params.a, params.b, params.beta, params.epsilon
    if k < 2:
        raise ParameterError("diagnostics need k >= 2")
    if lam is None:
        lam = (a - b) / (2 * beta * k)
    i_star = renyi_divergence(a, b, n)
    gap2 = (a - b) ** 2
    logk, loga = math.log(k), (math.log(a) if a > 0 else -math.inf)
    strong_denom = (2 if k == 2 else beta * k) * math.log(n)
    C_eps, c_eps = truncation_constants(eps)
    extra = {
        # refinement guarantees, planted and general spaces
        "gamma_threshold_theta0": 1 / (k * logk),
        "gamma_threshold_theta": _div(a - b, a * k),
        "a_over_b": _div(a, b),
        # USC/NSC initialization assumptions, evaluated at lambda
        "lambda": lam,
        "usc_init_ratio": _div(k * a, lam ** 2),
        "nsc_init_ratio": _div(k * a * loga, lam ** 2),
        # two-stage corollaries
        "usc_refine_snr_theta0": _div(gap2, a * k ** 3 * logk),
        "nsc_refine_snr_theta0": _div(gap2, a * k ** 3 * logk * loga),
        "usc_refine_snr_theta": _div(lam ** 2, a * k * (logk + _div(a, a - b))),
        "nsc_refine_snr_theta": _div(lam ** 2, a * k * loga * (logk + _div(a, a - b))),
        # known (a, b)
        "known_ab_usc_snr_theta0": _div(gap2, a * k ** 3),
        "known_ab_nsc_snr_theta0": _div(gap2, a * k ** 3 * loga),
        "known_ab_usc_snr_theta": _div(lam ** 2, a * k),
        "known_ab_nsc_snr_theta": _div(lam ** 2, a * k * loga),
        # capped tilt
        "epsilon": eps,
        "C_epsilon": C_eps,
        "c_epsilon": c_eps,
        "hellinger_approx_nI": (math.sqrt(a) - math.sqrt(b)) ** 2,
    }
    return RateReport(
        I_star=i_star,
        minimax_rate=minimax_rate(n, k, a, b, beta),
        snr_theta0=_div(gap2, a * k * logk),
        weak_consistency_snr=_div(gap2, a),
        strong_consistency_margin=_div(n * i_star, strong_denom),
        extra=extra,
    )


@dataclass
class MembershipReport:
    ok: bool
    size_violations: list = field(default_factory=list)
    connectivity_violations: list = field(default_factory=list)


def verify_theta0_membership(B, sigma, params: PlantedPartitionParams,
                             atol: float = 1e-12) -> MembershipReport:
    """Check community sizes against the window and the planted ``B`` pattern.

    Size violations are ``(community, size)``; connectivity violations are
    ``(i, j, value, expected)`` with 1-based community indices.
    """
    B = np.asarray(B, dtype=np.float64)
    k = params.k
    sigma = check_labels(sigma, k, n=params.n)
    sizes = community_sizes(sigma, k)
    lo, hi = size_window(params.n, k, params.beta)
    size_bad = [(i + 1, int(s)) for i, s in enumerate(sizes) if not lo <= s <= hi]
    conn_bad = []
    if B.shape != (k, k):
        conn_bad.append(("shape", B.shape, (k, k)))
    else:
        for i in range(k):
            for j in range(k):
                want = (params.a if i == j else params.b) / params.n
                if abs(B[i, j] - want) > atol:
                    conn_bad.append((i + 1, j + 1, float(B[i, j]), want))
    return MembershipReport(ok=not size_bad and not conn_bad,
                            size_violations=size_bad, connectivity_violations=conn_bad)
