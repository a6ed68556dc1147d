"""Regularized spectral embeddings and the USC/NSC initializers.

USC clusters the leading eigenvectors of the trimmed adjacency matrix;
NSC clusters those of the Laplacian of ``A + (tau/n) 11^T``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError, average_degree
from .greedy import GreedyConfig, greedy_cluster

DEFAULT_MU = 0.5


class DegenerateSpectrumWarning(UserWarning):
    """The k-th and (k+1)-th eigenvalue magnitudes coincide."""


@dataclass(frozen=True)
class TauPolicy:
    """How the regularization parameter is chosen.

    ``mode`` is one of ``infinite``, ``zero``, ``degree`` (``value`` times
    the average degree), ``fixed`` (``value`` itself) or ``known_a``
    (``value`` times the known within-rate numerator ``a``).
    """

    mode: str
    value: float = 1.0

    def __post_init__(self):
        if self.mode not in ("infinite", "zero", "degree", "fixed", "known_a"):
            raise ValueError(f"unknown tau mode {self.mode!r}")
        if self.mode in ("degree", "known_a") and not self.value > 0:
            raise ValueError("tau multiplier must be positive")
        if self.mode == "fixed" and self.value < 0:
            raise ValueError("tau must be nonnegative")

    @classmethod
    def infinite(cls):
        return cls("infinite", math.inf)

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def degree(cls, c: float):
        return cls("degree", c)

    @classmethod
    def fixed(cls, tau: float):
        return cls("fixed", tau)

    @classmethod
    def known_a(cls, c: float):
        return cls("known_a", c)

    @classmethod
    def parse(cls, text: str) -> "TauPolicy":
        """Parse ``inf``, ``0``, ``2d`` (multiple of average degree),
        ``3a`` (multiple of known a) or a plain number."""
        t = str(text).strip().lower()
        if t in ("inf", "infinity", "infinite"):
            return cls.infinite()
        if t.endswith("d"):
            return cls.degree(float(t[:-1] or 1))
        if t.endswith("a"):
            return cls.known_a(float(t[:-1] or 1))
        v = float(t)
        return cls.zero() if v == 0 else cls.fixed(v)

    def resolve(self, g: Graph, a: float | None = None) -> float:
        if self.mode == "infinite":
            return math.inf
        if self.mode == "zero":
            return 0.0
        if self.mode == "fixed":
            return float(self.value)
        if self.mode == "degree":
            return self.value * average_degree(g)
        if a is None:
            raise ValueError("tau policy 'known_a' needs the within-rate numerator a")
        return self.value * a

    def __str__(self):
        if self.mode in ("infinite", "zero"):
            return "inf" if self.mode == "infinite" else "0"
        suffix = {"degree": "d", "known_a": "a", "fixed": ""}[self.mode]
        return f"{self.value:g}{suffix}"


def trim_matrix(a: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero the rows and columns of nodes whose degree is at least ``tau``."""
    a = np.asarray(a, dtype=np.float64)
    deg = a.sum(axis=1)
    trimmed = np.flatnonzero(deg >= tau)
    out = a.copy()
    out[trimmed, :] = 0
    out[:, trimmed] = 0
    return out, trimmed


def trim(g: Graph, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Trimmed dense adjacency and the indices of removed high-degree nodes."""
    if math.isinf(tau):
        return g.to_dense(), np.zeros(0, dtype=np.int64)
    return trim_matrix(g.to_dense(), tau)


def regularized_laplacian(g: Graph, tau: float) -> np.ndarray:
    """``D^{-1/2} A_tau D^{-1/2}`` with ``A_tau = A + (tau/n) 11^T`` and
    ``D`` the degrees of ``A_tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    n = g.n
    a = g.to_dense()
    if tau > 0:
        a += tau / n
    deg = a.sum(axis=1)
    zero = np.flatnonzero(deg <= 0)
    if zero.size:
        raise GraphError(f"node {int(zero[0])} has degree zero; use tau > 0")
    s = 1.0 / np.sqrt(deg)
    return a * s[:, None] * s[None, :]


def leading_eigenvectors(m: np.ndarray, k: int, sym_tol: float = 1e-10
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a symmetric matrix by eigenvalue magnitude.

    Columns are ordered by descending ``|eigenvalue|``; each column is
    sign-normalized so its first entry with magnitude above ``1e-12`` is
    positive. Returns ``(eigenvalues, vectors)``.
    """
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError("matrix must be square")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if n and np.max(np.abs(m - m.T)) > sym_tol:
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(m)
    order = np.argsort(-np.abs(w), kind="stable")
    if k < n:
        mags = np.abs(w[order])
        scale = max(1.0, float(mags[0]))
        if mags[k - 1] - mags[k] <= 1e-10 * scale:
            warnings.warn("eigenvalue magnitudes tie at position k; the selected "
                          "subspace is not unique", DegenerateSpectrumWarning, stacklevel=2)
    order = order[:k]
    vals, vecs = w[order], v[:, order]
    for j in range(k):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


@dataclass(frozen=True)
class Embedding:
    rows: np.ndarray
    source: str
    tau: float
    eigenvalues: np.ndarray
    trimmed: np.ndarray | None = None


def spectral_embedding(g: Graph, k: int, method: str, tau: float) -> Embedding:
    if method == "usc":
        mat, trimmed = trim(g, tau)
    elif method == "nsc":
        mat, trimmed = regularized_laplacian(g, tau), None
    else:
        raise ValueError(f"unknown spectral method {method!r}")
    vals, vecs = leading_eigenvectors(mat, k)
    return Embedding(rows=vecs, source=method, tau=tau, eigenvalues=vals, trimmed=trimmed)


def _spectral_cluster(g: Graph, k: int, method: str, tau_policy: TauPolicy,
                      mu: float, a: float | None) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if k == 1:
        return np.ones(g.n, dtype=np.int64)
    tau = tau_policy.resolve(g, a)
    emb = spectral_embedding(g, k, method, tau)
    return greedy_cluster(emb.rows, GreedyConfig.from_mu(k, g.n, mu))


def usc(g: Graph, k: int, tau_policy: TauPolicy | None = None, mu: float = DEFAULT_MU,
        a: float | None = None) -> np.ndarray:
    """Unnormalized spectral clustering of the trimmed adjacency matrix.

    Default ``tau`` is twice the average degree.
    """
    return _spectral_cluster(g, k, "usc", tau_policy or TauPolicy.degree(2.0), mu, a)


def nsc(g: Graph, k: int, tau_policy: TauPolicy | None = None, mu: float = DEFAULT_MU,
        a: float | None = None) -> np.ndarray:
    """Normalized spectral clustering of the regularized Laplacian.

    Default ``tau`` is the average degree.
    """
    return _spectral_cluster(g, k, "nsc", tau_policy or TauPolicy.degree(1.0), mu, a)


@dataclass(frozen=True)
class SpectralInitializer:
    """Picklable ``(graph, k) -> labels`` callable for use inside refinement."""

    method: str = "usc"
    tau: TauPolicy = TauPolicy("degree", 2.0)
    mu: float = DEFAULT_MU
    a: float | None = None

    def __call__(self, g: Graph, k: int) -> np.ndarray:
        fn = usc if self.method == "usc" else nsc
        return fn(g, k, self.tau, self.mu, self.a)

    @property
    def name(self) -> str:
        return f"{self.method.upper()}({self.tau})"
