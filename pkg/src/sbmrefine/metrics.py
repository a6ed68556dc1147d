"""Misclassification loss over label permutations."""

from __future__ import annotations

import functools
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import LabelError

BRUTE_FORCE_MAX_K = 8


def _prepare(truth, estimate, k: int | None):
    t = np.asarray(truth, dtype=np.int64)
    e = np.asarray(estimate, dtype=np.int64)
    if t.ndim != 1 or e.ndim != 1 or t.size != e.size:
        raise LabelError(f"label vectors differ in length ({t.size} vs {e.size})")
    if t.size and (t.min() < 1 or e.min() < 1):
        raise LabelError("labels must be complete (no placeholder 0)")
    # vectors over different label ranges are compared on the larger range
    kk = max(int(t.max(initial=0)), int(e.max(initial=0)), k or 0, 1)
    return t, e, kk


def confusion_matrix(truth, estimate, k: int | None = None) -> np.ndarray:
    """``C[i, j]`` counts nodes with truth ``i+1`` and estimate ``j+1``."""
    t, e, kk = _prepare(truth, estimate, k)
    return np.bincount((t - 1) * kk + (e - 1), minlength=kk * kk).reshape(kk, kk)


@functools.lru_cache(maxsize=None)
def _all_perms(kk: int) -> np.ndarray:
    # rows in lexicographic order
    return np.array(list(itertools.permutations(range(kk))), dtype=np.int64).reshape(-1, kk)


def _best_perm_brute(C: np.ndarray) -> tuple[int, tuple[int, ...]]:
    perms = _all_perms(C.shape[0])
    agree = C[np.arange(C.shape[0]), perms].sum(axis=1)
    i = int(np.argmax(agree))
    return int(agree[i]), tuple(int(x) for x in perms[i])


def _best_perm_assignment(C: np.ndarray) -> tuple[int, tuple[int, ...]]:
    r, c = linear_sum_assignment(C, maximize=True)
    perm = np.empty(C.shape[0], dtype=np.int64)
    perm[r] = c
    return int(C[r, c].sum()), tuple(int(x) for x in perm)


def best_permutation(truth, estimate, k: int | None = None,
                     method: str = "auto") -> np.ndarray:
    """Permutation ``pi`` (as an array with ``pi[0] = 0``) maximizing agreement
    between ``pi(truth)`` and ``estimate``.

    With ``method='brute'`` (default for k <= 8) ties resolve to the
    lexicographically smallest permutation.
    """
    C = confusion_matrix(truth, estimate, k)
    if method == "auto":
        method = "brute" if C.shape[0] <= BRUTE_FORCE_MAX_K else "assignment"
    _, perm = (_best_perm_brute if method == "brute" else _best_perm_assignment)(C)
    return np.concatenate([[0], np.asarray(perm, dtype=np.int64) + 1])


def max_agreement(truth, estimate, k: int | None = None, method: str = "auto") -> int:
    C = confusion_matrix(truth, estimate, k)
    if method == "auto":
        method = "brute" if C.shape[0] <= BRUTE_FORCE_MAX_K else "assignment"
    return (_best_perm_brute if method == "brute" else _best_perm_assignment)(C)[0]


def misclassified_count(truth, estimate, k: int | None = None, method: str = "auto") -> int:
    """Number of misclassified nodes under the best relabeling."""
    n = np.asarray(truth).size
    return n - max_agreement(truth, estimate, k, method)


def loss(truth, estimate, k: int | None = None, method: str = "auto") -> float:
    """Misclassification proportion minimized over label permutations."""
    n = np.asarray(truth).size
    if n == 0:
        raise LabelError("empty label vectors")
    return misclassified_count(truth, estimate, k, method) / n


def loss_unpermuted(s1, s2) -> float:
    """Plain Hamming proportion between two label vectors."""
    a = np.asarray(s1)
    b = np.asarray(s2)
    if a.shape != b.shape or a.ndim != 1:
        raise LabelError(f"label vectors differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        raise LabelError("empty label vectors")
    return float(np.count_nonzero(a != b)) / a.size
