"""Acceptance suite: one PASS/FAIL line per criterion, echoed in the pytest
terminal summary.

The simulation criteria run the presets at 20 replications with the default
(simplified) refinement. The leave-one-out leg of criterion 1 reruns the
spectral initializer once per node and is opt-in through
``SBMREFINE_FULL_ACCEPTANCE=1``. The blog-network criterion needs the dataset
under ``$SBMREFINE_DATA`` and fails when it is absent.
"""

import itertools
import math
import os
import time

import networkx as nx
import numpy as np
import pytest

from sbmrefine.cli import main
from sbmrefine.experiments import ExperimentReport, ExperimentSpec, emit_report, run_polblogs, run_preset
from sbmrefine.graph import build_graph
from sbmrefine.metrics import best_permutation, misclassified_count
from sbmrefine.refine import consensus_align, penalized_vote, penalty_params
from sbmrefine.sbm import PlantedPartitionParams, population_lambda_k, population_matrix, renyi_divergence, size_window

from conftest import VERDICTS
from oracles import (factorial_min_mismatch, factorial_min_mismatch_table, golden_section_min,
                     hamming, mle_local_update)

REPS = 20
WORKERS = os.cpu_count() or 1
INITS = ("USC(inf)", "USC(2d)", "NSC(0)", "NSC(1d)")


def verdict(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


def paired(report, init, refinement):
    """Per-replication (init, refined) misclassified counts."""
    by_rep = {}
    for r in report.rows:
        if r["initializer"] != init:
            continue
        by_rep.setdefault(r["replication"], {})[r["refinement"] or "none"] = r["misclassified"]
    reps = sorted(by_rep)
    return (np.array([by_rep[i]["none"] for i in reps]),
            np.array([by_rep[i][refinement] for i in reps]))


_cache = {}


def preset_report(name):
    if name not in _cache:
        spec = ExperimentSpec(preset=name, replications=REPS, workers=WORKERS)
        _cache[name] = timed(run_preset, spec)
    return _cache[name]


# ---------------------------------------------------------------------------
# simulation presets

@pytest.mark.slow
def test_criterion_01_balanced():
    report, secs = preset_report("balanced")
    details, ok = [], secs <= 30 * 60
    for init in INITS:
        a, b = paired(report, init, "simplified")
        frac = float(np.mean(b <= a))
        good = 10 <= np.median(a) <= 80 and np.median(b) <= 15 and frac >= 0.9
        ok &= good
        details.append(f"{init}: init median {np.median(a):g}, simplified median "
                       f"{np.median(b):g}, refined<=init {frac:.0%}")
    verdict(1, ok, "; ".join(details) + f"; {secs:.0f}s")


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("SBMREFINE_FULL_ACCEPTANCE") != "1",
                    reason="leave-one-out refinement at n=2500 reruns the initializer 2500 "
                           "times per replication; set SBMREFINE_FULL_ACCEPTANCE=1")
def test_criterion_01_balanced_full():
    spec = ExperimentSpec(preset="balanced", replications=REPS, workers=WORKERS,
                          refinements=("full",))
    report, secs = timed(run_preset, spec)
    details, ok = [], True
    for init in INITS:
        a, b = paired(report, init, "full")
        frac = float(np.mean(b <= a))
        ok &= bool(10 <= np.median(a) <= 80 and np.median(b) <= 15 and frac >= 0.9)
        details.append(f"{init}: init median {np.median(a):g}, full median {np.median(b):g}, "
                       f"refined<=init {frac:.0%}")
    verdict(1, ok, "(full) " + "; ".join(details) + f"; {secs:.0f}s")


def ratio(init, refined):
    return np.where(init > 0, refined / np.maximum(init, 1), np.where(refined > 0, np.inf, 0.0))


@pytest.mark.slow
def test_criterion_02_sparse():
    report, secs = preset_report("sparse")
    details, ok = [], secs <= 40 * 60
    for init in INITS:
        a, b = paired(report, init, "simplified")
        med = float(np.median(ratio(a, b)))
        ok &= med <= 0.65
        details.append(f"{init}: median ratio {med:.3f} (init {np.median(a):g}, "
                       f"refined {np.median(b):g})")
    verdict(2, ok, "; ".join(details) + f"; {secs:.0f}s")


@pytest.mark.slow
def test_criterion_03_imbalanced():
    report, _ = preset_report("imbalanced")
    details, ok = [], True
    for init in INITS:
        a, b = paired(report, init, "simplified")
        frac = float(np.mean(b <= a))
        ok &= bool(np.median(b) < np.median(a) and frac >= 0.9)
        details.append(f"{init}: init median {np.median(a):g}, refined median "
                       f"{np.median(b):g}, refined<=init {frac:.0%}")
    verdict(3, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# blog network

def test_criterion_04_polblogs():
    try:
        report, secs = timed(run_polblogs, spec=ExperimentSpec(preset="polblogs"))
    except FileNotFoundError as exc:
        verdict(4, False, f"dataset unavailable: {exc}")
    count = {r["method"]: r["misclassified"] for r in report.rows}
    finals = {t["initializer"]: t["misclassified"][-1] for t in report.trajectories}
    checks = [("USC(inf) direct", count["USC(inf)"], 300, 470),
              ("USC(inf)+refinement", count["USC(inf)+simplified"], 80, 180),
              ("NSC(1d)+refinement", count["NSC(1d)+simplified"], 60, 140)]
    checks += [(f"{init} iterated final", v, 45, 110) for init, v in finals.items()]
    ok = secs <= 300 and report.meta["n"] == 1222
    for _, v, lo, hi in checks:
        ok &= lo <= v <= hi
    verdict(4, ok, f"n={report.meta['n']}; "
            + "; ".join(f"{name} {v} in [{lo}, {hi}]" for name, v, lo, hi in checks)
            + f"; {secs:.0f}s")


# ---------------------------------------------------------------------------
# oracle equivalences

def test_criterion_05_loss_oracle():
    rng = np.random.default_rng(20240505)
    start = time.perf_counter()
    bad = 0
    for _ in range(1000):
        k = int(rng.integers(1, 7))
        n = int(rng.integers(1, 51))
        t, e = rng.integers(1, k + 1, n), rng.integers(1, k + 1, n)
        want, _ = factorial_min_mismatch(t, e, k)
        pi = best_permutation(t, e, k, method="assignment")
        got = misclassified_count(t, e, k, method="assignment")
        bad += got != want or int(np.count_nonzero(pi[t] != e)) != want
    secs = time.perf_counter() - start
    verdict(5, bad == 0 and secs <= 10, f"{bad} mismatches in 1000 pairs; {secs:.2f}s")


def test_criterion_06_penalty_identities():
    rng = np.random.default_rng(6)
    N = 10_000
    ns = np.exp(rng.uniform(math.log(10), math.log(1e5), N))
    a_hat = rng.uniform(0, 1, N) * ns
    b_hat = rng.uniform(0, 1, N) * a_hat
    start = time.perf_counter()
    ident, tilt, value, ts = 0.0, 0.0, 0.0, np.empty(N)
    for i in range(N):
        n, a, b = float(ns[i]), float(a_hat[i]), float(b_hat[i])
        pp = penalty_params(a, b, n)
        p, q = a / n, b / n
        lhs = math.exp(-2 * pp.t * pp.rho) * (q * math.exp(pp.t) + 1 - q)
        rhs = p * math.exp(-pp.t) + 1 - p
        ident = max(ident, abs(lhs - rhs) / abs(rhs))
        ts[i] = pp.t
    p, q = a_hat / ns, b_hat / ns
    # the tilted product equals pq + (1-p)(1-q) + h(t); minimize h alone so the
    # search is not swamped by the constant term
    h = lambda t: q * (1 - p) * np.exp(t) + p * (1 - q) * np.exp(-t)
    t_gs = golden_section_min(h, np.full(N, -60.0), np.full(N, 60.0))
    tilt = float(np.max(np.abs(t_gs - ts)))
    min_val = p * q + (1 - p) * (1 - q) + h(t_gs)
    target = np.array([math.exp(-renyi_divergence(a, b, n))
                       for a, b, n in zip(a_hat, b_hat, ns)])
    value = float(np.max(np.abs(min_val - target)))
    secs = time.perf_counter() - start
    ok = ident <= 1e-12 and tilt <= 1e-6 and value <= 1e-10 and secs <= 5
    verdict(6, ok, f"max identity rel err {ident:.2e}, max |t - t_gs| {tilt:.2e}, "
                   f"max |min - e^-I| {value:.2e}; {secs:.2f}s")


def test_criterion_07_mle_local():
    start = time.perf_counter()
    checked, bad = 0, 0
    for G in nx.graph_atlas_g():
        n = G.number_of_nodes()
        if n == 0:
            continue
        g = build_graph(n, list(G.edges()))
        adj = [[int(G.has_edge(u, v)) for v in range(n)] for u in range(n)]
        for labels in itertools.product((1, 2), repeat=n):
            for u in range(n):
                checked += 1
                bad += penalized_vote(g, u, labels, 0.0, 2) != mle_local_update(adj, labels, u, 2)
    secs = time.perf_counter() - start
    verdict(7, bad == 0 and secs <= 120,
            f"{bad} mismatches over {checked} (graph, labeling, node) triples; {secs:.1f}s")


def random_window_sizes(rng, n, k, beta):
    lo, hi = size_window(n, k, beta)
    lo, hi = math.ceil(lo), math.floor(hi)
    while True:
        sizes = rng.integers(lo, hi + 1, k - 1)
        last = n - int(sizes.sum())
        if lo <= last <= hi:
            sizes = np.append(sizes, last)
            if rng.random() < 0.5:  # push one block to the lower edge
                i, j = rng.choice(k, 2, replace=False)
                moved = sizes[i] - lo
                if sizes[j] + moved <= hi:
                    sizes[i] -= moved
                    sizes[j] += moved
            return sizes


def test_criterion_08_eigen_bound():
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    worst, bad = math.inf, 0
    for _ in range(100):
        k = int(rng.integers(2, 7))
        beta = float(rng.uniform(1, 2))
        n = int(rng.integers(math.ceil(2 * beta * k), 400))
        a = float(rng.uniform(0.05, 0.99)) * n
        b = float(rng.uniform(0, 0.95)) * a
        params = PlantedPartitionParams(n, k, a, b, beta)
        sizes = random_window_sizes(rng, n, k, beta)
        sigma = rng.permutation(np.repeat(np.arange(1, k + 1), sizes))
        lam = population_lambda_k(params.connectivity(), sigma)
        # independent check through singular values of the dense matrix
        sv = np.linalg.svd(population_matrix(params.connectivity(), sigma), compute_uv=False)
        bound = (a - b) / (2 * beta * k)
        slack = min(lam, float(sv[k - 1])) - bound
        worst = min(worst, slack)
        bad += slack < -1e-9
    secs = time.perf_counter() - start
    verdict(8, bad == 0 and secs <= 60,
            f"{bad} violations in 100 matrices, min slack {worst:.3g}; {secs:.1f}s")


def test_criterion_09_consensus():
    rng = np.random.default_rng(9)
    start = time.perf_counter()
    bad = 0
    for _ in range(200):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(8 * k, 240))
        m = math.ceil(n / (4 * k))
        # sizes at least n/(4k), remainder spread at random
        sizes = np.full(k, m) + np.bincount(rng.integers(0, k, n - k * m), minlength=k)
        truth = rng.permutation(np.repeat(np.arange(1, k + 1), sizes))
        budget = math.ceil(n / (4 * k)) - 1  # total disagreements < n/(4k)
        flips = rng.choice(n, int(rng.integers(0, budget + 1)), replace=False)
        ref, other = truth.copy(), truth.copy()
        for u in flips:
            target = ref if rng.random() < 0.5 else other
            target[u] = rng.choice([l for l in range(1, k + 1) if l != truth[u]])
        pi = np.concatenate([[0], rng.permutation(k) + 1])
        other = pi[other]
        xi, is_perm = consensus_align(ref, other, k)
        best, _ = factorial_min_mismatch_table(other, ref, k)
        bad += not is_perm or hamming(ref, xi[other]) != best
    secs = time.perf_counter() - start
    verdict(9, bad == 0 and secs <= 10, f"{bad} failures in 200 pairs; {secs:.2f}s")


# ---------------------------------------------------------------------------
# determinism

@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    blobs = []
    # reruns of the first two balanced replications, serial and parallel
    full, _ = preset_report("balanced")
    subset = ExperimentReport("balanced", [r for r in full.rows if r["replication"] < 2])
    blobs.append(emit_report(subset, tmp_path / "from20.csv").read_bytes())
    for w in (1, 2):
        rep = run_preset(ExperimentSpec(preset="balanced", replications=2, workers=w))
        blobs.append(emit_report(rep, tmp_path / f"w{w}.csv").read_bytes())
    same_sim = len(set(blobs)) == 1

    gen = []
    for i in range(2):
        e, t = tmp_path / f"e{i}.txt", tmp_path / f"t{i}.csv"
        main(["generate", "--n", "500", "--k", "5", "--a", "80", "--b", "20", "--seed", "3",
              "--out-edges", str(e), "--out-labels", str(t)])
        gen.append(e.read_bytes() + t.read_bytes())
    same_gen = gen[0] == gen[1]
    verdict(10, same_sim and same_gen,
            f"preset CSV identical across reruns and worker counts: {same_sim}; "
            f"generated graph identical: {same_gen}")
