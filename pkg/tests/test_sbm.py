import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbmrefine.experiments import PRESETS
from sbmrefine.graph import average_degree
from sbmrefine.sbm import (GeneralSbmParams, ParameterError, PlantedPartitionParams,
                           condition_diagnostics, equal_sizes, minimax_rate,
                           population_lambda_k, population_matrix, renyi_divergence,
                           sample_general_sbm, sample_planted_partition,
                           verify_theta0_membership)

from oracles import renyi_half


class TestParams:
    def test_invalid(self):
        with pytest.raises(ParameterError):
            PlantedPartitionParams(100, 2, 10, 5, beta=0.5)
        with pytest.raises(ParameterError):
            PlantedPartitionParams(100, 2, 200, 5)

    def test_theta0_violations(self):
        assert PlantedPartitionParams(100, 2, 10, 5).theta0_violations() == []
        assert "a <= b" in PlantedPartitionParams(100, 2, 5, 5).theta0_violations()

    def test_equal_sizes(self):
        assert equal_sizes(10, 3) == [4, 3, 3]

    def test_general_invalid_entry(self):
        with pytest.raises(ParameterError):
            GeneralSbmParams(np.array([[1.2]]), (5,))
        with pytest.raises(ParameterError):
            GeneralSbmParams(np.array([[0.5, 0.1], [0.2, 0.5]]), (5, 5))


class TestSampling:
    def test_cliques(self):
        params = PlantedPartitionParams(12, 3, 12, 0)
        g, labels = sample_planted_partition(params, seed=3)
        a = g.to_dense()
        same = labels[:, None] == labels[None, :]
        assert np.array_equal(a, (same & ~np.eye(12, dtype=bool)).astype(float))
        assert labels.tolist() == [1] * 4 + [2] * 4 + [3] * 4

    def test_er_marginal_density(self):
        n, p = 200, 0.1
        params = PlantedPartitionParams(n, 4, p * n, p * n)
        pairs = n * (n - 1) // 2
        total = sum(sample_planted_partition(params, seed=s)[0].num_edges for s in range(20))
        sd = math.sqrt(20 * pairs * p * (1 - p))
        assert abs(total - 20 * pairs * p) <= 3 * sd

    def test_window_violation(self):
        params = PlantedPartitionParams(100, 2, 10, 5)
        with pytest.raises(ParameterError, match="communities"):
            sample_planted_partition(params, sizes=[10, 90])
        # sizes n/k +- 1 sit inside the window
        sample_planted_partition(params, sizes=[49, 51])

    def test_determinism(self):
        params = PlantedPartitionParams(150, 3, 30, 5)
        g1, _ = sample_planted_partition(params, seed=11)
        g2, _ = sample_planted_partition(params, seed=11)
        g3, _ = sample_planted_partition(params, seed=12)
        assert g1.edges.tobytes() == g2.edges.tobytes()
        assert g1 != g3

    def test_block_edge_concentration(self):
        B = np.array([[0.3, 0.05, 0.1], [0.05, 0.2, 0.02], [0.1, 0.02, 0.4]])
        sizes = (30, 40, 50)
        model = GeneralSbmParams(B, sizes)
        starts = np.concatenate([[0], np.cumsum(sizes)])
        excursions = checks = 0
        for seed in range(40):
            g, lab = sample_general_sbm(model, seed)
            e = g.edges
            li, lj = lab[e[:, 0]] - 1, lab[e[:, 1]] - 1
            for i in range(3):
                for j in range(i, 3):
                    cnt = np.count_nonzero(((li == i) & (lj == j)) | ((li == j) & (lj == i)))
                    m = sizes[i] * (sizes[i] - 1) // 2 if i == j else sizes[i] * sizes[j]
                    sd = math.sqrt(m * B[i, j] * (1 - B[i, j]))
                    checks += 1
                    excursions += abs(cnt - m * B[i, j]) > 4 * sd
        assert checks == 240 and excursions <= 2
        assert starts[-1] == 120

    def test_k1_is_er(self):
        g, lab = sample_general_sbm(GeneralSbmParams(np.array([[0.2]]), (100,)), 0)
        assert set(lab.tolist()) == {1}
        assert abs(g.num_edges - 990) < 4 * math.sqrt(4950 * 0.16)

    def test_presets_bind_settings(self):
        bal = PRESETS["balanced"]
        assert bal["sizes"] == (250,) * 10
        assert np.all(np.diag(bal["B"]) == 0.48)
        assert np.all(bal["B"][~np.eye(10, dtype=bool)] == 0.32)
        imb = PRESETS["imbalanced"]
        assert imb["sizes"] == (200, 400, 600, 800)
        assert np.diag(imb["B"]).tolist() == [0.50, 0.45, 0.50, 0.45]
        assert np.array_equal(imb["B"], imb["B"].T)
        assert imb["B"][0, 1] == 0.29 and imb["B"][0, 2] == 0.35 and imb["B"][0, 3] == 0.25
        assert imb["B"][1, 2] == 0.25 and imb["B"][1, 3] == 0.30 and imb["B"][2, 3] == 0.35
        sp = PRESETS["sparse"]
        assert sp["sizes"] == (400,) * 10
        assert np.all(np.diag(sp["B"]) == 0.032)
        assert np.all(sp["B"][~np.eye(10, dtype=bool)] == 0.005)

    def test_sparse_average_degree(self):
        p = PRESETS["sparse"]
        model = GeneralSbmParams(p["B"], p["sizes"])
        degs = [average_degree(sample_general_sbm(model, s)[0]) for s in range(20)]
        assert all(abs(d - 30) <= 4 for d in degs)


class TestPopulation:
    def test_constant(self):
        P = population_matrix(np.array([[0.3]]), [1, 1, 1])
        assert np.all(P == 0.3)
        assert abs(population_lambda_k(np.array([[0.3]]), [1] * 5) - 5 * 0.3) <= 0.3

    def test_block_example(self):
        B = np.array([[0.5, 0.1], [0.1, 0.5]])
        P = population_matrix(B, [1, 1, 2, 2])
        want = np.array([[.5, .5, .1, .1], [.5, .5, .1, .1], [.1, .1, .5, .5], [.1, .1, .5, .5]])
        assert np.array_equal(P, want)

    @settings(max_examples=30)
    @given(st.integers(1, 5), st.integers(0, 1000))
    def test_rank_at_most_k(self, k, seed):
        rng = np.random.default_rng(seed)
        B = rng.random((k, k))
        B = (B + B.T) / 2
        sigma = rng.integers(1, k + 1, size=40)
        s = np.linalg.svd(population_matrix(B, sigma), compute_uv=False)
        assert np.count_nonzero(s > 1e-8) <= k

    def test_lambda_example(self):
        params = PlantedPartitionParams(200, 4, 40, 10)
        sigma = np.repeat(np.arange(1, 5), 50)
        assert population_lambda_k(params.connectivity(), sigma) >= 3.75

    def test_lambda_permutation_invariant(self):
        rng = np.random.default_rng(1)
        B = np.array([[0.4, 0.1, 0.2], [0.1, 0.5, 0.05], [0.2, 0.05, 0.3]])
        sigma = rng.integers(1, 4, size=60)
        pi = np.array([2, 3, 1])
        B2 = np.empty_like(B)
        B2[np.ix_(pi - 1, pi - 1)] = B
        order = rng.permutation(60)
        l1 = population_lambda_k(B, sigma)
        l2 = population_lambda_k(B2, pi[sigma - 1][order])
        assert l1 == pytest.approx(l2, rel=1e-10)


class TestRates:
    def test_renyi_examples(self):
        assert renyi_divergence(50, 50, 1000) == 0.0
        assert renyi_divergence(1000, 0, 1000) == math.inf
        with pytest.raises(ParameterError):
            renyi_divergence(1200, 10, 1000)
        with pytest.raises(ParameterError):
            renyi_divergence(10, -1, 1000)

    def test_renyi_matches_direct_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = float(rng.integers(10, 10000))
            a, b = np.sort(rng.random(2))[::-1] * n
            assert renyi_divergence(a, b, n) == pytest.approx(renyi_half(a / n, b / n),
                                                              rel=1e-9, abs=1e-15)
            assert renyi_divergence(a, b, n) == renyi_divergence(b, a, n)

    def test_renyi_sparse_approximation(self):
        for n in (1000, 5000, 20000):
            for ra in (0.01, 0.05, 0.1):
                for frac in (0.0, 0.2, 0.5, 0.8):
                    a, b = ra * n, frac * ra * n
                    approx = (math.sqrt(a) - math.sqrt(b)) ** 2 / n
                    assert abs(renyi_divergence(a, b, n) - approx) <= 0.1 * approx

    def test_minimax(self):
        assert minimax_rate(100, 3, 20, 20) == 1.0
        assert minimax_rate(100, 3, 100, 0) == 0.0
        n, a, b, beta = 1000, 60, 20, 1.5
        i_star = renyi_divergence(a, b, n)
        assert math.log(minimax_rate(n, 2, a, b, beta)) == pytest.approx(-n * i_star / 2)
        assert math.log(minimax_rate(n, 4, a, b, beta)) == pytest.approx(-n * i_star / 6)

    def test_minimax_monotone(self):
        n, s = 2000, 100.0
        rates = [minimax_rate(n, 3, s / 2 + d, s / 2 - d) for d in np.linspace(0, 49, 50)]
        assert all(x > y for x, y in zip(rates, rates[1:]))

    def test_diagnostics(self):
        r = condition_diagnostics(PlantedPartitionParams(100, 2, 20, 20))
        assert r.snr_theta0 == 0
        r = condition_diagnostics(PlantedPartitionParams(2500, 10, 1200, 800))
        vals = [v for v in r.as_dict().values()]
        assert all(math.isfinite(v) and v > 0 for v in vals)
        n = 2500
        r2 = condition_diagnostics(PlantedPartitionParams(n, 2, 1200, 800))
        assert r2.strong_consistency_margin == pytest.approx(n * r2.I_star / (2 * math.log(n)))
        r3 = condition_diagnostics(PlantedPartitionParams(n, 5, 1200, 800, beta=1.2))
        assert r3.strong_consistency_margin == pytest.approx(
            n * r3.I_star / (1.2 * 5 * math.log(n)))

    def test_diagnostics_monotone_in_gap(self):
        prev = None
        for a in (30, 40, 60, 90):
            r = condition_diagnostics(PlantedPartitionParams(1000, 4, a, 20))
            cur = (r.snr_theta0, r.weak_consistency_snr, r.strong_consistency_margin, r.I_star)
            if prev is not None:
                assert all(c > p for c, p in zip(cur, prev))
                assert r.minimax_rate < prev_rate
            prev, prev_rate = cur, r.minimax_rate

    def test_diagnostics_general(self):
        p = PRESETS["imbalanced"]
        r = condition_diagnostics(GeneralSbmParams(p["B"], p["sizes"]))
        assert r.I_star > 0 and 0 < r.minimax_rate <= 1


class TestMembership:
    def test_pass(self):
        params = PlantedPartitionParams(40, 4, 20, 4)
        rep = verify_theta0_membership(params.connectivity(), np.repeat([1, 2, 3, 4], 10), params)
        assert rep.ok

    def test_empty_community(self):
        params = PlantedPartitionParams(40, 4, 20, 4)
        sigma = np.repeat([1, 2, 3, 3], 10)
        rep = verify_theta0_membership(params.connectivity(), sigma, params)
        assert not rep.ok and (4, 0) in rep.size_violations

    def test_pattern(self):
        params = PlantedPartitionParams(40, 2, 20, 4)
        B = params.connectivity()
        B[0, 1] = B[1, 0] = 0.2
        rep = verify_theta0_membership(B, np.repeat([1, 2], 20), params)
        assert not rep.ok and rep.connectivity_violations[0][:2] == (1, 2)

    def test_slack(self):
        params = PlantedPartitionParams(40, 2, 20, 4, beta=1)
        rep = verify_theta0_membership(params.connectivity(), [1] * 21 + [2] * 19, params)
        assert rep.ok
