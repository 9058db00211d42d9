import math

import numpy as np
import pytest

from nodalsheet import experiments as ex
from nodalsheet.sheet import normal_cdf


class TestKSStatistic:
    def test_null_calibration(self):
        rng = np.random.default_rng(21)
        rejections = 0
        for _ in range(100):
            x = rng.standard_normal(10_000)
            _, p = ex.ks_statistic(x, normal_cdf)
            rejections += p <= 0.01
        assert rejections <= 2

    def test_point_mass_against_normal(self):
        d, _ = ex.ks_statistic(np.zeros(1000), normal_cdf)
        assert d == pytest.approx(0.5, abs=1e-12)

    def test_matches_brute_force_sweep(self):
        rng = np.random.default_rng(3)
        x = rng.random(500)  # uniforms against the normal CDF: mismatched
        d, _ = ex.ks_statistic(x, normal_cdf)
        # oracle: direct sweep over all sample points, both one-sided gaps
        xs = np.sort(x)
        n = xs.size
        f = normal_cdf(xs)
        brute = 0.0
        for i in range(n):
            brute = max(brute, abs((i + 1) / n - f[i]), abs(i / n - f[i]))
        assert d == brute

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            ex.ks_statistic(np.zeros(5), normal_cdf)


class TestRectangleFamily:
    def test_two_decades_and_alignment(self):
        fam = ex.adjacent_rectangle_family(2, 5, 128)
        vols = [float(np.prod(np.asarray(b[1]) - np.asarray(a[0])))
                for a, b in fam]
        assert max(vols) / min(vols) >= 100.0
        for (alo, ahi), (blo, bhi) in fam:
            # adjacency: shared face, disjoint interiors, union is a box
            assert (ahi[0] == blo[0] and alo[1] == blo[1] and ahi[1] == bhi[1]) or \
                   (ahi[1] == blo[1] and alo[0] == blo[0] and ahi[0] == bhi[0])

    def test_includes_thin_shapes(self):
        fam = ex.adjacent_rectangle_family(2, 5, 128)
        aspect = []
        for (alo, ahi), _ in fam:
            w = np.asarray(ahi) - np.asarray(alo)
            aspect.append(max(w) / min(w))
        assert max(aspect) >= 8.0

    def test_d1_family(self):
        fam = ex.adjacent_rectangle_family(1, 5, 256)
        assert len(fam) == 5
        (alo, ahi), (blo, bhi) = fam[0]
        assert ahi[0] == blo[0]


class TestSelfTestMode:
    def test_clt_self_test_passes(self):
        cfg = ex.ExperimentConfig(
            experiment="clt", d=2, m=32, n_reps=4000, self_test=True,
            base_seed=7,
            t_points=((1.0, 1.0), (0.5, 0.5)),
            cov_pairs=(((0.5, 1.0), (1.0, 0.5)),),
        )
        rep = ex.run_clt_experiment(cfg)
        assert rep.passed, [q.name for q in rep.quantities if not q.passed]

    def test_sup_self_test_small(self):
        cfg = ex.ExperimentConfig(
            experiment="sup", d=2, n_reps=20_000, self_test=True,
            sheet_n=8192, base_seed=11,
            curves=((math.inf, math.inf),), sup_distance_tol=0.02)
        rep = ex.run_sup_experiment(cfg)
        assert rep.passed
        assert rep.quantities[0].distance < 0.02

    def test_moment_scan_self_test_slope(self):
        # Brownian-sheet increments scale exactly: slope = 3/2
        cfg = ex.ExperimentConfig(
            experiment="moment-scan", d=2, m=64, n_reps=3000,
            self_test=True, base_seed=3, rect_levels=5, bootstrap=200)
        rep = ex.run_moment_scan(cfg)
        slope = rep.quantities[0].estimate
        se = rep.quantities[0].se
        assert abs(slope - 1.5) < max(4.0 * se, 0.05)
        assert rep.quantities[1].passed  # Cauchy-Schwarz

    def test_window_statistics_match_sheet_law(self):
        req = ex.RepRequest(m=64, d=2, windows=(0.25,))
        cfg = ex.ExperimentConfig(experiment="clt", d=2, m=64, n_reps=2000,
                                  self_test=True, base_seed=19)
        matrix, _ = ex.run_replications(cfg, req)
        assert matrix.shape == (2000, 16)
        # each window statistic is a standard normal under the sheet law
        v = matrix.var(ddof=1)
        assert abs(v - 1.0) < 0.03


class TestDeterminism:
    def test_bit_identical_reports(self):
        cfg = ex.ExperimentConfig(
            experiment="clt", d=2, R=5.0, h=0.05, m=20, n_reps=100,
            base_seed=123, t_points=((1.0, 1.0),), phi_names=("coscos",))
        a = ex.run_clt_experiment(cfg)
        b = ex.run_clt_experiment(cfg)
        assert a.results_dict() == b.results_dict()
        assert a.samples == b.samples

    def test_seed_changes_results(self):
        cfg1 = ex.ExperimentConfig(experiment="clt", d=2, R=5.0, h=0.05,
                                   m=20, n_reps=100, base_seed=1,
                                   t_points=((1.0, 1.0),))
        cfg2 = ex.ExperimentConfig(experiment="clt", d=2, R=5.0, h=0.05,
                                   m=20, n_reps=100, base_seed=2,
                                   t_points=((1.0, 1.0),))
        a = ex.run_clt_experiment(cfg1)
        b = ex.run_clt_experiment(cfg2)
        assert a.samples != b.samples


class TestSmallFieldExperiments:
    def test_gamma2_crosscheck_small(self):
        cfg = ex.ExperimentConfig(
            experiment="gamma2", d=1, R=100.0, h=0.05, m=1, n_reps=400,
            base_seed=5, var_gap_rtol=0.2)
        rep = ex.run_gamma2_crosscheck(cfg)
        names = [q.name for q in rep.quantities]
        assert any("variance identity" in n for n in names)
        assert rep.passed, [(q.name, q.estimate, q.reference) for q in rep.quantities
                            if not q.passed]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ex.ExperimentConfig(n_reps=10)
        with pytest.raises(ValueError):
            ex.ExperimentConfig(R=0.5)

    def test_phi_l2_reference(self):
        assert ex.phi_l2_squared("coscos", 2) == pytest.approx(0.25, abs=1e-6)
        assert ex.phi_l2_squared("one", 2) == pytest.approx(1.0, abs=1e-12)
        assert ex.phi_l2_squared("cospix", 1) == pytest.approx(0.5, abs=1e-6)
