import numpy as np
import pytest

from transfermetrics.config import MetricConfig
from transfermetrics.errors import NumericalError
from transfermetrics.formats import EmbeddingSet
from transfermetrics.gaussians import ClassGaussian, CovarianceMode, fit_class_gaussians
from transfermetrics.gbc import bhattacharyya_distance, gbc_pipeline, gbc_score
from transfermetrics.pca import fit_pca, project
from transfermetrics.synthetic import mc_bhattacharyya


def diag_gaussian(cid, mean, var):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = np.atleast_1d(np.asarray(var, dtype=float))
    return ClassGaussian(cid, mean, CovarianceMode.DIAGONAL, var, 10)


def full_gaussian(cid, mean, cov):
    return ClassGaussian(cid, np.asarray(mean, float), CovarianceMode.FULL,
                         np.asarray(cov, float), 10)


class TestDistanceOracles:
    def test_identical_gaussians_zero(self):
        g = diag_gaussian(0, [1.0, 2.0], [0.5, 1.5])
        h = diag_gaussian(1, [1.0, 2.0], [0.5, 1.5])
        assert bhattacharyya_distance(g, h) == 0.0

    def test_unit_variance_mean_gap(self):
        # hand: (1/8) * 2^2 / 1 = 0.5, log term vanishes
        d = bhattacharyya_distance(diag_gaussian(0, 0.0, 1.0), diag_gaussian(1, 2.0, 1.0))
        assert d == pytest.approx(0.5, abs=1e-12)

    def test_variance_ratio_term(self):
        # hand: avg var 2.5, sqrt(1*4) = 2 -> 0.5 * ln(1.25)
        d = bhattacharyya_distance(diag_gaussian(0, 0.0, 1.0), diag_gaussian(1, 0.0, 4.0))
        assert d == pytest.approx(0.5 * np.log(1.25), abs=1e-12)

    def test_full_matches_diagonal_on_diagonal_covs(self):
        gd1 = diag_gaussian(0, [0.0, 1.0], [1.0, 2.0])
        gd2 = diag_gaussian(1, [1.5, -0.5], [0.5, 3.0])
        gf1 = full_gaussian(0, [0.0, 1.0], np.diag([1.0, 2.0]))
        gf2 = full_gaussian(1, [1.5, -0.5], np.diag([0.5, 3.0]))
        assert bhattacharyya_distance(gf1, gf2) == pytest.approx(
            bhattacharyya_distance(gd1, gd2), abs=1e-12
        )

    def test_monte_carlo_cross_check(self):
        g1 = diag_gaussian(0, [0.3, -0.7], [1.2, 0.8])
        g2 = diag_gaussian(1, [1.1, 0.4], [0.6, 1.9])
        closed = np.exp(-bhattacharyya_distance(g1, g2))
        est, se = mc_bhattacharyya([0.3, -0.7], [1.2, 0.8], [1.1, 0.4], [0.6, 1.9], 10**6)
        assert abs(est - closed) < max(3 * se, 0.01 * closed)

    def test_mode_mismatch(self):
        with pytest.raises(ValueError):
            bhattacharyya_distance(diag_gaussian(0, 0.0, 1.0),
                                   full_gaussian(1, [0.0], [[1.0]]))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            bhattacharyya_distance(diag_gaussian(0, [0.0], [1.0]),
                                   diag_gaussian(1, [0.0, 0.0], [1.0, 1.0]))

    def test_non_psd_full_raises(self):
        bad = full_gaussian(0, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])  # indefinite
        good = full_gaussian(1, [1.0, 1.0], np.eye(2))
        with pytest.raises(NumericalError):
            bhattacharyya_distance(bad, good)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g1 = diag_gaussian(0, rng.standard_normal(3), rng.uniform(0.1, 3.0, 3))
            g2 = diag_gaussian(1, rng.standard_normal(3), rng.uniform(0.1, 3.0, 3))
            assert bhattacharyya_distance(g1, g2) == bhattacharyya_distance(g2, g1)

    def test_no_underflow_at_d64(self):
        # tiny variances at d=64 would underflow a determinant product
        g1 = diag_gaussian(0, np.zeros(64), np.full(64, 1e-6))
        g2 = diag_gaussian(1, np.zeros(64), np.full(64, 4e-6))
        d = bhattacharyya_distance(g1, g2)
        assert np.isfinite(d) and d == pytest.approx(64 * 0.5 * np.log(1.25), rel=1e-9)


class TestScore:
    def test_two_identical_classes(self):
        gs = [diag_gaussian(0, 0.0, 1.0), diag_gaussian(1, 0.0, 1.0)]
        assert gbc_score(gs).value == -1.0

    def test_three_identical_classes(self):
        gs = [diag_gaussian(i, 0.0, 1.0) for i in range(3)]
        assert gbc_score(gs).value == -3.0

    def test_two_separated_classes(self):
        gs = [diag_gaussian(0, 0.0, 1.0), diag_gaussian(1, 2.0, 1.0)]
        assert gbc_score(gs).value == pytest.approx(-np.exp(-0.5), abs=1e-12)

    def test_ordered_pairs_doubles(self):
        gs = [diag_gaussian(0, 0.0, 1.0), diag_gaussian(1, 2.0, 1.0)]
        assert gbc_score(gs, ordered_pairs=True).value == pytest.approx(
            2 * gbc_score(gs).value
        )

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            gbc_score([diag_gaussian(0, 0.0, 1.0)])

    def test_pairs_lexicographic(self):
        gs = [diag_gaussian(c, float(c), 1.0) for c in (2, 0, 1)]
        score = gbc_score(gs)
        assert [(p.class_i, p.class_j) for p in score.pair_overlaps] == [(0, 1), (0, 2), (1, 2)]
        assert score.value == -sum(p.coefficient for p in score.pair_overlaps)

    def test_value_bounds(self):
        rng = np.random.default_rng(3)
        gs = [diag_gaussian(c, rng.standard_normal(2), rng.uniform(0.5, 2.0, 2))
              for c in range(4)]
        score = gbc_score(gs)
        assert -6.0 <= score.value < 0.0
        for p in score.pair_overlaps:
            assert 0.0 < p.coefficient <= 1.0
            assert p.coefficient == pytest.approx(np.exp(-p.distance), abs=1e-12)

    def test_monotonic_in_mean_gap(self):
        coeffs = []
        for gap in (0.5, 1.0, 2.0, 4.0):
            gs = [diag_gaussian(0, 0.0, 1.0), diag_gaussian(1, gap, 1.0)]
            coeffs.append(gbc_score(gs).value)
        assert coeffs == sorted(coeffs)  # increases toward 0 with separation


def two_cluster_set(gap, n=300, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, 2))
    b = rng.standard_normal((n, 2)) + np.array([gap, 0.0])
    feats = np.vstack([a, b]).astype(np.float32)
    labels = np.array([0] * n + [1] * n, dtype=np.int32)
    return EmbeddingSet(feats, labels, 2)


class TestPipeline:
    CFG = MetricConfig(metric="gbc", pca_dim=2, covariance_mode="diagonal")

    def test_far_separated_clusters_near_zero(self):
        s = two_cluster_set(gap=100.0)
        assert abs(gbc_pipeline(s, self.CFG).value) < 1e-6

    def test_deterministic(self):
        s = two_cluster_set(gap=2.0)
        a = gbc_pipeline(s, self.CFG)
        b = gbc_pipeline(s, self.CFG)
        assert a.value == b.value
        assert a.pair_overlaps == b.pair_overlaps

    def test_monotone_in_separation(self):
        a = gbc_pipeline(two_cluster_set(gap=1.0), self.CFG).value
        b = gbc_pipeline(two_cluster_set(gap=4.0), self.CFG).value
        assert a < b

    def test_compositional_identity(self):
        s = two_cluster_set(gap=2.0, n=50)
        cfg = self.CFG
        model = fit_pca(s, cfg.pca_dim)
        manual = gbc_score(
            fit_class_gaussians(project(model, s), cfg.covariance_mode, cfg.var_floor),
            cfg.fingerprint(),
        )
        assert gbc_pipeline(s, cfg).value == manual.value


class TestRigidInvariance:
    def _random_labeled(self, seed=0, n=60, d=3, c=3):
        rng = np.random.default_rng(seed)
        feats = rng.standard_normal((n, d)).astype(np.float32)
        labels = rng.integers(0, c, n).astype(np.int32)
        return EmbeddingSet(feats, labels, c)

    @staticmethod
    def _random_rotation(d, seed):
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return q

    def test_full_mode_rigid_invariance(self):
        s = self._random_labeled()
        q = self._random_rotation(3, 1)
        t = np.array([5.0, -2.0, 0.5])
        moved = EmbeddingSet((s.features.astype(np.float64) @ q.T + t).astype(np.float32),
                             s.labels, s.class_count)
        floor = 1e-12
        a = fit_class_gaussians(s, CovarianceMode.FULL, floor)
        b = fit_class_gaussians(moved, CovarianceMode.FULL, floor)
        for (g1, g2), (h1, h2) in [((a[0], a[1]), (b[0], b[1])),
                                   ((a[0], a[2]), (b[0], b[2])),
                                   ((a[1], a[2]), (b[1], b[2]))]:
            assert bhattacharyya_distance(h1, h2) == pytest.approx(
                bhattacharyya_distance(g1, g2), abs=1e-6
            )

    def test_diagonal_mode_translation_invariance(self):
        s = self._random_labeled(seed=5)
        t = np.array([3.0, -1.0, 2.0])
        moved = EmbeddingSet((s.features.astype(np.float64) + t).astype(np.float32),
                             s.labels, s.class_count)
        a = fit_class_gaussians(s, CovarianceMode.DIAGONAL)
        b = fit_class_gaussians(moved, CovarianceMode.DIAGONAL)
        assert bhattacharyya_distance(a[0], a[1]) == pytest.approx(
            bhattacharyya_distance(b[0], b[1]), abs=1e-5
        )
