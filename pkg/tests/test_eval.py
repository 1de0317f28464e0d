import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from isimed.errors import DimensionMismatch, FoldDegenerate, RankDeficient, SingleClass, ZeroVariance
from isimed.eval import (
    betainc_regularized,
    classification_metrics,
    distance_error_stats,
    kfold_cv,
    paired_t_test,
    pca,
    roc_auc,
    spatial_correlation,
    stratified_folds,
    summarize,
    train_linear_probe,
)
from isimed.sampling import pairwise_distances


def jacobi_eigen(a, sweeps=100):
    """Cyclic Jacobi rotations for a symmetric matrix; returns (values, vectors as columns)."""
    a = np.array(a, dtype=np.float64)
    n = len(a)
    v = np.eye(n)
    for _ in range(sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < 1e-14:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
                v = v @ rot
    return np.diag(a), v


def t_p_by_quadrature(t, df):
    dens = lambda x: math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2)) * (
        1 + x * x / df
    ) ** (-(df + 1) / 2)
    tail, _ = integrate.quad(dens, abs(t), np.inf, epsabs=1e-14, epsrel=1e-12)
    return 2 * tail


class TestRocAuc:
    def test_separating(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_pair_enumeration(self):
        scores, labels = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
        pos = [s for s, y in zip(scores, labels) if y]
        neg = [s for s, y in zip(scores, labels) if not y]
        oracle = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg) / (len(pos) * len(neg))
        assert roc_auc(scores, labels) == oracle == 0.75

    def test_single_class(self):
        with pytest.raises(SingleClass):
            roc_auc([0.1, 0.2], [1, 1])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(4, 30), st.integers(0, 2**32 - 1))
    def test_properties(self, n, seed):
        rng = np.random.default_rng(seed)
        labels = np.r_[0, 1, rng.integers(0, 2, n - 2)]
        scores = rng.normal(size=n)
        auc = roc_auc(scores, labels)
        pos, neg = scores[labels == 1], scores[labels == 0]
        brute = np.mean([(p > q) + 0.5 * (p == q) for p in pos for q in neg])
        assert auc == pytest.approx(brute, abs=1e-12)
        assert roc_auc(np.exp(3 * scores) + 1, labels) == pytest.approx(auc, abs=1e-12)
        assert auc + roc_auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


class TestClassificationMetrics:
    def test_perfect(self):
        r = classification_metrics([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])
        assert (r.auc, r.accuracy, r.f1, r.sensitivity, r.specificity) == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_all_positive(self):
        r = classification_metrics([0.9] * 4, [1, 0, 1, 0])
        assert (r.sensitivity, r.specificity, r.accuracy) == (1.0, 0.0, 0.5)

    def test_confusion_arithmetic(self):
        labels = [1, 1, 1, 1, 0, 0, 0, 0]
        scores = [0.9, 0.8, 0.7, 0.2, 0.6, 0.1, 0.3, 0.4]
        r = classification_metrics(scores, labels)
        assert (r.tp, r.fp, r.fn, r.tn) == (3, 1, 1, 3)
        precision, recall = 3 / 4, 3 / 4
        assert r.f1 == pytest.approx(2 * precision * recall / (precision + recall))
        assert r.f1 == pytest.approx(0.75) and r.accuracy == 0.75 and r.sensitivity == 0.75

    def test_threshold_inclusive(self):
        r = classification_metrics([0.5, 0.49], [1, 0])
        assert r.tp == 1 and r.tn == 1


class TestPairedT:
    def test_identical(self):
        with pytest.raises(ZeroVariance):
            paired_t_test([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])

    def test_constant_difference(self):
        with pytest.raises(ZeroVariance):
            paired_t_test([2.0, 3, 4, 5], [1.0, 2, 3, 4])

    def test_worked_example(self):
        t, p = paired_t_test([1.9, 2.0, 2.1], [1.0, 1.0, 1.0])
        assert t == pytest.approx(1.0 / (0.1 / math.sqrt(3)), rel=1e-9)
        assert t == pytest.approx(17.32, abs=0.01)
        assert p == pytest.approx(t_p_by_quadrature(t, 2), rel=1e-8)
        assert p == pytest.approx(0.0033, abs=5e-5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 15), st.integers(0, 2**32 - 1))
    def test_against_quadrature(self, k, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=k), rng.normal(size=k)
        t, p = paired_t_test(a, b)
        assert p == pytest.approx(t_p_by_quadrature(t, k - 1), rel=1e-7, abs=1e-12)
        assert 0 <= p <= 1

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.1, 30), st.floats(0.1, 30), st.floats(0, 1))
    def test_betainc(self, a, b, x):
        assert betainc_regularized(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-9, abs=1e-14)


class TestPCA:
    def test_single_axis(self):
        z = np.zeros((10, 4))
        z[:, 0] = np.arange(10)
        r = pca(z, 3)
        np.testing.assert_allclose(np.abs(r.components[0]), [1, 0, 0, 0], atol=1e-12)
        np.testing.assert_allclose(r.explained_variance[1:], 0, atol=1e-12)

    def test_reconstruction_against_jacobi(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(50, 8)) @ rng.normal(size=(8, 8))
        r = pca(z, 3)
        zc = z - z.mean(0)
        values, vectors = jacobi_eigen(zc.T @ zc / 49)
        order = np.argsort(values)[::-1]
        values, vectors = values[order], vectors[:, order]
        np.testing.assert_allclose(r.explained_variance, values[:3], rtol=1e-9)
        for i in range(3):
            assert abs(abs(r.components[i] @ vectors[:, i]) - 1) < 1e-9
        recon = r.projections @ r.components
        err = ((zc - recon) ** 2).sum() / 49
        assert err == pytest.approx(values[3:].sum(), rel=1e-9)
        np.testing.assert_allclose(r.components @ r.components.T, np.eye(3), atol=1e-8)
        np.testing.assert_allclose(r.projections.mean(0), 0, atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(5, 20), st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_translation_invariance(self, n, d, seed):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(n, d))
        k = min(2, d)
        a, b = pca(z, k), pca(z + rng.normal(scale=50, size=d), k)
        assume(np.all(np.diff(a.explained_variance) < -1e-6 * a.explained_variance[0]))
        signs = np.sign(np.sum(a.components * b.components, axis=1))
        np.testing.assert_allclose(a.projections, b.projections * signs, atol=1e-7)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            pca(np.random.default_rng(0).normal(size=(10, 2)), 3)


class TestSpatialCorrelation:
    def test_self(self):
        c = np.random.default_rng(0).normal(size=(30, 3))
        corr = spatial_correlation(c, c)
        np.testing.assert_allclose(np.abs(np.diag(corr)), 1, atol=1e-12)

    def test_constant_column(self):
        rng = np.random.default_rng(1)
        p = rng.normal(size=(10, 3))
        p[:, 1] = 4.0
        with pytest.raises(ZeroVariance):
            spatial_correlation(p, rng.normal(size=(10, 3)))

    def test_against_pearson(self):
        rng = np.random.default_rng(2)
        c = rng.normal(size=(40, 3))
        p = np.c_[2 * c[:, 2] + 1e-9 * rng.normal(size=40), rng.normal(size=(40, 2))]
        corr = spatial_correlation(p, c)
        assert corr[0, 2] == pytest.approx(1.0, abs=1e-9)
        x, y = p[:, 1], c[:, 0]
        pearson = ((x - x.mean()) * (y - y.mean())).sum() / math.sqrt(
            ((x - x.mean()) ** 2).sum() * ((y - y.mean()) ** 2).sum()
        )
        assert corr[1, 0] == pytest.approx(pearson, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(3, 20), st.integers(0, 2**32 - 1))
    def test_bounds(self, n, seed):
        rng = np.random.default_rng(seed)
        corr = spatial_correlation(rng.normal(size=(n, 2)), rng.normal(size=(n, 3)))
        assert corr.shape == (2, 3) and np.all(np.abs(corr) <= 1)

    def test_misaligned(self):
        with pytest.raises(DimensionMismatch):
            spatial_correlation(np.zeros((4, 2)), np.zeros((5, 3)))


class TestDistanceErrorStats:
    def test_equal(self):
        d = pairwise_distances(np.random.default_rng(0).normal(size=(6, 3)))
        assert set(distance_error_stats(d, d).values()) == {0.0}

    def test_offset(self):
        d = pairwise_distances(np.random.default_rng(0).normal(size=(6, 3)))
        off = d + 2.5
        np.fill_diagonal(off, 0)
        for v in distance_error_stats(off, d).values():
            assert v == pytest.approx(2.5, abs=1e-12)

    def test_sort_oracle(self):
        rng = np.random.default_rng(3)
        a = pairwise_distances(rng.normal(size=(6, 4)))
        b = pairwise_distances(rng.normal(size=(6, 3)))
        errs = sorted(abs(a[i, j] - b[i, j]) for i in range(6) for j in range(i + 1, 6))
        assert len(errs) == 15
        stats = distance_error_stats(a, b)
        for q in (5, 25, 50, 75, 95):
            pos = (len(errs) - 1) * q / 100
            lo = int(math.floor(pos))
            hi = min(lo + 1, len(errs) - 1)
            oracle = errs[lo] + (pos - lo) * (errs[hi] - errs[lo])
            assert stats[q] == pytest.approx(oracle, abs=1e-12)


class TestProbe:
    def test_separable(self):
        rng = np.random.default_rng(0)
        y = np.r_[np.zeros(20), np.ones(20)]
        z = rng.normal(size=(40, 5))
        z[:, 2] += 4 * (2 * y - 1)
        probe = train_linear_probe(z, y, steps=300, lr=0.05)
        assert np.mean((probe.predict_proba(z) >= 0.5) == y) == 1.0

    def test_flipped_labels(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 60)
        y[:2] = [0, 1]
        z = rng.normal(size=(60, 4)) + y[:, None] * 0.5
        s = train_linear_probe(z, y, steps=100).decision_function(z)
        s_flip = train_linear_probe(z, 1 - y, steps=100).decision_function(z)
        np.testing.assert_allclose(s_flip, -s, atol=1e-12)
        assert roc_auc(s_flip, y) == pytest.approx(1 - roc_auc(s, y), abs=1e-12)

    def test_label_feature(self):
        y = np.array([0, 1] * 15)
        z = np.c_[y, y].astype(float)
        probe = train_linear_probe(z, y, steps=50)
        scores = probe.decision_function(z)
        assert scores[y == 1].min() > scores[y == 0].max()
        assert roc_auc(scores, y) == 1.0

    def test_single_class(self):
        with pytest.raises(SingleClass):
            train_linear_probe(np.ones((4, 2)), [1, 1, 1, 1])


class TestKFold:
    def test_partition(self):
        y = np.array([0, 1] * 50)
        folds = stratified_folds(y, 10, seed=3)
        assert len(folds) == 10 and all(len(f) == 10 for f in folds)
        assert all(y[f].sum() == 5 for f in folds)
        joined = np.concatenate(folds)
        assert sorted(joined.tolist()) == list(range(100))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_partition_property(self, k, seed):
        rng = np.random.default_rng(seed)
        y = rng.permutation(np.r_[np.zeros(k + rng.integers(0, 9)), np.ones(k + rng.integers(0, 9))]).astype(int)
        folds = stratified_folds(y, k, seed)
        joined = np.concatenate(folds)
        assert len(joined) == len(y) and len(set(joined.tolist())) == len(y)

    def test_records(self):
        rng = np.random.default_rng(4)
        y = np.array([0, 1] * 50)
        z = rng.normal(size=(100, 3))
        z[:, 0] += 5 * y
        records = kfold_cv(z, y, k=10, seed=1, probe_steps=100)
        assert [r.fold for r in records] == list(range(10))
        assert all(r.auc == 1.0 for r in records)
        assert all(r.tp + r.fp + r.fn + r.tn == 10 for r in records)
        stats = summarize(records)
        assert stats["auc"] == (1.0, 0.0)

    def test_degenerate(self):
        with pytest.raises(FoldDegenerate):
            stratified_folds(np.array([0] * 20 + [1] * 5), 10, 0)
        with pytest.raises(FoldDegenerate):
            kfold_cv(np.zeros((5, 2)), [0, 1, 0, 1, 0], k=10)

    def test_summary_std(self):
        rng = np.random.default_rng(5)
        y = np.array([0, 1] * 30)
        records = kfold_cv(rng.normal(size=(60, 3)) + y[:, None] * 0.3, y, k=5, seed=2, probe_steps=50)
        aucs = np.array([r.auc for r in records])
        mean, std = summarize(records)["auc"]
        assert mean == pytest.approx(aucs.mean()) and std == pytest.approx(aucs.std(ddof=1))
