import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from active_handover.contact_model import (
    ContactModel,
    Prior,
    Sample,
    SampleWindow,
    batch_posterior,
    current_model,
    feature_matrix,
    predict,
    recursive_update,
    relu_features,
    sufficient_statistics,
)

velocities = st.floats(-1.0, 1.0, allow_nan=False)
forces = st.floats(-50.0, 50.0, allow_nan=False)
samples = st.lists(st.tuples(velocities, forces), min_size=0, max_size=60)


def ridge_oracle(prior, us, fs):
    """Posterior mean as the solution of an augmented least-squares problem."""
    phi = np.column_stack([np.maximum(us, 0.0), np.minimum(us, 0.0)])
    sigma = math.sqrt(prior.noise_var)
    root = np.linalg.cholesky(np.linalg.inv(prior.cov)).T
    a = np.vstack([phi / sigma, root])
    b = np.concatenate([np.asarray(fs) / sigma, root @ prior.mean])
    mean, *_ = np.linalg.lstsq(a, b, rcond=None)
    cov = np.linalg.inv(a.T @ a)
    return mean, cov


class TestFeatures:
    @pytest.mark.parametrize("u, expected", [(0.0, [0.0, 0.0]), (0.05, [0.05, 0.0]),
                                             (-0.03, [0.0, -0.03])])
    def test_examples(self, u, expected):
        np.testing.assert_array_equal(relu_features(u), expected)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            relu_features(bad)
        with pytest.raises(ValueError):
            feature_matrix([0.1, bad])

    @given(velocities, st.floats(-100, 100), st.floats(-100, 100))
    def test_piecewise_linear(self, u, w0, w1):
        phi = relu_features(u)
        assert phi[0] >= 0.0 and phi[1] <= 0.0
        assert np.count_nonzero(phi) <= 1
        expected = w0 * u if u >= 0 else w1 * u
        assert np.dot([w0, w1], phi) == pytest.approx(expected, abs=1e-12)

    def test_matrix_matches_rows(self):
        us = [-0.2, 0.0, 0.3]
        np.testing.assert_array_equal(feature_matrix(us), [relu_features(u) for u in us])


class TestPriorAndModel:
    def test_defaults(self):
        p = Prior()
        np.testing.assert_array_equal(p.mean, [0, 0])
        np.testing.assert_array_equal(p.cov, 100 * np.eye(2))
        assert p.noise_var == 0.25

    @pytest.mark.parametrize("kwargs", [
        {"cov": [[1.0, 0.0], [0.0, -1.0]]},
        {"cov": [[1.0, 0.5], [0.0, 1.0]]},
        {"noise_var": 0.0},
        {"mean": [0.0, math.nan]},
    ])
    def test_prior_validation(self, kwargs):
        with pytest.raises(ValueError):
            Prior(**kwargs)

    def test_model_rejects_asymmetric_or_indefinite(self):
        with pytest.raises(ValueError):
            ContactModel([0, 0], [[1.0, 1e-6], [0.0, 1.0]])
        with pytest.raises(ValueError):
            ContactModel([0, 0], [[1.0, 2.0], [2.0, 1.0]])

    def test_from_precision_rejects_indefinite(self):
        with pytest.raises(np.linalg.LinAlgError):
            ContactModel.from_precision(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))


class TestBatchPosterior:
    def test_empty_data_returns_prior(self):
        m = batch_posterior(Prior(), [])
        np.testing.assert_array_equal(m.mean, [0, 0])
        np.testing.assert_array_equal(m.cov, 100 * np.eye(2))

    def test_zero_velocity_sample_is_uninformative(self):
        prior = Prior(mean=[3.0, -2.0], cov=[[4.0, 1.0], [1.0, 2.0]])
        m = batch_posterior(prior, [Sample(0.0, 123.0)])
        np.testing.assert_allclose(m.mean, prior.mean, atol=1e-12)
        np.testing.assert_allclose(m.cov, prior.cov, atol=1e-12)

    def test_fifty_positive_samples(self):
        data = [Sample(0.05, 0.5)] * 50
        m = batch_posterior(Prior(), data)
        oracle_mean, oracle_cov = ridge_oracle(Prior(), np.full(50, 0.05), np.full(50, 0.5))
        np.testing.assert_allclose(m.mean, oracle_mean, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(m.cov, oracle_cov, rtol=1e-10)
        # frozen: precision 0.01 + 50 * 0.05**2 / 0.25 = 0.51, info 50 * 0.5 * 0.05 / 0.25 = 5
        assert m.mean[0] == pytest.approx(500.0 / 51.0, rel=1e-12)
        assert m.mean[1] == 0.0
        assert m.cov[1, 1] == pytest.approx(100.0)

    @given(samples)
    def test_matches_ridge_oracle(self, data):
        prior = Prior(mean=[1.0, -1.0], cov=[[50.0, 5.0], [5.0, 20.0]], noise_var=0.3)
        us = np.array([d[0] for d in data])
        fs = np.array([d[1] for d in data])
        m = batch_posterior(prior, data)
        mean, cov = ridge_oracle(prior, us, fs)
        np.testing.assert_allclose(m.mean, mean, rtol=1e-7, atol=1e-7)
        np.testing.assert_allclose(m.cov, cov, rtol=1e-7, atol=1e-9)

    def test_sufficient_statistics_reject_non_finite_force(self):
        with pytest.raises(ValueError):
            sufficient_statistics(Prior(), [(0.1, math.inf)])


class TestSampleWindow:
    def test_fresh_window_is_prior(self):
        m = current_model(SampleWindow())
        np.testing.assert_array_equal(m.cov, 100 * np.eye(2))
        np.testing.assert_array_equal(m.mean, [0, 0])

    def test_update_then_downdate_restores(self):
        w = SampleWindow(capacity=1)
        start_p, start_b = w.precision.copy(), w.info.copy()
        w.update(Sample(0.07, 3.0, 0.0))
        w.update(Sample(0.0, 9.0, 1.0))  # evicts the first; zero feature adds nothing
        np.testing.assert_allclose(w.precision, start_p, atol=1e-10)
        np.testing.assert_allclose(w.info, start_b, atol=1e-10)

    def test_zero_velocity_leaves_cache_unchanged(self):
        w = SampleWindow()
        w.update(Sample(0.05, 1.0, 0.0))
        p, b = w.precision.copy(), w.info.copy()
        w.update(Sample(0.0, 5.0, 1.0))
        np.testing.assert_array_equal(w.precision, p)
        np.testing.assert_array_equal(w.info, b)

    @given(st.integers(0, 2**32 - 1))
    def test_300_samples_match_batch_over_survivors(self, seed):
        gen = np.random.default_rng(seed)
        us = gen.uniform(-1.0, 1.0, 300)
        us[gen.random(300) < 0.1] = 0.0
        data = list(zip(us.tolist(), gen.normal(0.0, 20.0, 300).tolist()))
        w = SampleWindow()
        for i, (u, f) in enumerate(data):
            recursive_update(w, Sample(u, f, float(i)))
        assert len(w) == 200
        ref = batch_posterior(Prior(), [Sample(u, f) for u, f in data[-200:]])
        got = current_model(w)
        np.testing.assert_allclose(got.mean, ref.mean, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(got.cov, ref.cov, rtol=1e-9, atol=1e-9)

    def test_capacity_and_eviction_order(self):
        w = SampleWindow(capacity=3)
        for i in range(5):
            w.update((0.01 * (i + 1), float(i), float(i)))
        assert [s.f for s in w] == [2.0, 3.0, 4.0]
        assert w.full

    def test_rebuild_schedule(self):
        w = SampleWindow(capacity=10, recompute_every=5)
        for i in range(12):
            w.update(Sample(0.01, 0.1, float(i)))
        assert w.n_rebuilds == 2
        assert w.n_updates == 12

    def test_rejects_bad_samples(self):
        w = SampleWindow()
        w.update(Sample(0.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            w.update(Sample(math.nan, 0.0, 2.0))
        with pytest.raises(ValueError):
            w.update(Sample(0.0, 0.0, 0.5))

    def test_copy_is_independent(self):
        w = SampleWindow()
        w.update(Sample(0.1, 1.0, 0.0))
        c = w.copy()
        c.update(Sample(-0.1, 1.0, 1.0))
        assert len(w) == 1 and len(c) == 2
        assert w.precision[1, 1] == pytest.approx(0.01)

    def test_downward_only_leaves_upward_segment_at_prior(self, rng):
        w = SampleWindow()
        us = rng.uniform(-1.0, -0.5, 200)
        for i, u in enumerate(us):
            w.update(Sample(u, -40.0 * u + rng.normal(0, 0.5), float(i)))
        m = w.model()
        assert m.cov[0, 0] == pytest.approx(100.0)
        assert m.cov[1, 1] < 0.01

    def test_bidirectional_shrinks_both_segments(self, rng):
        w = SampleWindow()
        us = rng.choice([-1.0, 1.0], 200) * rng.uniform(0.5, 1.0, 200)
        for i, u in enumerate(us):
            w.update(Sample(u, -40.0 * u, float(i)))
        m = w.model()
        assert m.cov[0, 0] < 0.01 and m.cov[1, 1] < 0.01


class TestPredict:
    def test_origin(self):
        p = predict(ContactModel([3.0, 4.0], np.eye(2)), 0.0)
        assert p.mean == 0.0 and p.var == 0.0

    def test_positive_segment(self):
        assert predict(ContactModel([10.0, 5.0], 7 * np.eye(2)), 0.1).mean == pytest.approx(1.0)

    def test_negative_segment(self):
        p = predict(ContactModel([10.0, 5.0], np.eye(2)), -0.1)
        assert p.mean == pytest.approx(-0.5)
        assert p.var == pytest.approx(0.01)

    def test_band_is_z_sigma(self):
        m = ContactModel([1.0, 2.0], np.diag([4.0, 9.0]))
        mean, lo, hi = m.band([-0.1, 0.0, 0.2], z=1.96)
        np.testing.assert_allclose(hi - mean, [1.96 * 0.3, 0.0, 1.96 * 0.4])
        np.testing.assert_allclose(mean - lo, hi - mean)


class TestProperties:
    @given(samples)
    def test_segment_independence(self, data):
        w = SampleWindow()
        for i, (u, f) in enumerate(data):
            w.update(Sample(abs(u), f, float(i)))
        assert w.precision[1, 1] == pytest.approx(0.01, abs=1e-15)
        assert w.precision[0, 1] == 0.0 and w.info[1] == 0.0

    @given(samples, velocities, st.floats(0.001, 1.0), forces)
    def test_variance_never_grows_for_same_sign(self, data, u_new, u_query, f):
        w = SampleWindow(capacity=1000)
        for i, (u, ff) in enumerate(data):
            w.update(Sample(u, ff, float(i)))
        sign = 1.0 if u_new >= 0 else -1.0
        before = w.model().predict(sign * u_query).var
        w.update(Sample(u_new, f, float(len(data))))
        after = w.model().predict(sign * u_query).var
        assert after <= before * (1 + 1e-12) + 1e-15

    @given(samples)
    def test_origin_anchoring(self, data):
        assert batch_posterior(Prior(), data).predict(0.0).mean == 0.0

    @given(samples)
    def test_covariance_spd_and_bounded(self, data):
        m = batch_posterior(Prior(), data)
        eig = np.linalg.eigvalsh(m.cov)
        assert eig.min() > 0.0
        assert eig.max() <= 100.0 * (1 + 1e-12)
