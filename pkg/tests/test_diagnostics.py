import json
import math

import numpy as np
import pytest
from scipy import stats

from pgkit.diagnostics import (
    LinearGaussianModel,
    acf,
    batch_means_se,
    discard_burn_in,
    kalman_filter_smoother,
    posterior_summary,
    state_rmse,
    write_acf_csv,
    write_summary_json,
)
from pgkit.trace import Trace


class TestAcf:
    def test_lag_zero(self, rng):
        assert acf(rng.normal(size=50), 5)[0] == 1.0

    def test_alternating(self):
        s = np.tile([1.0, -1.0], 500)
        assert abs(acf(s, 1)[1] + 1) <= 2 / s.size

    def test_white_noise(self, rng):
        s = rng.normal(size=10_000)
        assert (np.abs(acf(s, 10).values[1:]) < 4 / math.sqrt(s.size)).all()

    def test_biased_estimator(self):
        s = np.array([1.0, 2.0, 4.0, 3.0])
        z = s - s.mean()
        assert acf(s, 2)[2] == pytest.approx(float(z[:2] @ z[2:]) / float(z @ z), rel=1e-14)

    def test_ar1_decay(self, rng):
        n, phi = 50_000, 0.7
        x = np.empty(n)
        x[0] = 0.0
        e = rng.normal(size=n)
        for k in range(1, n):
            x[k] = phi * x[k - 1] + e[k]
        assert acf(x, 3)[3] == pytest.approx(phi**3, abs=0.03)

    def test_constant_series(self):
        with pytest.raises(ValueError):
            acf(np.ones(10), 2)

    def test_lag_too_large(self, rng):
        with pytest.raises(ValueError):
            acf(rng.normal(size=5), 5)

    def test_csv(self, tmp_path, rng):
        write_acf_csv(tmp_path / "a.csv", acf(rng.normal(size=20), 3))
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert lines[0] == "lag,acf" and lines[1] == "0,1" and len(lines) == 5


class TestBurnIn:
    @pytest.mark.parametrize("M,kept", [(9, 6), (10, 7), (3, 2)])
    def test_row_counts(self, M, kept):
        tr = Trace(np.ones((M, 2)), states=np.zeros((M, 4)))
        out = discard_burn_in(tr)
        assert len(out) == kept and out.states.shape[0] == kept

    def test_too_short(self):
        with pytest.raises(ValueError):
            discard_burn_in(Trace(np.ones((2, 2))))

    def test_keeps_the_tail(self):
        theta = np.arange(20.0).reshape(10, 2)
        np.testing.assert_array_equal(discard_burn_in(Trace(theta)).theta, theta[3:])


class TestStateRmse:
    def test_cases(self):
        x = np.linspace(-3, 3, 10)
        assert state_rmse(x, x) == 0.0
        assert state_rmse(x + 1, x) == pytest.approx(1.0)
        assert state_rmse(x + np.tile([2.0, -2.0], 5), x) == pytest.approx(2.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            state_rmse([1.0], [1.0, 2.0])


class TestSummaries:
    def test_posterior_summary(self, rng):
        s = rng.normal(3.0, 2.0, size=40_000)
        out = posterior_summary(s)
        assert out["mean"] == pytest.approx(3.0, abs=0.05)
        assert out["q2.5"] == pytest.approx(3.0 - 1.96 * 2, abs=0.1)
        assert out["n"] == 40_000

    def test_batch_means_iid(self, rng):
        s = rng.normal(size=(20_000, 3))
        np.testing.assert_allclose(batch_means_se(s), 1 / math.sqrt(20_000), rtol=0.4)

    def test_summary_json_handles_numpy(self, tmp_path):
        write_summary_json(tmp_path / "s.json", {"a": np.float64(1.5), "b": np.arange(2)})
        assert json.loads((tmp_path / "s.json").read_text()) == {"a": 1.5, "b": [0, 1]}


def _dense_loglik(model: LinearGaussianModel, y):
    T = y.size
    cov = np.empty((T, T))
    var = np.empty(T)
    var[0] = model.p0
    for t in range(1, T):
        var[t] = model.a**2 * var[t - 1] + model.q
    for s in range(T):
        for t in range(T):
            lo, hi = min(s, t), max(s, t)
            cov[s, t] = model.a ** (hi - lo) * var[lo]
    mean = model.c * model.m0 * model.a ** np.arange(T)
    return stats.multivariate_normal(mean, model.c**2 * cov + model.r * np.eye(T)).logpdf(y)


class TestKalman:
    def test_one_step(self):
        m = LinearGaussianModel(0.8, 2.0, 0.5, 1.5, m0=0.3, p0=2.0)
        res = kalman_filter_smoother(m, [1.7])
        k = 2.0 * 2.0 / (4.0 * 2.0 + 1.5)
        assert res.filtered_means[0] == pytest.approx(0.3 + k * (1.7 - 0.6), rel=1e-14)
        assert res.smoothed_means[0] == res.filtered_means[0]

    def test_uninformative_observations(self, rng):
        m = LinearGaussianModel(0.8, 1.0, 0.5, 1e12, m0=2.0, p0=1.0)
        res = kalman_filter_smoother(m, rng.normal(size=20))
        np.testing.assert_allclose(res.smoothed_means, 2.0 * 0.8 ** np.arange(20), atol=1e-5)

    def test_log_likelihood_dense_oracle(self, lg_model, lg_data, lg_oracle):
        assert lg_oracle.log_likelihood == pytest.approx(_dense_loglik(lg_model, lg_data[1]), abs=1e-8)

    def test_smoothed_mean_dense_oracle(self, lg_model, lg_data, lg_oracle):
        # Conditional mean of the joint Gaussian (x, y).
        y = lg_data[1]
        T = y.size
        var = np.empty(T)
        var[0] = lg_model.p0
        for t in range(1, T):
            var[t] = lg_model.a**2 * var[t - 1] + lg_model.q
        idx = np.arange(T)
        lo, hi = np.minimum.outer(idx, idx), np.maximum.outer(idx, idx)
        cxx = lg_model.a ** (hi - lo) * var[lo]
        cyy = lg_model.c**2 * cxx + lg_model.r * np.eye(T)
        gain = lg_model.c * cxx @ np.linalg.inv(cyy)
        mx = lg_model.m0 * lg_model.a ** idx
        post_mean = mx + gain @ (y - lg_model.c * mx)
        post_var = np.diag(cxx - gain @ (lg_model.c * cxx))
        np.testing.assert_allclose(lg_oracle.smoothed_means, post_mean, atol=1e-9)
        np.testing.assert_allclose(lg_oracle.smoothed_vars, post_var, atol=1e-9)

    def test_information_ordering(self, lg_oracle):
        assert (lg_oracle.smoothed_vars <= lg_oracle.filtered_vars + 1e-15).all()

    def test_batching_invariance(self, lg_model, lg_data, lg_oracle):
        y = lg_data[1]
        first = kalman_filter_smoother(lg_model, y[:20])
        m0 = lg_model.a * first.filtered_means[-1]
        p0 = lg_model.a**2 * first.filtered_vars[-1] + lg_model.q
        rest = kalman_filter_smoother(LinearGaussianModel(lg_model.a, lg_model.c, lg_model.q, lg_model.r, m0, p0),
                                      y[20:])
        assert first.log_likelihood + rest.log_likelihood == pytest.approx(lg_oracle.log_likelihood, abs=1e-10)

    def test_rejects_non_positive_variance(self):
        with pytest.raises(ValueError):
            LinearGaussianModel(0.8, 1.0, 0.0, 1.0)
