"""Property-based checks of the structural invariants."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pgkit.blocked import make_blocks
from pgkit.collapsed import GaussianVarianceConjugate, predictive_log_marginal, update_hyperparams
from pgkit.diagnostics import LinearGaussianModel, acf, discard_burn_in, kalman_filter_smoother
from pgkit.ipmcmc import resample_conditional_ids
from pgkit.model import BenchmarkModel, NoiseParams, benchmark_f, benchmark_g
from pgkit.samplers import InvGammaPrior
from pgkit.smc import ancestor_weights, csmc, csmc_as, multinomial_resample, normalize_log_weights
from pgkit.trace import Trace

FAST = settings(max_examples=60, deadline=None)
finite = st.floats(-1e3, 1e3, allow_nan=False)
MODEL = BenchmarkModel()


@FAST
@given(arrays(float, st.integers(1, 60), elements=st.floats(-700, 700)), st.floats(-1e4, 1e4))
def test_normalize_unit_sum_and_shift_invariance(logw, shift):
    w = normalize_log_weights(logw)
    assert abs(w.sum() - 1) <= 1e-12
    assert (w >= 0).all()
    np.testing.assert_allclose(normalize_log_weights(logw + shift), w, rtol=0, atol=1e-12)


@FAST
@given(st.data())
def test_block_partition_invariants(data):
    T = data.draw(st.integers(2, 200))
    L = data.draw(st.integers(2, T))
    p = data.draw(st.integers(0, (L - 1) // 2))
    blocks = make_blocks(T, L, p).blocks
    assert blocks[0][0] == 1 and blocks[-1][1] == T
    covered = np.zeros(T + 1, dtype=int)
    for s, u in blocks:
        assert 1 <= s <= u <= T and u - s + 1 <= L
        covered[s:u + 1] += 1
    assert (covered[1:] >= 1).all()
    for (_, u1), (s2, _) in zip(blocks, blocks[1:]):
        assert u1 - s2 + 1 == p
    for (_, u1), (s3, _) in zip(blocks, blocks[2:]):
        assert u1 < s3
    # Only the last block may be shorter than L.
    assert all(u - s + 1 == L for s, u in blocks[:-1])


@FAST
@given(st.integers(1, 6), st.data())
def test_conditional_ids_stay_distinct(R, data):
    P = data.draw(st.integers(1, R))
    log_z = np.array(data.draw(st.lists(st.floats(-50, 50), min_size=R, max_size=R)))
    current = np.array(data.draw(st.permutations(range(R)))[:P])
    new = resample_conditional_ids(log_z, current, data.draw(st.integers(0, 2**32)))
    assert len(set(new.tolist())) == P
    assert ((0 <= new) & (new < R)).all()


@FAST
@given(arrays(float, st.integers(3, 200), elements=st.floats(-1e3, 1e3)), st.integers(0, 10))
def test_acf_bounded(series, lag):
    assume(np.ptp(series) > 1e-6)
    lag = min(lag, series.size - 1)
    v = acf(series, lag).values
    assert v[0] == 1.0
    assert (np.abs(v) <= 1 + 1e-12).all()


@FAST
@given(finite, st.integers(1, 1000))
def test_benchmark_symmetries(x, t):
    assert abs(benchmark_f(x, t) + benchmark_f(-x, t) - 16 * np.cos(1.2 * t)) < 1e-9
    assert benchmark_g(x) == benchmark_g(-x)


@FAST
@given(arrays(float, st.integers(1, 20), elements=st.floats(0, 10)), st.integers(1, 200), st.integers(0, 2**32))
def test_multinomial_support(weights, count, seed):
    assume(weights.sum() > 1e-3)
    w = weights / weights.sum()
    idx = multinomial_resample(w, count, seed)
    assert idx.shape == (count,)
    assert (w[idx] > 0).all()


@FAST
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=15))
def test_hyperparameter_fold_is_additive(pairs):
    conj = GaussianVarianceConjugate(MODEL, InvGammaPrior(1.0, 2.0, 0.5, 0.3))
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    state = conj.fold(x, y)
    total = np.zeros(2)
    for k in range(x.size):
        total += conj.sufficient_stats(x[k], y[k], x[k - 1] if k else None, k + 1)
    np.testing.assert_allclose(state.chi, [2.0, 0.3] + total, rtol=1e-12)
    np.testing.assert_allclose(state.nu, [1.0 + 0.5 * (x.size - 1), 0.5 + 0.5 * x.size], rtol=1e-15)


@FAST
@given(finite, st.floats(0.01, 20), st.floats(0.01, 20), st.integers(2, 100))
def test_predictive_even_in_transition_residual(x_prev, e, scale, t):
    conj = GaussianVarianceConjugate(MODEL)
    state = update_hyperparams(conj.initial_state(), 0.0, 0.5, None, 1, conj)
    m = float(MODEL.f(x_prev, t - 1))
    lo, hi = m - e, m + e
    # Hold the observation residual fixed so only the transition residual flips sign.
    a = predictive_log_marginal(state, hi, float(MODEL.g(hi)) + scale, x_prev, t, conj)
    b = predictive_log_marginal(state, lo, float(MODEL.g(lo)) + scale, x_prev, t, conj)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 25), st.booleans(), st.integers(0, 2**32))
def test_reference_pinning(N, T, ancestor_sampling, seed):
    gen = np.random.default_rng(seed)
    ref = gen.normal(scale=5, size=T)
    y = MODEL.g(ref) + gen.normal(size=T)
    ref[0] = MODEL.initial_state
    sweep = csmc_as if ancestor_sampling else csmc
    res = sweep(MODEL, NoiseParams(1.0, 1.0), y, ref, N, gen)
    sysm = res.system
    np.testing.assert_array_equal(sysm.particles[:, N - 1], ref)
    lin = sysm.lineage(res.chosen_index)
    assert ((0 <= lin) & (lin < N)).all()
    np.testing.assert_array_equal(sysm.particles[np.arange(T), lin], res.sampled_path)
    assert np.abs(sysm.normalized_weights().sum(axis=1) - 1).max() <= 1e-12


@FAST
@given(arrays(float, st.integers(1, 10), elements=st.floats(-5, 5)), finite, st.floats(0.05, 5))
def test_ancestor_weights_normalized(xp, x_next, q):
    w = ancestor_weights(np.zeros(xp.size), x_next, xp, 3, (q, 1.0), MODEL)
    if np.isfinite(w).all():
        assert abs(w.sum() - 1) <= 1e-12


@FAST
@given(st.floats(-1.5, 1.5), st.floats(0.1, 3), st.floats(0.01, 5), st.floats(0.01, 5), st.integers(0, 2**32))
def test_smoother_variance_below_filter(a, c, q, r, seed):
    y = np.random.default_rng(seed).normal(size=15)
    res = kalman_filter_smoother(LinearGaussianModel(a, c, q, r), y)
    assert (res.smoothed_vars <= res.filtered_vars * (1 + 1e-12)).all()
    assert (res.smoothed_vars > 0).all()


@FAST
@given(st.integers(3, 500))
def test_burn_in_rows(M):
    assert len(discard_burn_in(Trace(np.ones((M, 2))))) == M - M // 3
