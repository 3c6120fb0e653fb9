"""Compiled particle sweeps.

All randomness is drawn by the caller from a numpy Generator and passed in
as arrays, so a sweep is a deterministic function of its inputs:

    z      (T, N)    standard normals for propagation
    e      (T, N+1)  standard exponentials, turned into sorted uniforms for
                     resampling (normalized cumulative sums of exponentials
                     are distributed as uniform order statistics)
    u_as   (T,)      uniforms for ancestor sampling of the reference particle

Each kernel writes particles ``X``, ancestors ``A`` (0-based) and
unnormalized log-weights ``LW`` into caller-owned buffers and returns
``(log_zhat, failed_step)`` where ``failed_step`` is -1 on success or the
0-based step at which every weight vanished.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)

MULTINOMIAL = 0
SYSTEMATIC = 1


@njit(nogil=True, cache=True)
def _row_logsumexp_cumulative(lw, cw):
    """Fill ``cw`` with the cumulative sum of exp(lw - max); return (max, total)."""
    n = lw.shape[0]
    m = -np.inf
    for i in range(n):
        if lw[i] > m:
            m = lw[i]
    s = 0.0
    if m == -np.inf:
        return m, 0.0
    for i in range(n):
        s += math.exp(lw[i] - m)
        cw[i] = s
    return m, s


@njit(nogil=True, cache=True)
def _resample(cw, total, e_row, n_draws, mode, out):
    """Write ``n_draws`` ancestor indices (ascending) drawn against ``cw``."""
    n = cw.shape[0]
    k = 0
    if mode == SYSTEMATIC:
        u0 = -math.expm1(-e_row[0])
        step = total / n_draws
        for i in range(n_draws):
            v = (u0 + i) * step
            while k < n - 1 and cw[k] < v:
                k += 1
            out[i] = k
        return
    norm = 0.0
    for i in range(n_draws + 1):
        norm += e_row[i]
    scale = total / norm
    acc = 0.0
    for i in range(n_draws):
        acc += e_row[i]
        v = acc * scale
        while k < n - 1 and cw[k] < v:
            k += 1
        out[i] = k


@njit(nogil=True, cache=True)
def bootstrap_sweep(time_term, state_mean, obs_mean, coef, y, q, r, x1_mean, x1_sd, z, e, mode, X, A, LW):
    T, N = X.shape
    sq = math.sqrt(q)
    c0 = -0.5 * (LOG_2PI + math.log(r))
    hr = -0.5 / r
    log_n = math.log(N)
    cw = np.empty(N)

    for i in range(N):
        X[0, i] = x1_mean + x1_sd * z[0, i]
        A[0, i] = i
        d = y[0] - obs_mean(X[0, i], coef)
        LW[0, i] = c0 + hr * d * d
    m, s = _row_logsumexp_cumulative(LW[0], cw)
    if not (s > 0.0 and s < np.inf):
        return 0.0, 0
    log_z = m + math.log(s) - log_n

    for t in range(1, T):
        _resample(cw, s, e[t], N, mode, A[t])
        tt = time_term(t, coef)
        yt = y[t]
        for i in range(N):
            X[t, i] = state_mean(X[t - 1, A[t, i]], tt, coef) + sq * z[t, i]
            d = yt - obs_mean(X[t, i], coef)
            LW[t, i] = c0 + hr * d * d
        m, s = _row_logsumexp_cumulative(LW[t], cw)
        if not (s > 0.0 and s < np.inf):
            return log_z, t
        log_z += m + math.log(s) - log_n
    return log_z, -1


@njit(nogil=True, cache=True)
def conditional_sweep(
    time_term, state_mean, obs_mean, coef, y, ref, q, r,
    x1_mean, x1_sd, has_init, x_init, t0,
    z, e, u_as, ancestor_sampling, mode, X, A, LW,
):
    """Conditional SMC with the reference pinned at the last slot.

    ``t0`` is the global 0-based index of the first state in ``y``; when
    ``has_init`` the first state is drawn from the transition out of
    ``x_init`` rather than from the initial distribution.
    """
    T, N = X.shape
    ref_slot = N - 1
    sq = math.sqrt(q)
    c0 = -0.5 * (LOG_2PI + math.log(r))
    hr = -0.5 / r
    cq = -0.5 * (LOG_2PI + math.log(q))
    hq = -0.5 / q
    log_n = math.log(N)
    cw = np.empty(N)
    law = np.empty(N)

    if has_init:
        mean0 = state_mean(x_init, time_term(t0, coef), coef)
        sd0 = sq
    else:
        mean0 = x1_mean
        sd0 = x1_sd
    for i in range(N):
        X[0, i] = mean0 + sd0 * z[0, i]
        A[0, i] = i
    X[0, ref_slot] = ref[0]
    for i in range(N):
        d = y[0] - obs_mean(X[0, i], coef)
        LW[0, i] = c0 + hr * d * d
    m, s = _row_logsumexp_cumulative(LW[0], cw)
    if not (s > 0.0 and s < np.inf):
        return 0.0, 0
    log_z = m + math.log(s) - log_n

    for t in range(1, T):
        _resample(cw, s, e[t], N - 1, mode, A[t])
        tt = time_term(t0 + t, coef)
        if ancestor_sampling:
            xr = ref[t]
            for i in range(N):
                d = xr - state_mean(X[t - 1, i], tt, coef)
                law[i] = LW[t - 1, i] + cq + hq * d * d
            m2, s2 = _row_logsumexp_cumulative(law, law)
            if not (s2 > 0.0 and s2 < np.inf):
                return log_z, t
            v = u_as[t] * s2
            k = 0
            while k < N - 1 and law[k] < v:
                k += 1
            A[t, ref_slot] = k
        else:
            A[t, ref_slot] = ref_slot
        yt = y[t]
        for i in range(N - 1):
            X[t, i] = state_mean(X[t - 1, A[t, i]], tt, coef) + sq * z[t, i]
        X[t, ref_slot] = ref[t]
        for i in range(N):
            d = yt - obs_mean(X[t, i], coef)
            LW[t, i] = c0 + hr * d * d
        m, s = _row_logsumexp_cumulative(LW[t], cw)
        if not (s > 0.0 and s < np.inf):
            return log_z, t
        log_z += m + math.log(s) - log_n
    return log_z, -1


@njit(nogil=True, cache=True)
def _log_student_ratio(alpha):
    """log Gamma(alpha + 1/2) - log Gamma(alpha), stable for large alpha."""
    if alpha < 1e4:
        return math.lgamma(alpha + 0.5) - math.lgamma(alpha)
    inv = 1.0 / alpha
    return 0.5 * math.log(alpha) - 0.125 * inv + inv * inv * inv / 192.0


@njit(nogil=True, cache=True)
def _log_student(lr, alpha, beta, d):
    # log density of d under the Student-t with 2 alpha dof and scale^2 beta / alpha
    return lr - 0.5 * (LOG_2PI + math.log(beta)) - (alpha + 0.5) * math.log1p(0.5 * d * d / beta)


@njit(nogil=True, cache=True)
def marginal_sweep(
    time_term, state_mean, obs_mean, coef, y, ref,
    x1_mean, x1_sd, aq0, bq0, ar0, br0,
    z, e, gam, mode, X, A, LW, BQ, BR,
):
    """Conditional SMC with (Q, R) integrated out under inverse-gamma priors.

    Each particle carries the scale hyperparameters ``BQ``/``BR`` of its own
    lineage; the shape hyperparameters advance by 1/2 per step for every
    particle and are therefore not stored.  New states are proposed from
    the lineage's marginal transition predictive (a Student-t, drawn as a
    scale mixture with ``Q = beta_q / gam``), so the incremental weight is
    the marginal observation predictive.
    """
    T, N = X.shape
    ref_slot = N - 1
    log_n = math.log(N)
    cw = np.empty(N)

    ar = ar0
    lr = _log_student_ratio(ar)
    for i in range(N):
        X[0, i] = x1_mean + x1_sd * z[0, i]
        A[0, i] = i
    X[0, ref_slot] = ref[0]
    for i in range(N):
        d = y[0] - obs_mean(X[0, i], coef)
        BQ[0, i] = bq0
        BR[0, i] = br0 + 0.5 * d * d
        LW[0, i] = _log_student(lr, ar, br0, d)
    m, s = _row_logsumexp_cumulative(LW[0], cw)
    if not (s > 0.0 and s < np.inf):
        return 0.0, 0
    log_z = m + math.log(s) - log_n
    ar += 0.5

    for t in range(1, T):
        _resample(cw, s, e[t], N - 1, mode, A[t])
        A[t, ref_slot] = ref_slot
        tt = time_term(t, coef)
        yt = y[t]
        lr = _log_student_ratio(ar)
        for i in range(N):
            a = A[t, i]
            mean = state_mean(X[t - 1, a], tt, coef)
            if i == ref_slot:
                X[t, i] = ref[t]
            else:
                X[t, i] = mean + math.sqrt(BQ[t - 1, a] / gam[t, i]) * z[t, i]
            dx = X[t, i] - mean
            BQ[t, i] = BQ[t - 1, a] + 0.5 * dx * dx
            br_prev = BR[t - 1, a]
            dy = yt - obs_mean(X[t, i], coef)
            BR[t, i] = br_prev + 0.5 * dy * dy
            LW[t, i] = _log_student(lr, ar, br_prev, dy)
        m, s = _row_logsumexp_cumulative(LW[t], cw)
        if not (s > 0.0 and s < np.inf):
            return log_z, t
        log_z += m + math.log(s) - log_n
        ar += 0.5
    return log_z, -1


@njit(nogil=True, cache=True)
def trace_lineage(X, A, b):
    T = X.shape[0]
    path = np.empty(T)
    k = b
    for t in range(T - 1, -1, -1):
        path[t] = X[t, k]
        k = A[t, k]
    return path


@njit(nogil=True, cache=True)
def trace_indices(A, b):
    T = A.shape[0]
    idx = np.empty(T, np.int64)
    k = b
    for t in range(T - 1, -1, -1):
        idx[t] = k
        k = A[t, k]
    return idx
