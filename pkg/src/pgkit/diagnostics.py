"""Chain and filter diagnostics, plus the exact linear-Gaussian oracle."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import LOG_2PI, LinearGaussianSsm, NoiseParams
from .trace import Trace, _jsonable


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    values: np.ndarray

    def __getitem__(self, k):
        return self.values[k]


def acf(series, max_lag: int) -> AcfResult:
    """Biased sample autocorrelation (n in the denominator) for lags 0..max_lag."""
    z = np.asarray(series, dtype=float)
    n = z.size
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n - 1}]")
    z = z - z.mean()
    denom = float(z @ z)
    if not denom > 0:
        raise ValueError("series has zero variance")
    values = np.array([float(z[: n - k] @ z[k:]) / denom for k in range(max_lag + 1)])
    values[0] = 1.0
    return AcfResult(np.arange(max_lag + 1), values)


def discard_burn_in(trace: Trace) -> Trace:
    """Drop the first floor(M/3) iterations."""
    M = len(trace)
    if M < 3:
        raise ValueError("need at least 3 iterations to discard a third as burn-in")
    return trace.tail(M // 3)


def state_rmse(estimate, truth) -> float:
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError("estimate and truth lengths differ")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def posterior_summary(samples) -> dict:
    s = np.asarray(samples, dtype=float)
    lo, hi = np.percentile(s, [2.5, 97.5])
    return {"mean": float(s.mean()), "sd": float(s.std(ddof=1)) if s.size > 1 else 0.0,
            "q2.5": float(lo), "q97.5": float(hi), "n": int(s.size)}


def batch_means_se(samples, num_batches: int = 25) -> np.ndarray:
    """Monte Carlo standard error of the mean of a correlated chain (axis 0)."""
    s = np.asarray(samples, dtype=float)
    n = s.shape[0] // num_batches * num_batches
    if n < num_batches or num_batches < 2:
        raise ValueError("not enough samples for batch means")
    batches = s[:n].reshape((num_batches, n // num_batches) + s.shape[1:]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / math.sqrt(num_batches)


def write_acf_csv(path, result: AcfResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "acf"])
        for k, v in zip(result.lags, result.values):
            w.writerow([int(k), format(float(v), ".17g")])


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class LinearGaussianModel:
    """x_1 ~ N(m0, p0), x_t = a x_{t-1} + N(0, q), y_t = c x_t + N(0, r)."""

    a: float
    c: float
    q: float
    r: float
    m0: float = 0.0
    p0: float = 1.0

    def __post_init__(self):
        for name in ("q", "r", "p0"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v!r}")

    def ssm(self) -> LinearGaussianSsm:
        return LinearGaussianSsm(self.a, self.c, self.m0, self.p0)

    def params(self) -> NoiseParams:
        return NoiseParams(self.q, self.r)


@dataclass
class KalmanResult:
    filtered_means: np.ndarray
    filtered_vars: np.ndarray
    predicted_means: np.ndarray
    predicted_vars: np.ndarray
    smoothed_means: np.ndarray
    smoothed_vars: np.ndarray
    log_likelihood: float


def kalman_filter_smoother(model: LinearGaussianModel, obs) -> KalmanResult:
    """Forward Kalman filter, RTS smoother, and the exact log-likelihood."""
    y = np.asarray(obs, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("observations must be a non-empty 1-d sequence")
    a, c, q, r = model.a, model.c, model.q, model.r
    T = y.size
    mp = np.empty(T)
    pp = np.empty(T)
    mf = np.empty(T)
    pf = np.empty(T)
    ll = 0.0
    m, p = model.m0, model.p0
    for t in range(T):
        if t > 0:
            m, p = a * m, a * a * p + q
        mp[t], pp[t] = m, p
        s = c * c * p + r
        k = p * c / s
        innov = y[t] - c * m
        ll += -0.5 * (LOG_2PI + math.log(s) + innov * innov / s)
        m = m + k * innov
        p = (1.0 - k * c) * p
        mf[t], pf[t] = m, p
    ms = mf.copy()
    ps = pf.copy()
    for t in range(T - 2, -1, -1):
        g = pf[t] * a / pp[t + 1]
        ms[t] = mf[t] + g * (ms[t + 1] - mp[t + 1])
        ps[t] = pf[t] + g * g * (ps[t + 1] - pp[t + 1])
    return KalmanResult(mf, pf, mp, pp, ms, ps, ll)
