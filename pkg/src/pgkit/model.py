"""Scalar nonlinear state-space models with Gaussian noise.

The latent process and observations follow

    x_1     fixed (or Gaussian for the linear oracle model)
    x_t     = f(x_{t-1}, t-1) + eps_t,   eps_t ~ N(0, q)
    y_t     = g(x_t) + w_t,              w_t   ~ N(0, r)

Time indices are 1-based in every public signature.  The transition mean
is evaluated with the time index of the state being propagated *from*,
so ``x_2 = f(x_1, 1) + eps_2``.  The same convention is used by the
simulator, the filters, the ancestor weights and the parameter updates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NoiseParams:
    """Process and measurement noise variances ``theta = (Q, R)``."""

    q: float
    r: float

    def __post_init__(self):
        for name in ("q", "r"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"noise variance {name} must be positive and finite, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.r])


class RngStream:
    """Seeded random stream with deterministic, independent substreams.

    A stream is identified by ``(seed, stream_id)``.  ``spawn`` extends the
    id, so a sampler can hand out e.g. one substream per (iteration, node)
    and get identical draws regardless of the order in which workers run.
    """

    def __init__(self, seed: int, stream_id: Sequence[int] = ()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.stream_id = tuple(int(i) for i in stream_id)

    def spawn(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def as_stream(rng: RngLike) -> RngStream:
    """Coerce to an RngStream; generators are used to draw a fresh seed."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, np.random.Generator):
        return RngStream(int(rng.integers(0, 2**63)))
    if rng is None:
        return RngStream(int(np.random.SeedSequence().entropy % 2**64))
    return RngStream(int(rng))


# Model primitives are numba-compiled so the particle kernels can call them.
# The transition mean is split into a per-step time term (evaluated once per
# time step) and a per-particle state term.


@njit(nogil=True, cache=True)
def _benchmark_time_term(t, coef):
    return coef[2] * np.cos(coef[3] * t)


@njit(nogil=True, cache=True)
def _benchmark_state_mean(x, tt, coef):
    return coef[0] * x + coef[1] * x / (1.0 + x * x) + tt


@njit(nogil=True, cache=True)
def _benchmark_obs_mean(x, coef):
    return x * x / coef[4]


@njit(nogil=True, cache=True)
def _linear_time_term(t, coef):
    return 0.0 * t


@njit(nogil=True, cache=True)
def _linear_state_mean(x, tt, coef):
    return coef[0] * x + tt


@njit(nogil=True, cache=True)
def _linear_obs_mean(x, coef):
    return coef[1] * x


def gaussian_logpdf(x, mean, var):
    d = np.asarray(x, dtype=float) - mean
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * d * d / var


class SsmModel:
    """Base class for scalar Gaussian-noise state-space models.

    Subclasses provide three numba-compiled functions and a coefficient
    vector:

    ``time_term(t, coef)``
        part of the transition mean that depends only on time;
    ``state_mean(x, tt, coef)``
        transition mean given the time term ``tt``, so that
        ``f(x, t) = state_mean(x, time_term(t, coef), coef)``;
    ``obs_mean(x, coef)``
        observation mean ``g(x)``.

    ``initial_var == 0`` means the initial state is fixed at
    ``initial_state``.
    """

    time_term = None
    state_mean = None
    obs_mean = None

    def __init__(self, coef, initial_state: float = 0.0, initial_var: float = 0.0):
        coef = np.array(coef, dtype=float)
        coef.setflags(write=False)
        if initial_var < 0:
            raise ValueError("initial_var must be non-negative")
        self._coef = coef
        self._initial_state = float(initial_state)
        self._initial_var = float(initial_var)

    @property
    def coef(self) -> np.ndarray:
        return self._coef

    @property
    def initial_state(self) -> float:
        return self._initial_state

    @property
    def initial_var(self) -> float:
        return self._initial_var

    def f(self, x, t):
        """Transition mean f(x, t)."""
        tt = self.time_term.py_func(np.asarray(t, dtype=float), self._coef)
        return self.state_mean.py_func(np.asarray(x, dtype=float), tt, self._coef)

    def g(self, x):
        """Observation mean g(x)."""
        return self.obs_mean.py_func(np.asarray(x, dtype=float), self._coef)

    # Long-form aliases.
    mean_transition = f
    mean_observation = g

    def sample_initial(self, size, rng: RngLike = None) -> np.ndarray:
        if self._initial_var == 0.0:
            return np.full(size, self._initial_state)
        gen = as_generator(rng)
        return self._initial_state + math.sqrt(self._initial_var) * gen.standard_normal(size)

    def sample_transition(self, x_prev, t, q, rng: RngLike = None):
        gen = as_generator(rng)
        mean = self.f(x_prev, t)
        return mean + math.sqrt(q) * gen.standard_normal(np.shape(mean))

    def transition_logpdf(self, x_cur, x_prev, t, q):
        """log N(x_cur; f(x_prev, t), q)."""
        return gaussian_logpdf(x_cur, self.f(x_prev, t), q)

    def observation_logpdf(self, y, x, r):
        """log N(y; g(x), r)."""
        return gaussian_logpdf(y, self.g(x), r)

    def __repr__(self):
        return f"{type(self).__name__}(coef={self._coef.tolist()}, initial_state={self._initial_state})"


class BenchmarkModel(SsmModel):
    """f(x, t) = 0.5 x + 25 x / (1 + x^2) + 8 cos(1.2 t),  g(x) = x^2 / 20,  x_1 = 0."""

    time_term = staticmethod(_benchmark_time_term)
    state_mean = staticmethod(_benchmark_state_mean)
    obs_mean = staticmethod(_benchmark_obs_mean)

    def __init__(self, initial_state: float = 0.0):
        super().__init__([0.5, 25.0, 8.0, 1.2, 20.0], initial_state=initial_state)


class LinearGaussianSsm(SsmModel):
    """x_t = a x_{t-1} + eps,  y_t = c x_t + w,  x_1 ~ N(m0, p0)."""

    time_term = staticmethod(_linear_time_term)
    state_mean = staticmethod(_linear_state_mean)
    obs_mean = staticmethod(_linear_obs_mean)

    def __init__(self, a: float, c: float, m0: float = 0.0, p0: float = 1.0):
        super().__init__([a, c], initial_state=m0, initial_var=p0)

    @property
    def a(self) -> float:
        return float(self._coef[0])

    @property
    def c(self) -> float:
        return float(self._coef[1])


def benchmark_f(x, t):
    """0.5 x + 25 x / (1 + x^2) + 8 cos(1.2 t)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * np.cos(1.2 * np.asarray(t, dtype=float))


def benchmark_g(x):
    x = np.asarray(x, dtype=float)
    return x * x / 20.0


def simulate(model: SsmModel, params: NoiseParams, T: int, rng: RngLike = None):
    """Draw a latent path and observations of length ``T``.

    Returns:
        (x, y): two float arrays of shape (T,).
    """
    if not isinstance(params, NoiseParams):
        params = NoiseParams(*params)
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    gen = as_generator(rng)
    x = np.empty(T)
    x[0] = model.sample_initial(1, gen)[0]
    eps = math.sqrt(params.q) * gen.standard_normal(T - 1)
    for k in range(1, T):
        x[k] = model.f(x[k - 1], k) + eps[k - 1]
    y = model.g(x) + math.sqrt(params.r) * gen.standard_normal(T)
    return x, y


def write_data_csv(path, x, y) -> None:
    """Write a ``t,x,y`` CSV with round-trippable doubles; ``x`` may be None."""
    y = np.asarray(y, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y"])
        for k in range(y.size):
            xs = "" if x is None else format(float(x[k]), ".17g")
            w.writerow([k + 1, xs, format(float(y[k]), ".17g")])


def read_data_csv(path):
    """Read a ``t,x,y`` CSV.  Returns ``(x or None, y)``."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "y" not in reader.fieldnames:
            raise ValueError(f"{path}: expected a header with a 'y' column")
        xs, ys = [], []
        for row in reader:
            ys.append(float(row["y"]))
            xv = row.get("x", "")
            xs.append(float(xv) if xv not in ("", None) else math.nan)
    if not ys:
        raise ValueError(f"{path}: no data rows")
    y = np.array(ys)
    x = np.array(xs)
    if np.isnan(x).any():
        x = None
    return x, y
