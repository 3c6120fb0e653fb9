"""Particle Gibbs and Particle Gibbs with ancestor sampling.

Parameters are updated by exact conjugate Gibbs steps: with independent
inverse-gamma priors on Q and R, the conditionals given a state path are

    Q | x     ~ IG(alpha_q + (T-1)/2, beta_q + sum_{t>=2} (x_t - f(x_{t-1}, t-1))^2 / 2)
    R | x, y  ~ IG(alpha_r + T/2,     beta_r + sum_t (y_t - g(x_t))^2 / 2)
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import NoiseParams, RngLike, SsmModel, as_generator, as_stream
from .smc import _Workspace, _check_obs, bootstrap_pf, csmc, csmc_as
from .trace import Trace

DEFAULT_INIT_THETA = NoiseParams(1.0, 1.0)


@dataclass(frozen=True)
class InvGammaPrior:
    """Independent InvGamma(shape, scale) priors on Q and R."""

    alpha_q: float = 0.01
    beta_q: float = 0.01
    alpha_r: float = 0.01
    beta_r: float = 0.01

    def __post_init__(self):
        for name in ("alpha_q", "beta_q", "alpha_r", "beta_r"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")


def sample_inv_gamma(alpha, beta, rng: RngLike = None, size=None):
    gen = as_generator(rng)
    return beta / gen.standard_gamma(alpha, size=size)


def transition_residuals(states, model: SsmModel) -> np.ndarray:
    x = np.asarray(states, dtype=float)
    return x[1:] - model.f(x[:-1], np.arange(1, x.size))


def observation_residuals(states, obs, model: SsmModel) -> np.ndarray:
    x = np.asarray(states, dtype=float)
    y = np.asarray(obs, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"state path length {x.size} does not match observation length {y.size}")
    return y - model.g(x)


def q_posterior(states, prior: InvGammaPrior, model: SsmModel):
    """(shape, scale) of the inverse-gamma conditional of Q."""
    x = np.asarray(states, dtype=float)
    if x.size < 2:
        raise ValueError("need a path of length >= 2 to update Q")
    e = transition_residuals(x, model)
    sse = float(e @ e)
    if not np.isfinite(sse):
        raise ValueError("non-finite transition residuals")
    return prior.alpha_q + 0.5 * (x.size - 1), prior.beta_q + 0.5 * sse


def r_posterior(states, obs, prior: InvGammaPrior, model: SsmModel):
    e = observation_residuals(states, obs, model)
    sse = float(e @ e)
    if not np.isfinite(sse):
        raise ValueError("non-finite observation residuals")
    return prior.alpha_r + 0.5 * e.size, prior.beta_r + 0.5 * sse


def sample_q_posterior(states, prior: InvGammaPrior, model: SsmModel, rng: RngLike = None) -> float:
    a, b = q_posterior(states, prior, model)
    return float(sample_inv_gamma(a, b, rng))


def sample_r_posterior(states, obs, prior: InvGammaPrior, model: SsmModel, rng: RngLike = None) -> float:
    a, b = r_posterior(states, obs, prior, model)
    return float(sample_inv_gamma(a, b, rng))


def sample_theta(states, obs, prior, model, rng, order: str = "qr") -> NoiseParams:
    """One Gibbs update of (Q, R) given a path; ``order`` only changes draw order."""
    gen = as_generator(rng)
    if order == "qr":
        q = sample_q_posterior(states, prior, model, gen)
        r = sample_r_posterior(states, obs, prior, model, gen)
    elif order == "rq":
        r = sample_r_posterior(states, obs, prior, model, gen)
        q = sample_q_posterior(states, prior, model, gen)
    else:
        raise ValueError(f"order must be 'qr' or 'rq', got {order!r}")
    return NoiseParams(q, r)


def initial_path(model, params, obs, N, rng) -> np.ndarray:
    """A starting path: the sampled lineage of one bootstrap filter sweep."""
    _, result, _ = bootstrap_pf(model, params, obs, N, rng)
    return result.sampled_path


class _StateStore:
    """Keeps every ``thin``-th path (or none)."""

    def __init__(self, M, shape, store, thin):
        if thin < 1:
            raise ValueError("thin must be >= 1")
        self.thin = thin
        self.iters = np.arange(0, M, thin) if store else np.arange(0)
        self.data = np.empty((self.iters.size,) + shape) if store else None

    def put(self, m, path):
        if self.data is not None and m % self.thin == 0:
            self.data[m // self.thin] = path

    def arrays(self):
        if self.data is None:
            return None, None
        return self.data, self.iters


def _run_pg(
    name, sweep, model, obs, prior, N, M, init_path, init_theta, rng,
    resampling, store_states, thin, update_order,
) -> Trace:
    y = _check_obs(obs)
    if N < 2:
        raise ValueError("N must be >= 2")
    if M < 1:
        raise ValueError("M must be >= 1")
    T = y.size
    stream = as_stream(rng)
    gen = stream.generator()
    theta = DEFAULT_INIT_THETA if init_theta is None else init_theta
    if not isinstance(theta, NoiseParams):
        theta = NoiseParams(*theta)

    start = time.perf_counter()
    if init_path is None:
        path = initial_path(model, theta, y, N, gen)
    else:
        path = np.array(init_path, dtype=float)
        if path.shape != y.shape:
            raise ValueError("init_path length must equal the number of observations")

    thetas = np.empty((M, 2))
    thetas[0] = theta.q, theta.r
    store = _StateStore(M, (T,), store_states, thin)
    store.put(0, path)
    ws = _Workspace(T, N)
    for m in range(1, M):
        if prior is not None:
            theta = sample_theta(path, y, prior, model, gen, update_order)
        path = sweep(model, theta, y, path, N, gen, resampling=resampling, workspace=ws).sampled_path
        thetas[m] = theta.q, theta.r
        store.put(m, path)
    wall = time.perf_counter() - start

    states, iters = store.arrays()
    meta = dict(
        sampler_name=name, N=N, M=M, T=T, seed=stream.seed, stream_id=list(stream.stream_id),
        wall_time_seconds=wall, theta_mode="infer" if prior is not None else "fixed",
        resampling=resampling, thin=thin,
    )
    return Trace(theta=thetas, states=states, state_iters=iters, meta=meta)


def pg_run(
    model: SsmModel,
    obs,
    prior: Optional[InvGammaPrior],
    N: int,
    M: int,
    init_path=None,
    init_theta=None,
    rng: RngLike = None,
    *,
    resampling: str = "multinomial",
    store_states: bool = True,
    thin: int = 1,
    update_order: str = "qr",
) -> Trace:
    """Particle Gibbs: alternate conjugate (Q, R) draws with cSMC path draws.

    Row 0 of the returned trace is the initialization; each later row m holds
    theta[m] drawn given path[m-1] and path[m] = cSMC(path[m-1], theta[m]).
    With ``prior=None`` the parameter step is skipped and theta stays at
    ``init_theta`` (state inference only).

    Args:
        init_path: starting path; default is one bootstrap-filter draw at
            ``init_theta``.
        init_theta: starting (Q, R); default (1, 1).
        rng: seed, RngStream or Generator.
        store_states: keep the sampled paths in the trace.
        thin: keep every ``thin``-th path.
        update_order: "qr" or "rq"; Q and R are conditionally independent
            given the path so the order only permutes random draws.
    """
    return _run_pg("pg", csmc, model, obs, prior, N, M, init_path, init_theta, rng,
                   resampling, store_states, thin, update_order)


def pgas_run(
    model: SsmModel,
    obs,
    prior: Optional[InvGammaPrior],
    N: int,
    M: int,
    init_path=None,
    init_theta=None,
    rng: RngLike = None,
    *,
    ancestor_sampling: bool = True,
    resampling: str = "multinomial",
    store_states: bool = True,
    thin: int = 1,
    update_order: str = "qr",
) -> Trace:
    """Particle Gibbs with ancestor sampling; same interface as :func:`pg_run`.

    With ``ancestor_sampling=False`` the output is identical to ``pg_run``
    for the same seed.
    """
    sweep = csmc_as if ancestor_sampling else csmc
    trace = _run_pg("pgas", sweep, model, obs, prior, N, M, init_path, init_theta, rng,
                    resampling, store_states, thin, update_order)
    trace.meta["ancestor_sampling"] = ancestor_sampling
    return trace
