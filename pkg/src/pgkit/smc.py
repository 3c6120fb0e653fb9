"""Sequential Monte Carlo sweeps: bootstrap filter, conditional SMC and
conditional SMC with ancestor sampling.

Particle and ancestor indices are 0-based.  In conditional sweeps the
reference trajectory occupies the last slot, ``N - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .model import NoiseParams, RngLike, SsmModel, as_generator

RESAMPLING_SCHEMES = {"multinomial": _kernels.MULTINOMIAL, "systematic": _kernels.SYSTEMATIC}


class DegenerateWeightsError(RuntimeError):
    """Every particle weight vanished (or became non-finite).

    Attributes:
        timestep: 1-based time index of the failure, or None.
        module: name of the sweep that failed.
        block: block index for blocked sweeps, else None.
    """

    def __init__(self, message, timestep=None, module="smc", block=None):
        where = [module]
        if block is not None:
            where.append(f"block {block}")
        if timestep is not None:
            where.append(f"t={timestep}")
        super().__init__(f"{message} [{', '.join(where)}]")
        self.timestep = timestep
        self.module = module
        self.block = block


def normalize_log_weights(logw) -> np.ndarray:
    """Normalized probabilities from log-weights, computed with a max shift."""
    logw = np.asarray(logw, dtype=float)
    if logw.ndim != 1 or logw.size == 0:
        raise ValueError("expected a non-empty 1-d array of log-weights")
    m = np.max(logw)
    if not np.isfinite(m) or np.isnan(logw).any():
        raise DegenerateWeightsError("all weights are zero or non-finite", module="normalize_log_weights")
    w = np.exp(logw - m)
    return w / w.sum()


def multinomial_resample(weights, count: int, rng: RngLike = None) -> np.ndarray:
    """``count`` i.i.d. draws from Categorical(weights), as 0-based indices."""
    weights = np.asarray(weights, dtype=float)
    if (weights < 0).any() or not np.isfinite(weights).all():
        raise ValueError("weights must be non-negative and finite")
    total = weights.sum()
    if not abs(total - 1.0) < 1e-8:
        raise ValueError(f"weights must sum to 1, got {total}")
    if count < 1:
        raise ValueError("count must be at least 1")
    gen = as_generator(rng)
    cw = np.cumsum(weights)
    idx = np.searchsorted(cw, gen.random(count) * cw[-1], side="right")
    return np.minimum(idx, weights.size - 1)


def systematic_resample(weights, count: int, rng: RngLike = None) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if (weights < 0).any():
        raise ValueError("weights must be non-negative")
    gen = as_generator(rng)
    cw = np.cumsum(weights)
    u = (gen.random() + np.arange(count)) / count * cw[-1]
    return np.minimum(np.searchsorted(cw, u, side="right"), weights.size - 1)


@dataclass
class ParticleSystem:
    """Particles, unnormalized log-weights and ancestors of one sweep, each (T, N).

    ``ancestors[t, i]`` is the slot at ``t - 1`` that particle ``i`` at ``t``
    descends from; row 0 is unused.
    """

    particles: np.ndarray
    log_weights: np.ndarray
    ancestors: np.ndarray

    @property
    def horizon(self) -> int:
        return self.particles.shape[0]

    @property
    def num_particles(self) -> int:
        return self.particles.shape[1]

    def normalized_weights(self) -> np.ndarray:
        lw = self.log_weights
        w = np.exp(lw - lw.max(axis=1, keepdims=True))
        return w / w.sum(axis=1, keepdims=True)

    def lineage(self, b: int) -> np.ndarray:
        """Slot indices of the ancestral line ending in final particle ``b``."""
        return _kernels.trace_indices(self.ancestors, int(b))

    def trace(self, b: int) -> np.ndarray:
        return _kernels.trace_lineage(self.particles, self.ancestors, int(b))

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.horizon,
                "N": self.num_particles,
                "particles": self.particles.tolist(),
                "log_weights": self.log_weights.tolist(),
                "ancestors": self.ancestors.tolist(),
            }
        )

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


@dataclass
class SweepResult:
    sampled_path: np.ndarray
    chosen_index: int
    log_marginal_likelihood: float
    system: Optional[ParticleSystem] = None


class _Workspace:
    """Reusable buffers for repeated sweeps of one shape."""

    def __init__(self, T: int, N: int):
        self.shape = (T, N)
        self.X = np.empty((T, N))
        self.A = np.empty((T, N), dtype=np.int64)
        self.LW = np.empty((T, N))
        self.z = np.empty((T, N))
        self.e = np.empty((T, N + 1))
        self.u_as = np.empty(T)

    @classmethod
    def ensure(cls, ws, T, N):
        if ws is None or ws.shape != (T, N):
            return cls(T, N)
        return ws

    def system(self, copy: bool) -> ParticleSystem:
        if copy:
            return ParticleSystem(self.X.copy(), self.LW.copy(), self.A.copy())
        return ParticleSystem(self.X, self.LW, self.A)


def _check_obs(obs) -> np.ndarray:
    y = np.ascontiguousarray(obs, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("observations must be a non-empty 1-d sequence")
    if not np.isfinite(y).all():
        raise ValueError("observations must be finite")
    return y


def _params(params) -> NoiseParams:
    return params if isinstance(params, NoiseParams) else NoiseParams(*params)


def _scheme(resampling: str) -> int:
    try:
        return RESAMPLING_SCHEMES[resampling]
    except KeyError:
        raise ValueError(f"unknown resampling scheme {resampling!r}") from None


def draw_index(logw, u: float) -> int:
    """Inverse-CDF categorical draw from log-weights with a given uniform."""
    w = normalize_log_weights(logw)
    cw = np.cumsum(w)
    return int(min(np.searchsorted(cw, u * cw[-1], side="right"), w.size - 1))


def bootstrap_pf(
    model: SsmModel,
    params,
    obs,
    N: int,
    rng: RngLike = None,
    resampling: str = "multinomial",
    workspace: Optional[_Workspace] = None,
):
    """Bootstrap particle filter, resampling at every step.

    Returns:
        (system, result, filtered_means) where ``result.sampled_path`` is the
        lineage of one final particle drawn by weight and
        ``result.log_marginal_likelihood`` is ``sum_t log(mean_i w_t^i)``.
    """
    params = _params(params)
    y = _check_obs(obs)
    if N < 1:
        raise ValueError("N must be at least 1")
    T = y.size
    gen = as_generator(rng)
    ws = _Workspace.ensure(workspace, T, N)
    gen.standard_normal(out=ws.z)
    gen.standard_exponential(out=ws.e)
    u_final = gen.random()
    log_z, failed = _kernels.bootstrap_sweep(
        model.time_term, model.state_mean, model.obs_mean, model.coef, y, params.q, params.r,
        model.initial_state, math.sqrt(model.initial_var), ws.z, ws.e, _scheme(resampling),
        ws.X, ws.A, ws.LW,
    )
    if failed >= 0:
        raise DegenerateWeightsError("weight collapse", timestep=failed + 1, module="bootstrap_pf")
    # A caller-supplied workspace is reused by the caller, so its buffers are not exposed.
    system = ws.system(copy=workspace is not None)
    b = draw_index(ws.LW[-1], u_final)
    path = _kernels.trace_lineage(ws.X, ws.A, b)
    W = system.normalized_weights()
    filtered_means = (W * system.particles).sum(axis=1)
    return system, SweepResult(path, b, float(log_z), system), filtered_means


def _conditional(model, params, obs, reference, N, rng, ancestor_sampling, resampling, workspace, name):
    params = _params(params)
    y = _check_obs(obs)
    ref = np.ascontiguousarray(reference, dtype=float)
    if N < 2:
        raise ValueError(f"{name} needs N >= 2 (one slot is reserved for the reference)")
    if ref.shape != y.shape:
        raise ValueError("reference path and observations must have the same length")
    T = y.size
    gen = as_generator(rng)
    ws = _Workspace.ensure(workspace, T, N)
    gen.standard_normal(out=ws.z)
    gen.standard_exponential(out=ws.e)
    gen.random(out=ws.u_as)
    u_final = gen.random()
    log_z, failed = _kernels.conditional_sweep(
        model.time_term, model.state_mean, model.obs_mean, model.coef, y, ref, params.q, params.r,
        model.initial_state, math.sqrt(model.initial_var), False, 0.0, 0,
        ws.z, ws.e, ws.u_as, bool(ancestor_sampling), _scheme(resampling), ws.X, ws.A, ws.LW,
    )
    if failed >= 0:
        raise DegenerateWeightsError("weight collapse", timestep=failed + 1, module=name)
    b = draw_index(ws.LW[-1], u_final)
    path = _kernels.trace_lineage(ws.X, ws.A, b)
    return SweepResult(path, b, float(log_z), ws.system(copy=False) if workspace is None else None)


def csmc(model, params, obs, reference, N, rng: RngLike = None, resampling="multinomial", workspace=None):
    """Conditional SMC: the reference is pinned at slot N-1 with ancestor N-1."""
    return _conditional(model, params, obs, reference, N, rng, False, resampling, workspace, "csmc")


def csmc_as(model, params, obs, reference, N, rng: RngLike = None, resampling="multinomial", workspace=None):
    """Conditional SMC whose reference ancestor is resampled at every step.

    The reference ancestor at time t is drawn with probability proportional
    to ``w_{t-1}^i * N(x'_t; f(x_{t-1}^i, t-1), Q)``.  Random numbers are
    consumed exactly as in :func:`csmc`, so switching ancestor sampling off
    reproduces ``csmc`` draw for draw.
    """
    return _conditional(model, params, obs, reference, N, rng, True, resampling, workspace, "csmc_as")


def ancestor_weights(log_w_prev, reference_next, particles_prev, t, params, model: SsmModel) -> np.ndarray:
    """Normalized ancestor-sampling probabilities for the reference at time ``t``.

    ``t`` is the 1-based time of ``reference_next``; the transition mean
    is evaluated as ``f(particles_prev, t - 1)``.
    """
    params = _params(params)
    log_w_prev = np.asarray(log_w_prev, dtype=float)
    particles_prev = np.asarray(particles_prev, dtype=float)
    logw = log_w_prev + model.transition_logpdf(reference_next, particles_prev, t - 1, params.q)
    try:
        return normalize_log_weights(logw)
    except DegenerateWeightsError as err:
        raise DegenerateWeightsError("ancestor weights collapsed", timestep=t, module="ancestor_weights") from err
