"""Collapsed (marginalized) Particle Gibbs.

With independent inverse-gamma priors the complete-data likelihood of the
benchmark family is conjugate in (Q, R).  Writing the hyperparameters as
``chi = (beta_q, beta_r)`` and ``nu = (alpha_q, alpha_r)``, one step adds

    s_t = ((x_t - f(x_{t-1}, t-1))^2 / 2, (y_t - g(x_t))^2 / 2),   r_t = (1/2, 1/2)

(at t = 1 only the observation half is present), the log-normalizer is

    log g(chi, nu) = sum_k nu_k log chi_k - lgamma(nu_k),

and the predictive density of (x_t, y_t) given x_{t-1} is
``h_t g(chi_{t-1}, nu_{t-1}) / g(chi_t, nu_t)``, a product of two Student-t
densities.  The marginalized conditional SMC tracks (chi, nu) along every
particle lineage.  It proposes x_t from the transition part of that
predictive and weights by the observation part, so the product of proposal
and weight is exactly the joint predictive.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .model import LOG_2PI, NoiseParams, RngLike, SsmModel, as_generator, as_stream
from .samplers import DEFAULT_INIT_THETA, InvGammaPrior, _StateStore, initial_path, sample_inv_gamma
from .smc import DegenerateWeightsError, ParticleSystem, SweepResult, _check_obs, _scheme, _Workspace, draw_index
from .trace import Trace


@dataclass(frozen=True)
class ConjugateState:
    """Conjugate hyperparameters: ``chi = (beta_q, beta_r)``, ``nu = (alpha_q, alpha_r)``."""

    chi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        chi = np.array(self.chi, dtype=float).reshape(2)
        nu = np.array(self.nu, dtype=float).reshape(2)
        if not (np.isfinite(chi).all() and np.isfinite(nu).all() and (chi > 0).all() and (nu > 0).all()):
            raise ValueError(f"hyperparameters outside the normalizer domain: chi={chi}, nu={nu}")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "nu", nu)


class GaussianVarianceConjugate:
    """Inverse-gamma conjugacy for the unknown noise variances (Q, R)."""

    def __init__(self, model: SsmModel, prior: Optional[InvGammaPrior] = None):
        self.model = model
        self.prior = InvGammaPrior() if prior is None else prior

    def initial_state(self) -> ConjugateState:
        p = self.prior
        return ConjugateState([p.beta_q, p.beta_r], [p.alpha_q, p.alpha_r])

    def transition_mean(self, x_prev, t: int) -> float:
        """f(x_prev, t - 1), evaluated with the same compiled code as the sweeps."""
        m = self.model
        return m.state_mean(float(x_prev), m.time_term(int(t) - 1, m.coef), m.coef)

    def residuals(self, x_t, y_t, x_prev, t: int):
        """(e_x, e_y); ``e_x`` is None at t = 1."""
        e_y = float(y_t) - self.model.obs_mean(float(x_t), self.model.coef)
        if t == 1:
            return None, e_y
        return float(x_t) - self.transition_mean(x_prev, t), e_y

    def sufficient_stats(self, x_t, y_t, x_prev, t: int) -> np.ndarray:
        e_x, e_y = self.residuals(x_t, y_t, x_prev, t)
        return np.array([0.0 if e_x is None else 0.5 * e_x * e_x, 0.5 * e_y * e_y])

    def penalty_stats(self, x_t, y_t, x_prev, t: int) -> np.ndarray:
        return np.array([0.0 if t == 1 else 0.5, 0.5])

    def log_base_measure(self, t: int) -> float:
        """log h_t: one Gaussian 2 pi factor per observed residual."""
        return -0.5 * LOG_2PI if t == 1 else -LOG_2PI

    def log_normalizer(self, state: ConjugateState) -> float:
        return float(np.sum(state.nu * np.log(state.chi) - gammaln(state.nu)))

    def posterior_draw(self, state: ConjugateState, rng: RngLike = None) -> NoiseParams:
        gen = as_generator(rng)
        q = float(sample_inv_gamma(state.nu[0], state.chi[0], gen))
        r = float(sample_inv_gamma(state.nu[1], state.chi[1], gen))
        return NoiseParams(q, r)

    def fold(self, path, obs) -> ConjugateState:
        """Hyperparameters after absorbing a whole path."""
        state = self.initial_state()
        prev = None
        for k, (x, y) in enumerate(zip(np.asarray(path, float), np.asarray(obs, float))):
            state = update_hyperparams(state, x, y, prev, k + 1, self)
            prev = x
        return state


def update_hyperparams(state: ConjugateState, x_t, y_t, x_prev, t: int, conj: GaussianVarianceConjugate) -> ConjugateState:
    """chi_t = chi_{t-1} + s_t, nu_t = nu_{t-1} + r_t (t is 1-based)."""
    if t > 1 and x_prev is None:
        raise ValueError("x_prev is required for t > 1")
    if not all(np.isfinite(v) for v in (x_t, y_t) + (() if x_prev is None else (x_prev,))):
        raise ValueError("update_hyperparams needs finite inputs")
    return ConjugateState(
        state.chi + conj.sufficient_stats(x_t, y_t, x_prev, t),
        state.nu + conj.penalty_stats(x_t, y_t, x_prev, t),
    )


def predictive_log_marginal(state: ConjugateState, x_t, y_t, x_prev, t: int, conj: GaussianVarianceConjugate) -> float:
    """log p(x_t, y_t | x_{t-1}, chi_{t-1}, nu_{t-1}) via the normalizer ratio."""
    new = update_hyperparams(state, x_t, y_t, x_prev, t, conj)
    return conj.log_base_measure(t) + conj.log_normalizer(state) - conj.log_normalizer(new)


def transition_predictive_logpdf(state: ConjugateState, x_t, x_prev, t: int, conj: GaussianVarianceConjugate) -> float:
    """Student-t log density of x_t given x_{t-1}, with Q integrated out."""
    a, b = state.nu[0], state.chi[0]
    d = float(x_t) - conj.transition_mean(x_prev, t)
    return float(gammaln(a + 0.5) - gammaln(a) - 0.5 * (LOG_2PI + math.log(b)) - (a + 0.5) * math.log1p(0.5 * d * d / b))


@dataclass
class MarginalSystem(ParticleSystem):
    """Particle system of an mcsmc sweep plus per-particle hyperparameters.

    ``chi[t, i]`` is (beta_q, beta_r) after absorbing step t along the lineage
    of particle i; ``nu[t]`` is shared by all particles.
    """

    chi: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None

    def conjugate_state(self, t: int, i: int) -> ConjugateState:
        return ConjugateState(self.chi[t, i], self.nu[t])


class _MarginalWorkspace(_Workspace):
    def __init__(self, T: int, N: int):
        super().__init__(T, N)
        self.BQ = np.empty((T, N))
        self.BR = np.empty((T, N))
        self.gam = np.empty((T, N))


def _nu_path(prior: InvGammaPrior, T: int) -> np.ndarray:
    # Accumulated one step at a time so it equals sequential replay bit for bit.
    steps = np.full((T, 2), 0.5)
    steps[0] = prior.alpha_q, prior.alpha_r + 0.5
    return np.cumsum(steps, axis=0)


def mcsmc(
    model: SsmModel,
    conj: GaussianVarianceConjugate,
    obs,
    reference,
    N: int,
    rng: RngLike = None,
    resampling: str = "multinomial",
    workspace: Optional[_MarginalWorkspace] = None,
) -> SweepResult:
    """Marginalized conditional SMC with the reference pinned at slot N-1.

    The returned ``system`` is a :class:`MarginalSystem` (omitted when a
    workspace is passed, since its buffers are reused).
    """
    y = _check_obs(obs)
    ref = np.ascontiguousarray(reference, dtype=float)
    if N < 2:
        raise ValueError("mcsmc needs N >= 2 (one slot is reserved for the reference)")
    if ref.shape != y.shape:
        raise ValueError("reference path and observations must have the same length")
    T = y.size
    prior = conj.prior
    gen = as_generator(rng)
    ws = workspace if isinstance(workspace, _MarginalWorkspace) and workspace.shape == (T, N) else _MarginalWorkspace(T, N)
    gen.standard_normal(out=ws.z)
    gen.standard_exponential(out=ws.e)
    gen.random(out=ws.u_as)
    u_final = gen.random()
    # Row t holds the mixing gammas for the proposal at 0-based step t,
    # whose transition shape is alpha_q after t - 1 transitions.
    ws.gam[0] = 1.0
    if T > 1:
        shapes = prior.alpha_q + 0.5 * np.arange(T - 1, dtype=float)
        gen.standard_gamma(shapes[:, None], out=ws.gam[1:])
        # Shapes near 0.01 underflow to exactly 0 about once per thousand
        # draws; the smallest normal float gives a proposal just as far out
        # in the tail (zero observation weight) without dividing by zero.
        np.maximum(ws.gam, np.finfo(float).tiny, out=ws.gam)
    log_z, failed = _kernels.marginal_sweep(
        model.time_term, model.state_mean, model.obs_mean, model.coef, y, ref,
        model.initial_state, math.sqrt(model.initial_var),
        prior.alpha_q, prior.beta_q, prior.alpha_r, prior.beta_r,
        ws.z, ws.e, ws.gam, _scheme(resampling), ws.X, ws.A, ws.LW, ws.BQ, ws.BR,
    )
    if failed >= 0:
        raise DegenerateWeightsError("weight collapse", timestep=failed + 1, module="mcsmc")
    b = draw_index(ws.LW[-1], u_final)
    path = _kernels.trace_lineage(ws.X, ws.A, b)
    system = None
    if workspace is None:
        system = MarginalSystem(ws.X, ws.LW, ws.A, chi=np.stack([ws.BQ, ws.BR], axis=-1), nu=_nu_path(prior, T))
    return SweepResult(path, b, float(log_z), system)


def collapsed_pg_run(
    model: SsmModel,
    conj: GaussianVarianceConjugate,
    obs,
    N: int,
    M: int,
    init_path=None,
    rng: RngLike = None,
    *,
    init_theta=None,
    resampling: str = "multinomial",
    store_states: bool = True,
    thin: int = 1,
) -> Trace:
    """Collapsed Particle Gibbs.

    Row 0 is the initialization.  Each later row draws theta[m] from the
    conjugate posterior given path[m-1] (recorded only; the sweep does not
    use it) and then path[m] = mcsmc(path[m-1]).
    """
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
    ws = _MarginalWorkspace(T, N)
    prior = conj.prior
    for m in range(1, M):
        # Conjugate posterior of the current path, in closed form.
        ex = path[1:] - model.f(path[:-1], np.arange(1, T))
        ey = y - model.g(path)
        post = ConjugateState(
            [prior.beta_q + 0.5 * float(ex @ ex), prior.beta_r + 0.5 * float(ey @ ey)],
            [prior.alpha_q + 0.5 * (T - 1), prior.alpha_r + 0.5 * T],
        )
        theta = conj.posterior_draw(post, gen)
        path = mcsmc(model, conj, y, path, N, gen, resampling=resampling, workspace=ws).sampled_path
        thetas[m] = theta.q, theta.r
        store.put(m, path)
    wall = time.perf_counter() - start

    states, iters = store.arrays()
    meta = dict(
        sampler_name="collapsed_pg", N=N, M=M, T=T, seed=stream.seed, stream_id=list(stream.stream_id),
        wall_time_seconds=wall, theta_mode="infer", resampling=resampling, thin=thin,
    )
    return Trace(theta=thetas, states=states, state_iters=iters, meta=meta)
