"""Interacting particle MCMC.

A pool of R nodes runs one SMC sweep each per iteration.  P of them are
conditional (cSMC on a retained reference path), the rest run an ordinary
bootstrap filter.  After every iteration the P conditional roles are
reassigned in proportion to the nodes' marginal-likelihood estimates, and
each retained path is drawn from the node that now holds its role.

Node ids are 0-based; ``conditional_ids[j]`` is the node holding role j.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .model import RngLike, SsmModel, as_generator, as_stream
from .samplers import DEFAULT_INIT_THETA, InvGammaPrior, _StateStore, initial_path, sample_theta
from .smc import DegenerateWeightsError, _check_obs, _params, _Workspace, bootstrap_pf, csmc
from .trace import Trace


@dataclass(frozen=True)
class NodeOutput:
    log_zhat: float
    sampled_path: np.ndarray


@dataclass
class NodePool:
    """R nodes, P of which are conditional."""

    num_nodes: int
    num_conditional: int
    conditional_ids: np.ndarray

    def __post_init__(self):
        R, P = self.num_nodes, self.num_conditional
        if not 1 <= P <= R:
            raise ValueError(f"need 1 <= P <= R, got P={P}, R={R}")
        ids = np.asarray(self.conditional_ids, dtype=np.int64)
        if ids.shape != (P,) or len(set(ids.tolist())) != P or ids.min() < 0 or ids.max() >= R:
            raise ValueError(f"conditional ids must be {P} distinct values in 0..{R - 1}, got {ids.tolist()}")
        self.conditional_ids = ids

    @classmethod
    def initial(cls, R: int, P: int) -> "NodePool":
        return cls(R, P, np.arange(P))


def node_zhat(log_weights) -> float:
    """log Z-hat = sum_t log(mean_i w_t^i) from a (T, N) array of unnormalized log-weights."""
    lw = np.atleast_2d(np.asarray(log_weights, dtype=float))
    if lw.ndim != 2 or lw.size == 0:
        raise ValueError("expected a (T, N) array of log-weights")
    if np.isnan(lw).any() or not np.isfinite(lw.max(axis=1)).all():
        raise DegenerateWeightsError("weights vanished", module="node_zhat")
    return float(np.sum(logsumexp(lw, axis=1) - np.log(lw.shape[1])))


def conditional_id_probabilities(log_zhats, current_ids, j: int) -> np.ndarray:
    """Selection probabilities for role ``j`` given the other roles' current nodes."""
    lz = np.asarray(log_zhats, dtype=float)
    ids = np.asarray(current_ids, dtype=np.int64)
    others = np.delete(ids, j)
    logp = lz.copy()
    logp[others] = -np.inf
    m = logp.max()
    if not np.isfinite(m) or np.isnan(logp).any():
        raise DegenerateWeightsError("all admissible Z-hat are zero", module="resample_conditional_ids")
    p = np.exp(logp - m)
    return p / p.sum()


def resample_conditional_ids(log_zhats, current_ids, rng: RngLike = None) -> np.ndarray:
    """Redraw c_1..c_P in order; c_j excludes the nodes currently held by the other roles."""
    ids = np.array(current_ids, dtype=np.int64)
    R = len(log_zhats)
    if len(set(ids.tolist())) != ids.size:
        raise ValueError("current conditional ids must be distinct")
    if ids.size and (ids.min() < 0 or ids.max() >= R):
        raise ValueError("conditional ids out of range")
    gen = as_generator(rng)
    for j in range(ids.size):
        p = conditional_id_probabilities(log_zhats, ids, j)
        c = int(gen.choice(R, p=p))
        if c in np.delete(ids, j):
            raise AssertionError("selected a node held by another conditional role")
        ids[j] = c
    return ids


def ipmcmc_run(
    model: SsmModel,
    obs,
    theta,
    N: int,
    M: int,
    R: int,
    P: int,
    init_paths: Optional[Sequence] = None,
    rng: RngLike = None,
    *,
    prior: Optional[InvGammaPrior] = None,
    threads: int = 1,
    resampling: str = "multinomial",
    store_states: bool = True,
    thin: int = 1,
) -> Trace:
    """Interacting PMCMC with R nodes, P of them conditional.

    ``theta`` is the fixed (Q, R).  With ``prior`` given, (Q, R) also gets a
    conjugate Gibbs update once per iteration, given the first retained
    path, and is shared by all nodes; this is an extension, off by default.

    Node ``r`` at iteration ``m`` draws from substream ``(m, r)`` and the
    coordinator from ``(m, R)``, so the output does not depend on ``threads``.
    """
    y = _check_obs(obs)
    T = y.size
    if N < 2:
        raise ValueError("N must be >= 2")
    if M < 1:
        raise ValueError("M must be >= 1")
    pool_state = NodePool.initial(R, P)
    stream = as_stream(rng)
    theta = DEFAULT_INIT_THETA if theta is None else _params(theta)

    start = time.perf_counter()
    if init_paths is None:
        refs = [initial_path(model, theta, y, N, stream.spawn(0, j).generator()) for j in range(P)]
    else:
        if len(init_paths) != P:
            raise ValueError(f"init_paths must have {P} entries")
        refs = [np.array(p, dtype=float) for p in init_paths]
        if any(p.shape != y.shape for p in refs):
            raise ValueError("every init path must match the number of observations")

    thetas = np.empty((M, 2))
    thetas[0] = theta.q, theta.r
    swapped = np.zeros(M, dtype=bool)
    cond_ids = np.empty((M, P), dtype=np.int64)
    cond_ids[0] = pool_state.conditional_ids
    store = _StateStore(M, (P, T), store_states, thin)
    store.put(0, np.array(refs))
    workspaces = [_Workspace(T, N) for _ in range(R)]
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def run_node(args):
        r, m, ref = args
        gen = stream.spawn(m, r).generator()
        if ref is None:
            _, res, _ = bootstrap_pf(model, theta, y, N, gen, resampling, workspaces[r])
        else:
            res = csmc(model, theta, y, ref, N, gen, resampling, workspaces[r])
        return NodeOutput(res.log_marginal_likelihood, res.sampled_path)

    try:
        for m in range(1, M):
            coord = stream.spawn(m, R).generator()
            if prior is not None:
                theta = sample_theta(refs[0], y, prior, model, coord)
            role = {int(c): j for j, c in enumerate(pool_state.conditional_ids)}
            jobs = [(r, m, refs[role[r]] if r in role else None) for r in range(R)]
            outputs = list(executor.map(run_node, jobs) if executor is not None else map(run_node, jobs))
            log_z = np.array([o.log_zhat for o in outputs])
            old = pool_state.conditional_ids
            new = resample_conditional_ids(log_z, old, coord)
            pool_state = NodePool(R, P, new)
            refs = [outputs[c].sampled_path for c in new]
            thetas[m] = theta.q, theta.r
            swapped[m] = bool((new != old).any())
            cond_ids[m] = new
            store.put(m, np.array(refs))
    finally:
        if executor is not None:
            executor.shutdown()
    wall = time.perf_counter() - start

    states, iters = store.arrays()
    meta = dict(
        sampler_name="ipmcmc", N=N, M=M, T=T, R=R, P=P, seed=stream.seed, stream_id=list(stream.stream_id),
        wall_time_seconds=wall, threads=threads, theta_mode="infer" if prior is not None else "fixed",
        resampling=resampling, thin=thin, swap_rate=float(swapped[1:].mean()) if M > 1 else 0.0,
    )
    return Trace(theta=thetas, states=states, state_iters=iters, meta=meta, swapped=swapped, conditional_ids=cond_ids)
