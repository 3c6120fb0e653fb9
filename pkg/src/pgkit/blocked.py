"""Blocked Particle Gibbs.

The index set 1..T is covered by overlapping blocks.  Each Gibbs sweep
updates all odd-numbered blocks (which are pairwise separated, so their
updates are conditionally independent and run in parallel), then all
even-numbered blocks.  A block update is a conditional SMC run on the
block, started from the transition out of the fixed state just before the
block, with the final weights multiplied by the transition density into
the fixed state just after it.

Overlapping indices are resampled by both neighbouring blocks within a
sweep; the even-parity update, which runs second, determines their value.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .model import RngLike, SsmModel, as_generator, as_stream
from .samplers import DEFAULT_INIT_THETA, InvGammaPrior, _StateStore, initial_path, sample_theta
from .smc import DegenerateWeightsError, _check_obs, _params, _scheme, _Workspace, draw_index
from .trace import Trace


@dataclass(frozen=True)
class BlockPartition:
    """Blocks as 1-based inclusive ``(s, u)`` pairs."""

    blocks: Tuple[Tuple[int, int], ...]
    block_len: int
    overlap: int
    T: int

    def __len__(self):
        return len(self.blocks)

    def parity(self, odd: bool) -> List[int]:
        """0-based positions of the odd (1st, 3rd, ...) or even blocks."""
        return list(range(0 if odd else 1, len(self.blocks), 2))


def make_blocks(T: int, L: int, p: int) -> BlockPartition:
    """Cover 1..T with blocks of length L overlapping by p.

    ``s_1 = 1``, ``u_j = min(s_j + L - 1, T)``, ``s_{j+1} = u_j - p + 1``.
    """
    T, L, p = int(T), int(L), int(p)
    if not 2 <= L <= T:
        raise ValueError(f"block length must satisfy 2 <= L <= T, got L={L}, T={T}")
    if not (0 <= p and 2 * p < L):
        raise ValueError(f"overlap must satisfy 0 <= p < L/2, got p={p}, L={L}")
    blocks = []
    s = 1
    while True:
        u = min(s + L - 1, T)
        blocks.append((s, u))
        if u == T:
            break
        s = u - p + 1
    return BlockPartition(tuple(blocks), L, p, T)


@dataclass(frozen=True)
class BlockBoundary:
    """Fixed neighbours of a block: x_{s-1} and x_{u+1} (None at the ends)."""

    initial_state: Optional[float] = None
    terminal_state: Optional[float] = None


def boundary_for(path, block: Tuple[int, int]) -> BlockBoundary:
    s, u = block
    T = len(path)
    return BlockBoundary(
        initial_state=float(path[s - 2]) if s > 1 else None,
        terminal_state=float(path[u]) if u < T else None,
    )


def block_selection_log_weights(log_w_final, particles_final, boundary: BlockBoundary, u: int, params, model):
    """Final log-weights of a block, including the terminal boundary term.

    ``u`` is the 1-based time of the block's last state; the boundary term is
    log N(x_{u+1}; f(x_u^i, u), Q).
    """
    lw = np.asarray(log_w_final, dtype=float)
    if boundary.terminal_state is None:
        return lw.copy()
    params = _params(params)
    return lw + model.transition_logpdf(boundary.terminal_state, particles_final, u, params.q)


def blocked_csmc(
    model: SsmModel,
    params,
    obs_slice,
    reference,
    boundary: BlockBoundary,
    N: int,
    rng: RngLike = None,
    start: int = 1,
    resampling: str = "multinomial",
    workspace: Optional[_Workspace] = None,
    block_id: Optional[int] = None,
    return_system: bool = False,
):
    """Conditional SMC on the block ``start .. start + len(obs_slice) - 1``.

    Returns the drawn block path (and the particle system when
    ``return_system``).
    """
    params = _params(params)
    y = _check_obs(obs_slice)
    ref = np.ascontiguousarray(reference, dtype=float)
    if N < 2:
        raise ValueError("blocked_csmc needs N >= 2")
    if ref.shape != y.shape:
        raise ValueError("reference slice and observation slice lengths differ")
    if start > 1 and boundary.initial_state is None:
        raise ValueError("a block starting after t=1 needs an initial boundary state")
    L = y.size
    gen = as_generator(rng)
    ws = _Workspace.ensure(workspace, L, N)
    gen.standard_normal(out=ws.z)
    gen.standard_exponential(out=ws.e)
    gen.random(out=ws.u_as)
    u_final = gen.random()
    has_init = start > 1
    log_z, failed = _kernels.conditional_sweep(
        model.time_term, model.state_mean, model.obs_mean, model.coef, y, ref, params.q, params.r,
        model.initial_state, math.sqrt(model.initial_var), has_init,
        boundary.initial_state if has_init else 0.0, start - 1,
        ws.z, ws.e, ws.u_as, False, _scheme(resampling), ws.X, ws.A, ws.LW,
    )
    if failed >= 0:
        raise DegenerateWeightsError("weight collapse", timestep=start + failed, module="blocked_csmc", block=block_id)
    u = start + L - 1
    lw = block_selection_log_weights(ws.LW[-1], ws.X[-1], boundary, u, params, model)
    try:
        b = draw_index(lw, u_final)
    except DegenerateWeightsError:
        raise DegenerateWeightsError("boundary-corrected weights collapsed", timestep=u,
                                     module="blocked_csmc", block=block_id) from None
    path = _kernels.trace_lineage(ws.X, ws.A, b)
    if return_system:
        return path, ws.system(copy=workspace is not None)
    return path


def _update_parity(model, theta, y, path, partition, positions, N, stream, m, workspaces, pool, resampling):
    def one(j):
        s, u = partition.blocks[j]
        new = blocked_csmc(
            model, theta, y[s - 1:u], path[s - 1:u], boundary_for(path, (s, u)), N,
            stream.spawn(m, j).generator(), start=s, resampling=resampling,
            workspace=workspaces[j], block_id=j + 1,
        )
        return j, new

    results = pool.map(one, positions) if pool is not None else map(one, positions)
    # Same-parity blocks are disjoint and their boundaries lie outside every
    # block of that parity, so writing back after all updates is equivalent.
    for j, new in list(results):
        s, u = partition.blocks[j]
        path[s - 1:u] = new


def blocked_pg_run(
    model: SsmModel,
    obs,
    theta,
    N: int,
    M: int,
    L: int,
    p: int,
    rng: RngLike = None,
    *,
    prior: Optional[InvGammaPrior] = None,
    init_path=None,
    threads: int = 1,
    resampling: str = "multinomial",
    store_states: bool = True,
    thin: int = 1,
) -> Trace:
    """Blocked Particle Gibbs with parallel odd/even block sweeps.

    ``theta`` is the fixed (Q, R), or the starting value when ``prior`` is
    given, in which case (Q, R) get a conjugate Gibbs update before every
    sweep.  Block ``j`` at iteration ``m`` draws from substream ``(m, j)``,
    so results do not depend on ``threads``.
    """
    y = _check_obs(obs)
    T = y.size
    if N < 2:
        raise ValueError("N must be >= 2")
    if M < 1:
        raise ValueError("M must be >= 1")
    partition = make_blocks(T, L, p)
    stream = as_stream(rng)
    theta = DEFAULT_INIT_THETA if theta is None else _params(theta)

    start = time.perf_counter()
    if init_path is None:
        path = initial_path(model, theta, y, N, stream.spawn(0, 0).generator())
    else:
        path = np.array(init_path, dtype=float)
        if path.shape != y.shape:
            raise ValueError("init_path length must equal the number of observations")
    theta_gen = stream.spawn(0, 1).generator()

    thetas = np.empty((M, 2))
    thetas[0] = theta.q, theta.r
    store = _StateStore(M, (T,), store_states, thin)
    store.put(0, path)
    workspaces = [_Workspace(u - s + 1, N) for s, u in partition.blocks]
    odd, even = partition.parity(True), partition.parity(False)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for m in range(1, M):
            if prior is not None:
                theta = sample_theta(path, y, prior, model, theta_gen)
            _update_parity(model, theta, y, path, partition, odd, N, stream, m, workspaces, pool, resampling)
            _update_parity(model, theta, y, path, partition, even, N, stream, m, workspaces, pool, resampling)
            thetas[m] = theta.q, theta.r
            store.put(m, path)
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - start

    states, iters = store.arrays()
    meta = dict(
        sampler_name="blocked_pg", N=N, M=M, T=T, seed=stream.seed, stream_id=list(stream.stream_id),
        wall_time_seconds=wall, block_len=L, overlap=p, blocks=[list(b) for b in partition.blocks],
        threads=threads, theta_mode="infer" if prior is not None else "fixed", resampling=resampling, thin=thin,
    )
    return Trace(theta=thetas, states=states, state_iters=iters, meta=meta)

