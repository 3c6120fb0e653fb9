"""MCMC output container and its CSV/JSON serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


@dataclass
class Trace:
    """Per-iteration output of a sampler.

    Attributes:
        theta: (M, 2) array of sampled (Q, R), one row per iteration.
        states: stored state paths, (K, T) for single-chain samplers or
            (K, P, T) for iPMCMC, where K = number of stored iterations.
        state_iters: 0-based iteration index of each stored state row.
        meta: run metadata (N, M, T, seed, sampler_name, wall_time_seconds, ...).
        swapped: iPMCMC only, (M,) bool, True where a conditional id changed.
        conditional_ids: iPMCMC only, (M, P) 0-based node ids after each iteration.
    """

    theta: np.ndarray
    states: Optional[np.ndarray] = None
    state_iters: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)
    swapped: Optional[np.ndarray] = None
    conditional_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.states is not None and self.state_iters is None:
            self.state_iters = np.arange(self.states.shape[0])

    def __len__(self):
        return self.theta.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self.theta[:, 0]

    @property
    def R(self) -> np.ndarray:
        return self.theta[:, 1]

    @property
    def num_chains(self) -> int:
        if self.states is not None and self.states.ndim == 3:
            return self.states.shape[1]
        return 1

    def tail(self, start: int) -> "Trace":
        """Rows from iteration ``start`` on."""
        states = state_iters = None
        if self.states is not None:
            keep = self.state_iters >= start
            states = self.states[keep]
            state_iters = self.state_iters[keep] - start
        meta = dict(self.meta)
        meta["discarded"] = meta.get("discarded", 0) + start
        return replace(
            self,
            theta=self.theta[start:],
            states=states,
            state_iters=state_iters,
            meta=meta,
            swapped=None if self.swapped is None else self.swapped[start:],
            conditional_ids=None if self.conditional_ids is None else self.conditional_ids[start:],
        )

    def state_mean(self) -> np.ndarray:
        """Posterior mean path over stored rows (pooled over chains)."""
        if self.states is None or self.states.shape[0] == 0:
            raise ValueError("trace holds no state samples")
        if self.states.ndim == 3:
            return self.states.mean(axis=(0, 1))
        return self.states.mean(axis=0)


def write_trace(trace: Trace, csv_path, meta_path=None, include_states: bool = False) -> None:
    """Write ``iter,Q,R[,x_1..x_T]`` (iPMCMC: ``iter,chain_j,Q,R,swapped[,...]``).

    Iterations are written 1-based.  With ``include_states`` each row carries
    the stored path; iterations dropped by thinning get empty state cells.
    """
    multi = (trace.states is not None and trace.states.ndim == 3) or trace.swapped is not None
    T = trace.states.shape[-1] if trace.states is not None else 0
    state_row = {}
    if include_states and trace.states is not None:
        state_row = {int(k): i for i, k in enumerate(trace.state_iters)}
    header = ["iter"] + (["chain_j"] if multi else []) + ["Q", "R"] + (["swapped"] if multi else [])
    if include_states and T:
        header += [f"x_{t + 1}" for t in range(T)]
    P = trace.num_chains if multi else 1
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for m in range(len(trace)):
            q, r = trace.theta[m]
            for j in range(P):
                row = [m + 1]
                if multi:
                    row.append(j + 1)
                row += [format(q, ".17g"), format(r, ".17g")]
                if multi:
                    row.append(int(bool(trace.swapped[m])) if trace.swapped is not None else 0)
                if include_states and T:
                    i = state_row.get(m)
                    if i is None:
                        row += [""] * T
                    else:
                        path = trace.states[i, j] if trace.states.ndim == 3 else trace.states[i]
                        row += [format(v, ".17g") for v in path]
                w.writerow(row)
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(_jsonable(trace.meta), fh, indent=2, sort_keys=True)


def read_trace(csv_path, meta_path=None) -> Trace:
    """Read back the parameter columns (and states, when present) of a trace CSV."""
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    col = {name: i for i, name in enumerate(header)}
    xcols = [i for i, name in enumerate(header) if name.startswith("x_")]
    multi = "chain_j" in col
    theta, swapped, paths, iters = [], [], {}, []
    for row in rows:
        m = int(row[col["iter"]]) - 1
        j = int(row[col["chain_j"]]) - 1 if multi else 0
        if j == 0:
            theta.append((float(row[col["Q"]]), float(row[col["R"]])))
            if multi:
                swapped.append(bool(int(row[col["swapped"]])))
        if xcols and row[xcols[0]] != "":
            if m not in paths:
                paths[m] = {}
                iters.append(m)
            paths[m][j] = [float(row[i]) for i in xcols]
    states = None
    if iters:
        if multi:
            P = max(len(v) for v in paths.values())
            states = np.array([[paths[m][j] for j in range(P)] for m in iters])
        else:
            states = np.array([paths[m][0] for m in iters])
    meta = {}
    if meta_path is not None:
        with open(meta_path) as fh:
            meta = json.load(fh)
    return Trace(
        theta=np.array(theta),
        states=states,
        state_iters=np.array(iters) if iters else None,
        meta=meta,
        swapped=np.array(swapped) if multi else None,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
