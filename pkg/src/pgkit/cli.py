"""Command-line interface: ``pgkit simulate | run | bench | oracle``.

Exit codes: 0 success, 1 runtime or numeric failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .blocked import blocked_pg_run
from .collapsed import GaussianVarianceConjugate, collapsed_pg_run
from .config import ConfigError, RunConfig, build_bench_config, build_run_config, default_theta_mode, read_config
from .diagnostics import (
    acf,
    discard_burn_in,
    kalman_filter_smoother,
    posterior_summary,
    state_rmse,
    write_acf_csv,
    write_summary_json,
)
from .ipmcmc import ipmcmc_run
from .model import RngStream, read_data_csv, simulate, write_data_csv
from .samplers import pg_run, pgas_run
from .smc import DegenerateWeightsError, bootstrap_pf
from .trace import Trace, _jsonable, write_trace

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
MAX_ACF_LAG = 50


def run_sampler(cfg: RunConfig, y, threads: int = 1, store_states: bool = True) -> Trace:
    """Dispatch one MCMC run described by ``cfg`` (not ``smc``)."""
    model = cfg.model()
    rng = RngStream(cfg.seed)
    infer = cfg.theta_mode == "infer"
    prior = cfg.prior if infer else None
    theta = cfg.init_params if infer else cfg.true_params
    common = dict(resampling=cfg.resampling, store_states=store_states, thin=cfg.thin)
    if cfg.sampler == "pg":
        return pg_run(model, y, prior, cfg.N, cfg.M, init_theta=theta, rng=rng, **common)
    if cfg.sampler == "pgas":
        return pgas_run(model, y, prior, cfg.N, cfg.M, init_theta=theta, rng=rng, **common)
    if cfg.sampler == "ipmcmc":
        return ipmcmc_run(model, y, theta, cfg.N, cfg.M, cfg.R, cfg.P, rng=rng, prior=prior, threads=threads, **common)
    if cfg.sampler == "blocked_pg":
        return blocked_pg_run(model, y, theta, cfg.N, cfg.M, cfg.block_len, cfg.overlap, rng,
                              prior=prior, threads=threads, **common)
    if cfg.sampler == "collapsed_pg":
        conj = GaussianVarianceConjugate(model, cfg.prior)
        return collapsed_pg_run(model, conj, y, cfg.N, cfg.M, rng=rng, init_theta=theta, **common)
    raise ConfigError(f"sampler {cfg.sampler!r} is not an MCMC sampler")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def cmd_simulate(args) -> int:
    cfg = build_run_config(read_config(args.config), need_sampler=False)
    x, y = simulate(cfg.model(), cfg.true_params, cfg.T, RngStream(cfg.seed))
    write_data_csv(args.out, x, y)
    print(f"simulated T={cfg.T} Q={cfg.q:g} R={cfg.r:g} seed={cfg.seed} model={cfg.model_name} -> {args.out}")
    return EXIT_OK


def _run_smc(cfg: RunConfig, x, y, out: Path) -> dict:
    system, res, means = bootstrap_pf(cfg.model(), cfg.true_params, y, cfg.N, RngStream(cfg.seed).generator(),
                                      cfg.resampling)
    _write_csv(out / "filter.csv", ["t", "filtered_mean"], [[t + 1, _fmt(v)] for t, v in enumerate(means)])
    summary = {"sampler": "smc", "N": cfg.N, "T": int(y.size), "seed": cfg.seed,
               "log_marginal_likelihood": res.log_marginal_likelihood}
    if x is not None:
        summary["state_rmse"] = state_rmse(means, x)
    return summary


def cmd_run(args) -> int:
    cfg = build_run_config(read_config(args.config))
    x, y = read_data_csv(args.data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.sampler == "smc":
        summary = _run_smc(cfg, x, y, out)
    else:
        trace = run_sampler(cfg, y, threads=args.threads)
        write_trace(trace, out / "trace.csv", out / "trace_meta.json", include_states=cfg.save_states)
        kept = discard_burn_in(trace) if len(trace) >= 3 else trace
        summary = {"sampler": cfg.sampler, "N": cfg.N, "M": cfg.M, "T": int(y.size), "seed": cfg.seed,
                   "theta_mode": cfg.theta_mode, "burn_in": len(trace) - len(kept)}
        for name, series in (("Q", kept.Q), ("R", kept.R)):
            summary[name] = posterior_summary(series)
            if cfg.theta_mode == "infer" and series.size >= 2 and np.ptp(series) > 0:
                write_acf_csv(out / f"acf_{name}.csv", acf(series, min(MAX_ACF_LAG, series.size - 1)))
        if trace.swapped is not None:
            summary["swap_rate"] = trace.meta.get("swap_rate")
        if x is not None and kept.states is not None and kept.states.shape[0] > 0:
            summary["state_rmse"] = state_rmse(kept.state_mean(), x)
    write_summary_json(out / "summary.json", summary)
    print(f"{cfg.sampler}: wrote results to {out}")
    return EXIT_OK


def _environment(threads: int) -> dict:
    return {
        "cpu": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "threads": threads,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "pgkit": __version__,
    }


def cmd_bench(args) -> int:
    bench = build_bench_config(read_config(args.config))
    base = bench.base
    x, y = simulate(base.model(), base.true_params, base.T, RngStream(base.seed))
    rows = []
    warmed = set()
    for sampler, M, N in bench.cells:
        cfg = RunConfig(**{**base.__dict__, "sampler": sampler, "M": M, "N": N})
        if not base.explicit_theta_mode:
            cfg.theta_mode = default_theta_mode(sampler)
        try:
            if sampler not in warmed:
                # Compile the kernels before timing.
                warm = RunConfig(**{**cfg.__dict__, "M": 2, "N": 2})
                _timed(warm, y, args.threads)
                warmed.add(sampler)
            wall = _timed(cfg, y, args.threads)
            rows.append([sampler, M, N, _fmt(wall), "ok"])
            print(f"{sampler} M={M} N={N}: {wall:.3f} s")
        except (DegenerateWeightsError, ValueError, FloatingPointError) as err:
            rows.append([sampler, M, N, "nan", f"failed: {err}"])
            print(f"{sampler} M={M} N={N}: failed: {err}", file=sys.stderr)
    _write_csv(args.out, ["sampler", "M", "N", "wall_seconds", "status"], rows)
    meta_path = Path(args.out).with_suffix(".env.json")
    with open(meta_path, "w") as fh:
        json.dump(_jsonable({"environment": _environment(args.threads), "seed": base.seed, "T": base.T,
                             "cells": len(rows)}), fh, indent=2, sort_keys=True)
    return EXIT_OK if all(r[4] == "ok" for r in rows) else EXIT_RUNTIME


def _timed(cfg: RunConfig, y, threads: int) -> float:
    start = time.perf_counter()
    if cfg.sampler == "smc":
        bootstrap_pf(cfg.model(), cfg.true_params, y, cfg.N, RngStream(cfg.seed).generator(), cfg.resampling)
    else:
        run_sampler(cfg, y, threads=threads, store_states=False)
    return time.perf_counter() - start


def cmd_oracle(args) -> int:
    cfg = build_run_config(read_config(args.config), need_sampler=False)
    lg = cfg.linear_gaussian()
    _, y = read_data_csv(args.data)
    res = kalman_filter_smoother(lg, y)
    _write_csv(
        args.out,
        ["t", "filtered_mean", "filtered_var", "smoothed_mean", "smoothed_var"],
        [[t + 1, _fmt(a), _fmt(b), _fmt(c), _fmt(d)] for t, (a, b, c, d) in
         enumerate(zip(res.filtered_means, res.filtered_vars, res.smoothed_means, res.smoothed_vars))],
    )
    print(f"log_likelihood={float(res.log_likelihood)!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgkit", description="Particle MCMC for nonlinear state-space models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a t,x,y dataset")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run a sampler on a dataset")
    p.add_argument("config")
    p.add_argument("data")
    p.add_argument("out_dir")
    p.add_argument("--threads", type=int, default=1, help="worker threads for ipmcmc and blocked_pg")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="time a (sampler, M, N) matrix")
    p.add_argument("config")
    p.add_argument("out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="Kalman filter and RTS smoother for a linear-Gaussian dataset")
    p.add_argument("config")
    p.add_argument("data")
    p.add_argument("out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateWeightsError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, FloatingPointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
