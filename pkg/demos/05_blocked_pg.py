"""Blocked Particle Gibbs with overlapping blocks and parallel odd/even sweeps."""

import time

from pgkit import (
    BenchmarkModel,
    NoiseParams,
    RngStream,
    blocked_pg_run,
    discard_burn_in,
    make_blocks,
    pg_run,
    simulate,
    state_rmse,
)

model = BenchmarkModel()
theta = NoiseParams(0.1, 1.0)
x, y = simulate(model, theta, 500, RngStream(20240101))
print("first blocks:", make_blocks(500, 30, 1).blocks[:4])
blocked_pg_run(model, y, theta, 10, 2, 30, 1, RngStream(0))  # compile before timing

for threads in (1, 2):
    start = time.perf_counter()
    tr = blocked_pg_run(model, y, theta, 100, 300, 30, 1, RngStream(4), threads=threads)
    print(f"threads={threads}: {time.perf_counter() - start:.2f} s, "
          f"RMSE={state_rmse(discard_burn_in(tr).state_mean(), x):.3f}")

pg = pg_run(model, y, None, 100, 300, init_theta=theta, rng=RngStream(5))
print(f"plain PG, same budget: RMSE={state_rmse(discard_burn_in(pg).state_mean(), x):.3f}")
