"""Autocorrelation of the Q chain for PG and PG with ancestor sampling at small N."""

from pgkit import (
    BenchmarkModel,
    InvGammaPrior,
    NoiseParams,
    RngStream,
    acf,
    discard_burn_in,
    pg_run,
    pgas_run,
    simulate,
)

model = BenchmarkModel()
_, y = simulate(model, NoiseParams(0.1, 1.0), 500, RngStream(20240101))

M = 3000
for name, run in (("PG", pg_run), ("PGAS", pgas_run)):
    tr = discard_burn_in(run(model, y, InvGammaPrior(), 10, M, rng=RngStream(2), store_states=False))
    a = acf(tr.Q, 20)
    print(f"{name:5s} N=10  ACF(1)={a[1]:.3f}  ACF(10)={a[10]:.3f}  ACF(20)={a[20]:.3f}  mean Q={tr.Q.mean():.3f}")
