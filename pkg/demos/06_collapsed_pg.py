"""Collapsed Particle Gibbs: (Q, R) integrated out of the particle sweep."""

from pgkit import (
    BenchmarkModel,
    GaussianVarianceConjugate,
    InvGammaPrior,
    NoiseParams,
    RngStream,
    acf,
    collapsed_pg_run,
    discard_burn_in,
    pg_run,
    simulate,
)

model = BenchmarkModel()
_, y = simulate(model, NoiseParams(0.1, 1.0), 500, RngStream(20240101))
conj = GaussianVarianceConjugate(model, InvGammaPrior())

M = 2000
for N in (10, 100):
    c = discard_burn_in(collapsed_pg_run(model, conj, y, N, M, rng=RngStream(6, (N,)), store_states=False))
    p = discard_burn_in(pg_run(model, y, InvGammaPrior(), N, M, rng=RngStream(7, (N,)), store_states=False))
    print(f"N={N:3d}  ACF(5) collapsed={acf(c.Q, 5)[5]:.3f}  PG={acf(p.Q, 5)[5]:.3f}  "
          f"mean Q collapsed={c.Q.mean():.3f}  PG={p.Q.mean():.3f}")
