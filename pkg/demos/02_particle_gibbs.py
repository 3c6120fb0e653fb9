"""Particle Gibbs: joint posterior of the states and the noise variances."""

from pgkit import (
    BenchmarkModel,
    InvGammaPrior,
    NoiseParams,
    RngStream,
    discard_burn_in,
    pg_run,
    posterior_summary,
    simulate,
    state_rmse,
)

model = BenchmarkModel()
x, y = simulate(model, NoiseParams(0.1, 1.0), 500, RngStream(20240101))

trace = discard_burn_in(pg_run(model, y, InvGammaPrior(), N=500, M=1500, rng=RngStream(1)))
for name, series in (("Q", trace.Q), ("R", trace.R)):
    s = posterior_summary(series)
    print(f"{name}: mean={s['mean']:.3f}  95% interval=({s['q2.5']:.3f}, {s['q97.5']:.3f})")
print(f"posterior-mean state RMSE: {state_rmse(trace.state_mean(), x):.3f}")
