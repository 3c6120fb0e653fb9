"""Bootstrap particle filter on simulated benchmark data.

Prints the filtered-mean RMSE against the true states and log Z-hat.
"""

import numpy as np

from pgkit import BenchmarkModel, NoiseParams, RngStream, bootstrap_pf, simulate, state_rmse

model = BenchmarkModel()
theta = NoiseParams(0.1, 1.0)
x, y = simulate(model, theta, 500, RngStream(20240101))

for N in (50, 500, 5000):
    _, res, means = bootstrap_pf(model, theta, y, N, RngStream(1, (N,)).generator())
    print(f"N={N:5d}  RMSE={state_rmse(means, x):6.3f}  log Z-hat={res.log_marginal_likelihood:9.2f}")

# Errors are dominated by the sign ambiguity of g(x) = x^2 / 20.
err = np.abs(means - x)
print(f"timesteps with |error| > 5: {(err > 5).sum()} of {x.size}")
