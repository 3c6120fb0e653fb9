import math

import numpy as np
import pytest

from pgkit.blocked import (
    BlockBoundary,
    block_selection_log_weights,
    blocked_csmc,
    blocked_pg_run,
    boundary_for,
    make_blocks,
)
from pgkit.model import NoiseParams, RngStream
from pgkit.samplers import InvGammaPrior
from pgkit.smc import DegenerateWeightsError, csmc, normalize_log_weights


class TestMakeBlocks:
    def test_small_example(self):
        assert make_blocks(10, 4, 1).blocks == ((1, 4), (4, 7), (7, 10))

    def test_single_block(self):
        assert make_blocks(25, 25, 0).blocks == ((1, 25),)

    def test_benchmark_partition(self):
        blocks = make_blocks(500, 30, 1).blocks
        assert blocks[:3] == ((1, 30), (30, 59), (59, 88))
        assert blocks[-1][1] == 500

    def test_truncated_last_block(self):
        assert make_blocks(11, 4, 1).blocks == ((1, 4), (4, 7), (7, 10), (10, 11))

    @pytest.mark.parametrize("T,L,p", [(10, 1, 0), (10, 11, 0), (10, 4, 2), (10, 4, -1)])
    def test_rejects_invalid(self, T, L, p):
        with pytest.raises(ValueError):
            make_blocks(T, L, p)

    def test_parity(self):
        part = make_blocks(20, 5, 1)
        assert part.parity(True) == [0, 2, 4] and part.parity(False) == [1, 3]

    def test_boundary_for(self):
        path = np.arange(1.0, 11.0)
        assert boundary_for(path, (1, 4)) == BlockBoundary(None, 5.0)
        assert boundary_for(path, (4, 7)) == BlockBoundary(3.0, 8.0)
        assert boundary_for(path, (7, 10)) == BlockBoundary(6.0, None)


class TestBlockedCsmc:
    def test_last_block_equals_plain_csmc(self, benchmark_model, true_theta, short_benchmark_data):
        x, y = short_benchmark_data
        a = blocked_csmc(benchmark_model, true_theta, y, x, BlockBoundary(), 15, RngStream(3).generator())
        b = csmc(benchmark_model, true_theta, y, x, 15, RngStream(3).generator()).sampled_path
        np.testing.assert_array_equal(a, b)

    def test_selection_weights_dense_oracle(self, benchmark_model):
        lw = np.log([0.3, 0.7])
        xu = np.array([1.2, -0.4])
        bnd = BlockBoundary(0.0, 9.5)
        q, u = 2.0, 6
        dens = np.array([math.exp(-(9.5 - benchmark_model.f(v, u)) ** 2 / (2 * q)) for v in xu])
        want = np.array([0.3, 0.7]) * dens
        got = normalize_log_weights(block_selection_log_weights(lw, xu, bnd, u, (q, 1.0), benchmark_model))
        np.testing.assert_allclose(got, want / want.sum(), rtol=1e-12)

    def test_no_terminal_leaves_weights(self, benchmark_model):
        lw = np.array([0.1, 0.2])
        np.testing.assert_array_equal(
            block_selection_log_weights(lw, [0.0, 1.0], BlockBoundary(1.0, None), 4, (1.0, 1.0), benchmark_model), lw)

    def test_boundary_selection_frequencies(self, benchmark_model, true_theta, short_benchmark_data):
        # N = 2 interior block: the drawn final state is particle i with the
        # boundary-corrected probability.
        x, y = short_benchmark_data
        s, u = 11, 15
        bnd = boundary_for(x, (s, u))
        theta = NoiseParams(2.0, 1.0)
        hits, prob = 0, 0.0
        n = 4000
        for k in range(n):
            path, system = blocked_csmc(benchmark_model, theta, y[s - 1:u], x[s - 1:u], bnd, 2,
                                        RngStream(7, (k,)).generator(), start=s, return_system=True)
            p = normalize_log_weights(block_selection_log_weights(
                system.log_weights[-1], system.particles[-1], bnd, u, theta, benchmark_model))
            prob += p[1]
            hits += path[-1] == system.particles[-1, 1] and path[-1] != system.particles[-1, 0]
        prob /= n
        assert abs(hits / n - prob) < 4 * math.sqrt(prob * (1 - prob) / n) + 1e-3

    def test_tiny_q_stays_near_reference(self, benchmark_model, short_benchmark_data):
        x, _ = short_benchmark_data
        theta = NoiseParams(1e-6, 1.0)
        # Data generated with tiny process noise along the reference path.
        xs = [0.0]
        for k in range(1, 30):
            xs.append(float(benchmark_model.f(xs[-1], k)))
        xs = np.array(xs)
        y = benchmark_model.g(xs)
        s, u = 10, 20
        path = blocked_csmc(benchmark_model, theta, y[s - 1:u], xs[s - 1:u], boundary_for(xs, (s, u)), 50,
                            RngStream(8).generator(), start=s)
        assert np.abs(path - xs[s - 1:u]).max() < 0.05

    def test_interior_block_needs_initial_state(self, benchmark_model, true_theta):
        with pytest.raises(ValueError):
            blocked_csmc(benchmark_model, true_theta, [0.0, 1.0], [0.0, 1.0], BlockBoundary(), 4, 0, start=5)

    def test_collapse_names_block(self, benchmark_model, true_theta):
        y = np.array([0.0, 1e200, 0.0])
        with pytest.raises(DegenerateWeightsError) as err:
            blocked_csmc(benchmark_model, true_theta, y, np.zeros(3), BlockBoundary(0.0, None), 4, 0,
                         start=4, block_id=3)
        assert err.value.block == 3 and err.value.timestep == 5


class TestBlockedPgRun:
    def test_shapes_and_meta(self, benchmark_model, true_theta, short_benchmark_data):
        _, y = short_benchmark_data
        tr = blocked_pg_run(benchmark_model, y, true_theta, 10, 5, 30, 1, RngStream(1))
        assert tr.states.shape == (5, 100)
        assert tr.meta["blocks"][0] == [1, 30] and tr.meta["blocks"][-1][1] == 100
        assert (tr.Q == 0.1).all()

    def test_threads_do_not_change_output(self, benchmark_model, true_theta, short_benchmark_data):
        _, y = short_benchmark_data
        a = blocked_pg_run(benchmark_model, y, true_theta, 20, 10, 15, 2, RngStream(2), threads=1)
        b = blocked_pg_run(benchmark_model, y, true_theta, 20, 10, 15, 2, RngStream(2), threads=4)
        np.testing.assert_array_equal(a.states, b.states)

    def test_every_index_moves(self, benchmark_model, true_theta, short_benchmark_data):
        _, y = short_benchmark_data
        tr = blocked_pg_run(benchmark_model, y, true_theta, 50, 30, 20, 1, RngStream(3))
        moved = (np.diff(tr.states, axis=0) != 0).any(axis=0)
        assert moved[1:].all()

    def test_parameter_update(self, benchmark_model, short_benchmark_data):
        _, y = short_benchmark_data
        tr = blocked_pg_run(benchmark_model, y, None, 20, 30, 25, 1, RngStream(4), prior=InvGammaPrior())
        assert (tr.theta > 0).all() and np.ptp(tr.R) > 0
        assert tr.meta["theta_mode"] == "infer"

    def test_linear_gaussian_marginals(self, lg_model, lg_data, lg_oracle):
        from pgkit.diagnostics import batch_means_se

        tr = blocked_pg_run(lg_model.ssm(), lg_data[1], lg_model.params(), 20, 3001, 20, 2, RngStream(5))
        s = tr.states[1:]
        z = np.abs(s.mean(0) - lg_oracle.smoothed_means) / batch_means_se(s)
        assert z.max() < 4.5
        assert np.abs(s.var(0) / lg_oracle.smoothed_vars - 1).max() < 0.35
