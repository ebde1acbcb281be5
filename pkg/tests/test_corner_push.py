import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerpush.corner_push import (CornerPushConfig, build_corner_model, run_corner_push,
                                    trajectory_csv)
from cornerpush.crossover import CrossoverStatus, run_crossover
from cornerpush.instance_gen import GenSpec, generate, random_suite
from cornerpush.lp_model import EQ, GE, LE, Iterate, LinearProgram, Tolerances, off_bound_count
from cornerpush.oracle import simplex_solve
from cornerpush.pdhg import PdhgConfig, Status, solve_pdhg


def three_columns():
    A = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, 0.0]])
    return LinearProgram.from_dense(A, [9.0, 1.0], [1.0, 2.0, 3.0], row_sense=[LE, GE])


class TestBuildModel:
    def test_nothing_fires_when_duals_are_small(self):
        lp = three_columns()
        it = Iterate(np.array([2.0, 3.0, 4.0]), np.full(2, 1e-7), np.full(3, 5e-7))
        model = build_corner_model(lp, it)
        clp = model.to_lp()
        np.testing.assert_array_equal(clp.lb, lp.lb)
        np.testing.assert_array_equal(clp.ub, lp.ub)
        np.testing.assert_array_equal(clp.row_sense, lp.row_sense)
        assert model.rows_to_eq.size == 0
        assert not np.array_equal(clp.c, lp.c)

    def test_bound_map(self):
        lp = three_columns()
        it = Iterate(np.array([2.0, 3.0, 4.0]), np.zeros(2), np.array([-1.0, 0.0, 1.0]))
        clp = build_corner_model(lp, it, eps_abs=1e-6).to_lp()
        assert clp.lb[0] == 2.0 and clp.ub[0] == np.inf
        assert clp.lb[1] == 0.0 and clp.ub[1] == np.inf
        assert clp.lb[2] == 0.0 and clp.ub[2] == 4.0

    def test_rows_with_nonzero_dual_become_equalities(self):
        lp = three_columns()
        it = Iterate(np.array([2.0, 3.0, 4.0]), np.array([-0.5, 0.0]), np.zeros(3))
        model = build_corner_model(lp, it)
        assert model.rows_to_eq.tolist() == [0]
        assert model.to_lp().row_sense.tolist() == [EQ, GE]

    def test_seeded_objective_is_reproducible(self):
        lp = LinearProgram.from_dense(np.ones((1, 5)), [1.0], np.zeros(5))
        it = Iterate.from_xy(lp, np.full(5, 0.2), np.zeros(1))
        a = build_corner_model(lp, it, seed=42).random_obj
        b = build_corner_model(lp, it, seed=42).random_obj
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, build_corner_model(lp, it, seed=43).random_obj)

    @given(st.integers(0, 2**31 - 1), st.sampled_from([1e-6, 1e-4, 1.0, 3.0]))
    @settings(max_examples=25)
    def test_objective_range(self, seed, scale):
        lp = LinearProgram.from_dense(np.ones((1, 7)), [1.0], np.zeros(7))
        it = Iterate.from_xy(lp, np.full(7, 1 / 7), np.zeros(1))
        obj = build_corner_model(lp, it, obj_scale=scale, seed=seed).random_obj
        assert np.all(obj >= 0.0) and np.all(obj <= scale)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25)
    def test_only_bounds_senses_objective_change(self, seed):
        lp = generate(GenSpec("random_sparse", 6, 15, 0.5, seed=seed, density=0.4))
        rng = np.random.default_rng(seed)
        it = Iterate(rng.uniform(0, 1, 15), rng.standard_normal(6), rng.standard_normal(15))
        clp = build_corner_model(lp, it).to_lp()
        assert (clp.A != lp.A).nnz == 0
        np.testing.assert_array_equal(clp.b, lp.b)
        # fixing only ever tightens the box
        assert np.all(clp.lb >= lp.lb) and np.all(clp.ub <= lp.ub)
        changed = clp.row_sense != lp.row_sense
        assert np.all(clp.row_sense[changed] == EQ)

    def test_dimension_mismatch(self):
        lp = three_columns()
        with pytest.raises(ValueError):
            build_corner_model(lp, Iterate(np.zeros(2), np.zeros(2), np.zeros(2)))

    def test_bad_scale(self):
        lp = three_columns()
        with pytest.raises(ValueError):
            build_corner_model(lp, Iterate(np.zeros(3), np.zeros(2), np.zeros(3)), obj_scale=0.0)


@pytest.fixture(scope="module")
def degenerate_run():
    lp = generate(GenSpec("degenerate_transport", 30, 150, 0.8, seed=7))
    first = solve_pdhg(lp)
    assert first.converged
    return lp, first, run_corner_push(lp, first)


class TestRunCornerPush:
    def test_returns_original_duals(self, degenerate_run):
        lp, first, res = degenerate_run
        assert res.converged
        np.testing.assert_array_equal(res.y, first.iterate.y)
        np.testing.assert_array_equal(res.z, first.iterate.z)
        np.testing.assert_array_equal(res.iterate.x, res.x_hat)

    def test_termination_rule(self, degenerate_run):
        lp, _, res = degenerate_run
        assert res.iterations >= 100
        assert res.target_norm == pytest.approx(1e-6 * (1 + lp.b_norm))
        last_k, _, last_res = res.trajectory[-1]
        assert last_k == res.iterations
        assert last_res <= res.target_norm
        assert all(k < 100 or r > res.target_norm for k, _, r in res.trajectory[:-1])

    def test_bound_map_soundness(self, degenerate_run):
        _, first, res = degenerate_run
        x, z = first.iterate.x, first.iterate.z
        lo, hi = z < -1e-6, z > 1e-6
        assert np.all(res.x_hat[lo] >= x[lo])
        assert np.all(res.x_hat[hi] <= x[hi])

    def test_off_bound_trend(self, degenerate_run):
        lp, first, res = degenerate_run
        assert res.off_bound_before == off_bound_count(lp, first.iterate.x, 1e-6)
        assert min(count for _, count, _ in res.trajectory) <= res.off_bound_before
        assert res.off_bound_after < res.off_bound_before

    def test_fewer_primal_pushes(self, degenerate_run):
        lp, first, res = degenerate_run
        before = run_crossover(lp, first.iterate)
        after = run_crossover(lp, res.iterate)
        assert after.status is CrossoverStatus.OPTIMAL_BASIS
        assert after.primal_pushes < before.primal_pushes
        assert lp.objective(after.x) == pytest.approx(lp.objective(before.x), rel=1e-6)

    def test_deterministic(self, degenerate_run):
        lp, first, res = degenerate_run
        again = run_corner_push(lp, first)
        assert again.x_hat.tobytes() == res.x_hat.tobytes()
        assert again.trajectory == res.trajectory

    def test_rejects_unconverged_start(self):
        lp = generate(GenSpec("random_dense", 10, 25, 0.0, seed=1))
        bad = solve_pdhg(lp, PdhgConfig(tol=Tolerances(max_iters=5)))
        assert bad.status is Status.ITER_LIMIT
        with pytest.raises(ValueError, match="converged"):
            run_corner_push(lp, bad)

    def test_iteration_limit_returns_last_iterate(self, degenerate_run):
        lp, first, _ = degenerate_run
        res = run_corner_push(lp, first, CornerPushConfig(max_iters=30))
        assert res.status is Status.ITER_LIMIT
        assert res.iterations == 30
        assert res.x_hat.shape == (lp.num_cols,)

    @pytest.mark.parametrize("spec", random_suite(8, (5, 30), seed=3), ids=lambda s: s.instance_id)
    def test_near_vertex_start_does_not_add_off_bound_columns(self, spec):
        # nondegenerate instances: PDHG already lands next to the unique vertex
        lp = generate(spec)
        first = solve_pdhg(lp)
        res = run_corner_push(lp, first)
        assert res.off_bound_after <= res.off_bound_before
        out = run_crossover(lp, res.iterate)
        assert out.status is CrossoverStatus.OPTIMAL_BASIS
        assert lp.objective(out.x) == pytest.approx(simplex_solve(lp).objective, rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_objective_preserved_from_exact_optimum(self, seed):
        lp = generate(GenSpec("degenerate_transport", 20, 60, 0.8, seed=seed))
        opt = simplex_solve(lp)
        res = run_corner_push(lp, Iterate(opt.x, opt.y, opt.z), CornerPushConfig(eps_rel=1e-9))
        assert res.converged
        assert float(lp.c @ res.x_hat) == pytest.approx(opt.objective, rel=1e-6)


def test_trajectory_csv(degenerate_run):
    _, _, res = degenerate_run
    rows = list(csv.reader(io.StringIO(trajectory_csv(res, "inst"))))
    assert rows[0] == ["instance", "iteration", "off_bound_count", "primal_residual"]
    assert len(rows) == len(res.trajectory) + 1
    assert [int(r[1]) for r in rows[1:]] == [k for k, _, _ in res.trajectory]
    assert float(rows[-1][3]) == res.trajectory[-1][2]
    plain = list(csv.reader(io.StringIO(trajectory_csv(res))))
    assert plain[0] == ["iteration", "off_bound_count", "primal_residual"]
