import numpy as np
import pytest
from scipy.optimize import linprog

from cornerpush.crossover import CrossoverStatus, run_crossover
from cornerpush.instance_gen import GenSpec, generate
from cornerpush.lp_model import EQ, GE, LE, LinearProgram, Tolerances
from cornerpush.oracle import enumerate_vertices, simplex_solve
from cornerpush.pdhg import PdhgConfig, solve_pdhg

from kkt_oracle import dense_kkt

# computed once by the simplex oracle and cross-checked against an independent LP solver
RANDOM_DENSE_10x25 = {
    0: -5.213267943696453,
    1: -43.568640581069985,
    2: -22.970823557089634,
    3: -1.730784164094627,
    4: -36.72070268244679,
}


def uniform_transport():
    supply, demand = [3.0, 4.0, 5.0], [2.0, 6.0, 4.0]
    A = np.zeros((6, 9))
    for i in range(3):
        for j in range(3):
            A[i, 3 * i + j] = 1.0
            A[3 + j, 3 * i + j] = 1.0
    return LinearProgram.from_dense(A, supply + demand, np.ones(9))


def scipy_bounds(lp):
    return [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
            for lo, hi in zip(lp.lb, lp.ub)]


def scipy_solve(lp):
    A = lp.A.toarray()
    le, ge, eq = lp.row_sense == LE, lp.row_sense == GE, lp.row_sense == EQ
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([lp.b[le], -lp.b[ge]])
    return linprog(lp.c, A_ub=A_ub if A_ub.size else None, b_ub=b_ub if A_ub.size else None,
                   A_eq=A[eq] if eq.any() else None, b_eq=lp.b[eq] if eq.any() else None,
                   bounds=scipy_bounds(lp), method="highs")


def test_single_variable():
    lp = LinearProgram.from_dense([[1.0]], [1.0], [-1.0], row_sense=[LE])
    res = simplex_solve(lp)
    assert res.optimal
    assert res.x[0] == pytest.approx(1.0)
    assert res.objective == pytest.approx(-1.0)


def test_uniform_transport_objective():
    res = simplex_solve(uniform_transport())
    assert res.objective == pytest.approx(12.0)


@pytest.mark.parametrize("seed", sorted(RANDOM_DENSE_10x25))
def test_frozen_random_dense(seed):
    lp = generate(GenSpec("random_dense", 10, 25, 0.0, seed=seed))
    res = simplex_solve(lp)
    assert res.objective == pytest.approx(RANDOM_DENSE_10x25[seed], rel=1e-9)
    assert scipy_solve(lp).fun == pytest.approx(RANDOM_DENSE_10x25[seed], rel=1e-7)


@pytest.mark.parametrize("seed", sorted(RANDOM_DENSE_10x25))
def test_pipeline_matches_oracle(seed):
    lp = generate(GenSpec("random_dense", 10, 25, 0.0, seed=seed))
    first = solve_pdhg(lp, PdhgConfig(tol=Tolerances(eps_rel=1e-9)))
    assert first.converged
    out = run_crossover(lp, first.iterate)
    assert out.status is CrossoverStatus.OPTIMAL_BASIS
    assert lp.objective(out.x) == pytest.approx(RANDOM_DENSE_10x25[seed], rel=1e-6)


@pytest.mark.parametrize("family,seed", [("random_sparse", s) for s in range(4)]
                         + [("degenerate_transport", s) for s in range(3)])
def test_optimal_basis_residuals(family, seed):
    lp = generate(GenSpec(family, 12, 30, 0.0 if family == "random_sparse" else 0.8,
                          seed=seed, density=0.3))
    res = simplex_solve(lp)
    k = dense_kkt(lp, res.x, res.y)
    assert np.max(np.abs(k["r_primal"]), initial=0.0) <= 1e-9
    assert np.max(np.abs(k["r_dual"]), initial=0.0) <= 1e-9
    assert res.objective == pytest.approx(scipy_solve(lp).fun, rel=1e-9, abs=1e-12)


def test_infeasible():
    lp = LinearProgram.from_dense([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0], [1.0, 1.0])
    assert simplex_solve(lp).status == "Infeasible"


def test_unbounded():
    lp = LinearProgram.from_dense([[1.0, -1.0]], [0.0], [-1.0, 0.0])
    assert simplex_solve(lp).status == "Unbounded"


def test_free_and_boxed_columns():
    lp = LinearProgram.from_dense([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]], [2.0, -1.0], [1.0, -2.0, 3.0],
                                  row_sense=[GE, LE], lb=[-np.inf, -3.0, -1.0], ub=[np.inf, 4.0, 1.0])
    assert simplex_solve(lp).objective == pytest.approx(scipy_solve(lp).fun, rel=1e-9)


class TestVertices:
    def test_unit_box(self):
        lp = LinearProgram.from_dense(np.eye(2), [1.0, 1.0], np.zeros(2), row_sense=[LE, LE])
        verts = enumerate_vertices(lp)
        assert len(verts) == 4
        assert {tuple(np.round(v, 9)) for v in verts} == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_simplex(self):
        lp = LinearProgram.from_dense(np.ones((1, 3)), [1.0], np.zeros(3))
        verts = enumerate_vertices(lp)
        assert len(verts) == 3
        np.testing.assert_allclose(sorted(map(tuple, verts)), [(0, 0, 1), (0, 1, 0), (1, 0, 0)])

    def test_uniform_transport_every_vertex_optimal(self):
        lp = uniform_transport()
        verts = enumerate_vertices(lp)
        assert len(verts) == 16
        assert all(lp.objective(v) == pytest.approx(12.0) for v in verts)

    def test_size_guard(self):
        lp = LinearProgram.from_dense(np.ones((1, 20)), [1.0], np.zeros(20))
        with pytest.raises(ValueError, match="free dimensions"):
            enumerate_vertices(lp)
