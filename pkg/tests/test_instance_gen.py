import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from cornerpush.instance_gen import (FAMILIES, GenSpec, candidate_count, certificate_residual,
                                     degenerate_suite, generate, generate_instance,
                                     is_corner_push_candidate, random_suite)
from cornerpush.lp_model import Iterate, LinearProgram
from cornerpush.oracle import has_unique_optimum, simplex_solve
from cornerpush.pdhg import solve_pdhg

specs = st.builds(
    GenSpec,
    family=st.sampled_from(FAMILIES),
    m=st.integers(2, 24),
    n=st.none(),
    degeneracy_knob=st.sampled_from([0.0, 0.3, 0.8, 1.0]),
    seed=st.integers(0, 2**31 - 1),
    density=st.sampled_from([0.2, 0.5]),
)


def tied_face(lp):
    """Dimension of the min-cost lane face and the largest uniform flow it admits."""
    tied = lp.c == lp.c.min()
    A = lp.A.toarray()[:, tied]
    k = int(tied.sum())
    res = linprog(np.r_[np.zeros(k), -1.0],
                  A_eq=np.c_[A, np.zeros(lp.num_rows)], b_eq=lp.b,
                  A_ub=np.c_[-np.eye(k), np.ones(k)], b_ub=np.zeros(k),
                  bounds=[(0, None)] * k + [(0, 1)])
    return k - np.linalg.matrix_rank(A), res.x[-1]


@given(specs)
@settings(max_examples=60)
def test_certificate_is_feasible(spec):
    inst = generate_instance(spec)
    assert certificate_residual(inst) <= 1e-12
    assert inst.lp.num_rows == (spec.m // 2 * 2 if spec.family == "tied_cost_assignment" else spec.m)


@given(specs)
@settings(max_examples=30)
def test_seed_determinism(spec):
    a, b = generate(spec), generate(spec)
    assert a.equals(b)
    assert a.c.tobytes() == b.c.tobytes()


@pytest.mark.parametrize("family", ["degenerate_transport", "tied_cost_assignment"])
@pytest.mark.parametrize("seed", range(3))
def test_face_dimension(family, seed):
    inst = generate_instance(GenSpec(family, 12, 30, 0.8, seed=seed))
    lp = inst.lp
    dim, t = tied_face(lp)
    # the face has an interior point, so its dimension is columns minus rank
    assert t > 0
    assert inst.face_dimension == dim
    assert dim >= 0.8 * (lp.num_cols - lp.num_rows)
    ref = linprog(lp.c, A_eq=lp.A.toarray(), b_eq=lp.b, bounds=(0, None))
    assert inst.optimal_value == pytest.approx(ref.fun, rel=1e-9)


def test_transport_split_targets_n():
    lp = generate(GenSpec("degenerate_transport", 20, 96, 0.8, seed=0))
    assert lp.num_rows == 20
    assert lp.num_cols == 96


def test_random_families_have_known_certificate():
    inst = generate_instance(GenSpec("random_dense", 10, 25, 0.0, seed=3))
    assert certificate_residual(inst) <= 1e-12
    assert inst.optimal_value is None


@pytest.mark.parametrize("family,kw", [("degenerate_transport", {"n": 15}),
                                       ("random_sparse", {"n": 20, "density": 0.3})])
def test_knob_zero_gives_unique_optimum(family, kw):
    unique = sum(has_unique_optimum(generate(GenSpec(family, 8, degeneracy_knob=0.0, seed=s, **kw)))
                 for s in range(20))
    assert unique >= 19


def test_degenerate_suite_mostly_candidates():
    specs = degenerate_suite(10, (20, 40), knob=0.8, seed=1)
    hits = 0
    for spec in specs:
        lp = generate(spec)
        hits += is_corner_push_candidate(lp, solve_pdhg(lp).iterate)
    assert hits >= 8


class TestCandidateRule:
    def lp(self, m, n):
        return LinearProgram.from_dense(np.zeros((m, n)), np.zeros(m), np.zeros(n),
                                        ub=np.full(n, 2.0))

    def iterate(self, lp, free):
        x = np.zeros(lp.num_cols)
        x[:free] = 1.0
        return Iterate(x, np.zeros(lp.num_rows), np.zeros(lp.num_cols))

    def test_threshold_arithmetic(self):
        lp = self.lp(10, 30)
        it = self.iterate(lp, 20)
        assert candidate_count(lp, it) == 20
        assert not is_corner_push_candidate(lp, it, abs_floor=50)
        assert is_corner_push_candidate(lp, it, abs_floor=15)

    def test_nonzero_reduced_cost_does_not_count(self):
        lp = self.lp(10, 30)
        it = self.iterate(lp, 20)
        z = np.zeros(30)
        z[:5] = 1.0
        assert candidate_count(lp, Iterate(it.x, it.y, z)) == 15

    def test_basic_solution_is_not_candidate(self):
        lp = generate(GenSpec("random_dense", 10, 25, 0.0, seed=0))
        opt = simplex_solve(lp)
        it = Iterate(opt.x, opt.y, opt.z)
        assert candidate_count(lp, it) <= lp.num_rows
        assert not is_corner_push_candidate(lp, it, row_mult=2, abs_floor=0)


class TestSpecValidation:
    @pytest.mark.parametrize("kw", [dict(family="nope", m=4), dict(family="random_dense", m=0),
                                    dict(family="random_dense", m=5, n=3),
                                    dict(family="random_dense", m=5, degeneracy_knob=1.5),
                                    dict(family="degenerate_transport", m=1),
                                    dict(family="random_sparse", m=5, density=0.0)])
    def test_rejected(self, kw):
        with pytest.raises(ValueError):
            GenSpec(**kw)

    def test_instance_id(self):
        assert GenSpec("random_dense", 4, 9, 0.5, seed=2).instance_id == "random_dense-m4-n9-k0.5-s2"
        assert GenSpec("tied_cost_assignment", 6).instance_id.endswith("-nauto-k0.8-s0")


def test_suites_are_seeded():
    assert degenerate_suite(5, seed=3) == degenerate_suite(5, seed=3)
    assert random_suite(5, seed=3) == random_suite(5, seed=3)
    for spec in degenerate_suite(20, (50, 200), seed=0):
        assert 50 <= spec.m <= 200 and 2 * spec.m <= spec.n <= 20 * spec.m
