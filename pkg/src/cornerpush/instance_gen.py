"""Seeded synthetic LP families.

Every instance comes with a feasible point built into its construction. The
transportation and assignment families get a large optimal face on purpose:
a set of lanes shares the minimum unit cost and can carry all the flow by
itself, so every flow on those lanes is optimal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .lp_model import EQ, GE, LE, LinearProgram, off_bound_distance

FAMILIES = ("degenerate_transport", "tied_cost_assignment", "random_dense", "random_sparse")

TIED_COST = 1.0


@dataclass(frozen=True)
class GenSpec:
    """What to generate.

    For the transport family ``n`` is a target: sources and sinks are split
    so that ``sources * sinks`` lands as close to it as possible. The
    assignment family uses ``m // 2`` agents and ignores ``n``.
    """

    family: str
    m: int
    n: Optional[int] = None
    degeneracy_knob: float = 0.8
    seed: int = 0
    density: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.n is not None and self.n < self.m:
            raise ValueError("n must be >= m")
        if not 0.0 <= self.degeneracy_knob <= 1.0:
            raise ValueError("degeneracy_knob must lie in [0, 1]")
        if self.family in ("degenerate_transport", "tied_cost_assignment") and self.m < 2:
            raise ValueError(f"{self.family} needs m >= 2")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")

    @property
    def instance_id(self) -> str:
        n = "auto" if self.n is None else self.n
        return f"{self.family}-m{self.m}-n{n}-k{self.degeneracy_knob:g}-s{self.seed}"


@dataclass(frozen=True, eq=False)
class GeneratedInstance:
    spec: GenSpec
    lp: LinearProgram
    certificate: np.ndarray
    optimal_value: Optional[float] = None
    face_dimension: Optional[int] = None


def generate(spec: GenSpec) -> LinearProgram:
    return generate_instance(spec).lp


def generate_instance(spec: GenSpec) -> GeneratedInstance:
    builder = {
        "degenerate_transport": _transport,
        "tied_cost_assignment": _assignment,
        "random_dense": _random,
        "random_sparse": _random,
    }[spec.family]
    return builder(spec, np.random.default_rng(spec.seed))


def _split(m: int, n: Optional[int]) -> int:
    """Number of sources ``s`` (``s <= m/2``) so that ``s * (m - s)`` is near ``n``."""
    if n is None:
        n = min(20 * m, (m // 2) * (m - m // 2))
    disc = m * m - 4 * n
    s = (m - math.sqrt(disc)) / 2 if disc > 0 else m / 2
    return int(min(max(round(s), 1), m // 2))


def _bipartite_lp(spec, rng, S, D, tied_mask, flow, supply, demand, name):
    n = S * D
    # lane (i, j) is column i * D + j
    rows = np.concatenate([np.repeat(np.arange(S), D), S + np.tile(np.arange(D), S)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    A = sp.csc_matrix((np.ones(2 * n), (rows, cols)), shape=(S + D, n))
    cost = np.where(tied_mask, TIED_COST, TIED_COST + rng.uniform(0.5, 4.0, n))
    if not tied_mask.any():
        cost = rng.uniform(1.0, 5.0, n)
    lp = LinearProgram(
        A=A,
        b=np.concatenate([supply, demand]),
        c=cost,
        row_sense=np.full(S + D, EQ),
        lb=np.zeros(n),
        ub=np.full(n, np.inf),
        row_names=tuple([f"src{i}" for i in range(S)] + [f"dst{j}" for j in range(D)]),
        col_names=tuple(f"x_{i}_{j}" for i in range(S) for j in range(D)),
        name=name,
    )
    opt = face = None
    if tied_mask.any():
        opt = TIED_COST * float(supply.sum())
        face = int(tied_mask.sum()) - (S + D - 1)
    return GeneratedInstance(spec, lp, flow, opt, face)


def _transport(spec: GenSpec, rng) -> GeneratedInstance:
    m = spec.m
    S = _split(m, spec.n)
    D = m - S
    n = S * D
    tied = np.zeros((S, D), dtype=bool)
    if spec.degeneracy_knob > 0:
        # spanning tree: source 0 to every sink, every source to sink 0
        tied[0, :] = True
        tied[:, 0] = True
        want = min(n, math.ceil(spec.degeneracy_knob * (n - m)) + m - 1)
        free = np.flatnonzero(~tied.ravel())
        extra = want - int(tied.sum())
        if extra > 0:
            tied.ravel()[rng.choice(free, size=min(extra, free.size), replace=False)] = True
        support = tied.copy()
    else:
        support = np.zeros((S, D), dtype=bool)
        support[0, :] = True
        support[:, 0] = True
    flow = np.where(support, rng.integers(1, 10, size=(S, D)), 0).astype(float)
    supply = flow.sum(axis=1)
    demand = flow.sum(axis=0)
    return _bipartite_lp(spec, rng, S, D, tied.ravel(), flow.ravel(), supply, demand,
                         spec.instance_id)


def _assignment(spec: GenSpec, rng) -> GeneratedInstance:
    k = spec.m // 2
    n = k * k
    perms = []
    if spec.degeneracy_knob > 0:
        # identity plus a cyclic shift keeps the tied lanes connected
        perms = [np.arange(k), np.roll(np.arange(k), 1)]
        target = min(n, math.ceil(spec.degeneracy_knob * (n - 2 * k)) + 2 * k - 1)
        covered = np.zeros((k, k), dtype=bool)
        for p in perms:
            covered[np.arange(k), p] = True
        for _ in range(50 * k):
            if covered.sum() >= target:
                break
            p = rng.permutation(k)
            perms.append(p)
            covered[np.arange(k), p] = True
    else:
        perms = [np.arange(k)]
    counts = np.zeros((k, k))
    for p in perms:
        counts[np.arange(k), p] += 1.0
    flow = counts / len(perms)
    tied = (counts > 0).ravel() if spec.degeneracy_knob > 0 else np.zeros(n, dtype=bool)
    inst = _bipartite_lp(spec, rng, k, k, tied, flow.ravel(), np.ones(k), np.ones(k),
                         spec.instance_id)
    return inst


def _random(spec: GenSpec, rng) -> GeneratedInstance:
    m = spec.m
    n = spec.n if spec.n is not None else 2 * m
    if spec.family == "random_dense":
        A = rng.standard_normal((m, n))
        A[np.abs(A) < 1e-3] = 1e-3
        A = sp.csc_matrix(A)
    else:
        A = sp.random(m, n, density=spec.density, random_state=rng,
                      data_rvs=rng.standard_normal, format="lil")
        # every row and column gets at least one entry
        for i in range(m):
            A[i, rng.integers(n)] = rng.standard_normal() + 2.0
        for j in range(n):
            A[rng.integers(m), j] = rng.standard_normal() + 2.0
        A = sp.csc_matrix(A)
    finite_ub = rng.random(n) < 0.5
    ub = np.where(finite_ub, rng.uniform(1.0, 5.0, n), np.inf)
    lb = np.zeros(n)
    x0 = np.where(finite_ub, rng.uniform(0.2, 0.8, n) * np.where(finite_ub, ub, 1.0),
                  rng.uniform(0.5, 2.0, n))
    sense = rng.choice(np.array([LE, GE, EQ]), size=m)
    Ax0 = A @ x0
    gap = rng.uniform(0.1, 1.0, m)
    b = np.where(sense == LE, Ax0 + gap, np.where(sense == GE, Ax0 - gap, Ax0))
    y0 = np.where(sense == LE, -rng.uniform(0.0, 1.0, m),
                  np.where(sense == GE, rng.uniform(0.0, 1.0, m), rng.standard_normal(m)))
    z0 = np.where(finite_ub, rng.standard_normal(n), rng.uniform(0.1, 1.0, n))
    tie = rng.random(n) < spec.degeneracy_knob
    z0[tie] = 0.0
    c = A.T @ y0 + z0
    lp = LinearProgram(A=A, b=b, c=c, row_sense=sense, lb=lb, ub=ub, name=spec.instance_id)
    return GeneratedInstance(spec, lp, x0)


def certificate_residual(inst: GeneratedInstance) -> float:
    """Largest constraint or bound violation of the built-in feasible point."""
    lp, x = inst.lp, inst.certificate
    ax = lp.A @ x
    r = lp.b - ax
    viol = np.where(lp.row_sense == EQ, np.abs(r),
                    np.where(lp.row_sense == LE, np.maximum(-r, 0.0), np.maximum(r, 0.0)))
    bnd = np.maximum(np.maximum(lp.lb - x, x - lp.ub), 0.0)
    return float(max(viol.max(initial=0.0), bnd.max(initial=0.0)))


def candidate_count(lp: LinearProgram, iterate, eps_abs: float = 1e-6) -> int:
    """Columns that are off their bounds and have a near-zero reduced cost."""
    off = off_bound_distance(lp.lb, lp.ub, iterate.x) > eps_abs
    return int(np.count_nonzero(off & (np.abs(iterate.z) < eps_abs)))


def is_corner_push_candidate(lp: LinearProgram, iterate, eps_abs: float = 1e-6,
                             row_mult: float = 2.0, abs_floor: int = 50) -> bool:
    """Whether the iterate leaves enough free columns to be worth a corner push.

    The full-scale rule is ``count >= max(2m, 100000)``; the floor defaults to a
    desk-sized 50.
    """
    return candidate_count(lp, iterate, eps_abs) >= max(row_mult * lp.num_rows, abs_floor)


def degenerate_suite(count: int, m_range=(50, 200), knob: float = 0.8, seed: int = 0,
                     family: str = "degenerate_transport") -> list[GenSpec]:
    """Seeded list of specs for a suite of degenerate instances."""
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        n = int(rng.integers(2 * m, 20 * m + 1))
        specs.append(GenSpec(family, m, n, knob, seed=int(rng.integers(2**31))))
    return specs


def random_suite(count: int, m_range=(5, 40), seed: int = 0,
                 family: str = "random_sparse", knob: float = 0.0) -> list[GenSpec]:
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        n = int(rng.integers(2 * m, 4 * m + 1))
        specs.append(GenSpec(family, m, n, knob, seed=int(rng.integers(2**31)), density=0.3))
    return specs
