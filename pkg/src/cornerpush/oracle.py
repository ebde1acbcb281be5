"""Brute-force reference solvers for tests.

Deliberately naive and independent of :mod:`cornerpush.crossover`: the model
is rewritten into ``min c'u, Mu = r, u >= 0`` form with its own
substitutions and solved by a dense two-phase simplex that refactors the
basis from scratch every iteration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .lp_model import GE, LE, LinearProgram


class OracleError(RuntimeError):
    pass


@dataclass
class OracleResult:
    status: str
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "Optimal"


class _StandardForm:
    """``x = shift + T u`` with ``u >= 0``; rows of ``M u = r`` come first
    from the original rows (times ``row_sign``), then one per finite box."""

    def __init__(self, lp: LinearProgram):
        A = lp.A.toarray()
        m, n = A.shape
        cols = []          # (original column, coefficient) for each u
        shift = np.zeros(n)
        box_rows = []      # (u index, width)
        for j in range(n):
            lo, hi = lp.lb[j], lp.ub[j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    box_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        n_struct = len(cols)
        slack_rows = [i for i in range(m) if lp.row_sense[i] in (LE, GE)]
        N = n_struct + len(slack_rows) + len(box_rows)
        R = m + len(box_rows)
        M = np.zeros((R, N))
        cost = np.zeros(N)
        T = np.zeros((n, N))
        for k, (j, s) in enumerate(cols):
            M[:m, k] = s * A[:, j]
            cost[k] = s * lp.c[j]
            T[j, k] = s
        for k, i in enumerate(slack_rows):
            M[i, n_struct + k] = 1.0 if lp.row_sense[i] == LE else -1.0
        rhs = np.concatenate([lp.b - A @ shift, np.zeros(len(box_rows))])
        for k, (u, width) in enumerate(box_rows):
            M[m + k, u] = 1.0
            M[m + k, n_struct + len(slack_rows) + k] = 1.0
            rhs[m + k] = width
        self.row_sign = np.where(rhs < 0, -1.0, 1.0)
        self.M = M * self.row_sign[:, None]
        self.rhs = rhs * self.row_sign
        self.cost = cost
        self.T = T
        self.shift = shift
        self.m = m
        self.lp = lp

    def to_x(self, u: np.ndarray) -> np.ndarray:
        return self.shift + self.T @ u


def _simplex(M, rhs, cost, basis, blocked, max_iter, tol=1e-9, stall_limit=30):
    """Revised simplex on ``min cost'u, Mu = rhs, u >= 0`` from a feasible basis.

    Columns flagged ``blocked`` never enter, and while basic they must stay at
    zero (used for artificials after phase 1).
    """
    R, N = M.shape
    basis = list(basis)
    stall = 0
    for it in range(max_iter):
        lu = sla.lu_factor(M[:, basis])
        ub = sla.lu_solve(lu, rhs)
        y = sla.lu_solve(lu, cost[basis], trans=1)
        d = cost - M.T @ y
        d[basis] = 0.0
        d[blocked] = 0.0
        cand = np.flatnonzero(d < -tol)
        if cand.size == 0:
            return "Optimal", basis, it
        bland = stall >= stall_limit
        q = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
        w = sla.lu_solve(lu, M[:, q])
        ratios = np.full(R, np.inf)
        pos = w > tol
        ratios[pos] = np.maximum(ub[pos], 0.0) / w[pos]
        stuck = np.array([blocked[b] for b in basis]) & (np.abs(w) > tol)
        ratios[stuck] = 0.0
        if not np.isfinite(ratios).any():
            return "Unbounded", basis, it
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12)
        if bland:
            r = int(ties[np.argmin([basis[t] for t in ties])])
        else:
            r = int(ties[np.argmax(np.abs(w[ties]))])
        stall = stall + 1 if rmin <= 1e-12 else 0
        basis[r] = q
    raise OracleError("simplex iteration limit reached")


def simplex_solve(lp: LinearProgram, max_iter: Optional[int] = None) -> OracleResult:
    """Optimal basic solution of ``lp`` (status ``Optimal``, ``Infeasible`` or ``Unbounded``)."""
    sf = _StandardForm(lp)
    M, rhs = sf.M, sf.rhs
    R, N = M.shape
    max_iter = max_iter or 50 * (R + N) + 1000
    # phase 1 with one artificial per row
    M1 = np.hstack([M, np.eye(R)])
    cost1 = np.concatenate([np.zeros(N), np.ones(R)])
    blocked1 = np.zeros(N + R, dtype=bool)
    status, basis, it1 = _simplex(M1, rhs, cost1, range(N, N + R), blocked1, max_iter)
    u = np.zeros(N + R)
    u[basis] = sla.lu_solve(sla.lu_factor(M1[:, basis]), rhs)
    if u[N:].sum() > 1e-7 * (1.0 + np.abs(rhs).sum()):
        return OracleResult("Infeasible", iterations=it1)
    cost2 = np.concatenate([sf.cost, np.zeros(R)])
    blocked2 = np.concatenate([np.zeros(N, dtype=bool), np.ones(R, dtype=bool)])
    status, basis, it2 = _simplex(M1, rhs, cost2, basis, blocked2, max_iter)
    if status != "Optimal":
        return OracleResult(status, iterations=it1 + it2)
    lu = sla.lu_factor(M1[:, basis])
    u = np.zeros(N + R)
    u[basis] = sla.lu_solve(lu, rhs)
    u = np.maximum(u, 0.0)
    yr = sla.lu_solve(lu, cost2[basis], trans=1) * sf.row_sign
    x = sf.to_x(u[:N])
    y = yr[: sf.m]
    z = lp.c - lp.AT @ y
    return OracleResult("Optimal", x, y, z, lp.objective(x), it1 + it2)


def _independent_rows(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if M.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, Rq, piv = sla.qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rq))
    rank = int(np.sum(diag > tol * max(diag.max(initial=0.0), 1.0)))
    return np.sort(piv[:rank])


def enumerate_vertices(lp: LinearProgram, max_free_dim: int = 12,
                       max_bases: int = 2_000_000, tol: float = 1e-9) -> list[np.ndarray]:
    """All basic feasible solutions of ``lp`` by brute-force basis enumeration.

    Refuses models whose standard form has more than ``max_free_dim`` columns
    beyond its rank. Points are deduplicated within ``tol``.
    """
    sf = _StandardForm(lp)
    rows = _independent_rows(sf.M)
    M, rhs = sf.M[rows], sf.rhs[rows]
    r, N = M.shape
    if N - r > max_free_dim:
        raise ValueError(f"standard form has {N - r} free dimensions (limit {max_free_dim})")
    if math.comb(N, r) > max_bases:
        raise ValueError(f"{math.comb(N, r)} candidate bases exceed the limit {max_bases}")
    found: list[np.ndarray] = []
    for combo in itertools.combinations(range(N), r):
        B = M[:, combo]
        if r and np.linalg.matrix_rank(B) < r:
            continue
        u = np.zeros(N)
        if r:
            u[list(combo)] = np.linalg.solve(B, rhs)
        if np.any(u < -tol) or np.max(np.abs(M @ u - rhs), initial=0.0) > 1e-7:
            continue
        x = sf.to_x(np.maximum(u, 0.0))
        if not any(np.max(np.abs(x - v)) <= tol for v in found):
            found.append(x)
    return found


def has_unique_optimum(lp: LinearProgram, trials: int = 2, delta: float = 1e-6,
                       seed: int = 0, tol: float = 1e-6) -> bool:
    """Whether small random objective perturbations keep the same optimal point."""
    base = simplex_solve(lp)
    if not base.optimal:
        raise OracleError(f"model is {base.status}")
    rng = np.random.default_rng(seed)
    scale = delta * max(1.0, float(np.abs(lp.c).max()))
    for _ in range(trials):
        pert = lp.replace(c=lp.c + scale * rng.uniform(-1.0, 1.0, lp.num_cols))
        other = simplex_solve(pert)
        if not other.optimal or np.max(np.abs(other.x - base.x)) > tol * (1 + np.abs(base.x).max()):
            return False
    return True
