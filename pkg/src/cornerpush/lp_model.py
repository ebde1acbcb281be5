"""LP data model, canonical form conversion and KKT residuals.

Models are minimization problems in general form::

    min  c'x + obj_constant
    s.t. a_i'x  (<=, >=, =)  b_i     for each row i
         lb <= x <= ub

Row senses are stored as single characters ``'L'``, ``'G'`` and ``'E'``.
Duals follow the Lagrangian ``c'x + y'(b - Ax)``, so ``y_i <= 0`` on ``'L'``
rows and ``y_i >= 0`` on ``'G'`` rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

LE, GE, EQ = "L", "G", "E"
SENSES = (LE, GE, EQ)


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """A general-form linear program.

    ``A`` is stored column-major (CSC). Infinite bounds use ``np.inf``.
    ``maximize`` records that the user objective was a maximization; ``c``
    is always the minimization objective.
    """

    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    row_sense: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj_constant: float = 0.0
    row_names: Optional[tuple] = None
    col_names: Optional[tuple] = None
    name: str = ""
    maximize: bool = False

    def __post_init__(self):
        A = sp.csc_matrix(self.A, dtype=float)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        m, n = A.shape
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        lb = np.asarray(self.lb, dtype=float).reshape(-1)
        ub = np.asarray(self.ub, dtype=float).reshape(-1)
        sense = np.asarray(self.row_sense, dtype="<U1").reshape(-1)
        if m < 1 or n < 1:
            raise ValueError(f"need at least one row and one column, got {m}x{n}")
        for label, vec, size in (("b", b, m), ("c", c, n), ("lb", lb, n),
                                 ("ub", ub, n), ("row_sense", sense, m)):
            if vec.shape[0] != size:
                raise ValueError(f"{label} has length {vec.shape[0]}, expected {size}")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(c)):
            raise ValueError("b and c must be finite")
        if not np.all(np.isfinite(A.data)):
            raise ValueError("matrix entries must be finite")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)):
            raise ValueError("bounds must not be NaN")
        if np.any(lb == np.inf) or np.any(ub == -np.inf):
            raise ValueError("lb may not be +inf and ub may not be -inf")
        bad = np.flatnonzero(lb > ub)
        if bad.size:
            j = int(bad[0])
            raise ValueError(f"inconsistent bounds on column {j}: lb={lb[j]} > ub={ub[j]}")
        unknown = set(np.unique(sense)) - set(SENSES)
        if unknown:
            raise ValueError(f"unknown row senses {sorted(unknown)}")
        if self.row_names is not None and len(self.row_names) != m:
            raise ValueError("row_names length mismatch")
        if self.col_names is not None and len(self.col_names) != n:
            raise ValueError("col_names length mismatch")
        for arr in (b, c, lb, ub, sense):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        object.__setattr__(self, "row_sense", sense)
        object.__setattr__(self, "obj_constant", float(self.obj_constant))
        if self.row_names is not None:
            object.__setattr__(self, "row_names", tuple(self.row_names))
        if self.col_names is not None:
            object.__setattr__(self, "col_names", tuple(self.col_names))

    @classmethod
    def from_dense(cls, A, b, c, row_sense=None, lb=None, ub=None, **kwargs):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, n = A.shape
        if row_sense is None:
            row_sense = [EQ] * m
        elif isinstance(row_sense, str):
            row_sense = list(row_sense)
        lb = np.zeros(n) if lb is None else lb
        ub = np.full(n, np.inf) if ub is None else ub
        return cls(sp.csc_matrix(A), b, c, row_sense, lb, ub, **kwargs)

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_cols(self) -> int:
        return self.A.shape[1]

    @cached_property
    def AT(self) -> sp.csc_matrix:
        """Transpose in CSC layout, i.e. row-major access to ``A``."""
        return sp.csc_matrix(self.A.T)

    @cached_property
    def b_norm(self) -> float:
        return float(np.linalg.norm(self.b))

    @cached_property
    def c_norm(self) -> float:
        return float(np.linalg.norm(self.c))

    def replace(self, **changes) -> "LinearProgram":
        kwargs = dict(A=self.A, b=self.b, c=self.c, row_sense=self.row_sense,
                      lb=self.lb, ub=self.ub, obj_constant=self.obj_constant,
                      row_names=self.row_names, col_names=self.col_names,
                      name=self.name, maximize=self.maximize)
        kwargs.update(changes)
        return LinearProgram(**kwargs)

    def objective(self, x) -> float:
        return float(self.c @ x) + self.obj_constant

    def user_objective(self, x) -> float:
        """Objective in the user's sense (sign flipped back for maximization)."""
        val = self.objective(x)
        return -val if self.maximize else val

    def equals(self, other: "LinearProgram", names: bool = True) -> bool:
        """Structural equality, optionally ignoring row/column names."""
        if self.A.shape != other.A.shape:
            return False
        # both matrices are canonical CSC (sorted, summed, no zeros)
        same = (np.array_equal(self.A.indptr, other.A.indptr)
                and np.array_equal(self.A.indices, other.A.indices)
                and np.array_equal(self.A.data, other.A.data))
        same = same and np.array_equal(self.b, other.b) and np.array_equal(self.c, other.c)
        same = same and np.array_equal(self.lb, other.lb) and np.array_equal(self.ub, other.ub)
        same = same and np.array_equal(self.row_sense, other.row_sense)
        same = same and self.obj_constant == other.obj_constant
        same = same and self.maximize == other.maximize
        if names:
            same = same and self.row_names == other.row_names and self.col_names == other.col_names
        return bool(same)


@dataclass(frozen=True, eq=False)
class Iterate:
    """Primal, dual and reduced-cost vectors ``(x, y, z)``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "z"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_xy(cls, lp: LinearProgram, x, y) -> "Iterate":
        """Build an iterate whose reduced costs are ``c - A'y``."""
        y = np.asarray(y, dtype=float)
        return cls(x, y, lp.c - lp.AT @ y)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))
                    and np.all(np.isfinite(self.z)))


@dataclass(frozen=True)
class Tolerances:
    eps_rel: float = 1e-6
    eps_abs: float = 1e-6
    time_limit_sec: float = 120.0
    max_iters: int = 200_000

    def __post_init__(self):
        if not (self.eps_rel > 0 and self.eps_abs > 0 and self.time_limit_sec > 0
                and self.max_iters > 0):
            raise ValueError(f"tolerances must be positive: {self}")


@dataclass(frozen=True, eq=False)
class ResidualReport:
    r_primal: np.ndarray
    r_dual: np.ndarray
    primal_norm: float
    dual_norm: float
    primal_obj: float
    dual_obj: float
    obj_gap: float
    eps_rel: float
    rel_primal_ok: bool
    rel_dual_ok: bool
    rel_gap_ok: bool

    @property
    def converged(self) -> bool:
        return self.rel_primal_ok and self.rel_dual_ok and self.rel_gap_ok

    def relative_errors(self, b_norm: float, c_norm: float) -> tuple[float, float, float]:
        """The three ratios that must each drop below ``eps_rel``."""
        return (
            self.primal_norm / (1.0 + b_norm),
            self.dual_norm / (1.0 + c_norm),
            self.obj_gap / (1.0 + abs(self.primal_obj) + abs(self.dual_obj)),
        )


def _check_dims(lp: LinearProgram, it: Iterate):
    m, n = lp.num_rows, lp.num_cols
    if it.x.shape != (n,) or it.z.shape != (n,) or it.y.shape != (m,):
        raise ValueError(
            f"iterate dimensions (x={it.x.shape}, y={it.y.shape}, z={it.z.shape}) "
            f"do not match the {m}x{n} model"
        )


def primal_residual(lp: LinearProgram, x, Ax=None) -> np.ndarray:
    """``b - Ax`` on equality rows, the violation only on inequality rows."""
    if Ax is None:
        Ax = lp.A @ x
    r = lp.b - Ax
    sense = lp.row_sense
    r = np.where(sense == LE, np.minimum(r, 0.0), r)
    return np.where(sense == GE, np.maximum(r, 0.0), r)


def bound_compatible(lp: LinearProgram, z) -> np.ndarray:
    """Part of ``z`` that can be absorbed by finite variable bounds.

    Positive reduced costs need a finite lower bound, negative ones a finite
    upper bound; whatever is left over is dual infeasibility.
    """
    z = np.asarray(z, dtype=float)
    pos = np.where(np.isfinite(lp.lb), np.maximum(z, 0.0), 0.0)
    neg = np.where(np.isfinite(lp.ub), np.minimum(z, 0.0), 0.0)
    return pos + neg


def dual_objective(lp: LinearProgram, y, z_feasible) -> float:
    # 0 * inf never happens: bound_compatible zeroes entries with infinite bounds.
    pos = np.maximum(z_feasible, 0.0)
    neg = np.minimum(z_feasible, 0.0)
    lb_term = np.dot(pos[pos > 0], lp.lb[pos > 0])
    ub_term = np.dot(neg[neg < 0], lp.ub[neg < 0])
    return float(lp.b @ y + lb_term + ub_term)


def residuals(lp: LinearProgram, it: Iterate, eps_rel: float = 1e-6) -> ResidualReport:
    """KKT residuals of ``it`` on ``lp`` with the three relative tests at ``eps_rel``.

    The dual residual is ``c - A'y - z_f`` where ``z_f`` is the bound-compatible
    part of ``z``; when ``z = c - A'y`` this is exactly the dual infeasibility.
    Objectives exclude ``obj_constant``.
    """
    _check_dims(lp, it)
    r_p = primal_residual(lp, it.x)
    z_f = bound_compatible(lp, it.z)
    r_d = lp.c - lp.AT @ it.y - z_f
    pobj = float(lp.c @ it.x)
    dobj = dual_objective(lp, it.y, z_f)
    gap = abs(pobj - dobj)
    pn = float(np.linalg.norm(r_p))
    dn = float(np.linalg.norm(r_d))
    return ResidualReport(
        r_primal=r_p,
        r_dual=r_d,
        primal_norm=pn,
        dual_norm=dn,
        primal_obj=pobj,
        dual_obj=dobj,
        obj_gap=gap,
        eps_rel=eps_rel,
        rel_primal_ok=pn <= eps_rel * (1.0 + lp.b_norm),
        rel_dual_ok=dn <= eps_rel * (1.0 + lp.c_norm),
        rel_gap_ok=gap <= eps_rel * (1.0 + abs(pobj) + abs(dobj)),
    )


def converged(report: ResidualReport, tol: Tolerances | float, b_norm: float,
              c_norm: float) -> bool:
    """True iff all three relative optimality conditions hold (non-strict)."""
    eps = tol.eps_rel if isinstance(tol, Tolerances) else float(tol)
    return (
        report.primal_norm <= eps * (1.0 + b_norm)
        and report.dual_norm <= eps * (1.0 + c_norm)
        and report.obj_gap <= eps * (1.0 + abs(report.primal_obj) + abs(report.dual_obj))
    )


def off_bound_distance(lb, ub, x) -> np.ndarray:
    """``min(x - lb, ub - x)``; infinite on sides with infinite bounds."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        lo = np.where(np.isfinite(lb), x - lb, np.inf)
        hi = np.where(np.isfinite(ub), ub - x, np.inf)
    return np.minimum(lo, hi)


def off_bound_count(lp: LinearProgram, x, eps_abs: float = 1e-6) -> int:
    """Number of columns farther than ``eps_abs`` from both of their bounds.

    Free columns always count.
    """
    return int(np.count_nonzero(off_bound_distance(lp.lb, lp.ub, x) > eps_abs))


# -- canonical form ----------------------------------------------------------


@dataclass(frozen=True)
class CanonicalMap:
    """Maps between a general model and its all-equality canonical form.

    Slack ``k`` belongs to row ``slack_rows[k]`` with coefficient
    ``slack_sign[k]`` (+1 for ``'L'`` rows, -1 for ``'G'`` rows).
    """

    num_cols: int
    slack_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    slack_sign: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def is_identity(self) -> bool:
        return self.slack_rows.size == 0

    def to_original(self, it: Iterate) -> Iterate:
        """Drop slack entries; row duals carry over unchanged."""
        n = self.num_cols
        return Iterate(it.x[:n], it.y, it.z[:n])

    def to_canonical(self, lp: LinearProgram, it: Iterate) -> Iterate:
        """Lift an original-space iterate, setting each slack to its clipped value."""
        ax = lp.A @ it.x
        rows = self.slack_rows
        s = np.maximum(self.slack_sign * (lp.b[rows] - ax[rows]), 0.0)
        zs = -self.slack_sign * it.y[rows]
        return Iterate(np.concatenate([it.x, s]), it.y, np.concatenate([it.z, zs]))


def canonicalize(lp: LinearProgram) -> tuple[LinearProgram, CanonicalMap]:
    """Turn every inequality row into an equality with one appended slack.

    ``'L'`` rows get ``+s`` and ``'G'`` rows get ``-s``; slacks live in
    ``[0, inf)`` with zero cost. Variable bounds are left as they are.
    """
    ineq = np.flatnonzero(lp.row_sense != EQ)
    if ineq.size == 0:
        return lp, CanonicalMap(lp.num_cols)
    sign = np.where(lp.row_sense[ineq] == LE, 1.0, -1.0)
    m, n = lp.num_rows, lp.num_cols
    S = sp.csc_matrix((sign, (ineq, np.arange(ineq.size))), shape=(m, ineq.size))
    col_names = None
    if lp.col_names is not None:
        col_names = tuple(lp.col_names) + tuple(f"_slack_{i}" for i in ineq)
    out = LinearProgram(
        A=sp.hstack([lp.A, S], format="csc"),
        b=lp.b,
        c=np.concatenate([lp.c, np.zeros(ineq.size)]),
        row_sense=np.full(m, EQ),
        lb=np.concatenate([lp.lb, np.zeros(ineq.size)]),
        ub=np.concatenate([lp.ub, np.full(ineq.size, np.inf)]),
        obj_constant=lp.obj_constant,
        row_names=lp.row_names,
        col_names=col_names,
        name=lp.name,
        maximize=lp.maximize,
    )
    return out, CanonicalMap(n, ineq, sign)


def sign_feasible_duals(lp: LinearProgram, y) -> np.ndarray:
    """Project row duals onto the orthant their row senses require."""
    y = np.asarray(y, dtype=float)
    y = np.where(lp.row_sense == LE, np.minimum(y, 0.0), y)
    return np.where(lp.row_sense == GE, np.maximum(y, 0.0), y)


def dual_sign_violation(lp: LinearProgram, y) -> float:
    return float(np.max(np.abs(y - sign_feasible_duals(lp, y)), initial=0.0))


def default_names(names: Optional[Sequence[str]], prefix: str, count: int) -> list[str]:
    if names is not None:
        return list(names)
    return [f"{prefix}{i}" for i in range(count)]
