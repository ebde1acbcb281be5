"""Corner push: steer a PDHG solution toward a vertex of the optimal face.

Columns whose reduced cost is clearly nonzero get one bound fixed at their
current value, inequality rows with a clearly nonzero dual become
equalities, and the objective is replaced by a random nonnegative vector.
Every solution of that model stays on the optimal face, and a random
objective makes a single vertex the likely minimizer. PDHG re-solves it from
``(x, 0, c_hat)`` and stops as soon as primal feasibility is back at the
original tolerance.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .lp_model import EQ, Iterate, LinearProgram, Tolerances, off_bound_count
from .pdhg import PdhgConfig, PdhgResult, PrimalResidualOnly, Status, solve_pdhg


@dataclass(frozen=True, eq=False)
class CornerPushModel:
    base: LinearProgram
    fixed_lb: np.ndarray
    fixed_ub: np.ndarray
    rows_to_eq: np.ndarray
    random_obj: np.ndarray
    obj_scale: float = 1.0
    rng_seed: int = 0

    def to_lp(self) -> LinearProgram:
        sense = np.array(self.base.row_sense)
        sense[self.rows_to_eq] = EQ
        return self.base.replace(
            c=self.random_obj,
            lb=self.fixed_lb,
            ub=self.fixed_ub,
            row_sense=sense,
            obj_constant=0.0,
            maximize=False,
            name=f"{self.base.name}-corner" if self.base.name else "corner",
        )


def build_corner_model(lp: LinearProgram, iterate: Iterate, eps_abs: float = 1e-6,
                       obj_scale: float = 1.0, seed: int = 0) -> CornerPushModel:
    """Fix bounds, tighten row senses and draw the random objective.

    ``lb_j = x_j`` where ``z_j < -eps_abs`` and ``ub_j = x_j`` where
    ``z_j > eps_abs``. An inequality row becomes an equality when
    ``|y_i| > eps_abs`` (its slack's reduced cost is ``-y_i``).
    """
    m, n = lp.num_rows, lp.num_cols
    if iterate.x.shape != (n,) or iterate.y.shape != (m,) or iterate.z.shape != (n,):
        raise ValueError("iterate dimensions do not match the model")
    if obj_scale <= 0:
        raise ValueError("obj_scale must be positive")
    x = np.clip(iterate.x, lp.lb, lp.ub)
    lb = np.where(iterate.z < -eps_abs, x, lp.lb)
    ub = np.where(iterate.z > eps_abs, x, lp.ub)
    rows = np.flatnonzero((lp.row_sense != EQ) & (np.abs(iterate.y) > eps_abs))
    obj = np.random.default_rng(seed).uniform(0.0, 1.0, n) * obj_scale
    for arr in (lb, ub, rows, obj):
        arr.setflags(write=False)
    return CornerPushModel(lp, lb, ub, rows, obj, float(obj_scale), seed)


@dataclass
class CornerPushConfig:
    """``eps_rel`` is the tolerance the original PDHG solve used; the corner
    solve stops once ``||r_P||_2 <= eps_rel * (1 + ||b||_2)``."""

    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    obj_scale: float = 1.0
    seed: int = 0
    min_iters: int = 100
    max_iters: int = 200_000
    time_limit_sec: float = 120.0
    check_every: int = 40
    ruiz_iters: int = 0


@dataclass
class CornerPushResult:
    x_hat: np.ndarray
    y: np.ndarray
    z: np.ndarray
    iterations: int
    status: Status
    off_bound_before: int
    off_bound_after: int
    target_norm: float
    final_primal_norm: float
    wall_time: float
    trajectory: list = field(default_factory=list)
    model: Optional[CornerPushModel] = None

    @property
    def iterate(self) -> Iterate:
        """``(x_hat, y, z)`` with ``y`` and ``z`` from the original solve."""
        return Iterate(self.x_hat, self.y, self.z)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def run_corner_push(lp: LinearProgram, start: Union[PdhgResult, Iterate],
                    cfg: Optional[CornerPushConfig] = None) -> CornerPushResult:
    """Re-solve the corner model with PDHG and return ``(x_hat, y, z)``.

    ``start`` is normally a converged :class:`PdhgResult`; any iterate on
    ``lp`` is accepted too. Iteration or time limits are not errors: the last
    iterate is returned with that status so crossover can still run.
    """
    cfg = cfg or CornerPushConfig()
    if isinstance(start, PdhgResult):
        if not start.converged:
            raise ValueError(f"corner push needs a converged PDHG solve, got {start.status}")
        it = start.iterate
    else:
        it = start
    t0 = time.perf_counter()
    model = build_corner_model(lp, it, cfg.eps_abs, cfg.obj_scale, cfg.seed)
    corner_lp = model.to_lp()
    target = cfg.eps_rel * (1.0 + lp.b_norm)
    warm = Iterate(np.clip(it.x, corner_lp.lb, corner_lp.ub), np.zeros(lp.num_rows),
                   corner_lp.c)
    pcfg = PdhgConfig(
        tol=Tolerances(eps_rel=cfg.eps_rel, eps_abs=cfg.eps_abs,
                       time_limit_sec=cfg.time_limit_sec, max_iters=cfg.max_iters),
        termination=PrimalResidualOnly(target, cfg.min_iters),
        warm_start=warm,
        seed=cfg.seed,
        check_every=cfg.check_every,
        ruiz_iters=cfg.ruiz_iters,
        record_trajectory=True,
        off_bound_lp=lp,
    )
    res = solve_pdhg(corner_lp, pcfg)
    x_hat = np.array(res.iterate.x)
    return CornerPushResult(
        x_hat=x_hat,
        y=np.array(it.y),
        z=np.array(it.z),
        iterations=res.iterations,
        status=res.status,
        off_bound_before=off_bound_count(lp, it.x, cfg.eps_abs),
        off_bound_after=off_bound_count(lp, x_hat, cfg.eps_abs),
        target_norm=target,
        final_primal_norm=res.report.primal_norm,
        wall_time=time.perf_counter() - t0,
        trajectory=list(res.trajectory),
        model=model,
    )


def trajectory_csv(result: CornerPushResult, instance: str = "") -> str:
    """Trajectory as CSV text: ``iteration,off_bound_count,primal_residual``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["iteration", "off_bound_count", "primal_residual"]
    w.writerow((["instance"] if instance else []) + header)
    for k, count, pres in result.trajectory:
        w.writerow(([instance] if instance else []) + [k, count, repr(float(pres))])
    return buf.getvalue()
