"""Primal-dual hybrid gradient for general-form LPs.

Bounds and row senses are handled implicitly: the primal step projects onto
the ``[lb, ub]`` box, the dual step projects inequality-row duals onto their
sign orthant. Restarts go to the average (or current) iterate when its KKT
error has dropped enough since the last restart, and the primal weight is
re-balanced at each restart.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .lp_model import (
    GE,
    LE,
    Iterate,
    LinearProgram,
    ResidualReport,
    Tolerances,
    off_bound_count,
    residuals,
)

logger = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    TIME_LIMIT = "TimeLimit"
    NUMERICAL_FAILURE = "NumericalFailure"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class FullKKT:
    """Stop when primal, dual and gap conditions all hold at ``eps_rel``."""


@dataclass(frozen=True)
class PrimalResidualOnly:
    """Stop once ``||r_P||_2 <= target_norm``, but never before ``min_iters``."""

    target_norm: float
    min_iters: int = 100

    def __post_init__(self):
        if self.target_norm <= 0 or self.min_iters < 0:
            raise ValueError("target_norm must be positive and min_iters >= 0")


Termination = Union[FullKKT, PrimalResidualOnly]


@dataclass
class PdhgConfig:
    """Solver settings.

    ``step_size`` is the base step ``eta``; ``None`` uses ``0.9 / ||A||_2``.
    The primal and dual steps are ``eta / w`` and ``eta * w`` for primal
    weight ``w`` (``None`` starts from ``||c|| / ||b||``).
    """

    tol: Tolerances = field(default_factory=Tolerances)
    step_size: Optional[float] = None
    primal_weight: Optional[float] = None
    adaptive_primal_weight: bool = True
    restart_policy: str = "adaptive_average"
    termination: Termination = field(default_factory=FullKKT)
    warm_start: Optional[Iterate] = None
    seed: int = 0
    check_every: int = 40
    ruiz_iters: int = 0
    record_trajectory: bool = False
    # count off-bound columns against this model's bounds (default: the solved one)
    off_bound_lp: Optional[LinearProgram] = None
    # restart thresholds on the KKT error relative to the last restart
    restart_sufficient: float = 0.2
    restart_necessary: float = 0.8
    restart_artificial: float = 0.36
    primal_weight_smoothing: float = 0.5

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.primal_weight is not None and self.primal_weight <= 0:
            raise ValueError("primal_weight must be positive")
        if self.restart_policy not in ("adaptive_average", "none"):
            raise ValueError(f"unknown restart_policy {self.restart_policy!r}")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass(frozen=True)
class ResidualSample:
    iteration: int
    rel_primal: float
    rel_dual: float
    rel_gap: float
    primal_norm: float


@dataclass
class PdhgResult:
    iterate: Iterate
    status: Status
    iterations: int
    wall_time: float
    report: ResidualReport
    residual_history: list = field(default_factory=list)
    restarts: int = 0
    restart_scores: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def estimate_operator_norm(A, seed: int = 0, tol: float = 1e-9, max_iter: int = 5000) -> float:
    """Power-iteration estimate of the spectral norm of ``A``."""
    A = sp.csr_matrix(A)
    if A.nnz == 0 or not np.any(A.data):
        raise ValueError("operator norm of a zero matrix is undefined")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    AT = A.T.tocsr()
    est = 0.0
    for _ in range(max_iter):
        w = AT @ (A @ v)
        lam = np.linalg.norm(w)
        if lam == 0.0:
            # unlucky start in the null space
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / lam
        new = math.sqrt(lam)
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(est)


def ruiz_scaling(A: sp.csc_matrix, iters: int) -> tuple[sp.csc_matrix, np.ndarray, np.ndarray]:
    """Ruiz equilibration; returns ``(D_r A D_c, d_r, d_c)``."""
    m, n = A.shape
    dr = np.ones(m)
    dc = np.ones(n)
    As = sp.csc_matrix(A, copy=True)
    for _ in range(iters):
        absA = abs(As)
        rmax = np.asarray(absA.max(axis=1).todense()).ravel()
        cmax = np.asarray(absA.max(axis=0).todense()).ravel()
        r = np.where(rmax > 0, 1.0 / np.sqrt(np.where(rmax > 0, rmax, 1.0)), 1.0)
        s = np.where(cmax > 0, 1.0 / np.sqrt(np.where(cmax > 0, cmax, 1.0)), 1.0)
        As = sp.csc_matrix(sp.diags(r) @ As @ sp.diags(s))
        dr *= r
        dc *= s
    return As, dr, dc


def _kkt_score(rep: ResidualReport, omega: float) -> float:
    return math.sqrt(omega * rep.primal_norm ** 2 + rep.dual_norm ** 2 / omega + rep.obj_gap ** 2)


class _Problem:
    """Scaled copy of the model that the iterations run on."""

    def __init__(self, lp: LinearProgram, ruiz_iters: int):
        if ruiz_iters > 0:
            A, dr, dc = ruiz_scaling(lp.A, ruiz_iters)
        else:
            A, dr, dc = lp.A, np.ones(lp.num_rows), np.ones(lp.num_cols)
        self.A = sp.csr_matrix(A)
        self.AT = sp.csr_matrix(A.T)
        self.dr, self.dc = dr, dc
        self.b = lp.b * dr
        self.c = lp.c * dc
        self.lb = lp.lb / dc
        self.ub = lp.ub / dc
        self.lb_orig, self.ub_orig = lp.lb, lp.ub
        self.le = np.flatnonzero(lp.row_sense == LE)
        self.ge = np.flatnonzero(lp.row_sense == GE)

    def project_dual(self, y):
        y[self.le] = np.minimum(y[self.le], 0.0)
        y[self.ge] = np.maximum(y[self.ge], 0.0)
        return y

    def unscale(self, x, y):
        # averaging and rescaling can leave x a few ulps outside its bounds
        return np.clip(x * self.dc, self.lb_orig, self.ub_orig), y * self.dr


def solve_pdhg(lp: LinearProgram, cfg: Optional[PdhgConfig] = None) -> PdhgResult:
    """Solve ``lp`` with restarted PDHG.

    The returned iterate always has ``z = c - A'y``. Under ``FullKKT`` a
    ``Converged`` status means all three relative conditions hold on the
    unscaled model; under ``PrimalResidualOnly`` only the primal one does.
    """
    cfg = cfg or PdhgConfig()
    tol = cfg.tol
    t0 = time.perf_counter()
    prob = _Problem(lp, cfg.ruiz_iters)
    m, n = lp.num_rows, lp.num_cols
    primal_only = isinstance(cfg.termination, PrimalResidualOnly)

    eta = cfg.step_size
    if eta is None:
        eta = 0.9 / estimate_operator_norm(prob.A, seed=cfg.seed)
    omega = cfg.primal_weight
    if omega is None:
        cn, bn = np.linalg.norm(prob.c), np.linalg.norm(prob.b)
        omega = cn / bn if cn > 1e-10 and bn > 1e-10 else 1.0

    if cfg.warm_start is not None:
        ws = cfg.warm_start
        if ws.x.shape != (n,) or ws.y.shape != (m,):
            raise ValueError("warm start dimensions do not match the model")
        x = np.clip(ws.x / prob.dc, prob.lb, prob.ub)
        y = prob.project_dual(ws.y / prob.dr)
    else:
        x = np.clip(np.zeros(n), prob.lb, prob.ub)
        y = np.zeros(m)

    history: list[ResidualSample] = []
    trajectory: list[tuple[int, int, float]] = []
    restart_scores: list[float] = []

    def evaluate(xs, ys) -> tuple[Iterate, ResidualReport]:
        xo, yo = prob.unscale(xs, ys)
        it = Iterate.from_xy(lp, xo, yo)
        return it, residuals(lp, it, tol.eps_rel)

    def finish(xs, ys, status, k, rep=None, message=""):
        it, rep2 = evaluate(xs, ys)
        return PdhgResult(
            iterate=it,
            status=status,
            iterations=k,
            wall_time=time.perf_counter() - t0,
            report=rep if rep is not None else rep2,
            residual_history=history,
            restarts=len(restart_scores),
            restart_scores=restart_scores,
            trajectory=trajectory,
            message=message,
        )

    def record(k, it, rep):
        rp, rd, rg = rep.relative_errors(lp.b_norm, lp.c_norm)
        history.append(ResidualSample(k, rp, rd, rg, rep.primal_norm))
        if cfg.record_trajectory:
            ref = cfg.off_bound_lp if cfg.off_bound_lp is not None else lp
            trajectory.append((k, off_bound_count(ref, it.x, tol.eps_abs), rep.primal_norm))

    def done(k, rep) -> bool:
        if primal_only:
            return k >= cfg.termination.min_iters and rep.primal_norm <= cfg.termination.target_norm
        return rep.converged

    Ax = prob.A @ x
    it, rep = evaluate(x, y)
    record(0, it, rep)
    if done(0, rep):
        return finish(x, y, Status.CONVERGED, 0, rep)

    x_anchor, y_anchor = x.copy(), y.copy()
    kkt_anchor = _kkt_score(rep, omega)
    kkt_prev_candidate = math.inf
    x_sum = np.zeros(n)
    y_sum = np.zeros(m)
    count = 0
    k = 0
    last_restart = 0
    tau, sigma = eta / omega, eta * omega

    while True:
        if k >= tol.max_iters:
            return finish(x, y, Status.ITER_LIMIT, k, message="iteration limit")
        x_new = np.clip(x - tau * (prob.c - prob.AT @ y), prob.lb, prob.ub)
        Ax_new = prob.A @ x_new
        y = prob.project_dual(y + sigma * (prob.b - 2.0 * Ax_new + Ax))
        x, Ax = x_new, Ax_new
        x_sum += x
        y_sum += y
        count += 1
        k += 1
        if k % cfg.check_every:
            continue

        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            logger.warning("non-finite iterate at iteration %d", k)
            return finish(np.nan_to_num(x), np.nan_to_num(y), Status.NUMERICAL_FAILURE, k,
                          message=f"non-finite iterate at iteration {k}")

        it, rep = evaluate(x, y)
        record(k, it, rep)
        if done(k, rep):
            return finish(x, y, Status.CONVERGED, k, rep)

        x_avg, y_avg = x_sum / count, y_sum / count
        it_avg, rep_avg = evaluate(x_avg, y_avg)
        if not primal_only and rep_avg.converged:
            return finish(x_avg, y_avg, Status.CONVERGED, k, rep_avg)

        if time.perf_counter() - t0 > tol.time_limit_sec:
            return finish(x, y, Status.TIME_LIMIT, k, message="time limit")

        if cfg.restart_policy == "none":
            continue
        kkt_cur = _kkt_score(rep, omega)
        kkt_avg = _kkt_score(rep_avg, omega)
        if kkt_avg < kkt_cur:
            xc, yc, kkt_c, rep_c = x_avg, y_avg, kkt_avg, rep_avg
        else:
            xc, yc, kkt_c, rep_c = x, y, kkt_cur, rep
        restart = (
            kkt_c <= cfg.restart_sufficient * kkt_anchor
            or (kkt_c <= cfg.restart_necessary * kkt_anchor and kkt_c > kkt_prev_candidate)
            or (k - last_restart) >= cfg.restart_artificial * k
        )
        kkt_prev_candidate = kkt_c
        if not restart:
            continue

        if cfg.adaptive_primal_weight:
            dx = np.linalg.norm(xc - x_anchor)
            dy = np.linalg.norm(yc - y_anchor)
            if dx > 1e-10 and dy > 1e-10:
                theta = cfg.primal_weight_smoothing
                omega = math.exp(theta * math.log(dy / dx) + (1 - theta) * math.log(omega))
                tau, sigma = eta / omega, eta * omega
        x, y = xc.copy(), yc.copy()
        Ax = prob.A @ x
        x_anchor, y_anchor = x.copy(), y.copy()
        kkt_anchor = _kkt_score(rep_c, omega)
        kkt_prev_candidate = math.inf
        x_sum[:] = 0.0
        y_sum[:] = 0.0
        count = 0
        last_restart = k
        restart_scores.append(max(rep_c.relative_errors(lp.b_norm, lp.c_norm)))
