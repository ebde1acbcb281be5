"""Crossover from an approximate solution to an optimal basic solution.

Works on the model extended with one slack per row, ``[A I] (x, s) = b``,
where the slack of an ``'L'`` row lives in ``[0, inf)``, of a ``'G'`` row in
``(-inf, 0]`` and of an ``'E'`` row is fixed at 0. The slack's reduced cost
is ``-y_i``. The all-slack basis is therefore always available.

Phases: superbasis construction, dual pushes, primal pushes, primal simplex
cleanup. A push resolves one superbasic with at most one pivot.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ._basis import BasisFactor, SingularBasisError, select_independent
from .lp_model import EQ, GE, LE, Iterate, LinearProgram, off_bound_count, off_bound_distance

logger = logging.getLogger(__name__)


class CrossoverStatus(str, enum.Enum):
    OPTIMAL_BASIS = "OptimalBasis"
    CLEANUP_LIMIT = "CleanupLimit"
    SINGULAR_BASIS = "SingularBasis"

    def __str__(self):
        return self.value


@dataclass
class CrossoverConfig:
    eps_abs: float = 1e-6
    order: str = "dual_first"
    pivot_tol: float = 1e-9
    # primal/dual feasibility tolerance used inside cleanup
    opt_tol: float = 1e-9
    refactor_every: int = 50
    cleanup_budget: Optional[int] = None
    stall_limit: int = 50
    concurrent: bool = False

    def __post_init__(self):
        if self.order not in ("dual_first", "primal_first"):
            raise ValueError(f"order must be 'dual_first' or 'primal_first', got {self.order!r}")
        if self.concurrent:
            raise NotImplementedError("concurrent crossover is unimplemented")


@dataclass(frozen=True)
class PushEstimate:
    p: int
    d: int
    m: int

    @property
    def est_primal_pushes(self) -> int:
        return max(self.p - self.m, 0)

    @property
    def est_dual_pushes(self) -> int:
        return max(self.m - self.d, 0)


class Extended:
    """``lp`` with one explicit slack per row appended."""

    def __init__(self, lp: LinearProgram):
        m, n = lp.num_rows, lp.num_cols
        self.lp = lp
        self.m, self.n = m, n
        self.A = sp.hstack([lp.A, sp.identity(m, format="csc")], format="csc")
        self.AT = sp.csr_matrix(self.A.T)
        self.b = np.asarray(lp.b, dtype=float)
        self.c = np.concatenate([lp.c, np.zeros(m)])
        sense = lp.row_sense
        self.lb = np.concatenate([lp.lb, np.where(sense == GE, -np.inf, 0.0)])
        self.ub = np.concatenate([lp.ub, np.where(sense == LE, np.inf, 0.0)])
        self.fixed = self.lb == self.ub

    def lift(self, it: Iterate) -> tuple[np.ndarray, np.ndarray]:
        s = self.b - self.lp.A @ it.x
        return np.concatenate([it.x, s]), np.concatenate([it.z, -it.y])


def _distance(ext: Extended, x: np.ndarray) -> np.ndarray:
    """Distance to the nearest bound; ``|x|`` for free columns."""
    d = off_bound_distance(ext.lb, ext.ub, x)
    free = ~np.isfinite(ext.lb) & ~np.isfinite(ext.ub)
    return np.where(free, np.abs(x), d)


def estimate_pushes(lp: LinearProgram, iterate: Iterate, eps_abs: float = 1e-6) -> PushEstimate:
    """Rough push counts from an optimal-ish iterate.

    ``p`` counts structural columns off their bounds plus inequality rows whose
    slack is off its bound; ``d`` counts structural columns and inequality-row
    slacks with ``|z| <= eps_abs``. Equality-row slacks are fixed and count in
    neither.
    """
    x, z = iterate.x, iterate.z
    ineq = lp.row_sense != EQ
    act = lp.b - lp.A @ x
    slack_off = np.where(lp.row_sense == LE, act, -act) > eps_abs
    p = off_bound_count(lp, x, eps_abs) + int(np.count_nonzero(slack_off & ineq))
    d = int(np.count_nonzero(np.abs(z) <= eps_abs))
    d += int(np.count_nonzero((np.abs(iterate.y) <= eps_abs) & ineq))
    return PushEstimate(p, d, lp.num_rows)


class Superbasis:
    """Basis ``B`` plus nonbasic values ``x_N`` and basic reduced-cost offsets ``z_B``.

    ``x`` holds values for all ``n + m`` extended columns; basic entries equal
    ``B^-1 (b - A_N x_N)``. ``zb`` is nonzero only on dual superbasic columns.
    """

    def __init__(self, ext: Extended, basis, x, zb, cfg: CrossoverConfig):
        self.ext = ext
        self.cfg = cfg
        self.basis = np.array(basis, dtype=int)
        self.pos = np.full(ext.n + ext.m, -1, dtype=int)
        self.pos[self.basis] = np.arange(ext.m)
        self.x = np.array(x, dtype=float)
        self.zb = np.array(zb, dtype=float)
        self.factor = BasisFactor(ext.A, self.basis, cfg.refactor_every)
        self.recompute_primal()

    # -- queries ---------------------------------------------------------

    @property
    def nonbasic(self) -> np.ndarray:
        return self.pos < 0

    def primal_superbasics(self) -> np.ndarray:
        d = _distance(self.ext, self.x)
        return np.flatnonzero(self.nonbasic & (d > self.cfg.eps_abs))

    def dual_superbasics(self) -> np.ndarray:
        return np.flatnonzero(~self.nonbasic & (np.abs(self.zb) > self.cfg.eps_abs))

    @property
    def primal_superbasic_count(self) -> int:
        return int(self.primal_superbasics().size)

    @property
    def dual_superbasic_count(self) -> int:
        return int(self.dual_superbasics().size)

    def duals(self, cost=None) -> tuple[np.ndarray, np.ndarray]:
        """``y = B^-T (c_B - z_B)`` and ``z = c - [A I]' y`` (``z_B`` kept exact)."""
        ext = self.ext
        if cost is None:
            cost = ext.c
            y = self.factor.btran(cost[self.basis] - self.zb[self.basis])
            z = cost - ext.AT @ y
            z[self.basis] = self.zb[self.basis]
        else:
            y = self.factor.btran(cost[self.basis])
            z = cost - ext.AT @ y
            z[self.basis] = 0.0
        return y, z

    # -- state updates ---------------------------------------------------

    def recompute_primal(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.factor.ftran(self.ext.b - self.ext.A @ xn)

    def refresh(self):
        """Refactor from scratch and recompute basic values."""
        self.factor.basis = self.basis.copy()
        self.factor.refactor()
        self.recompute_primal()

    def snap_nonbasic(self, j: int):
        """Clip a nonbasic value into its box, snapping near-bound values onto it."""
        lb, ub, eps = self.ext.lb[j], self.ext.ub[j], self.cfg.eps_abs
        v = min(max(self.x[j], lb), ub)
        if abs(v - lb) <= eps:
            v = lb
        elif abs(ub - v) <= eps:
            v = ub
        elif not np.isfinite(lb) and not np.isfinite(ub) and abs(v) <= eps:
            v = 0.0
        self.x[j] = v

    def pivot(self, r: int, q: int, w: np.ndarray):
        """Column ``q`` enters at basis position ``r``."""
        p = self.basis[r]
        self.basis[r] = q
        self.pos[p] = -1
        self.pos[q] = r
        self.zb[p] = 0.0
        try:
            self.factor.replace(r, q, w)
        except SingularBasisError:
            self.repair()
            return
        if self.factor.refactor_count and not self.factor._etas:
            self.recompute_primal()

    def repair(self):
        """Swap dependent basic columns for slacks after a singular refactor."""
        ext = self.ext
        keep = select_independent(ext.A, list(self.basis), ext.m)
        slacks = [ext.n + i for i in range(ext.m)]
        chosen = select_independent(ext.A, keep + slacks, ext.m)
        dropped = set(self.basis.tolist()) - set(chosen)
        self.basis = np.array(chosen, dtype=int)
        self.pos[:] = -1
        self.pos[self.basis] = np.arange(ext.m)
        for j in dropped:
            self.zb[j] = 0.0
            self.snap_nonbasic(j)
        self.factor = BasisFactor(ext.A, self.basis, self.cfg.refactor_every)
        self.recompute_primal()


def build_superbasis(lp: LinearProgram, iterate: Iterate, eps_abs: float = 1e-6,
                     cfg: Optional[CrossoverConfig] = None) -> Superbasis:
    """Crash a starting superbasis from ``iterate``.

    Columns are offered to the basis in priority order and kept when they stay
    linearly independent of those already chosen: off-bound columns with zero
    reduced cost first (largest distance first), then at-bound columns with
    zero reduced cost, then slacks, then everything else. Slacks complete the
    rank, so the starting point is in effect the all-slack basis with
    structural columns pivoted in.
    """
    cfg = cfg or CrossoverConfig(eps_abs=eps_abs)
    if not iterate.is_finite():
        raise ValueError("iterate has non-finite entries")
    ext = Extended(lp)
    x, z = ext.lift(iterate)
    dist = _distance(ext, x)
    zero_z = np.abs(z) <= eps_abs
    off = dist > eps_abs
    is_slack = np.arange(ext.n + ext.m) >= ext.n
    cls = np.full(ext.n + ext.m, 4)
    cls[~off & zero_z] = 1
    cls[is_slack] = 2
    cls[off & ~zero_z & ~is_slack] = 3
    cls[off & zero_z] = 0
    cls[ext.fixed & ~is_slack] = 5
    order = np.lexsort((np.arange(cls.size), -np.where(np.isfinite(dist), dist, 1e300), cls))
    basis = select_independent(ext.A, order, ext.m)
    if len(basis) < ext.m:
        raise SingularBasisError("could not complete a nonsingular starting basis")
    basis = np.array(basis, dtype=int)
    zb = np.zeros_like(z)
    zb[basis] = np.where(np.abs(z[basis]) > eps_abs, z[basis], 0.0)
    sb = Superbasis(ext, basis, x, zb, cfg)
    for j in np.flatnonzero(sb.nonbasic):
        sb.snap_nonbasic(j)
    sb.recompute_primal()
    return sb


def _pick(t: np.ndarray, mag: np.ndarray, bland: bool = False, window: float = 1e-12) -> int:
    """Smallest ratio, ties broken by largest pivot magnitude (or lowest index)."""
    tmin = t.min()
    ties = np.flatnonzero(t <= tmin + window)
    if bland:
        return int(ties[0])
    return int(ties[np.argmax(mag[ties])])


def dual_push_phase(sb: Superbasis) -> tuple[Superbasis, int]:
    """Drive each dual superbasic reduced cost to zero, one push each.

    The dual ratio test runs over row ``r`` of ``B^-1 [A I]``. If a nonbasic
    column's reduced cost would change sign before the target is reached, that
    column enters and the superbasic leaves; otherwise the offset is simply
    zeroed. A basic column that is off its bounds is never pivoted out, so the
    phase does not create primal superbasics.
    """
    ext, cfg = sb.ext, sb.cfg
    ptol = cfg.pivot_tol
    todo = sb.dual_superbasics()
    todo = todo[np.argsort(-np.abs(sb.zb[todo]), kind="stable")]
    pushes = 0
    for j in todo:
        r = sb.pos[j]
        if r < 0 or abs(sb.zb[j]) <= cfg.eps_abs:
            continue
        pushes += 1
        _, z = sb.duals()
        e = np.zeros(ext.m)
        e[r] = 1.0
        rho = sb.factor.btran(e)
        alpha = ext.AT @ rho
        s = np.sign(sb.zb[j])
        tmax = abs(sb.zb[j])
        sa = s * alpha
        nb = sb.nonbasic & ~ext.fixed
        at_lb = nb & (sb.x == ext.lb)
        at_ub = nb & (sb.x == ext.ub)
        mid = nb & ~at_lb & ~at_ub
        t = np.full(sa.size, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            m1 = at_lb & (sa > ptol)
            t[m1] = np.maximum(z[m1], 0.0) / sa[m1]
            m2 = at_ub & (sa < -ptol)
            t[m2] = np.maximum(-z[m2], 0.0) / -sa[m2]
            m3 = mid & (np.abs(sa) > ptol)
            t[m3] = np.maximum(z[m3] / sa[m3], 0.0)
        at_bound_j = _distance(ext, sb.x)[j] <= cfg.eps_abs
        if np.isfinite(t).any() and t.min() < tmax and at_bound_j:
            k = _pick(t, np.abs(alpha))
            w = sb.factor.ftran(sb.factor.column(k))
            if abs(w[r]) <= ptol:
                sb.zb[j] = 0.0
                continue
            sb.pivot(r, k, w)
            sb.zb[k] = 0.0
            before = sb.x[j]
            sb.snap_nonbasic(j)
            if sb.x[j] != before:
                sb.recompute_primal()
        else:
            sb.zb[j] = 0.0
    return sb, pushes


def _push_direction(ext: Extended, j: int, xj: float, zj: float, eps: float):
    """Direction (+1/-1) and target value for moving superbasic ``j`` onto a bound."""
    lb, ub = ext.lb[j], ext.ub[j]
    if not np.isfinite(lb) and not np.isfinite(ub):
        return (-1.0 if xj > 0 else 1.0), 0.0
    if abs(zj) > eps:
        d = -np.sign(zj)
        target = ub if d > 0 else lb
        if np.isfinite(target):
            return d, target
    if not np.isfinite(ub) or (np.isfinite(lb) and xj - lb <= ub - xj):
        return -1.0, lb
    return 1.0, ub


def _primal_ratio(sb: Superbasis, dxb: np.ndarray, tol: float, phase1: bool = False):
    """Ratio test over basic columns moving by ``dxb`` per unit step.

    Returns per-position step limits and the bound each position would hit.
    Columns already outside their box only block when they reach the violated
    bound (they never block while moving further out).
    """
    ext = sb.ext
    ptol = sb.cfg.pivot_tol
    cols = sb.basis
    v = sb.x[cols]
    lo, hi = ext.lb[cols], ext.ub[cols]
    t = np.full(cols.size, np.inf)
    hit = np.zeros(cols.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        dec = dxb < -ptol
        inc = dxb > ptol
        above = v > hi + tol
        below = v < lo - tol
        # decreasing: block at ub if currently above it, else at lb
        m = dec & above
        t[m] = (v[m] - hi[m]) / -dxb[m]
        hit[m] = hi[m]
        m = dec & ~above & ~below & np.isfinite(lo)
        t[m] = np.maximum(v[m] - lo[m], 0.0) / -dxb[m]
        hit[m] = lo[m]
        m = inc & below
        t[m] = (lo[m] - v[m]) / dxb[m]
        hit[m] = lo[m]
        m = inc & ~above & ~below & np.isfinite(hi)
        t[m] = np.maximum(hi[m] - v[m], 0.0) / dxb[m]
        hit[m] = hi[m]
    return t, hit


def _move(sb: Superbasis, q: int, d: float, w: np.ndarray, step: float):
    sb.x[q] += d * step
    sb.x[sb.basis] -= d * step * w


def primal_push_phase(sb: Superbasis) -> tuple[Superbasis, int]:
    """Move each primal superbasic onto a bound, one push each.

    Superbasics are taken in order of decreasing distance to their nearest
    bound. Each moves toward its nearer bound (or in the improving direction
    when its reduced cost is clearly nonzero; free columns head for 0). If a
    basic column hits a bound first, it leaves and the superbasic enters.
    """
    ext, cfg = sb.ext, sb.cfg
    todo = sb.primal_superbasics()
    dist = _distance(ext, sb.x)[todo]
    todo = todo[np.argsort(-dist, kind="stable")]
    pushes = 0
    for k in todo:
        if sb.pos[k] >= 0 or _distance(ext, sb.x)[k] <= cfg.eps_abs:
            continue
        pushes += 1
        y, _ = sb.duals()
        zk = ext.c[k] - sb.factor.column(k) @ y
        d, target = _push_direction(ext, k, sb.x[k], zk, cfg.eps_abs)
        tmax = abs(target - sb.x[k])
        w = sb.factor.ftran(sb.factor.column(k))
        t, hit = _primal_ratio(sb, -d * w, cfg.opt_tol)
        if np.isfinite(t).any() and t.min() < tmax:
            r = _pick(t, np.abs(w))
            _move(sb, k, d, w, t[r])
            leaving = sb.basis[r]
            sb.x[leaving] = hit[r]
            sb.pivot(r, k, w)
        else:
            _move(sb, k, d, w, tmax)
            sb.x[k] = target
    sb.recompute_primal()
    return sb, pushes


@dataclass
class CrossoverResult:
    basis: Superbasis
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: CrossoverStatus
    primal_pushes: int = 0
    dual_pushes: int = 0
    cleanup_pivots: int = 0
    initial_primal_superbasics: int = 0
    initial_dual_superbasics: int = 0
    phase_times: dict = field(default_factory=dict)
    message: str = ""

    @property
    def iterate(self) -> Iterate:
        return Iterate(self.x, self.y, self.z)

    @property
    def total_time(self) -> float:
        return float(sum(self.phase_times.values()))

    def log_lines(self) -> list[str]:
        """One ``key=value`` line per phase."""
        t = self.phase_times
        return [
            f"phase=construct primal_superbasics={self.initial_primal_superbasics} "
            f"dual_superbasics={self.initial_dual_superbasics} time={t.get('construct', 0.0):.6f}",
            f"phase=dual pushes={self.dual_pushes} time={t.get('dual', 0.0):.6f}",
            f"phase=primal pushes={self.primal_pushes} time={t.get('primal', 0.0):.6f}",
            f"phase=cleanup pivots={self.cleanup_pivots} status={self.status} "
            f"time={t.get('cleanup', 0.0):.6f}",
        ]


def parse_log_line(line: str) -> dict:
    """Parse a ``key=value`` crossover log line; numeric values are converted."""
    out: dict = {}
    for tok in line.split():
        key, _, val = tok.partition("=")
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def cleanup(sb: Superbasis, lp: LinearProgram, cfg: Optional[CrossoverConfig] = None):
    """Bounded primal simplex from the current basis.

    Phase 1 minimizes the sum of basic bound violations, phase 2 the
    objective, both with Dantzig pricing. Remaining superbasics are either
    priced in or pushed to a bound. Switches to Bland's rule after
    ``stall_limit`` consecutive degenerate pivots.

    Returns ``(status, pivots, message)``.
    """
    cfg = cfg or sb.cfg
    ext = sb.ext
    tol = cfg.opt_tol
    ptol = cfg.pivot_tol
    budget = cfg.cleanup_budget if cfg.cleanup_budget is not None else 50 * (ext.m + ext.n)
    sb.zb[:] = 0.0
    sb.recompute_primal()
    pivots = 0
    stall = 0
    bland = False
    movable = ~ext.fixed
    while True:
        if pivots >= budget:
            return CrossoverStatus.CLEANUP_LIMIT, pivots, f"pivot budget {budget} exhausted"
        xb = sb.x[sb.basis]
        lo, hi = ext.lb[sb.basis], ext.ub[sb.basis]
        below = xb < lo - tol
        above = xb > hi + tol
        phase1 = bool(below.any() or above.any())
        if phase1:
            cost = np.zeros(ext.n + ext.m)
            cost[sb.basis[below]] = -1.0
            cost[sb.basis[above]] = 1.0
        else:
            cost = ext.c
        _, dj = sb.duals(cost)
        nb = sb.nonbasic & movable
        at_lb = nb & (sb.x == ext.lb)
        at_ub = nb & (sb.x == ext.ub) & ~at_lb
        mid = nb & ~at_lb & ~at_ub
        up = (at_lb & (dj < -tol)) | (mid & (dj < -tol))
        down = (at_ub & (dj > tol)) | (mid & (dj > tol))
        cand = np.flatnonzero(up | down)
        if cand.size == 0:
            if phase1:
                return (CrossoverStatus.CLEANUP_LIMIT, pivots,
                        "primal infeasible: phase 1 stalled with bound violations")
            stuck = np.flatnonzero(mid & (_distance(ext, sb.x) > 0))
            if stuck.size == 0:
                return CrossoverStatus.OPTIMAL_BASIS, pivots, ""
            # zero-cost superbasics left over: push them onto bounds
            q = int(stuck[0])
            step_dir, dest = _push_direction(ext, q, sb.x[q], 0.0, cfg.eps_abs)
            own = abs(dest - sb.x[q])
        else:
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(dj[cand]))])
            step_dir = 1.0 if up[q] else -1.0
            dest = ext.ub[q] if step_dir > 0 else ext.lb[q]
            own = abs(dest - sb.x[q])
        w = sb.factor.ftran(sb.factor.column(q))
        t, hit = _primal_ratio(sb, -step_dir * w, tol)
        tmin = t.min() if t.size else np.inf
        if not np.isfinite(tmin) and not np.isfinite(own):
            return CrossoverStatus.CLEANUP_LIMIT, pivots, "unbounded direction in cleanup"
        pivots += 1
        if own <= tmin:
            _move(sb, q, step_dir, w, own)
            sb.x[q] = dest
            step = own
        else:
            r = _pick(t, np.abs(w), bland=bland, window=1e-12)
            if bland:
                ties = np.flatnonzero(t <= tmin + 1e-12)
                r = int(ties[np.argmin(sb.basis[ties])])
            if abs(w[r]) <= ptol:
                return CrossoverStatus.CLEANUP_LIMIT, pivots, "pivot below tolerance"
            step = t[r]
            _move(sb, q, step_dir, w, step)
            leaving = sb.basis[r]
            sb.x[leaving] = hit[r]
            sb.pivot(r, q, w)
        stall = stall + 1 if step <= 1e-12 else 0
        if stall > cfg.stall_limit:
            bland = True
        elif stall == 0:
            bland = False


def run_crossover(lp: LinearProgram, iterate: Iterate,
                  cfg: Optional[CrossoverConfig] = None) -> CrossoverResult:
    """All four phases, timed separately."""
    cfg = cfg or CrossoverConfig()
    times = {}
    t0 = time.perf_counter()
    try:
        sb = build_superbasis(lp, iterate, cfg.eps_abs, cfg)
    except SingularBasisError as exc:
        return CrossoverResult(None, np.array(iterate.x), np.array(iterate.y),
                               np.array(iterate.z), CrossoverStatus.SINGULAR_BASIS,
                               phase_times={"construct": time.perf_counter() - t0},
                               message=str(exc))
    times["construct"] = time.perf_counter() - t0
    n_primal = sb.primal_superbasic_count
    n_dual = sb.dual_superbasic_count
    primal = dual = 0
    phases = ("dual", "primal") if cfg.order == "dual_first" else ("primal", "dual")
    for ph in phases:
        t1 = time.perf_counter()
        if ph == "dual":
            sb, dual = dual_push_phase(sb)
        else:
            sb, primal = primal_push_phase(sb)
        times[ph] = time.perf_counter() - t1
    t1 = time.perf_counter()
    sb.refresh()
    status, pivots, msg = cleanup(sb, lp, cfg)
    sb.refresh()
    times["cleanup"] = time.perf_counter() - t1
    n = lp.num_cols
    y, _ = sb.duals()
    x = sb.x[:n].copy()
    z = lp.c - lp.AT @ y
    res = CrossoverResult(sb, x, y, z, status, primal, dual, pivots, n_primal, n_dual, times, msg)
    for line in res.log_lines():
        logger.info("crossover %s", line)
    return res
