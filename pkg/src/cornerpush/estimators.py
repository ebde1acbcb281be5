"""scikit-learn style wrappers around the solver pipeline.

The "data" is a :class:`LinearProgram` (or a path to one). ``fit`` solves and
stores fitted attributes with a trailing underscore; ``transform`` returns
the fitted :class:`Iterate`. Hyper-parameters live in ``__init__`` so
``get_params``/``set_params``/``clone`` work as usual.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_iterate, check_lp, check_positive
from .corner_push import CornerPushConfig, run_corner_push
from .crossover import CrossoverConfig, CrossoverStatus, run_crossover
from .lp_model import Iterate, LinearProgram, Tolerances
from .pdhg import PdhgConfig, PdhgResult, solve_pdhg


class _LPTransformer(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    # outputs are Iterate objects, not arrays, so no set_output wrapping
    def _check_same(self, X) -> LinearProgram:
        check_is_fitted(self, "iterate_")
        lp = check_lp(X) if X is not None else self.lp_
        if lp is not self.lp_ and not lp.equals(self.lp_, names=False):
            raise ValueError("transform got a different model than fit")
        return lp

    def transform(self, X=None) -> Iterate:
        """The fitted ``(x, y, z)``."""
        self._check_same(X)
        return self.iterate_


class PDHGSolver(_LPTransformer):
    """Restarted PDHG.

    Parameters
    ----------
    eps_rel, eps_abs : float
        Relative KKT tolerance and absolute classification tolerance.
    time_limit : float
        Seconds.
    max_iters : int
    seed : int
        Seed of the operator-norm power iteration.
    ruiz_iters : int
        Ruiz equilibration passes (0 disables scaling).
    restart_policy : {"adaptive_average", "none"}
    """

    def __init__(self, eps_rel=1e-6, eps_abs=1e-6, time_limit=120.0, max_iters=200_000,
                 seed=0, ruiz_iters=0, restart_policy="adaptive_average"):
        self.eps_rel = eps_rel
        self.eps_abs = eps_abs
        self.time_limit = time_limit
        self.max_iters = max_iters
        self.seed = seed
        self.ruiz_iters = ruiz_iters
        self.restart_policy = restart_policy

    def _config(self, warm_start=None) -> PdhgConfig:
        tol = Tolerances(eps_rel=check_positive(self.eps_rel, "eps_rel"),
                         eps_abs=check_positive(self.eps_abs, "eps_abs"),
                         time_limit_sec=check_positive(self.time_limit, "time_limit"),
                         max_iters=int(self.max_iters))
        return PdhgConfig(tol=tol, seed=int(self.seed), ruiz_iters=int(self.ruiz_iters),
                          restart_policy=self.restart_policy, warm_start=warm_start)

    def fit(self, X, y=None):
        """Solve ``X``; ``y`` is an optional warm start."""
        lp = check_lp(X)
        warm = check_iterate(lp, y) if y is not None else None
        res = solve_pdhg(lp, self._config(warm))
        self.lp_ = lp
        self.result_ = res
        self.iterate_ = res.iterate
        self.status_ = res.status
        self.n_iter_ = res.iterations
        return self


class CornerPush(_LPTransformer):
    """Move a converged PDHG solution toward a vertex of the optimal face.

    ``fit(lp, iterate)`` runs the push; ``transform`` returns ``(x_hat, y, z)``.
    """

    def __init__(self, eps_abs=1e-6, eps_rel=1e-6, obj_scale=1.0, seed=0, min_iters=100,
                 max_iters=200_000, time_limit=120.0):
        self.eps_abs = eps_abs
        self.eps_rel = eps_rel
        self.obj_scale = obj_scale
        self.seed = seed
        self.min_iters = min_iters
        self.max_iters = max_iters
        self.time_limit = time_limit

    def fit(self, X, y):
        lp = check_lp(X)
        start = y if isinstance(y, PdhgResult) else check_iterate(lp, y)
        cfg = CornerPushConfig(
            eps_abs=check_positive(self.eps_abs, "eps_abs"),
            eps_rel=check_positive(self.eps_rel, "eps_rel"),
            obj_scale=check_positive(self.obj_scale, "obj_scale"),
            seed=int(self.seed), min_iters=int(self.min_iters), max_iters=int(self.max_iters),
            time_limit_sec=check_positive(self.time_limit, "time_limit"))
        res = run_corner_push(lp, start, cfg)
        self.lp_ = lp
        self.result_ = res
        self.model_ = res.model
        self.iterate_ = res.iterate
        self.status_ = res.status
        self.n_iter_ = res.iterations
        return self


class Crossover(_LPTransformer):
    """Push steps plus simplex cleanup from an approximate solution to a basis."""

    def __init__(self, eps_abs=1e-6, order="dual_first", refactor_every=50, cleanup_budget=None):
        self.eps_abs = eps_abs
        self.order = order
        self.refactor_every = refactor_every
        self.cleanup_budget = cleanup_budget

    def fit(self, X, y):
        lp = check_lp(X)
        it = check_iterate(lp, y)
        cfg = CrossoverConfig(eps_abs=check_positive(self.eps_abs, "eps_abs"), order=self.order,
                              refactor_every=int(self.refactor_every),
                              cleanup_budget=self.cleanup_budget)
        res = run_crossover(lp, it, cfg)
        self.lp_ = lp
        self.result_ = res
        self.basis_ = res.basis
        self.iterate_ = res.iterate
        self.status_ = res.status
        return self


class LPSolver(_LPTransformer):
    """The full pipeline: PDHG, optional corner push, crossover.

    Fitted attributes: ``pdhg_``, ``corner_`` (``None`` when disabled or when
    PDHG did not converge), ``crossover_``, ``iterate_``, ``objective_`` (in
    the user's objective sense) and ``status_`` (the crossover status).
    """

    def __init__(self, corner_push=False, eps_rel=1e-6, eps_abs=1e-6, time_limit=120.0,
                 max_iters=200_000, obj_scale=1.0, seed=0):
        self.corner_push = corner_push
        self.eps_rel = eps_rel
        self.eps_abs = eps_abs
        self.time_limit = time_limit
        self.max_iters = max_iters
        self.obj_scale = obj_scale
        self.seed = seed

    def fit(self, X, y=None):
        lp = check_lp(X)
        common = dict(eps_rel=self.eps_rel, eps_abs=self.eps_abs, time_limit=self.time_limit,
                      max_iters=self.max_iters, seed=self.seed)
        self.pdhg_ = PDHGSolver(**common).fit(lp)
        it = self.pdhg_.iterate_
        self.corner_ = None
        if self.corner_push and self.pdhg_.result_.converged:
            self.corner_ = CornerPush(obj_scale=self.obj_scale, **common).fit(lp, self.pdhg_.result_)
            it = self.corner_.iterate_
        self.crossover_ = Crossover(eps_abs=self.eps_abs).fit(lp, it)
        self.lp_ = lp
        self.iterate_ = self.crossover_.iterate_
        self.status_ = self.crossover_.status_
        self.objective_ = lp.user_objective(self.iterate_.x)
        return self

    @property
    def optimal(self) -> bool:
        check_is_fitted(self, "status_")
        return self.status_ is CrossoverStatus.OPTIMAL_BASIS
