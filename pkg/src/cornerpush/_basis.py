"""Dense LU basis factorization with product-form updates."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


class SingularBasisError(RuntimeError):
    pass


class BasisFactor:
    """Solves with ``B = A[:, basis]`` via LU plus a list of eta columns.

    After ``refactor_every`` updates the LU is recomputed from scratch.
    """

    def __init__(self, A: sp.csc_matrix, basis: np.ndarray, refactor_every: int = 50,
                 singular_tol: float = 1e-11):
        self.A = A
        self.basis = np.array(basis, dtype=int)
        self.refactor_every = refactor_every
        self.singular_tol = singular_tol
        self.refactor_count = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        with np.errstate(all="ignore"):
            lu, piv = sla.lu_factor(B, check_finite=False)
        diag = np.abs(np.diag(lu))
        scale = max(np.abs(B).max(initial=0.0), 1.0)
        if diag.size and (not np.all(np.isfinite(diag)) or diag.min() <= self.singular_tol * scale):
            raise SingularBasisError(
                f"basis matrix is numerically singular (min pivot {diag.min():.3e})"
            )
        self._lu = (lu, piv)
        self._etas: list[tuple[int, np.ndarray]] = []
        self.refactor_count += 1

    @property
    def needs_refactor(self) -> bool:
        return len(self._etas) >= self.refactor_every

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.A.shape[0])
        start, end = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[start:end]] = self.A.data[start:end]
        return col

    def ftran(self, v) -> np.ndarray:
        """Solve ``B w = v``."""
        w = sla.lu_solve(self._lu, v, check_finite=False)
        for r, eta in self._etas:
            wr = w[r] / eta[r]
            w -= eta * wr
            w[r] = wr
        return w

    def btran(self, v) -> np.ndarray:
        """Solve ``B' u = v``."""
        u = np.array(v, dtype=float)
        for r, eta in reversed(self._etas):
            ur = u[r]
            u[r] = (ur + eta[r] * ur - eta @ u) / eta[r]
        return sla.lu_solve(self._lu, u, trans=1, check_finite=False)

    def replace(self, r: int, q: int, w: np.ndarray):
        """Put column ``q`` at basis position ``r``; ``w`` must be ``B^-1 a_q``."""
        self.basis[r] = q
        self._etas.append((r, np.array(w, dtype=float)))
        if self.needs_refactor:
            self.refactor()


def select_independent(A: sp.csc_matrix, order, target: int, rel_tol: float = 1e-7) -> list[int]:
    """Greedily pick columns in ``order`` that keep the picked set independent.

    Stops once ``target`` columns are picked. Uses Gram-Schmidt with one
    re-orthogonalization pass.
    """
    m = A.shape[0]
    Q = np.zeros((m, min(target, m)))
    chosen: list[int] = []
    r = 0
    for j in order:
        if r >= target:
            break
        start, end = A.indptr[j], A.indptr[j + 1]
        if start == end:
            continue
        a = np.zeros(m)
        a[A.indices[start:end]] = A.data[start:end]
        na = np.linalg.norm(a)
        v = a
        if r:
            Qr = Q[:, :r]
            v = a - Qr @ (Qr.T @ a)
            v -= Qr @ (Qr.T @ v)
        nv = np.linalg.norm(v)
        if nv > rel_tol * na:
            Q[:, r] = v / nv
            r += 1
            chosen.append(int(j))
    return chosen
