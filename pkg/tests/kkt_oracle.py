"""Dense, loop-based KKT recomputation used as an independent check.

Shares no code with ``cornerpush.lp_model``: every quantity is rebuilt from
the dense matrix with explicit per-row and per-column rules.
"""
import math

import numpy as np


def dense_kkt(lp, x, y):
    A = lp.A.toarray()
    m, n = A.shape
    b, c, lb, ub = lp.b, lp.c, lp.lb, lp.ub
    ax = A.dot(x)
    rp = np.zeros(m)
    for i in range(m):
        s = lp.row_sense[i]
        if s == "E":
            rp[i] = b[i] - ax[i]
        elif s == "L":
            rp[i] = max(ax[i] - b[i], 0.0)
        else:
            rp[i] = max(b[i] - ax[i], 0.0)
    # dual sign violations of inequality rows count as dual infeasibility
    ysign = np.zeros(m)
    for i in range(m):
        if lp.row_sense[i] == "L":
            ysign[i] = max(y[i], 0.0)
        elif lp.row_sense[i] == "G":
            ysign[i] = max(-y[i], 0.0)
    z = c - A.T.dot(y)
    rd = np.zeros(n)
    dobj = float(b.dot(y))
    for j in range(n):
        if z[j] > 0:
            if math.isinf(lb[j]):
                rd[j] = z[j]
            else:
                dobj += z[j] * lb[j]
        elif z[j] < 0:
            if math.isinf(ub[j]):
                rd[j] = z[j]
            else:
                dobj += z[j] * ub[j]
    pobj = float(c.dot(x))
    bviol = max(float(np.max(np.maximum(lb - x, 0.0), initial=0.0)),
                float(np.max(np.maximum(x - ub, 0.0), initial=0.0)))
    return {
        "primal": math.sqrt(float(rp.dot(rp))),
        "dual": math.sqrt(float(rd.dot(rd)) + float(ysign.dot(ysign))),
        "gap": abs(pobj - dobj),
        "pobj": pobj,
        "dobj": dobj,
        "bound_violation": bviol,
        "b_norm": math.sqrt(float(b.dot(b))),
        "c_norm": math.sqrt(float(c.dot(c))),
        "r_primal": rp,
        "r_dual": rd,
        "z": z,
    }


def kkt_ok(lp, x, y, eps_rel):
    k = dense_kkt(lp, x, y)
    return (k["primal"] <= eps_rel * (1 + k["b_norm"])
            and k["dual"] <= eps_rel * (1 + k["c_norm"])
            and k["gap"] <= eps_rel * (1 + abs(k["pobj"]) + abs(k["dobj"]))
            and k["bound_violation"] == 0.0), k
