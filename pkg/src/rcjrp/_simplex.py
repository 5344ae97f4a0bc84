"""Dense revised simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The all-slack basis is feasible, so no phase 1 is needed.  The basis inverse
is kept explicitly and updated by rank-one eliminations; it is rebuilt from
scratch every ``reinvert`` pivots.  Pricing is Dantzig's rule, switching to
Bland's rule while the objective stalls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

__all__ = ["SimplexResult", "simplex_max"]


@dataclass
class SimplexResult:
    status: str  # "optimal" | "unbounded" | "iteration-cap"
    x: np.ndarray
    y: np.ndarray  # row duals, y >= 0 at optimality
    objective: float
    iterations: int


def simplex_max(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    *,
    max_iter: int = 200_000,
    tol: float = 1e-11,
    reinvert: int = 400,
    stall: int = 60,
) -> SimplexResult:
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("simplex_max needs b >= 0")
    A = np.asarray(A, dtype=float)
    AT = np.ascontiguousarray(A.T)
    cost = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
    basis = np.arange(n, n + m)  # variable index held by each row
    in_basis = np.zeros(n + m, dtype=bool)
    in_basis[basis] = True
    Binv = np.asfortranarray(np.eye(m))
    xB = np.asarray(b, dtype=float).copy()

    def column(j):
        if j < n:
            return A[:, j]
        e = np.zeros(m)
        e[j - n] = 1.0
        return e

    def rebuild():
        nonlocal Binv, xB
        B = np.column_stack([column(j) for j in basis])
        Binv = np.asfortranarray(np.linalg.inv(B))
        xB = Binv @ b
        np.maximum(xB, 0.0, out=xB)

    obj = 0.0
    best_obj, since_best = -np.inf, 0
    it = 0
    status = "iteration-cap"
    while it < max_iter:
        y = cost[basis] @ Binv
        d_struct = cost[:n] - AT @ y
        d_slack = -y
        d = np.concatenate([d_struct, d_slack])
        d[in_basis] = 0.0
        bland = since_best >= stall
        if bland:
            cand = np.flatnonzero(d > tol)
            if cand.size == 0:
                status = "optimal"
                break
            q = int(cand[0])
        else:
            q = int(np.argmax(d))
            if d[q] <= tol:
                status = "optimal"
                break
        aq = column(q)
        alpha = Binv @ aq
        pos = alpha > tol
        if not pos.any():
            status = "unbounded"
            break
        ratios = np.full(m, np.inf)
        ratios[pos] = xB[pos] / alpha[pos]
        tmin = ratios.min()
        ties = np.flatnonzero(ratios <= tmin + tol * max(1.0, tmin))
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(alpha[ties])])
        step = xB[r] / alpha[r]
        xB -= step * alpha
        xB[r] = step
        np.maximum(xB, 0.0, out=xB)
        piv_row = Binv[r, :].copy() / alpha[r]
        alpha_adj = alpha.copy()
        alpha_adj[r] -= 1.0
        Binv = dger(-1.0, alpha_adj, piv_row, a=Binv, overwrite_a=True)
        in_basis[basis[r]] = False
        basis[r] = q
        in_basis[q] = True
        it += 1
        if it % reinvert == 0:
            rebuild()
        obj = float(cost[basis] @ xB)
        if obj > best_obj + 1e-14 * max(1.0, abs(obj)):
            best_obj, since_best = obj, 0
        else:
            since_best += 1

    rebuild()
    x = np.zeros(n + m)
    x[basis] = xB
    y = cost[basis] @ Binv
    return SimplexResult(status, x[:n], y, float(cost[:n] @ x[:n]), it)
