"""Factor-revealing LP for the instance-dependent best-of-two shifted policies.

The adversary spreads unit relaxation cost over the joint term ``z``, the
ordering terms ``x_nu`` and the holding terms ``y_nu`` of each residue class
nu = 1..N of intervals modulo powers of 2^(1/N).  For every discretized shift
and k in {1, 2} the policy pays a fixed linear function of (z, x, y); the LP
value rho is the best worst-case ratio over the shifts.

Since ``rho = max_w min_r (C w)_r`` over distributions w, it is the value of a
matrix game with a positive payoff matrix C, and is solved in the form

    max 1.pi  s.t.  C^T pi <= 1, pi >= 0,      rho = 1 / sum(pi),

whose slack basis is feasible.  Row duals give the adversary's witness and
``pi / sum(pi)`` is a mixture of shifts certifying the upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ._simplex import simplex_max
from .gridmath import GridConfig, RANDOM, inclusion_exclusion_sum, static_multipliers
from .instance import Instance
from .policies import CostBreakdown, Policy, build_policy, cost_profile, evaluate
from .relaxation import RelaxedSolution, psi

__all__ = [
    "LpModel",
    "LpSolution",
    "TildeResult",
    "SEARCH",
    "build_lp",
    "solve_lp",
    "recheck_certificate",
    "final_guarantee",
    "rounding_ratio",
    "tilde_solution",
    "build_tilde_policy",
]

SEARCH = "search"
KS = (1, 2)


def _sigma(k: int) -> float:
    return float(inclusion_exclusion_sum(static_multipliers(GridConfig(2, k))))


def rounding_ratio(k: int, nu, N: int, ell, L: int) -> np.ndarray:
    """R_{2,k,theta}(2^(nu/N)) / 2^(nu/N) with theta = ell/L on the anchor-1 grid.

    The grid is 2^((p + theta)/k); the successor exponent is found in integer
    arithmetic so that coinciding points are always rounded strictly up.
    """
    nu = np.asarray(nu, dtype=np.int64)
    ell = np.asarray(ell, dtype=np.int64)
    if L == 0:
        L, ell = 1, np.zeros_like(ell)
    # exponent difference in units of 1/(k N L): p*N*L + ell*N - k*nu*L > 0, minimal
    num = k * nu * L - ell * N
    p = np.floor_divide(num, N * L) + 1
    gap = p * N * L - num
    return np.exp2(gap / (k * N * L))


@dataclass(frozen=True, eq=False)
class LpModel:
    """Payoff matrix C: one row per (k, theta), columns (z, x_1..x_N, y_1..y_N)."""

    N: int
    L: int
    C: np.ndarray
    row_k: np.ndarray
    row_theta: np.ndarray

    @property
    def n_rows(self) -> int:
        """Constraint rows including the normalization row."""
        return self.C.shape[0] + 1

    @property
    def n_vars(self) -> int:
        """rho, z, x_nu and y_nu."""
        return self.C.shape[1] + 1


def build_lp(N: int, L: int) -> LpModel:
    if N < 1 or L < 0:
        raise ValueError("need N >= 1 and L >= 0")
    nu = np.arange(1, N + 1)
    ells = np.arange(L + 1)
    thetas = ells / L if L else np.zeros(1)
    blocks, rk, rt = [], [], []
    for k in KS:
        ratio = rounding_ratio(k, nu[None, :], N, ells[:, None], L)
        zc = np.exp2(-thetas / k) * _sigma(k)
        blocks.append(np.column_stack([zc, 1.0 / ratio, ratio]))
        rk.append(np.full(thetas.size, k))
        rt.append(thetas)
    C = np.vstack(blocks)
    if not np.all(np.isfinite(C)) or np.any(C <= 0):
        raise AssertionError("payoff matrix must be finite and positive")
    return LpModel(N, L, C, np.concatenate(rk), np.concatenate(rt))


@dataclass(frozen=True)
class LpSolution:
    rho: float
    z: float
    x: np.ndarray
    y: np.ndarray
    certificate: np.ndarray  # mixture over rows (k, theta)
    lower: float  # min over rows at the witness
    upper: float  # max over columns of the certificate mixture
    status: str
    iterations: int

    @property
    def witness(self) -> np.ndarray:
        return np.concatenate(([self.z], self.x, self.y))

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def recheck_certificate(model: LpModel, witness: np.ndarray, mixture: np.ndarray) -> tuple[float, float]:
    """(lower, upper) bracket on rho from plain arithmetic on the matrix.

    Every witness distribution w gives rho >= min_r (C w)_r, and every row
    mixture p gives rho <= max_j (p^T C)_j.
    """
    w = np.asarray(witness, dtype=float)
    p = np.asarray(mixture, dtype=float)
    if np.any(w < 0) or np.any(p < 0):
        raise ValueError("witness and mixture must be nonnegative")
    w = w / math.fsum(w)
    p = p / math.fsum(p)
    return float(np.min(model.C @ w)), float(np.max(p @ model.C))


def _solve_game(C: np.ndarray, max_iter: int, engine: str = "highs"):
    """(pi, u, value, iterations) for the game with payoff C via the slack-feasible form."""
    if engine == "highs":
        res = linprog(
            -np.ones(C.shape[0]), A_ub=C.T, b_ub=np.ones(C.shape[1]), bounds=(0, None),
            method="highs-ds", options={"maxiter": max_iter},
        )
        if res.status != 0:
            raise ArithmeticError(f"game LP failed: {res.message}")
        return np.maximum(res.x, 0.0), np.maximum(-res.ineqlin.marginals, 0.0), -1.0 / res.fun, res.nit
    if engine != "own":
        raise ValueError(f"unknown engine {engine!r}")
    res = simplex_max(np.ones(C.shape[0]), C.T, np.ones(C.shape[1]), max_iter=max_iter)
    if res.status != "optimal":
        raise ArithmeticError(f"game LP ended with status {res.status}")
    return np.maximum(res.x, 0.0), np.maximum(res.y, 0.0), 1.0 / res.objective, res.iterations


def solve_lp(
    model: LpModel,
    method: str = "oracle",
    tol: float = 1e-12,
    batch: int = 64,
    max_iter: int = 200_000,
    engine: str = "highs",
) -> LpSolution:
    """Optimal rho with witness and certificate.

    ``method="simplex"`` solves the whole game at once.  ``method="oracle"``
    solves it on growing row and column subsets, each time adding the rows
    the current witness does worst on and the columns the current mixture
    pays most on, until the two bounds on rho meet within ``tol``.
    ``engine`` picks the solver for each game: HiGHS dual simplex, or the
    dense simplex in this package ("own").
    """
    C = model.C
    R, V = C.shape
    if method == "simplex":
        pi, u, _, iters = _solve_game(C, max_iter, engine)
    elif method == "oracle":
        rows = np.unique(np.linspace(0, R - 1, min(R, 16)).astype(int))
        cols = np.unique(np.linspace(0, V - 1, min(V, 16)).astype(int))
        iters = 0
        while True:
            pi_s, u_s, val, nit = _solve_game(C[np.ix_(rows, cols)], max_iter, engine)
            iters += nit
            pi = np.zeros(R)
            pi[rows] = pi_s
            u = np.zeros(V)
            u[cols] = u_s
            p = pi / pi.sum()
            w = u / u.sum()
            col_pay = p @ C
            row_pay = C @ w
            new_cols = np.setdiff1d(np.argsort(-col_pay)[:batch], cols)
            new_cols = new_cols[col_pay[new_cols] > val + tol]
            new_rows = np.setdiff1d(np.argsort(row_pay)[:batch], rows)
            new_rows = new_rows[row_pay[new_rows] < val - tol]
            if new_cols.size == 0 and new_rows.size == 0:
                break
            cols = np.union1d(cols, new_cols)
            rows = np.union1d(rows, new_rows)
    else:
        raise ValueError(f"unknown method {method!r}")
    lower, upper = recheck_certificate(model, u, pi)
    rho = 0.5 * (lower + upper)
    w = u / math.fsum(u)
    N = model.N
    return LpSolution(rho, float(w[0]), w[1 : N + 1], w[N + 1 :], pi / math.fsum(pi), lower, upper, "optimal", iters)


def final_guarantee(rho: float, N: int) -> float:
    """Guarantee against the relaxation optimum: the modified point costs <= 2^(1/N) OPT."""
    return rho * 2.0 ** (1.0 / N)


# ---------------------------------------------------------------------------
# The policy side


def _weak_power_round(t: float, N: int) -> float:
    """Smallest integer power of 2^(1/N) that is >= t."""
    j = math.ceil(N * math.log2(t))
    while 2.0 ** ((j - 1) / N) >= t:
        j -= 1
    while 2.0 ** (j / N) < t:
        j += 1
    return 2.0 ** (j / N)


def tilde_solution(instance: Instance, solution: RelaxedSolution, N: int) -> RelaxedSolution:
    """The relaxation point with every interval rounded up to a power of 2^(1/N)."""
    T_min = _weak_power_round(solution.T_min_star, N)
    T = np.array([_weak_power_round(float(t), N) for t in solution.T_star])
    T = np.maximum(T, T_min)
    T.flags.writeable = False
    return RelaxedSolution(T_min, T, psi(instance, T_min, T), math.nan, frozenset(), 0, f"tilde(N={N})")


def residue_classes(tilde: RelaxedSolution, N: int) -> np.ndarray:
    """nu in 1..N with T~_i / T~_min = 2^(r_i + nu/N)."""
    e = np.rint(N * np.log2(tilde.T_star / tilde.T_min_star)).astype(np.int64)
    nu = np.mod(e, N)
    return np.where(nu == 0, N, nu)


@dataclass(frozen=True)
class TildeResult:
    policy: Policy
    cost: CostBreakdown
    theta: float
    tilde: RelaxedSolution

    def __iter__(self):
        yield self.policy
        yield self.cost


def build_tilde_policy(
    solution: RelaxedSolution,
    instance: Instance,
    N: int,
    theta=SEARCH,
    L: int | None = None,
) -> TildeResult:
    """Cheaper of the (2,1) and (2,2) shifted policies built on the modified point.

    With ``theta=SEARCH`` the candidates are the minimizers of both exact
    cost profiles, plus theta = l/L when ``L`` is given, and the shift is
    chosen by exact evaluation.  (The profiles are not used at the points
    l/L themselves: for the modified point every breakpoint is a multiple
    of 1/N, so those shifts sit on piece boundaries.)
    """
    tilde = tilde_solution(instance, solution, N)
    opt = solution.objective
    configs = [GridConfig(2, k, 1, RANDOM, tilde.T_min_star) for k in KS]
    if theta == SEARCH:
        cands = [cost_profile(tilde, instance, c).argmin()[0] for c in configs]
        if L:
            cands.extend(np.arange(L + 1) / L)
    else:
        cands = [float(theta)]
    best = None
    for th in cands:
        for c in configs:
            pol = build_policy(tilde, c.with_theta(float(th)), "tilde", instance)
            cost = evaluate(pol, instance, opt)
            if best is None or cost.total < best[1].total:
                best = (pol, cost, float(th))
    theta = best[2]
    return TildeResult(best[0], best[1], float(theta), tilde)
