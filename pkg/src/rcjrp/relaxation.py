"""The convex relaxation: solver, objective and first-order certificate.

Everything is solved in frequencies ``f = 1/T``:

    minimize   K0 f0 + sum_i (K_i f_i + H_i / f_i)
    subject to f_i <= f0,  sum_i alpha[d, i] f_i <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import nnls

from .instance import Instance, InvalidInstanceError, validate

__all__ = [
    "RelaxedSolution",
    "KktReport",
    "ConvergenceError",
    "psi",
    "solve_relaxation",
    "solve_unconstrained",
    "kkt_check",
    "sample_feasible",
    "exactly_feasible",
    "TAU_FEAS",
]

TAU_FEAS = 1e-9
MAX_NEWTON = 200
MAX_OUTER = 60


class ConvergenceError(RuntimeError):
    """Raised when the solver stops above tolerance; carries the best iterate."""

    def __init__(self, message: str, best: "RelaxedSolution"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    T_min_star: float
    T_star: np.ndarray
    objective: float
    kkt_residual: float
    active_resources: frozenset[int] = frozenset()
    iterations: int = 0
    method: str = "barrier"

    @property
    def n(self) -> int:
        return self.T_star.shape[0]

    @property
    def clamped(self) -> np.ndarray:
        """Commodities sitting on T_i = T_min."""
        return self.T_star == self.T_min_star


@dataclass
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float
    nu: np.ndarray
    lam: np.ndarray
    flagged: list[str] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


def psi(instance: Instance, T_min: float, T) -> float:
    """Objective of the relaxation at intervals ``(T_min, T)``."""
    T = np.asarray(T, dtype=float)
    return float(instance.K0 / T_min + np.sum(instance.K / T) + np.sum(instance.H * T))


def _require_valid(instance: Instance):
    report = validate(instance)
    if report.issues:
        raise InvalidInstanceError(report)


# ---------------------------------------------------------------------------
# Resource-free case: exact


def _clamp_frequencies(K0: float, K: np.ndarray, H: np.ndarray) -> tuple[float, np.ndarray]:
    """Optimal (f0, f) without resource rows.

    Commodities whose own EOQ frequency exceeds f0 are clamped to f0, and
    f0 = sqrt(H_C / (K0 + K_C)) over the clamped set C.
    """
    with np.errstate(divide="ignore"):
        eoq = np.where(K > 0, np.sqrt(H / np.where(K > 0, K, 1.0)), np.inf)
    order = np.argsort(-eoq, kind="stable")
    HC = np.cumsum(H[order])
    KC = np.cumsum(K[order])
    f0_all = np.sqrt(HC / (K0 + KC))
    f0 = f0_all[-1]
    for j in range(len(order)):
        nxt = eoq[order[j + 1]] if j + 1 < len(order) else 0.0
        if f0_all[j] >= nxt:
            f0 = f0_all[j]
            break
    return float(f0), np.minimum(eoq, f0)


# ---------------------------------------------------------------------------
# Barrier method on the full problem


class _Barrier:
    def __init__(self, instance: Instance):
        self.K0 = instance.K0
        self.K = instance.K
        self.H = instance.H
        self.A = instance.alpha
        self.n = instance.n

    def objective(self, f0, f):
        return self.K0 * f0 + float(self.K @ f + np.sum(self.H / f))

    def slacks(self, x):
        f0, f = x[0], x[1:]
        return f0 - f, 1.0 - self.A @ f

    def phi(self, x, t):
        s, r = self.slacks(x)
        if np.any(s <= 0) or np.any(r <= 0) or np.any(x[1:] <= 0):
            return math.inf
        return t * self.objective(x[0], x[1:]) - np.sum(np.log(s)) - np.sum(np.log(r))

    def newton_step(self, x, t):
        f = x[1:]
        s, r = self.slacks(x)
        n = self.n
        g = np.empty(n + 1)
        g[0] = t * self.K0 - np.sum(1.0 / s)
        g[1:] = t * (self.K - self.H / f**2) + 1.0 / s + self.A.T @ (1.0 / r)
        Hm = np.zeros((n + 1, n + 1))
        w = 1.0 / s**2
        Hm[0, 0] = np.sum(w)
        Hm[0, 1:] = -w
        Hm[1:, 0] = -w
        Hm[1:, 1:] = (self.A.T * (1.0 / r**2)) @ self.A
        Hm[np.arange(1, n + 1), np.arange(1, n + 1)] += t * 2.0 * self.H / f**3 + w
        try:
            dx = -np.linalg.solve(Hm, g)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(Hm, g, rcond=None)[0]
        return dx, float(-g @ dx)

    def center(self, x, t):
        steps = 0
        for _ in range(MAX_NEWTON):
            dx, dec = self.newton_step(x, t)
            steps += 1
            if dec / 2 <= 1e-12:
                break
            step, base = 1.0, self.phi(x, t)
            while step > 1e-14:
                cand = x + step * dx
                val = self.phi(cand, t)
                if val <= base - 0.25 * step * dec:
                    break
                step *= 0.5
            else:
                break
            x = cand
        return x, steps


def _start_point(instance: Instance) -> np.ndarray:
    K_eff = instance.K + instance.K0 / instance.n
    f = np.sqrt(instance.H / K_eff)
    if instance.D:
        use = float(np.max(instance.alpha @ f))
        if use > 0.5:
            f = f * (0.5 / use)
    return np.concatenate(([1.1 * f.max()], f))


def _active_sets(x, t, A, psi_val) -> tuple[np.ndarray, np.ndarray]:
    """Guess binding constraints from barrier multipliers (1/(t*slack))."""
    f0, f = x[0], x[1:]
    s = f0 - f
    r = 1.0 - A @ f
    nu = 1.0 / (t * s)
    lam = 1.0 / (t * r)
    clamped = nu * f0 / psi_val > s / f0
    active = lam / psi_val > r
    return clamped, active


def _polish(instance: Instance, f0: float, f: np.ndarray, clamped: np.ndarray, active: np.ndarray):
    """Newton on the KKT system with fixed active sets; None if it fails to certify."""
    K0, K, H, A = instance.K0, instance.K, instance.H, instance.alpha
    free = ~clamped
    if not clamped.any():
        return None
    act = np.flatnonzero(active)
    fi = f[free].copy()
    lam = np.zeros(act.size)
    nf, na = fi.size, act.size
    Af = A[np.ix_(act, np.flatnonzero(free))] if na else np.zeros((0, nf))
    Ac = A[np.ix_(act, np.flatnonzero(clamped))] if na else np.zeros((0, int(clamped.sum())))
    Kc, Hc = K[clamped], H[clamped]
    Kf, Hf = K[free], H[free]
    for _ in range(50):
        # unknowns: f0, fi (free), lam
        F = np.empty(1 + nf + na)
        F[0] = K0 + np.sum(Kc - Hc / f0**2) + (lam @ Ac.sum(axis=1) if na else 0.0)
        F[1 : 1 + nf] = Kf - Hf / fi**2 + (Af.T @ lam if na else 0.0)
        if na:
            F[1 + nf :] = Af @ fi + Ac.sum(axis=1) * f0 - 1.0
        J = np.zeros((1 + nf + na, 1 + nf + na))
        J[0, 0] = 2.0 * np.sum(Hc) / f0**3
        J[np.arange(1, 1 + nf), np.arange(1, 1 + nf)] = 2.0 * Hf / fi**3
        if na:
            J[0, 1 + nf :] = Ac.sum(axis=1)
            J[1 : 1 + nf, 1 + nf :] = Af.T
            J[1 + nf :, 0] = Ac.sum(axis=1)
            J[1 + nf :, 1 : 1 + nf] = Af
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        f0 += d[0]
        fi = fi + d[1 : 1 + nf]
        lam = lam + d[1 + nf :]
        if f0 <= 0 or np.any(fi <= 0):
            return None
        if np.max(np.abs(d[: 1 + nf]) / np.concatenate(([f0], fi))) < 1e-15:
            break
    fnew = np.empty_like(f)
    fnew[clamped] = f0
    fnew[free] = fi
    return f0, fnew


def exactly_feasible(instance: Instance, T_min: float, T: np.ndarray) -> bool:
    """Exact rational check of T_i >= T_min and every resource row."""
    if np.any(T < T_min):
        return False
    inv = [1 / Fraction(float(t)) for t in T]
    for row in instance.alpha:
        if sum(Fraction(float(a)) * v for a, v in zip(row, inv) if a) > 1:
            return False
    return True


def _finalize(instance: Instance, f0: float, f: np.ndarray, method: str, iterations: int):
    T_min = 1.0 / f0
    T = np.maximum(1.0 / f, T_min)
    T[np.abs(T - T_min) <= 1e-14 * T_min] = T_min
    # nudge outward until feasibility holds in exact arithmetic
    bump = 1.0
    while not exactly_feasible(instance, T_min, T):
        bump *= 1.0 + 2.0**-50
        T_min, T = T_min * bump, T * bump
        if bump > 1.0 + 1e-9:
            raise ConvergenceError("cannot restore exact feasibility", None)
    T.flags.writeable = False
    usage = instance.resource_usage(T)
    active = frozenset(int(d) for d in np.flatnonzero(usage >= 1.0 - TAU_FEAS))
    sol = RelaxedSolution(T_min, T, psi(instance, T_min, T), 0.0, active, iterations, method)
    report = kkt_check(instance, sol)
    sol = RelaxedSolution(T_min, T, sol.objective, report.residual, active, iterations, method)
    return sol


def solve_unconstrained(instance: Instance) -> RelaxedSolution:
    """Exact optimum when resource rows are ignored."""
    f0, f = _clamp_frequencies(instance.K0, instance.K, instance.H)
    return _finalize(instance.without_resources(range(instance.D)), f0, f, "closed-form", 0)


def solve_relaxation(instance: Instance, tol: float = 1e-9, max_iter: int = 2000) -> RelaxedSolution:
    """Optimal (T_min*, T*) of the relaxation, certified to KKT residual ``tol``."""
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    _require_valid(instance)

    f0, f = _clamp_frequencies(instance.K0, instance.K, instance.H)
    if instance.D == 0 or np.all(instance.alpha @ f <= 1.0):
        sol = _finalize(instance, f0, f, "closed-form", 0)
        if sol.kkt_residual <= tol:
            return sol

    bar = _Barrier(instance)
    x = _start_point(instance)
    m = instance.n + instance.D
    t = m / max(bar.objective(x[0], x[1:]), 1e-300)
    total = 0
    best = None
    for _ in range(MAX_OUTER):
        x, steps = bar.center(x, t)
        total += steps
        if total > max_iter:
            break
        gap = m / t
        psi_val = bar.objective(x[0], x[1:])
        if gap < 1e-6 * psi_val:
            clamped, active = _active_sets(x, t, instance.alpha, psi_val)
            polished = _polish(instance, x[0], x[1:], clamped, active)
            if polished is not None:
                cand = _finalize(instance, polished[0], polished[1], "barrier+polish", total)
                if best is None or cand.kkt_residual < best.kkt_residual:
                    best = cand
                if cand.kkt_residual <= tol:
                    return cand
        if gap < 1e-14 * psi_val:
            break
        t *= 20.0
    plain = _finalize(instance, x[0], x[1:], "barrier", total)
    if best is None or plain.kkt_residual < best.kkt_residual:
        best = plain
    if best.kkt_residual <= tol:
        return best
    raise ConvergenceError(f"KKT residual {best.kkt_residual:.3e} above tol {tol:.1e}", best)


# ---------------------------------------------------------------------------
# Certification


def kkt_check(instance: Instance, solution: RelaxedSolution, near: float = 1e-7) -> KktReport:
    """First-order optimality residuals of ``solution``, all relative.

    Multipliers are estimated by nonnegative least squares over the
    commodities at T_min and the resources that are (claimed or nearly)
    binding.
    """
    T = np.asarray(solution.T_star, dtype=float)
    if T.shape != (instance.n,):
        raise ValueError(f"solution has {T.shape[0]} intervals, instance has {instance.n} commodities")
    K0, K, H, A = instance.K0, instance.K, instance.H, instance.alpha
    f0 = 1.0 / solution.T_min_star
    f = 1.0 / T
    usage = A @ f
    flagged: list[str] = []

    clamp_idx = np.flatnonzero(np.abs(f - f0) <= near * f0)
    claimed = set(solution.active_resources)
    res_idx = np.array(sorted(claimed | set(np.flatnonzero(usage >= 1.0 - near).tolist())), dtype=int)

    # stationarity: rows f0, f_1..f_n; columns nu (clamped) then lam
    grad = np.concatenate(([K0], K - H / f**2))
    M = np.zeros((instance.n + 1, clamp_idx.size + res_idx.size))
    for c, i in enumerate(clamp_idx):
        M[0, c] = -1.0
        M[1 + i, c] = 1.0
    for c, d in enumerate(res_idx):
        M[1:, clamp_idx.size + c] = A[d]
    scale = max(K0, float(np.max(H / f**2)), float(np.max(np.abs(K), initial=0.0)))
    if M.shape[1]:
        y, _ = nnls(M / scale, -grad / scale, maxiter=50 * M.shape[1] + 100)
    else:
        y = np.zeros(0)
    resid = grad + M @ y
    stationarity = float(np.max(np.abs(resid)) / scale)
    nu = np.zeros(instance.n)
    nu[clamp_idx] = y[: clamp_idx.size]
    lam = np.zeros(instance.D)
    lam[res_idx] = y[clamp_idx.size :]

    primal = max(
        float(np.max(np.maximum(f - f0, 0.0)) / f0),
        float(np.max(np.maximum(usage - 1.0, 0.0), initial=0.0)),
    )
    dual = float(max(0.0, -np.min(y, initial=0.0)) / scale)
    psi_f = K0 * f0 + float(K @ f + np.sum(H / f))
    comp_terms = [float(np.max(nu * (f0 - f), initial=0.0)) / psi_f]
    if instance.D:
        comp_terms.append(float(np.max(lam * np.maximum(1.0 - usage, 0.0))) / psi_f)
    for d in claimed:
        slack = 1.0 - usage[d]
        if slack > near:
            flagged.append(f"resource {d} claimed binding but has slack {slack:.3e}")
            comp_terms.append(slack)
    if stationarity > 1e-3:
        flagged.append(f"stationarity residual {stationarity:.3e}")
    return KktReport(stationarity, primal, dual, max(comp_terms), nu, lam, flagged)


def sample_feasible(instance: Instance, rng: np.random.Generator, count: int, spread: float = 3.0):
    """Random feasible (T_min, T) pairs, log-uniform around the EOQ intervals."""
    K_eff = np.where(instance.K > 0, instance.K, instance.K0)
    base = np.sqrt(K_eff / instance.H)
    out = []
    for _ in range(count):
        T = base * np.exp(rng.uniform(-math.log(spread), math.log(spread), instance.n))
        T_min = float(T.min()) * math.exp(rng.uniform(-math.log(spread), 0.0))
        if instance.D:
            use = float(np.max(instance.resource_usage(T)))
            if use > 1.0:
                T = T * use * (1.0 + 1e-12)
                T_min *= use * (1.0 + 1e-12)
        out.append((T_min, T))
    return out
