"""Rounded policies: construction, exact cost, best-of-two and derandomized shift."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gridmath import (
    GridConfig,
    GridPoint,
    RANDOM,
    ScaledPower,
    branch_multipliers,
    density,
    inclusion_exclusion_sum,
    multipliers,
    round_up,
    _ie_float,
)
from .instance import Instance
from .relaxation import RelaxedSolution

__all__ = [
    "Policy",
    "CostBreakdown",
    "BestOfTwo",
    "CostProfile",
    "Derandomized",
    "InfeasiblePolicyError",
    "build_policy",
    "exact_joint_density",
    "evaluate",
    "cost_bound",
    "best_of_two",
    "cost_profile",
    "derandomize",
    "policy_feasible",
]

# Interior candidates are kept this far inside their piece, so that float
# rounding near a breakpoint never assigns them to the neighbouring piece.
PIECE_MARGIN = 1e-9


class InfeasiblePolicyError(AssertionError):
    pass


@dataclass(frozen=True, eq=False)
class Policy:
    """Rounded intervals, each a point of one concrete grid."""

    points: tuple[GridPoint, ...]
    config: GridConfig
    provenance: str

    @property
    def intervals(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def multipliers(self) -> tuple[ScaledPower, ...]:
        return tuple(p.multiplier for p in self.points)

    @property
    def scale(self) -> float:
        return self.config.scale

    def exact_intervals(self) -> list[ScaledPower]:
        """Distinct multipliers (intervals divided by the common scale)."""
        return sorted(set(self.multipliers), key=float)


@dataclass(frozen=True)
class CostBreakdown:
    joint: float
    individual_ordering: float
    holding: float
    total: float
    ratio: float
    density: float
    density_bound: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def policy_feasible(instance: Instance, T) -> bool:
    """Exact rational check of every resource row at intervals ``T``."""
    inv = [1 / Fraction(float(t)) for t in T]
    for row in instance.alpha:
        if sum(Fraction(float(a)) * v for a, v in zip(row, inv) if a) > 1:
            return False
    return True


def _anchored(solution: RelaxedSolution, config: GridConfig) -> GridConfig:
    if config.anchor != solution.T_min_star:
        config = config.with_anchor(solution.T_min_star)
    return config


def build_policy(
    solution: RelaxedSolution,
    config: GridConfig,
    provenance: str | None = None,
    instance: Instance | None = None,
) -> Policy:
    """Round every T_i* up on the grid of ``config`` anchored at T_min*.

    When ``instance`` is given, resource feasibility is asserted exactly.
    """
    if config.random:
        raise ValueError("build_policy needs a concrete theta; use derandomize for RANDOM")
    config = _anchored(solution, config)
    points = tuple(round_up(config, float(t)) for t in solution.T_star)
    policy = Policy(points, config, provenance or config.family)
    if instance is not None and not policy_feasible(instance, policy.intervals):
        raise InfeasiblePolicyError(f"{config.label()} violates a resource row")
    return policy


def exact_joint_density(policy: Policy) -> float:
    """Joint orders per unit time of the policy (exact union of epochs)."""
    return float(inclusion_exclusion_sum(policy.multipliers)) / policy.scale


def evaluate(policy: Policy, instance: Instance, opt_P: float) -> CostBreakdown:
    """Long-run cost F(T) with the exact joint density, and its ratio to ``opt_P``."""
    T = policy.intervals
    dens = exact_joint_density(policy)
    joint = instance.K0 * dens
    ordering = float(np.sum(instance.K / T))
    holding = float(np.sum(instance.H * T))
    total = joint + ordering + holding
    return CostBreakdown(joint, ordering, holding, total, total / opt_P, dens, density(policy.config))


def cost_bound(solution: RelaxedSolution, instance: Instance, config: GridConfig) -> float:
    """Closed-form cost bound V_J K0/T_min + V_K sum K/T + V_H sum H T.

    Static configurations use the deterministic multipliers; shifted and
    interleaved ones use the expectation over the shift.
    """
    if config.interleaved or config.random or config.theta != 0.0:
        config = config.with_theta(RANDOM)
    vj, vk, vh = multipliers(config)
    T = solution.T_star
    return (
        vj * instance.K0 / solution.T_min_star
        + vk * float(np.sum(instance.K / T))
        + vh * float(np.sum(instance.H * T))
    )


@dataclass(frozen=True)
class BestOfTwo:
    policy: Policy
    cost: CostBreakdown
    bound: float
    costs: tuple[CostBreakdown, CostBreakdown]
    bounds: tuple[float, float]

    def __iter__(self):
        yield self.policy
        yield self.cost


def best_of_two(
    solution: RelaxedSolution,
    instance: Instance,
    config_a: GridConfig,
    config_b: GridConfig,
    theta: float | None = None,
) -> BestOfTwo:
    """Cheaper (by exact F) of the two rounded policies, with a shared shift.

    ``theta`` overrides the shift of both configurations.  The reported
    bound is the smaller of the two closed-form bounds.
    """
    if theta is not None:
        config_a, config_b = config_a.with_theta(theta), config_b.with_theta(theta)
    opt = solution.objective
    pa = build_policy(solution, config_a, "best-of-two", instance)
    pb = build_policy(solution, config_b, "best-of-two", instance)
    ca, cb = evaluate(pa, instance, opt), evaluate(pb, instance, opt)
    ba, bb = cost_bound(solution, instance, config_a), cost_bound(solution, instance, config_b)
    win, cost = (pa, ca) if ca.total <= cb.total else (pb, cb)
    return BestOfTwo(win, cost, min(ba, bb), (ca, cb), (ba, bb))


# ---------------------------------------------------------------------------
# Cost as a function of the shift


@dataclass(frozen=True)
class CostProfile:
    """Exact F(theta) on [0, 1] for a RANDOM-shift configuration.

    On piece j, theta in (lo[j], hi[j]], every interval is
    ``u(theta) * M_i`` with ``u = anchor * B**theta`` and fixed multipliers,
    so F = a[j] / u + b[j] * u.  ``a_bound`` replaces the exact joint density
    by the grid density.
    """

    config: GridConfig
    lo: np.ndarray
    hi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_bound: np.ndarray

    def _u(self, thetas):
        return self.config.anchor * np.exp(np.asarray(thetas, dtype=float) * self.config.log_base)

    @staticmethod
    def _wrap(thetas) -> np.ndarray:
        th = np.asarray(thetas, dtype=float)
        return np.where(th <= 0.0, 1.0, th)  # theta = 0 is the grid of theta = 1

    def piece_index(self, thetas) -> np.ndarray:
        th = self._wrap(thetas)
        return np.minimum(np.searchsorted(self.hi, th, side="left"), len(self.hi) - 1)

    def value(self, thetas, bound: bool = False) -> np.ndarray:
        th = self._wrap(thetas)
        idx = self.piece_index(th)
        u = self._u(th)
        a = self.a_bound if bound else self.a
        return a[idx] / u + self.b[idx] * u

    def mean(self, bound: bool = False) -> float:
        """Exact integral of F over theta in [0, 1]."""
        A, lb = self.config.anchor, self.config.log_base
        a = self.a_bound if bound else self.a
        inv = (np.exp(-self.lo * lb) - np.exp(-self.hi * lb)) / lb
        fwd = (np.exp(self.hi * lb) - np.exp(self.lo * lb)) / lb
        return float(np.sum(a / A * inv + self.b * A * fwd))

    def argmin(self, bound: bool = False) -> tuple[float, float]:
        """(theta, F) minimizing the per-piece closed form, kept inside pieces."""
        A, lb = self.config.anchor, self.config.log_base
        a = self.a_bound if bound else self.a
        with np.errstate(divide="ignore"):
            crit = np.log(np.sqrt(a / self.b) / A) / lb
        lo_c = self.lo + PIECE_MARGIN
        hi_c = self.hi - PIECE_MARGIN
        narrow = lo_c > hi_c
        cand = np.clip(crit, lo_c, hi_c)
        cand[narrow] = 0.5 * (self.lo[narrow] + self.hi[narrow])
        u = A * np.exp(cand * lb)
        vals = a / u + self.b * u
        j = int(np.argmin(vals))
        return float(cand[j]), float(vals[j])


def _breakpoints(solution: RelaxedSolution, config: GridConfig) -> np.ndarray:
    lb = config.log_base
    L = np.log(np.concatenate(([solution.T_min_star], solution.T_star)) / solution.T_min_star) / lb
    pts = [np.mod(L, 1.0)]
    if config.interleaved:
        pts.append(np.mod(L - config.beta, 1.0))
    bp = np.unique(np.concatenate(pts + [np.array([0.0, 1.0])]))
    return bp


def cost_profile(solution: RelaxedSolution, instance: Instance, config: GridConfig) -> CostProfile:
    """Piecewise closed form of F(theta) for the RANDOM-shift ``config``."""
    config = _anchored(solution, config.with_theta(RANDOM))
    bp = _breakpoints(solution, config)
    los, his, aa, bb, abd = [], [], [], [], []
    K0, K, H = instance.K0, instance.K, instance.H
    cache: dict[tuple, float] = {}
    for lo, hi in zip(bp[:-1], bp[1:]):
        if hi - lo <= 0.0:
            continue
        cfg = config.with_theta(0.5 * (lo + hi))
        pts = [round_up(cfg, float(t)) for t in solution.T_star]
        mults = [float(p.multiplier) for p in pts]
        key = tuple(sorted(set(p.multiplier for p in pts), key=float))
        if key not in cache:
            cache[key] = float(inclusion_exclusion_sum(key))
        anchor_pt = round_up(cfg, config.anchor)
        grid_ie = _ie_float(branch_multipliers(config, anchor_pt.secondary))
        ordering = float(np.sum(K / np.array(mults)))
        los.append(lo)
        his.append(hi)
        aa.append(K0 * cache[key] + ordering)
        abd.append(K0 * grid_ie / float(anchor_pt.multiplier) + ordering)
        bb.append(float(np.sum(H * np.array(mults))))
    arr = lambda v: np.array(v, dtype=float)
    return CostProfile(config, arr(los), arr(his), arr(aa), arr(bb), arr(abd))


@dataclass(frozen=True)
class Derandomized:
    theta: float
    policy: Policy
    cost: CostBreakdown
    profile: CostProfile
    bound_theta: float
    bound_value: float

    def __iter__(self):
        yield self.theta
        yield self.policy


def derandomize(solution: RelaxedSolution, instance: Instance, config: GridConfig) -> Derandomized:
    """Shift minimizing the exact cost; the optimum of the bound is reported too."""
    if not config.random:
        raise ValueError("derandomize expects a RANDOM theta")
    profile = cost_profile(solution, instance, config)
    theta, _ = profile.argmin()
    bound_theta, bound_value = profile.argmin(bound=True)
    policy = build_policy(solution, profile.config.with_theta(theta), "derandomized", instance)
    cost = evaluate(policy, instance, solution.objective)
    return Derandomized(theta, policy, cost, profile, bound_theta, bound_value)
