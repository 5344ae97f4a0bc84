"""Brute-force oracles: joint-order counting over a horizon and Monte-Carlo over the shift."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .gridmath import GridConfig, ScaledPower, round_up

__all__ = ["HorizonCount", "count_joint_orders", "grid_points_between", "horizon_density", "monte_carlo_theta", "MEMORY_GUARD"]

# Largest integer range materialised as a boolean sieve; above it, epochs
# are streamed through a k-way merge.
MEMORY_GUARD = 50_000_000


@dataclass(frozen=True)
class HorizonCount:
    horizon: float
    joint_orders: int

    @property
    def density_estimate(self) -> float:
        return self.joint_orders / self.horizon


def _as_power(x) -> ScaledPower:
    if isinstance(x, ScaledPower):
        return x
    return ScaledPower.rational(Fraction(x))


def _count_sieve(steps: list[int], limit: int) -> int:
    marks = np.zeros(limit + 1, dtype=bool)
    for u in steps:
        marks[u::u] = True
    return int(np.count_nonzero(marks))


def _count_merge(steps: list[int], limit: int) -> int:
    heap = [(u, u) for u in steps if u <= limit]
    heapq.heapify(heap)
    count, last = 0, 0
    while heap:
        v, u = heap[0]
        if v != last:
            count += 1
            last = v
        if v + u <= limit:
            heapq.heapreplace(heap, (v + u, u))
        else:
            heapq.heappop(heap)
    return count


def count_joint_orders(intervals: Sequence, horizon: float, scale: float = 1.0) -> HorizonCount:
    """Count distinct epochs ``n * scale * T`` in ``[0, horizon]`` over all intervals ``T``.

    Intervals are exact (ScaledPower, int or Fraction), so coincident epochs
    are merged by exact arithmetic.  Epochs of incommensurable intervals only
    meet at time 0.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    powers = sorted(set(_as_power(x) for x in intervals), key=float)
    if not powers:
        raise ValueError("no intervals given")
    classes: dict[int, list[ScaledPower]] = {}
    for x in powers:
        classes.setdefault(x.j, []).append(x)
    total = 1  # epoch 0
    for members in classes.values():
        den = math.lcm(*(x.q.denominator for x in members))
        steps = sorted({int(x.q * den) for x in members})
        unit = scale * float(ScaledPower(Fraction(1, den), members[0].j, members[0].root, members[0].denom))
        limit = math.floor(horizon / unit)
        if limit < 1:
            continue
        if limit <= MEMORY_GUARD:
            total += _count_sieve(steps, limit)
        else:
            total += _count_merge(steps, limit)
    return HorizonCount(float(horizon), total)


def grid_points_between(config: GridConfig, upper: float) -> list[ScaledPower]:
    """Multipliers (relative to ``config.scale``) of grid points in [R(anchor), upper]."""
    if config.random:
        raise ValueError("grid_points_between needs a concrete theta")
    first = round_up(config, config.anchor)
    lo = first.value * (1.0 - 1e-12)
    p_hi = math.ceil(math.log(upper / config.scale) / config.log_base) + 1
    out = []
    for secondary in (False, True) if config.interleaved else (False,):
        for p in range(first.p - 2, p_hi + 1):
            x = config.power(p, secondary)
            if lo <= config.scale * float(x) <= upper:
                out.append(x)
    return out


def horizon_density(config: GridConfig, horizon: float) -> HorizonCount:
    """Joint orders in [0, horizon] generated by every grid point >= R(anchor)."""
    return count_joint_orders(grid_points_between(config, horizon), horizon, config.scale)


def monte_carlo_theta(
    fn: Callable,
    samples: int,
    seed: int,
    *,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Sample mean and standard error of ``fn(theta)`` for theta ~ U[0, 1].

    With ``vectorized=True``, ``fn`` receives the whole array of shifts.
    """
    if samples < 1000:
        raise ValueError("monte_carlo_theta needs at least 1000 samples")
    thetas = np.random.default_rng(seed).random(samples)
    if vectorized:
        values = np.asarray(fn(thetas), dtype=float)
    else:
        values = np.fromiter((fn(float(t)) for t in thetas), dtype=float, count=samples)
    if values.shape != (samples,):
        raise ValueError("fn must return one value per sample")
    if np.all(values == values[0]):
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))
