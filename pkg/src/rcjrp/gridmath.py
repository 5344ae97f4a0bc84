"""Exact algebra of geometric and interleaved grids.

Grid points are stored as ``scale * multiplier`` where ``scale`` is a float
(``anchor * m**(theta/k)``) shared by every point of one configuration and
``multiplier`` is an exact :class:`ScaledPower` ``q * r**(j/d)``.  Deciding
whether two grid points coincide, or whether one is an integer multiple of
another, never touches floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

__all__ = [
    "RANDOM",
    "SNAP",
    "ScaledPower",
    "ExactValue",
    "MultiplierSet",
    "GridConfig",
    "GridPoint",
    "primitive_root",
    "round_up",
    "lcm_scaled",
    "inclusion_exclusion_sum",
    "static_multipliers",
    "primary_multipliers",
    "secondary_multipliers",
    "branch_multipliers",
    "density",
    "density_static",
    "density_interleaved",
    "expected_round",
    "expected_recip_round",
    "expected_density",
    "multipliers",
    "round_up_many",
    "density_many",
]

# A candidate grid point g only counts as strictly above t when
# g > t * (1 + SNAP).  Float noise in m**(p/k) is ~1e-16, so points meant to
# coincide with t are never mistaken for successors.
SNAP = 1e-12

MAX_IE_ELEMENTS = 24


class _RandomTheta:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "RANDOM"

    def __reduce__(self):
        return (_RandomTheta, ())


RANDOM = _RandomTheta()


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError(f"expected an exact rational, got float {x!r}")
    return Fraction(x)


def _iroot(n: int, e: int) -> int | None:
    """Integer e-th root of n, or None when n is not a perfect e-th power."""
    r = round(n ** (1.0 / e))
    for cand in (r - 1, r, r + 1):
        if cand > 0 and cand**e == n:
            return cand
    return None


@lru_cache(maxsize=None)
def primitive_root(m: int) -> tuple[int, int]:
    """Write ``m = r**e`` with ``r`` not a perfect power; returns ``(r, e)``."""
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    for e in range(m.bit_length(), 1, -1):
        r = _iroot(m, e)
        if r is not None and r >= 2:
            return primitive_root(r)[0], e * primitive_root(r)[1]
    return m, 1


@lru_cache(maxsize=None)
def _canonical_base(m: int, k: int) -> tuple[int, int, int]:
    """``m**(1/k) == r**(num/den)`` with r primitive and gcd(num, den) == 1."""
    r, e = primitive_root(m)
    g = math.gcd(e, k)
    return r, e // g, k // g


def _rational_lcm(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.lcm(a.numerator, b.numerator), math.gcd(a.denominator, b.denominator))


@dataclass(frozen=True, order=False)
class ScaledPower:
    """Exact positive value ``q * root**(j/denom)`` in canonical form.

    ``root`` is never a perfect power, so ``root**(j/denom)`` is irrational
    for ``0 < j < denom``.  Two values are commensurable iff their ``j``
    agree; all rationals have ``j == 0``.
    """

    q: Fraction
    j: int = 0
    root: int = 1
    denom: int = 1

    def __post_init__(self):
        object.__setattr__(self, "q", _as_fraction(self.q))
        if self.q <= 0:
            raise ValueError("ScaledPower needs q > 0")
        if not 0 <= self.j < self.denom:
            raise ValueError("ScaledPower exponent must be canonical (0 <= j < denom)")
        if self.j == 0 and (self.root, self.denom) != (1, 1):
            # rationals carry no base; keeps equality and hashing exact
            object.__setattr__(self, "root", 1)
            object.__setattr__(self, "denom", 1)

    @classmethod
    def make(cls, q, exponent: int, root: int, denom: int) -> "ScaledPower":
        """``q * root**(exponent/denom)`` for any integer exponent."""
        q = _as_fraction(q)
        if denom == 1 or root == 1:
            return cls(q * Fraction(root) ** exponent)
        whole, j = divmod(exponent, denom)
        return cls(q * Fraction(root) ** whole, j, root, denom)

    @classmethod
    def rational(cls, q) -> "ScaledPower":
        return cls(_as_fraction(q))

    @property
    def is_rational(self) -> bool:
        return self.j == 0

    def __float__(self) -> float:
        if self.j == 0:
            return float(self.q)
        return float(self.q) * self.root ** (self.j / self.denom)

    def _check_base(self, other: "ScaledPower"):
        if self.j and other.j and (self.root, self.denom) != (other.root, other.denom):
            raise ValueError("cannot combine ScaledPowers over different bases")

    def _base_of(self, other: "ScaledPower") -> tuple[int, int]:
        return (self.root, self.denom) if self.j else (other.root, other.denom)

    def __mul__(self, other):
        if isinstance(other, ScaledPower):
            self._check_base(other)
            root, denom = self._base_of(other)
            return ScaledPower.make(self.q * other.q, self.j + other.j, root, denom)
        if isinstance(other, (int, Fraction)):
            return ScaledPower(self.q * other, self.j, self.root, self.denom)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self) -> "ScaledPower":
        return ScaledPower.make(1 / self.q, -self.j, self.root, self.denom)

    def __truediv__(self, other):
        if isinstance(other, ScaledPower):
            return self * other.reciprocal()
        if isinstance(other, (int, Fraction)):
            return ScaledPower(self.q / other, self.j, self.root, self.denom)
        return NotImplemented

    def ratio(self, other: "ScaledPower") -> Fraction | None:
        """Exact ``self / other`` when rational, else None."""
        if self.j != other.j:
            return None
        self._check_base(other)
        return self.q / other.q

    def is_multiple_of(self, other: "ScaledPower") -> bool:
        r = self.ratio(other)
        return r is not None and r.denominator == 1

    def __lt__(self, other: "ScaledPower") -> bool:
        r = self.ratio(other)
        if r is not None:
            return r < 1
        return float(self) < float(other)

    def __str__(self):
        if self.j == 0:
            return str(self.q)
        return f"{self.q}*{self.root}^({self.j}/{self.denom})"


@dataclass(frozen=True)
class ExactValue:
    """Finite sum ``sum_j coeffs[j] * root**(j/denom)`` with rational coefficients."""

    coeffs: tuple[Fraction, ...] = (Fraction(0),)
    root: int = 1
    denom: int = 1

    @classmethod
    def zero(cls, root: int = 1, denom: int = 1) -> "ExactValue":
        return cls(tuple(Fraction(0) for _ in range(denom)), root, denom)

    @classmethod
    def of(cls, x: ScaledPower, root: int = 1, denom: int = 1) -> "ExactValue":
        if x.j:
            root, denom = x.root, x.denom
        coeffs = [Fraction(0)] * denom
        coeffs[x.j] = x.q
        return cls(tuple(coeffs), root, denom)

    def _widen(self, root: int, denom: int) -> "ExactValue":
        if (root, denom) == (self.root, self.denom):
            return self
        if any(self.coeffs[1:]):
            raise ValueError("cannot combine ExactValues over different bases")
        coeffs = [Fraction(0)] * denom
        coeffs[0] = self.coeffs[0]
        return ExactValue(tuple(coeffs), root, denom)

    def __add__(self, other: "ExactValue") -> "ExactValue":
        if self.denom >= other.denom:
            a, b = self, other._widen(self.root, self.denom)
        else:
            a, b = self._widen(other.root, other.denom), other
        return ExactValue(tuple(x + y for x, y in zip(a.coeffs, b.coeffs)), a.root, a.denom)

    def __sub__(self, other: "ExactValue") -> "ExactValue":
        return self + other.scale(Fraction(-1))

    def scale(self, c) -> "ExactValue":
        c = _as_fraction(c)
        return ExactValue(tuple(c * x for x in self.coeffs), self.root, self.denom)

    @property
    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    @property
    def rational_part(self) -> Fraction:
        return self.coeffs[0]

    def __float__(self) -> float:
        total = float(self.coeffs[0])
        for j, c in enumerate(self.coeffs[1:], start=1):
            if c:
                total += float(c) * self.root ** (j / self.denom)
        return total

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.is_rational and self.coeffs[0] == other
        if not isinstance(other, ExactValue):
            return NotImplemented
        n = max(self.denom, other.denom)
        try:
            a = self._widen(other.root, n) if self.denom < n else self
            b = other._widen(self.root, n) if other.denom < n else other
        except ValueError:
            return False
        return a.coeffs == b.coeffs

    def __hash__(self):
        if self.is_rational:
            return hash(self.coeffs[0])
        return hash((self.coeffs, self.root, self.denom))

    def __str__(self):
        parts = [str(self.coeffs[0])] if self.coeffs[0] else []
        for j, c in enumerate(self.coeffs[1:], start=1):
            if c:
                parts.append(f"{c}*{self.root}^({j}/{self.denom})")
        return " + ".join(parts) or "0"


class MultiplierSet:
    """Finite set of distinct ScaledPowers (base multipliers of a grid)."""

    __slots__ = ("_elements",)

    def __init__(self, elements: Iterable[ScaledPower]):
        self._elements = tuple(sorted(set(elements), key=float))
        if not self._elements:
            raise ValueError("MultiplierSet must be nonempty")

    def __iter__(self) -> Iterator[ScaledPower]:
        return iter(self._elements)

    def __len__(self) -> int:
        return len(self._elements)

    def __eq__(self, other):
        return isinstance(other, MultiplierSet) and set(self._elements) == set(other._elements)

    def __hash__(self):
        return hash(frozenset(self._elements))

    def __repr__(self):
        return "MultiplierSet({" + ", ".join(map(str, self._elements)) + "})"

    def scaled(self, factor: ScaledPower) -> "MultiplierSet":
        return MultiplierSet(x * factor for x in self._elements)


@lru_cache(maxsize=65536)
def _grid_power(m: int, k: int, alpha: Fraction, p: int, secondary: bool) -> ScaledPower:
    r, num, den = _canonical_base(m, k)
    x = ScaledPower.make(Fraction(1), num * p, r, den)
    return x * alpha if secondary else x


@lru_cache(maxsize=65536)
def _grid_power_float(m: int, k: int, alpha: Fraction, p: int, secondary: bool) -> float:
    return float(_grid_power(m, k, alpha, p, secondary))


@dataclass(frozen=True)
class GridConfig:
    """Parameters of a (possibly shifted, possibly interleaved) geometric grid.

    The grid is ``anchor * m**(theta/k) * {m**(p/k), alpha * m**(p/k) : p in Z}``;
    ``alpha == 1`` means no secondary grid.  ``theta`` is a float in [0, 1] or
    :data:`RANDOM`.
    """

    m: int
    k: int = 1
    alpha: Fraction = Fraction(1)
    theta: Union[float, _RandomTheta] = 0.0
    anchor: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "k", int(self.k))
        alpha = _as_fraction(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if alpha != 1 and not (alpha > 1 and alpha**self.k < self.m):
            raise ValueError(f"alpha must be 1 or lie in (1, m^(1/k)); got {alpha}")
        if self.theta is not RANDOM:
            theta = float(self.theta)
            if not 0.0 <= theta <= 1.0:
                raise ValueError(f"theta must lie in [0, 1], got {theta}")
            object.__setattr__(self, "theta", theta)
        if not (self.anchor > 0 and math.isfinite(self.anchor)):
            raise ValueError(f"anchor must be positive, got {self.anchor}")
        object.__setattr__(self, "anchor", float(self.anchor))

    @property
    def base(self) -> float:
        return self.m ** (1.0 / self.k)

    @property
    def log_base(self) -> float:
        return math.log(self.m) / self.k

    @property
    def beta(self) -> float:
        """Logarithmic offset log_B(alpha) in [0, 1)."""
        return math.log(self.alpha) / self.log_base

    @property
    def interleaved(self) -> bool:
        return self.alpha != 1

    @property
    def random(self) -> bool:
        return self.theta is RANDOM

    @property
    def scale(self) -> float:
        """Common float factor anchor * m**(theta/k) of every grid point."""
        if self.random:
            raise ValueError("scale needs a concrete theta")
        return self.anchor * self.m ** (self.theta / self.k)

    @property
    def canonical(self) -> tuple[int, int, int]:
        return _canonical_base(self.m, self.k)

    def power(self, p: int, secondary: bool = False) -> ScaledPower:
        """Exact multiplier ``m**(p/k)`` (times alpha for the secondary grid)."""
        return _grid_power(self.m, self.k, self.alpha, p, secondary)

    def with_theta(self, theta) -> "GridConfig":
        return GridConfig(self.m, self.k, self.alpha, theta, self.anchor)

    def with_anchor(self, anchor: float) -> "GridConfig":
        return GridConfig(self.m, self.k, self.alpha, self.theta, anchor)

    @property
    def family(self) -> str:
        if self.interleaved:
            return "interleaved"
        return "shifted" if self.random else "static"

    def label(self) -> str:
        parts = [str(self.m), str(self.k)]
        if self.interleaved:
            parts.append(str(self.alpha))
        return f"{self.family}({','.join(parts)})"


@dataclass(frozen=True)
class GridPoint:
    """A point ``scale * multiplier`` of a concrete grid."""

    value: float
    multiplier: ScaledPower
    scale: float
    p: int
    secondary: bool = False


def _class_successor(config: GridConfig, t: float, secondary: bool) -> GridPoint:
    s = config.scale
    offset = config.beta if secondary else 0.0
    threshold = t * (1.0 + SNAP)

    def value(p):
        return s * _grid_power_float(config.m, config.k, config.alpha, p, secondary)

    p = math.floor(math.log(t / s) / config.log_base - offset) + 1
    while value(p - 1) > threshold:
        p -= 1
    while value(p) <= threshold:
        p += 1
    mult = config.power(p, secondary)
    return GridPoint(s * float(mult), mult, s, p, secondary)


def round_up(config: GridConfig, t: float) -> GridPoint:
    """Smallest grid point strictly greater than ``t``.

    Grid points are rounded to their successors, never to themselves.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if config.random:
        raise ValueError("round_up needs a concrete theta")
    best = _class_successor(config, t, False)
    if config.interleaved:
        other = _class_successor(config, t, True)
        if other.value < best.value:
            best = other
    return best


def lcm_scaled(elements: Iterable[ScaledPower]) -> ScaledPower | float:
    """Least common integer multiple, or ``math.inf`` if incommensurable."""
    it = iter(elements)
    try:
        acc = next(it)
    except StopIteration:
        raise ValueError("lcm of an empty set") from None
    for x in it:
        if x.j != acc.j:
            return math.inf
        acc._check_base(x)
        acc = ScaledPower(_rational_lcm(acc.q, x.q), acc.j, acc.root, acc.denom)
    return acc


def _reduce_multiples(elements: Sequence[ScaledPower]) -> list[ScaledPower]:
    """Drop every element that is an integer multiple of another one."""
    uniq = sorted(set(elements), key=float)
    keep: list[ScaledPower] = []
    for x in uniq:
        if not any(x.is_multiple_of(y) for y in keep):
            keep.append(x)
    return keep


def _ie_class(elements: Sequence[ScaledPower]) -> ExactValue:
    """Inclusion-exclusion over one commensurability class (all LCMs finite)."""
    x0 = elements[0]
    root, denom = x0.root, x0.denom
    # common denominator: q_i = n_i / den, so LCM(N) = lcm(n_i : i in N) / den
    den = math.lcm(*(x.q.denominator for x in elements))
    ns = [int(x.q * den) for x in elements]
    top = math.lcm(*ns)
    acc_sum = 0

    def walk(start: int, acc: int, sign: int):
        nonlocal acc_sum
        for i in range(start, len(ns)):
            l = math.lcm(acc, ns[i])
            acc_sum += sign * (top // l)
            walk(i + 1, l, -sign)

    walk(0, 1, 1)
    total = Fraction(acc_sum * den, top)
    # 1 / (Q * r^(j/d)) = (1/(Q r)) * r^((d-j)/d) when j > 0
    if x0.j == 0:
        return ExactValue((total,))
    return ExactValue.of(ScaledPower.make(total, -x0.j, root, denom))


def inclusion_exclusion_sum(elements: Iterable[ScaledPower]) -> ExactValue:
    """Sum over nonempty subsets N of (-1)^(|N|+1) / LCM(N).

    Subsets with an infinite LCM contribute nothing; members that are integer
    multiples of other members are removed first, which leaves the union of
    their multiples (and hence the sum) unchanged.
    """
    reduced = _reduce_multiples(list(elements))
    if not reduced:
        raise ValueError("inclusion-exclusion over an empty set")
    if len(reduced) > MAX_IE_ELEMENTS:
        raise ValueError(f"set too large for subset enumeration ({len(reduced)} > {MAX_IE_ELEMENTS})")
    classes: dict[int, list[ScaledPower]] = {}
    for x in reduced:
        classes.setdefault(x.j, []).append(x)
    total = ExactValue()
    for members in classes.values():
        total = total + _ie_class(members)
    return total


# ---------------------------------------------------------------------------
# Base multiplier sets


def static_multipliers(config: GridConfig) -> MultiplierSet:
    """{m^((kappa-1)/k) : kappa = 1..k}."""
    return MultiplierSet(config.power(i) for i in range(config.k))


def primary_multipliers(config: GridConfig) -> MultiplierSet:
    """{m^((kappa-1)/k)} u {alpha m^((kappa-1)/k)}: anchor successor on the primary grid."""
    return MultiplierSet(
        [config.power(i) for i in range(config.k)]
        + [config.power(i, secondary=True) for i in range(config.k)]
    )


def secondary_multipliers(config: GridConfig) -> MultiplierSet:
    """{m^((kappa-1)/k)} u {m^(kappa/k) / alpha}: anchor successor on the secondary grid."""
    inv = Fraction(1) / config.alpha
    return MultiplierSet(
        [config.power(i) for i in range(config.k)]
        + [config.power(i + 1) * inv for i in range(config.k)]
    )


def branch_multipliers(config: GridConfig, secondary: bool) -> MultiplierSet:
    if not config.interleaved:
        return static_multipliers(config)
    return secondary_multipliers(config) if secondary else primary_multipliers(config)


@lru_cache(maxsize=4096)
def _ie_float(mset: MultiplierSet) -> float:
    return float(inclusion_exclusion_sum(mset))


# ---------------------------------------------------------------------------
# Densities and closed-form expectations


def density(config: GridConfig) -> float:
    """Asymptotic density of all multiples of grid points >= R(anchor)."""
    r = round_up(config, config.anchor)
    mset = branch_multipliers(config, r.secondary)
    return _ie_float(mset) / r.value


def density_static(config: GridConfig) -> float:
    if config.interleaved:
        raise ValueError("density_static expects alpha == 1")
    return density(config)


def density_interleaved(config: GridConfig) -> float:
    """Density for a concrete theta; the branch follows the anchor's successor.

    theta in (0, 1 - beta] gives the primary branch, theta in (1 - beta, 1]
    and theta == 0 (the same grid as theta == 1) give the secondary branch.
    """
    if not config.interleaved:
        raise ValueError("density_interleaved expects alpha > 1")
    return density(config)


def _shift_factor(config: GridConfig) -> float:
    b = config.base
    return (b - 1.0) / config.log_base


def expected_round(config: GridConfig, t: float) -> float:
    """E over theta of R(t)."""
    b, a = config.base, float(config.alpha)
    return (a + b / a - 2.0) / config.log_base * t


def expected_recip_round(config: GridConfig, t: float) -> float:
    """E over theta of 1 / R(t)."""
    b, a = config.base, float(config.alpha)
    return (2.0 - 1.0 / a - a / b) / config.log_base / t


def expected_density(config: GridConfig) -> float:
    """E over theta of the grid density."""
    b, a = config.base, float(config.alpha)
    if not config.interleaved:
        return _shift_factor(config) / b * _ie_float(static_multipliers(config)) / config.anchor
    prim = _ie_float(primary_multipliers(config))
    sec = _ie_float(secondary_multipliers(config))
    return ((1.0 - a / b) * prim + (1.0 - 1.0 / a) * sec) / config.log_base / config.anchor


def multipliers(config: GridConfig) -> tuple[float, float, float]:
    """(V_J, V_K, V_H) multiplying K0/T_min*, sum K_i/T_i*, sum H_i T_i* in the cost bound.

    A concrete theta (which must be 0) means the static policy; RANDOM means
    the shifted or interleaved expectation bound.
    """
    if not config.random:
        if config.interleaved or config.theta != 0.0:
            raise ValueError("static multipliers are defined for alpha == 1, theta == 0")
        b = config.base
        return _ie_float(static_multipliers(config)) / b, 1.0, b
    unit = config.with_anchor(1.0)
    return (expected_density(unit), expected_recip_round(unit, 1.0), expected_round(unit, 1.0))


# ---------------------------------------------------------------------------
# Vectorised evaluation over many shifts (Monte-Carlo oracles)


def _class_values(config: GridConfig, t: float, thetas: np.ndarray, offset: float) -> np.ndarray:
    lb = config.log_base
    lt = math.log(t / config.anchor) / lb
    p = np.floor(lt - thetas - offset) + 1.0
    expo = p + thetas + offset
    vals = config.anchor * np.exp(expo * lb)
    thr = t * (1.0 + SNAP)
    low = vals <= thr
    vals[low] = config.anchor * np.exp((expo[low] + 1.0) * lb)
    high = config.anchor * np.exp((expo - 1.0) * lb) > thr
    vals[high] = config.anchor * np.exp((expo[high] - 1.0) * lb)
    return vals


def round_up_many(config: GridConfig, t: float, thetas) -> np.ndarray:
    """R(t) for each theta in ``thetas`` (float arithmetic, for sampling)."""
    thetas = np.asarray(thetas, dtype=float)
    vals = _class_values(config, t, thetas, 0.0)
    if config.interleaved:
        vals = np.minimum(vals, _class_values(config, t, thetas, config.beta))
    return vals


def density_many(config: GridConfig, thetas) -> np.ndarray:
    """Grid density for each theta in ``thetas``."""
    thetas = np.asarray(thetas, dtype=float)
    prim_vals = _class_values(config, config.anchor, thetas, 0.0)
    if not config.interleaved:
        return _ie_float(static_multipliers(config)) / prim_vals
    sec_vals = _class_values(config, config.anchor, thetas, config.beta)
    prim = _ie_float(primary_multipliers(config))
    sec = _ie_float(secondary_multipliers(config))
    return np.where(prim_vals <= sec_vals, prim / prim_vals, sec / sec_vals)
