"""Problem data: the resource-constrained joint replenishment instance."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "Instance",
    "ValidationReport",
    "GeneratorSpec",
    "InstanceFormatError",
    "InvalidInstanceError",
    "validate",
    "generate",
    "read_instance",
    "write_instance",
    "instance_to_dict",
    "instance_from_dict",
    "FORMAT",
]

FORMAT = "rcjrp-instance/1"


class InstanceFormatError(ValueError):
    """The instance document is malformed; the message names the offending field."""


class InvalidInstanceError(ValueError):
    """The instance parses but violates a model invariant."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(report.issues))


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """n commodities (K_i, H_i), joint cost K0 and a D x n resource matrix.

    Capacities are normalised to 1, i.e. the constraints read
    ``sum_i alpha[d, i] / T_i <= 1``.
    """

    K0: float
    K: np.ndarray
    H: np.ndarray
    alpha: np.ndarray = None
    capacities_raw: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "K0", float(self.K0))
        K = _frozen(self.K, 1)
        H = _frozen(self.H, 1)
        if K.shape != H.shape:
            raise ValueError(f"K and H lengths differ: {K.shape[0]} vs {H.shape[0]}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "H", H)
        if self.alpha is None:
            alpha = np.zeros((0, K.shape[0]))
        else:
            alpha = np.array(self.alpha, dtype=float)
            if alpha.size == 0:
                alpha = alpha.reshape(0, K.shape[0])
            if alpha.ndim != 2 or alpha.shape[1] != K.shape[0]:
                raise ValueError(f"alpha must be D x {K.shape[0]}, got shape {alpha.shape}")
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        if self.capacities_raw is not None:
            object.__setattr__(self, "capacities_raw", tuple(float(c) for c in self.capacities_raw))

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def D(self) -> int:
        return self.alpha.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.K0 == other.K0
            and np.array_equal(self.K, other.K)
            and np.array_equal(self.H, other.H)
            and np.array_equal(self.alpha, other.alpha)
            and self.capacities_raw == other.capacities_raw
        )

    __hash__ = None

    def without_resources(self, rows) -> "Instance":
        keep = [d for d in range(self.D) if d not in set(rows)]
        return Instance(self.K0, self.K, self.H, self.alpha[keep])

    def resource_usage(self, T) -> np.ndarray:
        """sum_i alpha[d, i] / T_i for every resource d."""
        return self.alpha @ (1.0 / np.asarray(T, dtype=float))


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def __bool__(self):
        # truthy when something is wrong, so ``if validate(x): ...`` reads naturally
        return bool(self.issues)


def validate(instance: Instance) -> ValidationReport:
    """List every violated invariant of ``instance`` (empty iff well-formed)."""
    report = ValidationReport()
    if instance.n < 1:
        report.issues.append("n must be positive")
    if not (math.isfinite(instance.K0) and instance.K0 > 0):
        report.issues.append(f"K0 must be strictly positive and finite, got {instance.K0!r}")
    for i, (k, h) in enumerate(zip(instance.K, instance.H)):
        if not (math.isfinite(k) and k >= 0):
            report.issues.append(f"K_i must be nonnegative: K[{i}] = {k!r}")
        if not (math.isfinite(h) and h > 0):
            report.issues.append(f"H_i must be strictly positive: H[{i}] = {h!r}")
    for d, row in enumerate(instance.alpha):
        bad = [i for i, a in enumerate(row) if not (math.isfinite(a) and a >= 0)]
        for i in bad:
            report.issues.append(f"alpha entries must be nonnegative: alpha[{d}][{i}] = {row[i]!r}")
        if not bad and not np.any(row > 0):
            report.issues.append(f"resource row {d} is vacuous (no positive entry)")
    if instance.n and np.all(instance.K == 0):
        report.warnings.append("all individual ordering costs K_i are zero")
    return report


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a random instance; costs are log-uniform within their bounds."""

    n: int
    D: int
    seed: int
    K_bounds: tuple[float, float] = (0.1, 10.0)
    H_bounds: tuple[float, float] = (0.1, 10.0)
    K0_bounds: tuple[float, float] = (0.1, 10.0)
    alpha_density: float = 0.5
    alpha_bounds: tuple[float, float] = (0.01, 1.0)

    def check(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.D < 0:
            raise ValueError("D must be nonnegative")
        for name in ("K_bounds", "H_bounds", "K0_bounds", "alpha_bounds"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise ValueError(f"{name} must be positive and ordered, got {(lo, hi)}")
        if not 0 < self.alpha_density <= 1:
            raise ValueError("alpha_density must lie in (0, 1]")


def _log_uniform(rng: np.random.Generator, bounds, size=None):
    lo, hi = bounds
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def generate(spec: GeneratorSpec) -> Instance:
    """Deterministic random instance for ``spec``; every resource row is non-vacuous."""
    spec.check()
    rng = np.random.default_rng(spec.seed)
    K0 = float(_log_uniform(rng, spec.K0_bounds))
    K = _log_uniform(rng, spec.K_bounds, spec.n)
    H = _log_uniform(rng, spec.H_bounds, spec.n)
    alpha = np.zeros((spec.D, spec.n))
    for d in range(spec.D):
        mask = rng.random(spec.n) < spec.alpha_density
        mask[rng.integers(spec.n)] = True
        alpha[d, mask] = _log_uniform(rng, spec.alpha_bounds, int(mask.sum()))
    return Instance(K0, K, H, alpha)


# ---------------------------------------------------------------------------
# File format: JSON, every number written as a decimal string


def _num(x: float) -> str:
    return repr(float(x))


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": FORMAT,
        "n": str(instance.n),
        "D": str(instance.D),
        "K0": _num(instance.K0),
        "commodities": [{"K": _num(k), "H": _num(h)} for k, h in zip(instance.K, instance.H)],
        "alpha": [[_num(a) for a in row] for row in instance.alpha],
    }
    if instance.capacities_raw is not None:
        doc["meta"] = {"capacities_raw": [_num(c) for c in instance.capacities_raw]}
    return doc


def _parse_real(value, where: str) -> float:
    if not isinstance(value, str):
        raise InstanceFormatError(f"{where}: expected a decimal string, got {type(value).__name__}")
    try:
        return float(value)
    except ValueError:
        raise InstanceFormatError(f"{where}: not a decimal number: {value!r}") from None


def _parse_count(value, where: str) -> int:
    if not isinstance(value, str) or not value.strip().isdigit():
        raise InstanceFormatError(f"{where}: expected a nonnegative integer string, got {value!r}")
    return int(value)


def _field(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise InstanceFormatError(f"{where}{key}: missing field")
    return doc[key]


def instance_from_dict(doc: dict[str, Any], *, check: bool = True) -> Instance:
    """Parse an instance document; raw capacities are divided into alpha."""
    if not isinstance(doc, dict):
        raise InstanceFormatError("document root must be an object")
    n = _parse_count(_field(doc, "n"), "n")
    D = _parse_count(_field(doc, "D"), "D")
    K0 = _parse_real(_field(doc, "K0"), "K0")
    comms = _field(doc, "commodities")
    if not isinstance(comms, list) or len(comms) != n:
        raise InstanceFormatError(f"commodities: expected a list of {n} entries")
    K, H = [], []
    for i, c in enumerate(comms):
        if not isinstance(c, dict):
            raise InstanceFormatError(f"commodities[{i}]: expected an object")
        K.append(_parse_real(_field(c, "K", f"commodities[{i}]."), f"commodities[{i}].K"))
        H.append(_parse_real(_field(c, "H", f"commodities[{i}]."), f"commodities[{i}].H"))
    rows = _field(doc, "alpha")
    if not isinstance(rows, list) or len(rows) != D:
        raise InstanceFormatError(f"alpha: expected a list of {D} rows")
    alpha = []
    for d, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise InstanceFormatError(f"alpha[{d}]: expected a list of {n} entries")
        alpha.append([_parse_real(a, f"alpha[{d}][{i}]") for i, a in enumerate(row)])
    alpha = np.array(alpha, dtype=float).reshape(D, n)

    caps_raw = None
    if "capacities" in doc:
        caps = doc["capacities"]
        if not isinstance(caps, list) or len(caps) != D:
            raise InstanceFormatError(f"capacities: expected a list of {D} entries")
        caps_raw = [_parse_real(c, f"capacities[{d}]") for d, c in enumerate(caps)]
        for d, c in enumerate(caps_raw):
            if not c > 0:
                raise InstanceFormatError(f"capacities[{d}]: must be positive, got {c!r}")
        alpha = alpha / np.array(caps_raw)[:, None]
    elif isinstance(doc.get("meta"), dict) and "capacities_raw" in doc["meta"]:
        caps = doc["meta"]["capacities_raw"]
        if not isinstance(caps, list) or len(caps) != D:
            raise InstanceFormatError(f"meta.capacities_raw: expected a list of {D} entries")
        caps_raw = [_parse_real(c, f"meta.capacities_raw[{d}]") for d, c in enumerate(caps)]

    inst = Instance(K0, K, H, alpha, caps_raw)
    if check:
        report = validate(inst)
        if report.issues:
            raise InvalidInstanceError(report)
    return inst


def write_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n")


def read_instance(path, *, check: bool = True) -> Instance:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return instance_from_dict(doc, check=check)
