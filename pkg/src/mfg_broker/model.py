"""Parameter types, standing assumptions and the shared time grid."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

_POSITIVE_FIELDS = (
    "k_alpha", "eta_I", "eta_B", "a_B", "phi_B", "a_bar", "phi_bar", "T",
)
# Volatilities never enter the coefficient equations; zero is admitted as a
# deterministic degenerate case, in the same spirit as b = 0.
_NONNEGATIVE_FIELDS = ("sigma_alpha", "sigma_S")


@dataclass(frozen=True)
class ModelParams:
    """Market and preference constants of the mean-field game.

    Defaults are the numerical-study values: ``T=1``, ``S0=100``,
    ``k_alpha=5``, ``sigma_alpha=sigma_S=1``, ``eta_I=1e-3``,
    ``eta_B=1.2e-3``, ``b=1e-3``, ``a_B=a_bar=1``, ``phi_B=phi_bar=1e-2``.
    """

    k_alpha: float = 5.0
    sigma_alpha: float = 1.0
    sigma_S: float = 1.0
    b: float = 1e-3
    eta_I: float = 1e-3
    eta_B: float = 1.2e-3
    a_B: float = 1.0
    phi_B: float = 1e-2
    a_bar: float = 1.0
    phi_bar: float = 1e-2
    T: float = 1.0
    S0: float = 100.0
    alpha0: float = 0.0

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    def representative_type(self, k_I: float | None = None, sigma_I: float = 0.5) -> "TraderType":
        """Trader whose penalties equal the population means."""
        return TraderType(
            k_I=self.k_alpha if k_I is None else k_I,
            sigma_I=sigma_I,
            a_I=self.a_bar,
            phi_I=self.phi_bar,
        )


@dataclass(frozen=True)
class TraderType:
    """Idiosyncratic trader parameters (``sigma_I = 0`` allowed)."""

    k_I: float = 5.0
    sigma_I: float = 0.5
    a_I: float = 1.0
    phi_I: float = 1e-2

    def __post_init__(self):
        for name in ("k_I", "sigma_I", "a_I", "phi_I"):
            value = getattr(self, name)
            floor_ok = value >= 0 if name == "sigma_I" else value > 0
            if not (math.isfinite(value) and floor_ok):
                raise ValueError(f"TraderType.{name} must be finite and positive, got {value!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def key(self) -> tuple:
        return (self.k_I, self.sigma_I, self.a_I, self.phi_I)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]
        return "\n".join(lines)


def validate_params(p: ModelParams) -> ValidationReport:
    """Check the standing assumptions; never raises.

    The inequalities ``2 a_B - b >= 0`` and
    ``b <= min(2 eta_B, 2 eta_I, 4 phi_B, 4 phi_bar)`` give concavity of the
    broker functional and a bounded Riccati solution on ``[0, T]``.
    """
    checks = []
    for name in _POSITIVE_FIELDS:
        value = getattr(p, name)
        ok = math.isfinite(value) and value > 0
        checks.append(Check(f"{name} > 0", ok, f"{name} = {value!r}"))
    for name in _NONNEGATIVE_FIELDS:
        value = getattr(p, name)
        ok = math.isfinite(value) and value >= 0
        checks.append(Check(f"{name} >= 0", ok, f"{name} = {value!r}"))
    for name in ("b", "S0", "alpha0"):
        value = getattr(p, name)
        checks.append(Check(f"{name} finite", math.isfinite(value), f"{name} = {value!r}"))
    checks.append(Check("b >= 0", p.b >= 0, f"b = {p.b!r}"))
    checks.append(Check("2 a_B - b >= 0", 2 * p.a_B - p.b >= 0, f"2 a_B - b = {2 * p.a_B - p.b!r}"))
    for label, bound in (
        ("b <= 2 eta_B", 2 * p.eta_B),
        ("b <= 2 eta_I", 2 * p.eta_I),
        ("b <= 4 phi_B", 4 * p.phi_B),
        ("b <= 4 phi_bar", 4 * p.phi_bar),
    ):
        checks.append(Check(label, p.b <= bound, f"b = {p.b!r}, bound = {bound!r}"))
    return ValidationReport(tuple(checks))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k T / M`` on ``[0, T]``."""

    T: float
    M: int

    def __post_init__(self):
        if not (isinstance(self.M, (int, np.integer)) and self.M >= 2):
            raise ValueError(f"grid needs M >= 2 integer steps, got {self.M!r}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"grid horizon must be > 0, got {self.T!r}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.M + 1, dtype=np.float64) * self.T / self.M
        t[-1] = self.T
        return t

    def index(self, t: float) -> int:
        """Index of the node nearest to ``t``."""
        if not (0.0 <= t <= self.T):
            raise ValueError(f"t={t!r} outside [0, {self.T}]")
        return int(round(t / self.h))

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.T, self.M * factor)


def make_grid(T: float, M: int) -> TimeGrid:
    return TimeGrid(T, M)


def _lognormal_location(mean: float, scale: float) -> float:
    return math.log(mean) - 0.5 * scale * scale


@dataclass(frozen=True)
class TypeDistribution:
    """Distribution of ``(k_I, sigma_I)`` and ``(a_I, phi_I)``.

    ``kind="lognormal"`` draws the four coordinates independently with the
    given log-scales; locations are moment-matched so the means are exactly
    ``(mean_k, mean_sigma, mean_a, mean_phi)``.
    """

    kind: str = "point-mass"
    mean_k: float = 5.0
    mean_sigma: float = 0.5
    mean_a: float = 1.0
    mean_phi: float = 1e-2
    scale_k: float = 0.0
    scale_sigma: float = 0.0
    scale_a: float = 0.0
    scale_phi: float = 0.0
    locations: tuple = field(init=False)

    def __post_init__(self):
        if self.kind not in ("point-mass", "lognormal"):
            raise ValueError(f"unknown type distribution {self.kind!r}")
        means = (self.mean_k, self.mean_sigma, self.mean_a, self.mean_phi)
        scales = (self.scale_k, self.scale_sigma, self.scale_a, self.scale_phi)
        if self.kind == "point-mass":
            TraderType(*means)
            object.__setattr__(self, "locations", ())
            return
        if any(not (m > 0) for m in means):
            raise ValueError("lognormal type distribution means must be > 0")
        if any(s < 0 for s in scales):
            raise ValueError("lognormal scales must be >= 0")
        locs = tuple(_lognormal_location(m, s) for m, s in zip(means, scales))
        for m, s, loc in zip(means, scales, locs):
            implied = math.exp(loc + 0.5 * s * s)
            if abs(implied - m) > 1e-12 * m:
                raise ValueError("moment matching failed")  # pragma: no cover
        object.__setattr__(self, "locations", locs)

    @classmethod
    def point_mass(cls, tt: TraderType) -> "TypeDistribution":
        return cls("point-mass", tt.k_I, tt.sigma_I, tt.a_I, tt.phi_I)

    @property
    def mean_type(self) -> TraderType:
        return TraderType(self.mean_k, self.mean_sigma, self.mean_a, self.mean_phi)

    def consistent_with(self, p: ModelParams, rtol: float = 1e-12) -> bool:
        return abs(self.mean_a - p.a_bar) <= rtol * p.a_bar and abs(self.mean_phi - p.phi_bar) <= rtol * p.phi_bar

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Array of shape ``(n, 4)`` with columns ``k_I, sigma_I, a_I, phi_I``."""
        means = np.array([self.mean_k, self.mean_sigma, self.mean_a, self.mean_phi])
        if self.kind == "point-mass":
            return np.tile(means, (n, 1))
        scales = np.array([self.scale_k, self.scale_sigma, self.scale_a, self.scale_phi])
        z = rng.standard_normal((n, 4))
        return np.exp(np.array(self.locations) + scales * z)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("locations")
        return d
