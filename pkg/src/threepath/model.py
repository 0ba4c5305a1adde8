"""Deterministic core of the virtual three-path interferometer.

Closed-form expressions for incident photon rates of all shutter
combinations, the saturating detector transfer function and its inverse,
the second-order interference statistics (epsilon, delta, kappa), and the
rotating-plate angle-to-phase conversion.

All rates are expected values in counts (or photons) per second.  Every
type is an immutable value and every function is pure, so everything here
is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Flag, auto
from itertools import combinations
from typing import Iterable, Mapping


class InverseRangeError(ValueError):
    """Detected rate has no physical preimage under the transfer function."""


class SaturationError(InverseRangeError):
    """Detected rate at or above the 1/tau saturation ceiling."""


class DegenerateNormalizationError(ValueError):
    """kappa requested where the two-path normalization delta is zero."""


class TotalInternalReflectionError(ValueError):
    """Snell refraction has no real solution for the requested angle."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def _require_nonnegative(name: str, value: float) -> float:
    value = _require_finite(name, value)
    if value < 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


class PathSet(Flag):
    """One of the eight open/closed shutter combinations over paths A, B, C.

    ``PathSet.NONE`` is the background configuration (all paths closed).
    """

    NONE = 0
    A = auto()
    B = auto()
    C = auto()

    @property
    def label(self) -> str:
        """Compact text label: 'A', 'AB', 'ABC', ... and 'none' for the empty set."""
        if self is PathSet.NONE:
            return "none"
        return "".join(m.name for m in SINGLE_PATHS if m in self)

    @classmethod
    def from_label(cls, label: str) -> "PathSet":
        text = label.strip()
        if text.lower() in ("", "none"):
            return cls.NONE
        out = cls.NONE
        for ch in text.upper():
            if ch not in "ABC":
                raise ValueError(f"unknown path label {label!r}")
            out |= cls[ch]
        return out

    def singles(self) -> tuple["PathSet", ...]:
        """The open single paths, in A, B, C order."""
        return tuple(m for m in SINGLE_PATHS if m in self)


SINGLE_PATHS = (PathSet.A, PathSet.B, PathSet.C)

#: Canonical ordering of all eight combinations used for iteration and reports.
ALL_COMBINATIONS = (
    PathSet.NONE,
    PathSet.A,
    PathSet.B,
    PathSet.C,
    PathSet.A | PathSet.B,
    PathSet.A | PathSet.C,
    PathSet.B | PathSet.C,
    PathSet.A | PathSet.B | PathSet.C,
)

PAIR_AB = PathSet.A | PathSet.B
PAIR_AC = PathSet.A | PathSet.C
PAIR_BC = PathSet.B | PathSet.C
TRIPLE_ABC = PathSet.A | PathSet.B | PathSet.C


@dataclass(frozen=True)
class PhasePoint:
    """Phase shifts (radians) applied to paths A and C.

    Path B carries no phase plate and serves as the phase reference, so only
    two coordinates are needed.  Any real value is accepted; all uses pass
    through cosines.
    """

    phi_a: float = 0.0
    phi_c: float = 0.0

    def __post_init__(self) -> None:
        _require_finite("phi_a", self.phi_a)
        _require_finite("phi_c", self.phi_c)

    def of(self, single: PathSet) -> float:
        """Phase of one single path (B is always 0)."""
        if single is PathSet.A:
            return self.phi_a
        if single is PathSet.B:
            return 0.0
        if single is PathSet.C:
            return self.phi_c
        raise ValueError(f"not a single path: {single!r}")


@dataclass(frozen=True)
class InterferometerConfig:
    """Single-path incident rates (photons/s), the phase point, and pairwise
    visibilities.

    Visibilities default to 1 (perfect coherence); values below 1 scale the
    corresponding two-path cross term only.
    """

    rate_a: float
    rate_b: float
    rate_c: float
    phase: PhasePoint = PhasePoint()
    visibility_ab: float = 1.0
    visibility_ac: float = 1.0
    visibility_bc: float = 1.0

    def __post_init__(self) -> None:
        for name in ("rate_a", "rate_b", "rate_c"):
            _require_nonnegative(name, getattr(self, name))
        for name in ("visibility_ab", "visibility_ac", "visibility_bc"):
            v = _require_finite(name, getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v!r}")

    def rate_of(self, single: PathSet) -> float:
        if single is PathSet.A:
            return self.rate_a
        if single is PathSet.B:
            return self.rate_b
        if single is PathSet.C:
            return self.rate_c
        raise ValueError(f"not a single path: {single!r}")

    def visibility_of(self, pair: PathSet) -> float:
        if pair == PAIR_AB:
            return self.visibility_ab
        if pair == PAIR_AC:
            return self.visibility_ac
        if pair == PAIR_BC:
            return self.visibility_bc
        raise ValueError(f"not a pair: {pair!r}")


@dataclass(frozen=True)
class DetectorModel:
    """Nonparalyzable photon counter: dead time, dark rate, efficiency.

    After each registered event the detector is blind for ``dead_time``
    seconds; arrivals inside that window are lost and do not extend it.
    Dark events occupy the detector exactly like photon events.  Efficiency
    applies to the photon rate only, not to the dark rate.
    """

    dead_time: float = 0.0       # seconds
    dark_rate: float = 0.0       # counts/s
    efficiency: float = 1.0      # dimensionless, (0, 1]

    def __post_init__(self) -> None:
        _require_nonnegative("dead_time", self.dead_time)
        _require_nonnegative("dark_rate", self.dark_rate)
        eta = _require_finite("efficiency", self.efficiency)
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"efficiency must be in (0, 1], got {eta!r}")


@dataclass(frozen=True)
class SumRuleInputs:
    """One rate (counts/s) per shutter combination, indexed by PathSet value.

    The statistics below work on any consistent set of eight rates, detected
    or incident.
    """

    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.rates) != 8:
            raise ValueError(f"need exactly 8 rates, got {len(self.rates)}")
        object.__setattr__(
            self,
            "rates",
            tuple(_require_nonnegative(f"rates[{i}]", r) for i, r in enumerate(self.rates)),
        )

    @classmethod
    def from_mapping(cls, rates: Mapping[PathSet, float]) -> "SumRuleInputs":
        if set(rates) != set(ALL_COMBINATIONS):
            missing = [p.label for p in ALL_COMBINATIONS if p not in rates]
            raise ValueError(f"rate mapping must cover all 8 combinations, missing {missing}")
        out = [0.0] * 8
        for paths, rate in rates.items():
            out[paths.value] = float(rate)
        return cls(tuple(out))

    def rate(self, paths: PathSet) -> float:
        return self.rates[paths.value]


@dataclass(frozen=True)
class PhasePlateGeometry:
    """Rotatable glass plate in a double-pass arm.

    ``zero_angle_offset`` is the absolute angle of the nominal zero position;
    it is added to the requested rotation before evaluating the phase.
    """

    thickness: float                 # m
    wavelength: float                # m
    n_air: float = 1.0
    n_glass: float = 1.5
    zero_angle_offset: float = 0.0   # radians

    def __post_init__(self) -> None:
        if _require_finite("thickness", self.thickness) <= 0.0:
            raise ValueError("thickness must be > 0")
        if _require_finite("wavelength", self.wavelength) <= 0.0:
            raise ValueError("wavelength must be > 0")
        n1 = _require_finite("n_air", self.n_air)
        n2 = _require_finite("n_glass", self.n_glass)
        if not (n2 >= n1 >= 1.0):
            raise ValueError(f"need n_glass >= n_air >= 1, got {n2!r}, {n1!r}")
        _require_finite("zero_angle_offset", self.zero_angle_offset)


def incident_rate(config: InterferometerConfig, paths: PathSet) -> float:
    """Expected incident photon rate (photons/s) for one shutter combination.

    Sum of the open single-path rates plus, for every open pair (x, y), the
    two-path cross term 2 V_xy sqrt(Rx Ry) cos(phi_x - phi_y).  The empty
    combination contributes nothing (background lives in the detector model).
    """
    singles = paths.singles()
    total = 0.0
    for m in singles:
        total += config.rate_of(m)
    for x, y in combinations(singles, 2):
        cross = 2.0 * config.visibility_of(x | y) * math.sqrt(config.rate_of(x) * config.rate_of(y))
        total += cross * math.cos(config.phase.of(x) - config.phase.of(y))
    return total


def detector_forward(incident: float, model: DetectorModel) -> float:
    """Detected count rate (counts/s) for a given incident photon rate.

    Saturating response (eta R + R0) / (1 + (eta R + R0) tau): monotone
    increasing in R and bounded above by 1/tau when tau > 0.
    """
    r = _require_nonnegative("incident", incident)
    loaded = model.efficiency * r + model.dark_rate
    return loaded / (1.0 + loaded * model.dead_time)


def detector_inverse(detected: float, model: DetectorModel) -> float:
    """Incident photon rate whose detected rate equals ``detected``.

    Exact algebraic inverse of :func:`detector_forward`.  Raises
    SaturationError at or above the 1/tau ceiling and InverseRangeError below
    the dark floor (which would imply a negative incident rate).
    """
    u = _require_nonnegative("detected", detected)
    tau = model.dead_time
    if tau > 0.0 and u * tau >= 1.0:
        raise SaturationError(
            f"detected rate {u!r} at or above saturation 1/tau = {1.0 / tau!r}"
        )
    loaded = u / (1.0 - u * tau)
    r = (loaded - model.dark_rate) / model.efficiency
    if r < 0.0:
        # tolerate rounding at the dark floor itself
        if r >= -1e-9 * (model.dark_rate + 1.0):
            return 0.0
        floor = detector_forward(0.0, model)
        raise InverseRangeError(
            f"detected rate {u!r} below the dark floor {floor!r}"
        )
    return r


def epsilon(inputs: SumRuleInputs) -> float:
    """Second-order interference term over the eight combination rates.

    R_ABC - R_AB - R_AC - R_BC + R_A + R_B + R_C - R_none.  Identically zero
    for rates obeying pairwise (Born-rule) interference through a linear
    detector; any constant background over all eight combinations cancels.
    """
    r = inputs.rate
    return (
        r(TRIPLE_ABC)
        - r(PAIR_AB) - r(PAIR_AC) - r(PAIR_BC)
        + r(PathSet.A) + r(PathSet.B) + r(PathSet.C)
        - r(PathSet.NONE)
    )


def delta(inputs: SumRuleInputs) -> float:
    """Summed magnitudes of the three two-path interference terms.

    |R_AB - R_A - R_B + R_none| + |R_AC - R_A - R_C + R_none|
    + |R_BC - R_B - R_C + R_none|; the natural normalization for epsilon.
    """
    r = inputs.rate
    none = r(PathSet.NONE)
    return (
        abs(r(PAIR_AB) - r(PathSet.A) - r(PathSet.B) + none)
        + abs(r(PAIR_AC) - r(PathSet.A) - r(PathSet.C) + none)
        + abs(r(PAIR_BC) - r(PathSet.B) - r(PathSet.C) + none)
    )


def kappa(inputs: SumRuleInputs) -> float:
    """Normalized second-order interference, epsilon / delta.

    Raises DegenerateNormalizationError when delta is zero rather than
    returning 0 or infinity silently.
    """
    d = delta(inputs)
    if d == 0.0:
        raise DegenerateNormalizationError("delta is zero; kappa undefined")
    return epsilon(inputs) / d


def plate_angle_to_phase(theta: float, geom: PhasePlateGeometry) -> float:
    """Optical phase (radians) from a plate rotation angle (radians).

    Snell refraction inside the plate plus the double pass through thickness
    d gives phi = (2 pi / lambda) 2 d [n1 - n2 + (n2 - n1 cos(t - t')) / cos t']
    with n2 sin t' = n1 sin t and t = theta + zero_angle_offset.  Even in
    theta around normal incidence; zero at normal incidence.
    """
    t = _require_finite("theta", theta) + geom.zero_angle_offset
    sin_ratio = geom.n_air * math.sin(t) / geom.n_glass
    if abs(sin_ratio) > 1.0:
        raise TotalInternalReflectionError(
            f"no real refraction angle for theta = {theta!r}"
        )
    t_prime = math.asin(sin_ratio)
    n1, n2 = geom.n_air, geom.n_glass
    bracket = n1 - n2 + (n2 - n1 * math.cos(t - t_prime)) / math.cos(t_prime)
    return (2.0 * math.pi / geom.wavelength) * 2.0 * geom.thickness * bracket


def combination_rates(
    config: InterferometerConfig,
    paths_iter: Iterable[PathSet] = ALL_COMBINATIONS,
) -> dict[PathSet, float]:
    """Incident rate for each requested combination (all eight by default)."""
    return {paths: incident_rate(config, paths) for paths in paths_iter}
