"""Detector nonlinearity calibration by the beam-combination method.

Two independent, non-interfering beams are combined on the detector; their
inferred incident rates must add exactly, so any additivity defect after
inverting the detector response pins down the dead time.  The fit never
touches a phase or an interference term, which is what makes the calibration
usable to separate detector artifacts from genuine rate nonadditivity.

Estimator
---------
For each quadruple (dark, a, b, ab) and trial parameters (tau, r0), the
inferred incident photon rate of a leg with detected rate u is

    g(u) = u / (1 - u tau) - r0

(the algebraic continuation of the strict inverse: legs statistically
consistent with darkness may come out slightly negative).  Two residual
families enter a weighted least squares:

* additivity defect  g(ab) - g(a) - g(b) + g(dark)  -- fixes tau.  The r0
  terms cancel algebraically in this combination, so defects alone cannot
  identify the dark rate.
* dark-leg incidence  g(dark)  -- the dark leg must infer zero photons,
  which fixes r0.

Weights are the reciprocal first-order count-statistics variances: each
leg's Poisson rate variance u/T propagated through g, with dg/du exactly
1/(1 - u tau)^2.  Standard errors come from a nonparametric bootstrap over
quadruples with deterministic per-resample seeds.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize


class FitConvergenceError(RuntimeError):
    """The calibration minimizer failed to converge."""


@dataclass(frozen=True)
class QuadrupleMeasurement:
    """One beam-combination measurement: dark, each beam alone, both beams.

    All rates are detected counts/s averaged over ``duration_s`` seconds per
    leg.  Validity assumes the beam intensities and the dead time stay
    constant across the four legs and that detector efficiency does not
    depend on the total intensity; these are preconditions of the method,
    not runtime checks.
    """

    dark_cps: float
    a_cps: float
    b_cps: float
    ab_cps: float
    duration_s: float

    def __post_init__(self) -> None:
        for name in ("dark_cps", "a_cps", "b_cps", "ab_cps"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if not math.isfinite(self.duration_s) or self.duration_s <= 0.0:
            raise ValueError(f"duration_s must be > 0, got {self.duration_s!r}")
        # combined rate can only fall below the single-beam sum; allow
        # counting noise but catch gross unit errors
        slack = 6.0 * math.sqrt(
            (self.a_cps + self.b_cps + self.ab_cps) / self.duration_s + 1.0
        )
        if self.ab_cps > self.a_cps + self.b_cps + slack:
            raise ValueError(
                f"ab_cps = {self.ab_cps!r} exceeds a_cps + b_cps = "
                f"{self.a_cps + self.b_cps!r} beyond counting noise"
            )


@dataclass(frozen=True)
class CalibrationResult:
    """Fitted dead time and dark rate with bootstrap uncertainties."""

    tau_s: float
    tau_stderr_s: float
    dark_rate_cps: float
    dark_rate_stderr_cps: float
    residuals: tuple[float, ...]    # per-quadruple additivity defects at the fit
    n_quadruples: int
    n_bootstrap: int


def _inferred_incident(u: float | np.ndarray, tau: float, r0: float):
    """Incident photon rate inferred from detected rate u at trial (tau, r0).

    Algebraic continuation of the strict detector inverse; may be slightly
    negative for legs consistent with darkness.
    """
    return u / (1.0 - u * tau) - r0


def nonlinearity_defect(q: QuadrupleMeasurement, tau: float, r0: float) -> float:
    """Additivity defect of the inferred incident rates (counts/s).

    Zero in expectation at the true parameters, since incoherent beams add
    exactly in incident rate.  Requires every leg below the 1/tau ceiling.
    """
    legs = (q.ab_cps, q.a_cps, q.b_cps, q.dark_cps)
    if tau > 0.0 and max(legs) * tau >= 1.0:
        raise ValueError(f"tau = {tau!r} puts a measured leg at or past saturation")
    g = _inferred_incident
    return g(q.ab_cps, tau, r0) - g(q.a_cps, tau, r0) - g(q.b_cps, tau, r0) + g(q.dark_cps, tau, r0)


def _leg_rate_variance(u: np.ndarray, duration: np.ndarray) -> np.ndarray:
    # Poisson rate variance with a one-count floor so empty legs keep finite weight
    return np.maximum(u, 1.0 / duration) / duration


def _residual_sigmas(quads: Sequence[QuadrupleMeasurement], tau: float):
    """First-order standard deviations of (defect, dark-incidence) residuals."""
    ab = np.array([q.ab_cps for q in quads])
    a = np.array([q.a_cps for q in quads])
    b = np.array([q.b_cps for q in quads])
    dark = np.array([q.dark_cps for q in quads])
    dur = np.array([q.duration_s for q in quads])
    slope = lambda u: 1.0 / (1.0 - u * tau) ** 2  # noqa: E731  d g / d u, exact
    var_defect = sum(
        slope(u) ** 2 * _leg_rate_variance(u, dur) for u in (ab, a, b, dark)
    )
    var_dark = slope(dark) ** 2 * _leg_rate_variance(dark, dur)
    return np.sqrt(var_defect), np.sqrt(var_dark)


def _leg_arrays(quads: Sequence[QuadrupleMeasurement]) -> tuple[np.ndarray, np.ndarray]:
    legs = np.array([[q.ab_cps, q.a_cps, q.b_cps, q.dark_cps] for q in quads]).T
    dur = np.array([q.duration_s for q in quads])
    return legs, dur


def _fit_once(
    legs: np.ndarray,
    sigma_defect: np.ndarray,
    sigma_dark: np.ndarray,
    x0: tuple[float, float],
    tau_max: float,
) -> tuple[float, float]:
    ab, a, b, dark = legs

    def residuals(theta):
        tau, r0 = theta
        s = lambda u: u / (1.0 - u * tau)  # noqa: E731
        # r0 cancels algebraically in the 4-term defect, so it is omitted here
        defect = s(ab) - s(a) - s(b) + s(dark)
        dark_incident = s(dark) - r0
        return np.concatenate((defect / sigma_defect, dark_incident / sigma_dark))

    result = optimize.least_squares(
        residuals,
        x0=np.asarray(x0),
        bounds=([0.0, 0.0], [tau_max, np.inf]),
        x_scale=[max(x0[0], 1e-10), max(x0[1], 1.0)],
        xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    if result.status <= 0:
        raise FitConvergenceError(
            f"least-squares fit failed: status {result.status}, {result.message}"
        )
    return float(result.x[0]), float(result.x[1])


def estimate_parameters(
    data: Sequence[QuadrupleMeasurement],
    counting_duration: float | None = None,
    *,
    n_bootstrap: int = 1000,
    seed: int = 0,
) -> CalibrationResult:
    """Fit (dead time, dark rate) to a set of quadruple measurements.

    ``counting_duration`` overrides every quadruple's own leg duration when
    given.  Needs at least three quadruples; rates should span at least a
    decade for a well-conditioned dead-time estimate (a narrower span only
    warns).  Standard errors come from ``n_bootstrap`` resamples of the
    quadruple list with deterministic seeds.
    """
    quads = list(data)
    if len(quads) < 3:
        raise ValueError(f"need at least 3 quadruples, got {len(quads)}")
    if counting_duration is not None:
        if counting_duration <= 0.0:
            raise ValueError("counting_duration must be > 0")
        quads = [
            QuadrupleMeasurement(q.dark_cps, q.a_cps, q.b_cps, q.ab_cps, counting_duration)
            for q in quads
        ]
    ab_rates = [q.ab_cps for q in quads]
    if min(ab_rates) > 0.0 and max(ab_rates) / min(ab_rates) < 10.0:
        warnings.warn(
            "combined rates span less than a decade; the dead-time estimate "
            "may be ill-conditioned",
            stacklevel=2,
        )

    max_rate = max(max(q.ab_cps, q.a_cps, q.b_cps, q.dark_cps) for q in quads)
    tau_max = 0.99 / max_rate if max_rate > 0.0 else 1.0
    r0_init = float(np.mean([q.dark_cps for q in quads]))
    legs, _ = _leg_arrays(quads)

    # coarse deterministic grid for the tau start, then two reweighted fits
    def rough_cost(tau):
        sd, _ = _residual_sigmas(quads, tau)
        s = legs / (1.0 - legs * tau)
        d = s[0] - s[1] - s[2] + s[3]
        return float(np.sum((d / sd) ** 2))

    tau_grid = np.linspace(0.0, tau_max * 0.5, 17)
    tau0 = float(tau_grid[int(np.argmin([rough_cost(t) for t in tau_grid]))])

    theta = (max(tau0, tau_max * 1e-6), max(r0_init, 1e-6))
    for _ in range(2):
        sigma_defect, sigma_dark = _residual_sigmas(quads, theta[0])
        theta = _fit_once(legs, sigma_defect, sigma_dark, theta, tau_max)
    tau_hat, r0_hat = theta

    # bootstrap over quadruples; weights stay frozen at the full-fit tau
    sigma_defect, sigma_dark = _residual_sigmas(quads, tau_hat)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,))))
    indices = rng.integers(0, len(quads), size=(n_bootstrap, len(quads)))
    boot = np.empty((n_bootstrap, 2))
    n_ok = 0
    for bi in range(n_bootstrap):
        idx = indices[bi]
        try:
            boot[n_ok] = _fit_once(
                legs[:, idx], sigma_defect[idx], sigma_dark[idx],
                (tau_hat, r0_hat), tau_max,
            )
            n_ok += 1
        except FitConvergenceError:
            continue
    if n_bootstrap > 1 and n_ok < max(2, n_bootstrap // 2):
        raise FitConvergenceError(
            f"only {n_ok} of {n_bootstrap} bootstrap refits converged"
        )
    if n_ok > 1:
        tau_err = float(boot[:n_ok, 0].std(ddof=1))
        r0_err = float(boot[:n_ok, 1].std(ddof=1))
    else:
        tau_err = r0_err = 0.0

    defects = tuple(nonlinearity_defect(q, tau_hat, r0_hat) for q in quads)
    return CalibrationResult(
        tau_s=tau_hat,
        tau_stderr_s=tau_err,
        dark_rate_cps=r0_hat,
        dark_rate_stderr_cps=r0_err,
        residuals=defects,
        n_quadruples=len(quads),
        n_bootstrap=n_ok,
    )


def drift_zscore(rate_first: float, rate_second: float, duration_s: float) -> float:
    """Significance of an intensity change between two repeats of a leg.

    Positive when the second repeat is brighter; 5 or above flags drift that
    breaks the constant-intensity assumption of a quadruple.
    """
    var = (rate_first + rate_second) / duration_s
    if var <= 0.0:
        return 0.0
    return (rate_second - rate_first) / math.sqrt(var)


QUADRUPLE_COLUMNS = ("dark_cps", "a_cps", "b_cps", "ab_cps", "duration_s")


def read_quadruples(path: str | Path) -> list[QuadrupleMeasurement]:
    """Load quadruples from CSV with the canonical header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected header "
                             f"{','.join(QUADRUPLE_COLUMNS)}") from None
        if tuple(h.strip() for h in header) != QUADRUPLE_COLUMNS:
            raise ValueError(
                f"{path}: bad header {header!r}, expected {list(QUADRUPLE_COLUMNS)}"
            )
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(QUADRUPLE_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(QUADRUPLE_COLUMNS)} "
                                 f"fields, got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            out.append(QuadrupleMeasurement(*values))
    return out


def write_quadruples(quads: Iterable[QuadrupleMeasurement], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(QUADRUPLE_COLUMNS)
        for q in quads:
            writer.writerow([repr(float(v)) for v in
                             (q.dark_cps, q.a_cps, q.b_cps, q.ab_cps, q.duration_s)])


def write_calibration_report(result: CalibrationResult, path: str | Path) -> None:
    """Human-readable flat key-value report."""
    lines = [
        f"tau_ns = {result.tau_s * 1e9!r}",
        f"tau_stderr_ns = {result.tau_stderr_s * 1e9!r}",
        f"dark_rate_cps = {result.dark_rate_cps!r}",
        f"dark_rate_stderr_cps = {result.dark_rate_stderr_cps!r}",
        f"n_quadruples = {result.n_quadruples}",
        f"n_bootstrap = {result.n_bootstrap}",
        "residual_defects_cps = " + ",".join(repr(r) for r in result.residuals),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_calibration_csv(result: CalibrationResult, path: str | Path) -> None:
    """Machine-readable single-row summary."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tau_s", "tau_stderr_s", "dark_rate_cps",
                         "dark_rate_stderr_cps", "n_quadruples", "n_bootstrap"])
        writer.writerow([
            repr(result.tau_s), repr(result.tau_stderr_s),
            repr(result.dark_rate_cps), repr(result.dark_rate_stderr_cps),
            result.n_quadruples, result.n_bootstrap,
        ])
