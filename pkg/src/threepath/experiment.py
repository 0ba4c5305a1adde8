"""Virtual experiment orchestration.

Randomized eight-combination kappa measurements, the detector-nonlinearity
kappa prediction pipeline, two-dimensional phase-space raster scans, and
intensity sweeps at the constructive maximum.

Seed discipline: every leg gets a child seed derived from the base seed and
the (run index, combination) pair via :func:`threepath.sim.derive_seed`, and
every grid point gets one derived from its grid indices, so serial and
parallel execution produce identical numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .model import (
    ALL_COMBINATIONS,
    DegenerateNormalizationError,
    DetectorModel,
    InterferometerConfig,
    PathSet,
    PhasePoint,
    SumRuleInputs,
    TRIPLE_ABC,
    delta,
    detector_forward,
    detector_inverse,
    epsilon,
    incident_rate,
    kappa,
)
from .sim import POISSONIAN, SimulationRun, SourceStatistics, derive_seed, simulate_stream

# spawn-key tag separating the per-run shuffle stream from leg seeds
_ORDER_KEY = 8


@dataclass(frozen=True)
class KappaEstimate:
    """kappa measured as a mean over repeated randomized eight-leg runs."""

    kappa_mean: float
    kappa_stderr: float       # standard error of the mean over runs
    epsilon_mean: float       # counts/s
    delta_mean: float         # counts/s
    n_runs: int
    phase: PhasePoint


@dataclass(frozen=True)
class LegRecord:
    """Audit row for one simulated shutter-combination leg."""

    run_index: int
    combination: PathSet
    order_position: int
    count: int
    duration: float
    seed: int


@dataclass(frozen=True)
class ScanSpec:
    """Raster-scan layout over the two plate phases.

    Grids are the plate-phase axis labels (radians).  ``phase_offset`` is
    where the physical zero-phase point sits on those axes (the absolute
    plate starting position); the physical phase at a label is
    label - offset.  Defaults to no offset.
    """

    grid_a: tuple[float, ...]
    grid_c: tuple[float, ...]
    runs_per_point: int
    leg_duration: float
    base_seed: int
    phase_offset: PhasePoint = PhasePoint()

    def __post_init__(self) -> None:
        for name, grid in (("grid_a", self.grid_a), ("grid_c", self.grid_c)):
            values = tuple(float(v) for v in grid)
            if not values:
                raise ValueError(f"{name} must be nonempty")
            if any(not math.isfinite(v) for v in values):
                raise ValueError(f"{name} must be finite")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, values)
        if self.runs_per_point < 1:
            raise ValueError("runs_per_point must be >= 1")
        if not math.isfinite(self.leg_duration) or self.leg_duration <= 0.0:
            raise ValueError("leg_duration must be > 0")

    def physical_phase(self, label_a: float, label_c: float) -> PhasePoint:
        return PhasePoint(label_a - self.phase_offset.phi_a,
                          label_c - self.phase_offset.phi_c)


@dataclass(frozen=True)
class ScanResult:
    """Gridded scan output; arrays are indexed [i_phi_a, j_phi_c].

    kappa fields hold NaN at points whose measurement was degenerate
    (delta = 0); those are missing values, not failures.
    """

    spec: ScanSpec
    r_abc_det: np.ndarray          # detected three-path rate, analytic
    kappa_mean: np.ndarray
    kappa_stderr: np.ndarray
    kappa_det_pred: np.ndarray     # analytic nonlinearity prediction
    argmax_index: tuple[int, int]
    max_label_a: float             # argmax refined along the phi_a axis
    max_label_c: float


@dataclass(frozen=True)
class SweepRow:
    """One intensity step of the kappa-vs-intensity comparison."""

    scale_factor: float
    r_abc_det: float               # detected three-path rate at the maximum
    kappa_det: float               # predicted from detector nonlinearity
    kappa_exp: float               # simulated measurement
    kappa_stderr: float


def measure_kappa(
    config: InterferometerConfig,
    detector: DetectorModel,
    phase: PhasePoint | None = None,
    n_runs: int = 1,
    leg_duration: float = 1.0,
    seed: int = 0,
    *,
    statistics: SourceStatistics = POISSONIAN,
    rate_fn: Callable[[PathSet], float] | None = None,
    randomize_order: bool = True,
    leg_log: list[LegRecord] | None = None,
) -> KappaEstimate:
    """Measure kappa as the mean over ``n_runs`` randomized eight-leg runs.

    Each run visits all eight shutter combinations in a freshly randomized
    order (deterministic given seed and run index) and computes one kappa
    value from the eight detected rates; the estimate is the mean and
    standard error over runs.  ``rate_fn`` overrides the incident-rate
    model (e.g. an injected violation); otherwise rates come from ``config``
    with ``phase`` applied.  ``randomize_order=False`` is for shuffle
    -invariance checks only.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if phase is not None:
        config = replace(config, phase=phase)
    if rate_fn is None:
        rate_fn = lambda paths: incident_rate(config, paths)  # noqa: E731

    rates = [rate_fn(paths) for paths in ALL_COMBINATIONS]
    kappas = np.empty(n_runs)
    epsilons = np.empty(n_runs)
    deltas = np.empty(n_runs)
    for run_index in range(n_runs):
        if randomize_order:
            order_rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(seed, spawn_key=(run_index, _ORDER_KEY))))
            order = order_rng.permutation(len(ALL_COMBINATIONS))
        else:
            order = np.arange(len(ALL_COMBINATIONS))
        detected = [0.0] * len(ALL_COMBINATIONS)
        for position, comb_index in enumerate(order):
            comb_index = int(comb_index)
            paths = ALL_COMBINATIONS[comb_index]
            leg_seed = derive_seed(seed, run_index, comb_index)
            record = simulate_stream(
                SimulationRun(rates[comb_index], detector, leg_duration, leg_seed,
                              statistics),
                path_set=paths,
            )
            detected[comb_index] = record.detected_rate
            if leg_log is not None:
                leg_log.append(LegRecord(run_index, paths, position,
                                         record.detected_count, leg_duration, leg_seed))
        inputs = SumRuleInputs.from_mapping(dict(zip(ALL_COMBINATIONS, detected)))
        d = delta(inputs)
        if d == 0.0:
            raise DegenerateNormalizationError(
                f"run {run_index}: delta is zero, kappa undefined"
            )
        epsilons[run_index] = epsilon(inputs)
        deltas[run_index] = d
        kappas[run_index] = epsilons[run_index] / d

    stderr = float(kappas.std(ddof=1) / math.sqrt(n_runs)) if n_runs > 1 else 0.0
    return KappaEstimate(
        kappa_mean=float(kappas.mean()),
        kappa_stderr=stderr,
        epsilon_mean=float(epsilons.mean()),
        delta_mean=float(deltas.mean()),
        n_runs=n_runs,
        phase=config.phase,
    )


def predict_kappa_det(
    measured_single: Sequence[float],
    detector: DetectorModel,
    phase: PhasePoint,
) -> float:
    """kappa expected from detector nonlinearity alone.

    Inverts the three measured single-path detected rates to incident rates,
    builds all eight incident combination rates assuming perfect pairwise
    interference, pushes each back through the detector response, and
    evaluates kappa on the predicted detected rates.
    """
    if len(measured_single) != 3:
        raise ValueError("measured_single must hold the three single-path detected rates")
    ra, rb, rc = (detector_inverse(r, detector) for r in measured_single)
    config = InterferometerConfig(rate_a=ra, rate_b=rb, rate_c=rc, phase=phase)
    detected = {
        paths: detector_forward(incident_rate(config, paths), detector)
        for paths in ALL_COMBINATIONS
    }
    return kappa(SumRuleInputs.from_mapping(detected))


def _detected_three_path(config: InterferometerConfig, detector: DetectorModel,
                         phase: PhasePoint) -> float:
    return detector_forward(
        incident_rate(replace(config, phase=phase), TRIPLE_ABC), detector)


def _predict_at(config: InterferometerConfig, detector: DetectorModel,
                phase: PhasePoint) -> float:
    singles_det = [
        detector_forward(config.rate_of(m), detector)
        for m in (PathSet.A, PathSet.B, PathSet.C)
    ]
    return predict_kappa_det(singles_det, detector, phase)


def _scan_point(args) -> tuple[int, int, float, float, float, float]:
    spec, config, detector, i, j = args
    phase = spec.physical_phase(spec.grid_a[i], spec.grid_c[j])
    r_det = _detected_three_path(config, detector, phase)
    pred = _predict_at(config, detector, phase)
    point_seed = derive_seed(spec.base_seed, i, j)
    try:
        est = measure_kappa(config, detector, phase, spec.runs_per_point,
                            spec.leg_duration, point_seed)
        k_mean, k_err = est.kappa_mean, est.kappa_stderr
    except DegenerateNormalizationError:
        k_mean, k_err = math.nan, math.nan
    return i, j, r_det, k_mean, k_err, pred


def scan_phase_space(
    spec: ScanSpec,
    config: InterferometerConfig,
    detector: DetectorModel,
    *,
    workers: int = 1,
) -> ScanResult:
    """Raster-scan the two plate phases.

    At every grid point: the analytic detected three-path rate, a stochastic
    kappa measurement, and the analytic nonlinearity prediction.  Degenerate
    points are recorded as NaN.  ``workers > 1`` distributes grid points over
    processes; results are identical to a serial run.
    """
    na, nc = len(spec.grid_a), len(spec.grid_c)
    r_abc = np.empty((na, nc))
    k_mean = np.empty((na, nc))
    k_err = np.empty((na, nc))
    k_pred = np.empty((na, nc))
    tasks = [(spec, config, detector, i, j) for i in range(na) for j in range(nc)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_scan_point(t) for t in tasks]
    for i, j, r, km, ke, kp in results:
        r_abc[i, j] = r
        k_mean[i, j] = km
        k_err[i, j] = ke
        k_pred[i, j] = kp

    flat = int(np.argmax(r_abc))
    imax, jmax = np.unravel_index(flat, r_abc.shape)
    max_a = _golden_refine(
        lambda la: _detected_three_path(config, detector,
                                        spec.physical_phase(la, spec.grid_c[jmax])),
        spec.grid_a, imax)
    max_c = _golden_refine(
        lambda lc: _detected_three_path(config, detector,
                                        spec.physical_phase(max_a, lc)),
        spec.grid_c, jmax)
    return ScanResult(
        spec=spec,
        r_abc_det=r_abc,
        kappa_mean=k_mean,
        kappa_stderr=k_err,
        kappa_det_pred=k_pred,
        argmax_index=(int(imax), int(jmax)),
        max_label_a=max_a,
        max_label_c=max_c,
    )


def _golden_refine(value_at: Callable[[float], float], grid: tuple[float, ...],
                   index: int) -> float:
    """One golden-section refinement of a grid argmax along one axis.

    Needs an interior bracket whose middle value dominates both ends;
    otherwise the grid point is returned unchanged.
    """
    if not 0 < index < len(grid) - 1:
        return grid[index]
    left, mid, right = grid[index - 1], grid[index], grid[index + 1]
    if not (value_at(mid) > value_at(left) and value_at(mid) > value_at(right)):
        return grid[index]
    result = optimize.minimize_scalar(
        lambda x: -value_at(x), bracket=(left, mid, right), method="golden",
        options={"xtol": 1e-10},
    )
    return float(result.x)


def scale_factor_for_target(
    config: InterferometerConfig,
    detector: DetectorModel,
    phase: PhasePoint,
    target_detected_abc: float,
) -> float:
    """Scale on the three single-path incident rates that makes the detected
    three-path rate at ``phase`` equal ``target_detected_abc``.

    Scaling all single rates by s scales the incident three-path rate by s,
    so s = f_inverse(target) / R_ABC.  Raises SaturationError for targets at
    or above the detector ceiling.
    """
    base = incident_rate(replace(config, phase=phase), TRIPLE_ABC)
    if base <= 0.0:
        raise ValueError("three-path incident rate is zero at this phase; cannot scale")
    return detector_inverse(target_detected_abc, detector) / base


def intensity_sweep(
    scale_factors: Sequence[float],
    config: InterferometerConfig,
    detector: DetectorModel,
    phase_max: PhasePoint,
    n_runs: int,
    leg_duration: float,
    seed: int,
) -> list[SweepRow]:
    """Compare predicted and simulated kappa over a range of intensities.

    Each scale factor multiplies all three single-path incident rates (fixed
    ratios); the comparison runs at the constructive-maximum phase point.
    """
    rows = []
    for k, s in enumerate(scale_factors):
        s = float(s)
        if not math.isfinite(s) or s <= 0.0:
            raise ValueError(f"scale factors must be > 0, got {s!r}")
        scaled = replace(config, rate_a=s * config.rate_a, rate_b=s * config.rate_b,
                         rate_c=s * config.rate_c, phase=phase_max)
        r_det = _detected_three_path(scaled, detector, phase_max)
        k_det = _predict_at(scaled, detector, phase_max)
        est = measure_kappa(scaled, detector, phase_max, n_runs, leg_duration,
                            derive_seed(seed, k))
        rows.append(SweepRow(scale_factor=s, r_abc_det=r_det, kappa_det=k_det,
                             kappa_exp=est.kappa_mean, kappa_stderr=est.kappa_stderr))
    return rows
