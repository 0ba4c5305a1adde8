"""Virtual three-path interferometry lab.

Simulates photon-counting interference experiments with realistic
nonparalyzable detector dead time, measures the normalized second-order
interference statistic kappa = epsilon/delta over the eight shutter
combinations, calibrates the detector by the beam-combination method, and
separates detector-induced apparent nonadditivity from genuinely injected
higher-order interference.
"""

from .calibrate import (
    CalibrationResult,
    FitConvergenceError,
    QuadrupleMeasurement,
    estimate_parameters,
    nonlinearity_defect,
)
from .config import RunConfig, load_config, parse_config, save_config
from .experiment import (
    KappaEstimate,
    ScanResult,
    ScanSpec,
    SweepRow,
    intensity_sweep,
    measure_kappa,
    predict_kappa_det,
    scale_factor_for_target,
    scan_phase_space,
)
from .model import (
    ALL_COMBINATIONS,
    DegenerateNormalizationError,
    DetectorModel,
    InterferometerConfig,
    InverseRangeError,
    PathSet,
    PhasePlateGeometry,
    PhasePoint,
    SaturationError,
    SumRuleInputs,
    TotalInternalReflectionError,
    combination_rates,
    delta,
    detector_forward,
    detector_inverse,
    epsilon,
    incident_rate,
    kappa,
    plate_angle_to_phase,
)
from .sim import (
    CountRecord,
    EventBudgetError,
    SimulationRun,
    SourceStatistics,
    derive_seed,
    inject_violation,
    simulate_combination,
    simulate_event_times,
    simulate_stream,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_COMBINATIONS",
    "CalibrationResult",
    "CountRecord",
    "DegenerateNormalizationError",
    "DetectorModel",
    "EventBudgetError",
    "FitConvergenceError",
    "InterferometerConfig",
    "InverseRangeError",
    "KappaEstimate",
    "PathSet",
    "PhasePlateGeometry",
    "PhasePoint",
    "QuadrupleMeasurement",
    "RunConfig",
    "SaturationError",
    "ScanResult",
    "ScanSpec",
    "SimulationRun",
    "SourceStatistics",
    "SumRuleInputs",
    "SweepRow",
    "TotalInternalReflectionError",
    "combination_rates",
    "delta",
    "derive_seed",
    "detector_forward",
    "detector_inverse",
    "epsilon",
    "estimate_parameters",
    "incident_rate",
    "inject_violation",
    "intensity_sweep",
    "kappa",
    "load_config",
    "measure_kappa",
    "nonlinearity_defect",
    "parse_config",
    "plate_angle_to_phase",
    "predict_kappa_det",
    "save_config",
    "scale_factor_for_target",
    "scan_phase_space",
    "simulate_combination",
    "simulate_event_times",
    "simulate_stream",
    "__version__",
]
