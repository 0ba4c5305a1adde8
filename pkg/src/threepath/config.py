"""Run configuration: flat sectioned key-value files with explicit units.

Every key carries its unit in the name (``dead_time_ns``, ``dark_rate_cps``,
``phi_a_pi``) because unit mix-ups are the dominant failure mode in this
kind of pipeline.  All angles in files are in units of pi radians.  The
config object stores the file-domain values verbatim, so a parse/serialize
round trip is exact; conversion to model objects happens in the builder
methods.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .experiment import ScanSpec
from .model import DetectorModel, InterferometerConfig, PhasePoint


@dataclass(frozen=True)
class RunConfig:
    """All experiment parameters in config-file units."""

    # [detector]
    dead_time_ns: float = 47.0
    dark_rate_cps: float = 284.0
    efficiency: float = 1.0
    # [source]
    rate_a_cps: float = 2080.0
    rate_b_cps: float = 5760.0
    rate_c_cps: float = 1990.0
    visibility_ab: float = 1.0
    visibility_ac: float = 1.0
    visibility_bc: float = 1.0
    # [phase]
    phi_a_pi: float = 0.0
    phi_c_pi: float = 0.0
    # [scan]
    scan_phi_a_start_pi: float = 0.0
    scan_phi_a_stop_pi: float = 2.0
    scan_phi_a_steps: int = 11
    scan_phi_c_start_pi: float = 0.0
    scan_phi_c_stop_pi: float = 2.0
    scan_phi_c_steps: int = 11
    scan_offset_a_pi: float = 0.0
    scan_offset_c_pi: float = 0.0
    scan_runs_per_point: int = 3
    scan_leg_duration_s: float = 0.1
    # [sweep]
    sweep_scale_factors: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    # [run]
    n_runs: int = 100
    leg_duration_s: float = 1.0
    seed: int = 0
    out_dir: str = "."
    threads: int = 1

    # -- builders into model objects -------------------------------------

    def detector_model(self) -> DetectorModel:
        return DetectorModel(
            dead_time=self.dead_time_ns * 1e-9,
            dark_rate=self.dark_rate_cps,
            efficiency=self.efficiency,
        )

    def phase_point(self) -> PhasePoint:
        return PhasePoint(self.phi_a_pi * math.pi, self.phi_c_pi * math.pi)

    def interferometer(self) -> InterferometerConfig:
        return InterferometerConfig(
            rate_a=self.rate_a_cps,
            rate_b=self.rate_b_cps,
            rate_c=self.rate_c_cps,
            phase=self.phase_point(),
            visibility_ab=self.visibility_ab,
            visibility_ac=self.visibility_ac,
            visibility_bc=self.visibility_bc,
        )

    def scan_spec(self) -> ScanSpec:
        grid_a = np.linspace(self.scan_phi_a_start_pi, self.scan_phi_a_stop_pi,
                             self.scan_phi_a_steps) * math.pi
        grid_c = np.linspace(self.scan_phi_c_start_pi, self.scan_phi_c_stop_pi,
                             self.scan_phi_c_steps) * math.pi
        return ScanSpec(
            grid_a=tuple(grid_a),
            grid_c=tuple(grid_c),
            runs_per_point=self.scan_runs_per_point,
            leg_duration=self.scan_leg_duration_s,
            base_seed=self.seed,
            phase_offset=PhasePoint(self.scan_offset_a_pi * math.pi,
                                    self.scan_offset_c_pi * math.pi),
        )

    def validate(self) -> "RunConfig":
        """Fail fast: build every model object and check the output directory."""
        self.detector_model()
        self.interferometer()
        self.scan_spec()
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.leg_duration_s <= 0.0:
            raise ValueError("leg_duration_s must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if any(s <= 0.0 for s in self.sweep_scale_factors):
            raise ValueError("sweep scale factors must be > 0")
        out = Path(self.out_dir)
        if out.exists():
            if not out.is_dir() or not os.access(out, os.W_OK):
                raise ValueError(f"out_dir {self.out_dir!r} is not a writable directory")
        else:
            parent = out.resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                raise ValueError(f"cannot create out_dir {self.out_dir!r}")
        return self


_SECTIONS: dict[str, tuple[str, ...]] = {
    "detector": ("dead_time_ns", "dark_rate_cps", "efficiency"),
    "source": ("rate_a_cps", "rate_b_cps", "rate_c_cps",
               "visibility_ab", "visibility_ac", "visibility_bc"),
    "phase": ("phi_a_pi", "phi_c_pi"),
    "scan": ("scan_phi_a_start_pi", "scan_phi_a_stop_pi", "scan_phi_a_steps",
             "scan_phi_c_start_pi", "scan_phi_c_stop_pi", "scan_phi_c_steps",
             "scan_offset_a_pi", "scan_offset_c_pi",
             "scan_runs_per_point", "scan_leg_duration_s"),
    "sweep": ("sweep_scale_factors",),
    "run": ("n_runs", "leg_duration_s", "seed", "out_dir", "threads"),
}

_INT_FIELDS = {"scan_phi_a_steps", "scan_phi_c_steps", "scan_runs_per_point",
               "n_runs", "seed", "threads"}
_STR_FIELDS = {"out_dir"}


def _field_key(section: str, name: str) -> str:
    # scan keys drop the section prefix inside their own section
    return name[len(section) + 1:] if name.startswith(section + "_") else name


def dump_config(config: RunConfig) -> str:
    """Serialize to the sectioned key-value text format."""
    lines = []
    for section, names in _SECTIONS.items():
        lines.append(f"[{section}]")
        for name in names:
            value = getattr(config, name)
            key = _field_key(section, name)
            if name == "sweep_scale_factors":
                text = ", ".join(repr(float(v)) for v in value)
            elif name in _INT_FIELDS:
                text = str(int(value))
            elif name in _STR_FIELDS:
                text = str(value)
            else:
                text = repr(float(value))
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)


def parse_config(text: str) -> RunConfig:
    """Parse the sectioned key-value format; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"bad config syntax: {exc}") from exc
    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            prefixed = f"{section}_{key}"
            if prefixed in _SECTIONS[section]:
                name = prefixed
            elif key in _SECTIONS[section]:
                name = key
            else:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            if name == "sweep_scale_factors":
                values[name] = tuple(float(part) for part in raw.split(",") if part.strip())
            elif name in _INT_FIELDS:
                values[name] = int(raw)
            elif name in _STR_FIELDS:
                values[name] = raw
            else:
                values[name] = float(raw)
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Replace any non-None keyword values on a copy of the config."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **updates) if updates else config
