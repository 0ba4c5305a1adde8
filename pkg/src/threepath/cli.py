"""Command-line interface.

Subcommands: simulate, calibrate, scan, sweep, kappa, predict.  Global
options load a config file and override seed/output/threads; per-subcommand
flags override individual physics parameters.  Exit codes: 0 success,
1 usage error, 2 runtime error; all error messages go to stderr with an
``error:`` prefix.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import calibrate as cal
from . import reports, svgplot
from .config import RunConfig, apply_overrides, load_config
from .experiment import (
    intensity_sweep,
    measure_kappa,
    predict_kappa_det,
    scale_factor_for_target,
    scan_phase_space,
)
from .model import PathSet, PhasePoint, detector_forward, incident_rate
from .sim import SimulationRun, dump_event_times, simulate_combination


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        raise UsageError(message)


def _add_global_options(parser: argparse.ArgumentParser, *, suppress: bool) -> None:
    # registered on the main parser and again on every subparser (with
    # suppressed defaults) so they may appear on either side of the command
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=d, help="config file to load")
    parser.add_argument("--seed", type=int, default=d, help="base RNG seed (u64)")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory")
    parser.add_argument("--threads", type=int, default=d, help="worker processes for scans")
    parser.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="suppress progress chatter")


def _physics_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    _add_global_options(p, suppress=True)
    g = p.add_argument_group("physics overrides")
    g.add_argument("--tau-ns", type=float, help="detector dead time (ns)")
    g.add_argument("--dark-cps", type=float, help="detector dark rate (counts/s)")
    g.add_argument("--efficiency", type=float, help="detector efficiency (0,1]")
    g.add_argument("--rate-a-cps", type=float, help="incident rate, path A (photons/s)")
    g.add_argument("--rate-b-cps", type=float, help="incident rate, path B (photons/s)")
    g.add_argument("--rate-c-cps", type=float, help="incident rate, path C (photons/s)")
    g.add_argument("--phi-a-pi", type=float, help="phase of path A (units of pi)")
    g.add_argument("--phi-c-pi", type=float, help="phase of path C (units of pi)")
    return p


def build_parser() -> _Parser:
    parser = _Parser(prog="threepath",
                     description="Virtual three-path interferometry lab")
    _add_global_options(parser, suppress=False)
    physics = _physics_parent()
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[physics],
                       help="simulate one shutter combination")
    p.add_argument("--combination", default="ABC",
                   help="shutter combination label (e.g. ABC, AB, A, none)")
    p.add_argument("--duration-s", type=float, help="integration time (s)")
    p.add_argument("--dump-times", metavar="PATH",
                   help="write detected timestamps, one float per line")

    p = sub.add_parser("calibrate", parents=[physics],
                       help="fit dead time and dark rate from quadruple CSV data")
    p.add_argument("--data", required=True, metavar="PATH",
                   help="quadruple CSV (dark_cps,a_cps,b_cps,ab_cps,duration_s)")
    p.add_argument("--bootstrap", type=int, default=1000,
                   help="bootstrap resamples (default 1000)")

    p = sub.add_parser("scan", parents=[physics],
                       help="raster-scan phase space; grid CSV + contour SVGs")
    p.add_argument("--runs-per-point", type=int, help="kappa runs per grid point")
    p.add_argument("--leg-duration-s", type=float, help="integration per leg (s)")

    p = sub.add_parser("sweep", parents=[physics],
                       help="kappa vs intensity at the constructive maximum")
    p.add_argument("--scale-factors", metavar="LIST",
                   help="comma-separated rate scale factors")
    p.add_argument("--target-rabc-cps", metavar="LIST",
                   help="comma-separated detected three-path target rates")
    p.add_argument("--n-runs", type=int, help="kappa runs per intensity")
    p.add_argument("--leg-duration-s", type=float, help="integration per leg (s)")

    p = sub.add_parser("kappa", parents=[physics],
                       help="measure kappa at one phase point")
    p.add_argument("--n-runs", type=int, help="number of eight-leg runs")
    p.add_argument("--leg-duration-s", type=float, help="integration per leg (s)")
    p.add_argument("--audit-csv", metavar="NAME",
                   help="also write the run-level audit CSV under this name")

    p = sub.add_parser("predict", parents=[physics],
                       help="predict kappa from detector nonlinearity alone")
    p.add_argument("--det-a-cps", type=float,
                   help="measured detected single-path rate A (default: modeled)")
    p.add_argument("--det-b-cps", type=float, help="measured detected rate B")
    p.add_argument("--det-c-cps", type=float, help="measured detected rate C")

    return parser


def _merge_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    config = apply_overrides(
        config,
        seed=args.seed,
        out_dir=args.out,
        threads=args.threads,
        dead_time_ns=getattr(args, "tau_ns", None),
        dark_rate_cps=getattr(args, "dark_cps", None),
        efficiency=getattr(args, "efficiency", None),
        rate_a_cps=getattr(args, "rate_a_cps", None),
        rate_b_cps=getattr(args, "rate_b_cps", None),
        rate_c_cps=getattr(args, "rate_c_cps", None),
        phi_a_pi=getattr(args, "phi_a_pi", None),
        phi_c_pi=getattr(args, "phi_c_pi", None),
        scan_runs_per_point=getattr(args, "runs_per_point", None),
        n_runs=getattr(args, "n_runs", None),
    )
    leg = getattr(args, "leg_duration_s", None)
    if leg is not None:
        config = replace(config, leg_duration_s=leg, scan_leg_duration_s=leg)
    duration = getattr(args, "duration_s", None)
    if duration is not None:
        config = replace(config, leg_duration_s=duration)
    return config.validate()


def _out_path(config: RunConfig, name: str) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _cmd_simulate(args, config: RunConfig) -> int:
    paths = PathSet.from_label(args.combination)
    record = simulate_combination(
        config.interferometer(), paths, config.detector_model(),
        config.leg_duration_s, config.seed,
    )
    print(f"combination = {paths.label}")
    print(f"incident_cps = {incident_rate(config.interferometer(), paths)!r}")
    print(f"detected_count = {record.detected_count}")
    print(f"detected_cps = {record.detected_rate!r}")
    if args.dump_times:
        run = SimulationRun(incident_rate(config.interferometer(), paths),
                            config.detector_model(), config.leg_duration_s,
                            config.seed)
        with open(args.dump_times, "w", encoding="utf-8") as fh:
            n = dump_event_times(run, fh)
        if not args.quiet:
            print(f"wrote {n} timestamps to {args.dump_times}")
    return 0


def _cmd_calibrate(args, config: RunConfig) -> int:
    quads = cal.read_quadruples(args.data)
    result = cal.estimate_parameters(quads, n_bootstrap=args.bootstrap,
                                     seed=config.seed)
    cal.write_calibration_report(result, _out_path(config, "calibration.txt"))
    cal.write_calibration_csv(result, _out_path(config, "calibration.csv"))
    print(f"tau_ns = {result.tau_s * 1e9!r}")
    print(f"tau_stderr_ns = {result.tau_stderr_s * 1e9!r}")
    print(f"dark_rate_cps = {result.dark_rate_cps!r}")
    print(f"dark_rate_stderr_cps = {result.dark_rate_stderr_cps!r}")
    if not args.quiet:
        print(f"report: {_out_path(config, 'calibration.txt')}")
    return 0


def _cmd_scan(args, config: RunConfig) -> int:
    result = scan_phase_space(config.scan_spec(), config.interferometer(),
                              config.detector_model(), workers=config.threads)
    grid_path = _out_path(config, "grid.csv")
    reports.write_grid_csv(result, grid_path)
    for field in ("r_abc_det_cps", "kappa_det_pred"):
        svgplot.render_contour(grid_path, field, _out_path(config, f"{field}.svg"))
    print(f"grid = {grid_path}")
    print(f"argmax_phi_a_pi = {result.max_label_a / math.pi!r}")
    print(f"argmax_phi_c_pi = {result.max_label_c / math.pi!r}")
    i, j = result.argmax_index
    print(f"argmax_r_abc_det_cps = {float(result.r_abc_det[i, j])!r}")
    return 0


def _cmd_sweep(args, config: RunConfig) -> int:
    if args.scale_factors and args.target_rabc_cps:
        raise UsageError("give either --scale-factors or --target-rabc-cps, not both")
    interferometer = config.interferometer()
    detector = config.detector_model()
    phase = config.phase_point()
    if args.target_rabc_cps:
        targets = [float(v) for v in args.target_rabc_cps.split(",") if v.strip()]
        factors = [scale_factor_for_target(interferometer, detector, phase, t)
                   for t in targets]
    elif args.scale_factors:
        factors = [float(v) for v in args.scale_factors.split(",") if v.strip()]
    else:
        factors = list(config.sweep_scale_factors)
    rows = intensity_sweep(factors, interferometer, detector, phase,
                           config.n_runs, config.leg_duration_s, config.seed)
    sweep_path = _out_path(config, "sweep.csv")
    reports.write_sweep_csv(rows, sweep_path)
    svgplot.render_curve(
        {
            "kappa_det": [(r.r_abc_det, r.kappa_det) for r in rows],
            "kappa_exp": [(r.r_abc_det, r.kappa_exp) for r in rows],
        },
        _out_path(config, "sweep.svg"),
        x_label="detected three-path rate (counts/s)",
        y_label="kappa",
        title="kappa vs intensity",
        error_bars={"kappa_exp": [r.kappa_stderr for r in rows]},
    )
    print(",".join(reports.SWEEP_COLUMNS))
    for r in rows:
        print(f"{r.r_abc_det!r},{r.kappa_det!r},{r.kappa_exp!r},{r.kappa_stderr!r}")
    if not args.quiet:
        print(f"table: {sweep_path}")
    return 0


def _cmd_kappa(args, config: RunConfig) -> int:
    leg_log = [] if args.audit_csv else None
    estimate = measure_kappa(
        config.interferometer(), config.detector_model(), config.phase_point(),
        config.n_runs, config.leg_duration_s, config.seed, leg_log=leg_log,
    )
    print(f"kappa_mean = {estimate.kappa_mean!r}")
    print(f"kappa_stderr = {estimate.kappa_stderr!r}")
    print(f"epsilon_mean_cps = {estimate.epsilon_mean!r}")
    print(f"delta_mean_cps = {estimate.delta_mean!r}")
    print(f"n_runs = {estimate.n_runs}")
    if leg_log is not None:
        path = _out_path(config, args.audit_csv)
        reports.write_runs_csv(leg_log, path)
        if not args.quiet:
            print(f"audit: {path}")
    return 0


def _cmd_predict(args, config: RunConfig) -> int:
    detector = config.detector_model()
    interferometer = config.interferometer()
    singles = []
    for flag, single in ((args.det_a_cps, PathSet.A), (args.det_b_cps, PathSet.B),
                         (args.det_c_cps, PathSet.C)):
        if flag is not None:
            singles.append(flag)
        else:
            singles.append(detector_forward(interferometer.rate_of(single), detector))
    value = predict_kappa_det(singles, detector, config.phase_point())
    print(f"kappa_det = {value!r}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "scan": _cmd_scan,
    "sweep": _cmd_sweep,
    "kappa": _cmd_kappa,
    "predict": _cmd_predict,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"error: {exc}\n")
        return 1
    try:
        config = _merge_config(args)
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # runtime failure: report, exit 2
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
