"""Command-line interface: simulate, diagnose, report.

Exit codes: 0 = completed (whether or not faults were found), 1 = input or
usage error, 2 = internal numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import (
    NoConvergence,
    NumericalFailure,
    SimulationError,
    ValvediagError,
)
from .estimator import PenaltyConfig
from .io import (
    config_digest,
    format_report_table,
    load_diagnostics_config,
    load_faults,
    load_report_json,
    load_scenario,
    load_system_config,
    parse_fault_token,
    read_trace_csv,
    write_report_json,
    write_series_csv,
    write_trace_csv,
)
from .pipeline import DiagnosticsConfig, run_diagnostics
from .simulator import simulate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valvediag",
        description="Model-based fault identification for digital hydraulic valve systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate", help="run a scripted duty cycle and write the measurement trace CSV"
    )
    sim.add_argument("--config", required=True, help="system config JSON")
    sim.add_argument("--scenario", required=True, help="scenario JSON")
    sim.add_argument(
        "--fault",
        action="append",
        default=[],
        metavar="VALVE:MODE[:ONSET]",
        help="inject a fault, e.g. AT3:closed (repeatable)",
    )
    sim.add_argument("--faults-file", help="JSON file with fault objects")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--out", required=True, help="output trace CSV path")

    diag = sub.add_parser("diagnose", help="run diagnostics over a trace CSV")
    diag.add_argument("--config", required=True, help="system config JSON")
    diag.add_argument("--trace", required=True, help="trace CSV path")
    diag.add_argument("--diag-config", help="diagnostics config JSON")
    diag.add_argument("--report", required=True, help="output report JSON path")
    diag.add_argument("--series", help="optional per-period CSV series path")
    diag.add_argument("--period-len", type=int, dest="period_len")
    diag.add_argument("--ewma-lambda", type=float, dest="ewma_lambda", metavar="LAMBDA")
    diag.add_argument("--activity-threshold", type=float, dest="activity_threshold")
    diag.add_argument(
        "--spike-threshold",
        type=float,
        dest="spike_threshold",
        help="Pa per sample; 'inf' disables spike rejection",
    )
    diag.add_argument("--spike-window", type=int, dest="spike_window")
    diag.add_argument("--verdict-threshold", type=float, dest="verdict_threshold")
    diag.add_argument("--verdict-periods", type=int, dest="verdict_periods")
    diag.add_argument("--min-retained-fraction", type=float, dest="min_retained_fraction")
    diag.add_argument("--tau", type=float, dest="tau")
    diag.add_argument("--penalty-gain", type=float, dest="penalty_gain")
    diag.add_argument("--penalty-closed-weight", type=float, dest="penalty_closed_weight")

    rep = sub.add_parser("report", help="render a report JSON as an aligned text table")
    rep.add_argument("report_path")
    return parser


DIAG_FIELDS = (
    "period_len",
    "ewma_lambda",
    "activity_threshold",
    "spike_threshold",
    "spike_window",
    "verdict_threshold",
    "verdict_periods",
    "min_retained_fraction",
    "tau",
)


def _diag_config_from_args(args) -> DiagnosticsConfig:
    # precedence: flag > file > default
    cfg = load_diagnostics_config(args.diag_config) if args.diag_config else DiagnosticsConfig()
    overrides = {
        f: getattr(args, f) for f in DIAG_FIELDS if getattr(args, f, None) is not None
    }
    if args.penalty_gain is not None or args.penalty_closed_weight is not None:
        overrides["penalty"] = PenaltyConfig(
            gain=args.penalty_gain if args.penalty_gain is not None else cfg.penalty.gain,
            closed_weight=args.penalty_closed_weight
            if args.penalty_closed_weight is not None
            else cfg.penalty.closed_weight,
        )
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_simulate(args) -> int:
    config = load_system_config(args.config)
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    faults = [parse_fault_token(tok, config.n_per_dfcu) for tok in args.fault]
    if args.faults_file:
        faults.extend(load_faults(args.faults_file, config.n_per_dfcu))
    trace = simulate(config, scenario, faults)
    write_trace_csv(trace, args.out)
    print(f"wrote {args.out}: {len(trace)} samples, {len(faults)} fault(s) injected")
    for f in faults:
        print(f"  fault: valve {f.valve_index} jammed-{f.mode.value} from sample {f.onset_sample}")
    return 0


def _cmd_diagnose(args) -> int:
    config = load_system_config(args.config)
    trace = read_trace_csv(args.trace)
    if trace.n_valves != config.n_valves:
        raise ValvediagError(
            f"trace has {trace.n_valves} valve columns but config defines {config.n_valves}"
        )
    digest = config_digest(config)
    if trace.config_digest and trace.config_digest != digest:
        print(
            f"warning: trace config digest {trace.config_digest} does not match"
            f" config {digest}",
            file=sys.stderr,
        )
    cfg = _diag_config_from_args(args)
    report = run_diagnostics(config, trace, cfg)
    report_dict = report.to_dict()
    write_report_json(report_dict, args.report)
    if args.series:
        write_series_csv(report, args.series)
    solved = sum(1 for p in report.periods if p.status == "solved")
    print(f"analyzed {len(report.periods)} period(s) ({solved} solved); report: {args.report}")
    print(format_report_table(report_dict))
    return 0


def _cmd_report(args) -> int:
    report_dict = load_report_json(args.report_path)
    print(format_report_table(report_dict))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": _cmd_simulate, "diagnose": _cmd_diagnose, "report": _cmd_report}
    try:
        return handler[args.command](args)
    except ValvediagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, SimulationError):
        return _exit_code(exc.cause)
    if isinstance(exc, (NoConvergence, NumericalFailure)):
        return 2
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
