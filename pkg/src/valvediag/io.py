"""File formats: JSON configs/scenarios/faults, trace CSV, report JSON/CSV.

All loaders are strict: unknown keys are rejected so typos fail loudly.
Trace CSV layout: optional ``#``-prefixed metadata lines, then the header
``t,p_s,p_a,p_b,u_PA1..u_PB<N>``, pressures in Pa with 9 significant
digits, valve bits as 0/1.
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable

import numpy as np

from .errors import ConfigError, ReportFormatError, TraceFormatError
from .model import DFCU_NAMES, SystemConfig, ValveParams, valve_index, valve_names
from .simulator import FaultMode, FaultSpec, Scenario, ScenarioStep, Trace


def _require_keys(obj: dict, allowed: set, required: set, what: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{what}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{what}: missing keys {sorted(missing)}")


# ---------------------------------------------------------------- system config

def config_to_dict(config: SystemConfig) -> dict:
    return {
        "area_a": config.area_a,
        "area_b": config.area_b,
        "tank_pressure": config.tank_pressure,
        "dp_laminar": config.dp_laminar,
        "dfcus": {
            name: [{"kv": v.kv, "alpha": v.alpha} for v in bank]
            for name, bank in zip(DFCU_NAMES, config.dfcus)
        },
    }


def config_from_dict(obj: dict) -> SystemConfig:
    _require_keys(
        obj,
        {"area_a", "area_b", "tank_pressure", "dp_laminar", "dfcus"},
        {"area_a", "area_b", "tank_pressure", "dfcus"},
        "system config",
    )
    dfcus_obj = obj["dfcus"]
    if not isinstance(dfcus_obj, dict):
        raise ConfigError("system config: 'dfcus' must be an object")
    _require_keys(dfcus_obj, set(DFCU_NAMES), set(DFCU_NAMES), "system config dfcus")
    banks = []
    for name in DFCU_NAMES:
        bank = []
        for i, v in enumerate(dfcus_obj[name]):
            _require_keys(v, {"kv", "alpha"}, {"kv", "alpha"}, f"valve {name}{i + 1}")
            bank.append(ValveParams(kv=float(v["kv"]), alpha=float(v["alpha"])))
        banks.append(tuple(bank))
    return SystemConfig(
        dfcus=tuple(banks),
        area_a=float(obj["area_a"]),
        area_b=float(obj["area_b"]),
        tank_pressure=float(obj["tank_pressure"]),
        dp_laminar=float(obj.get("dp_laminar", 1e3)),
    )


def config_digest(config: SystemConfig) -> str:
    """Short stable identifier of a system config."""
    canon = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def load_system_config(path) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(obj)


# -------------------------------------------------------------------- scenarios

def word_to_string(word: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in word)


def word_from_obj(obj, what: str = "word") -> tuple:
    """Accept a 0/1 string (spaces/underscores allowed) or a list of bits."""
    if isinstance(obj, str):
        cleaned = obj.replace(" ", "").replace("_", "")
        if not set(cleaned) <= {"0", "1"}:
            raise ConfigError(f"{what}: must contain only 0/1 characters")
        return tuple(int(c) for c in cleaned)
    try:
        bits = tuple(int(b) for b in obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: must be a 0/1 string or list") from exc
    if any(b not in (0, 1) for b in bits):
        raise ConfigError(f"{what}: bits must be 0 or 1")
    return bits


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "sample_period": scenario.sample_period,
        "noise_sigma": scenario.noise_sigma,
        "spike_magnitude": scenario.spike_magnitude,
        "spike_decay": scenario.spike_decay,
        "supply_pressure": scenario.supply_pressure,
        "seed": scenario.seed,
        "steps": [
            {"duration": s.duration, "word": word_to_string(s.word), "force": s.force}
            for s in scenario.steps
        ],
    }


def scenario_from_dict(obj: dict) -> Scenario:
    allowed = {
        "sample_period",
        "noise_sigma",
        "spike_magnitude",
        "spike_decay",
        "supply_pressure",
        "seed",
        "steps",
    }
    _require_keys(obj, allowed, {"steps"}, "scenario")
    steps = []
    for i, s in enumerate(obj["steps"]):
        _require_keys(s, {"duration", "word", "force"}, {"duration", "word"}, f"step {i}")
        steps.append(
            ScenarioStep(
                duration=int(s["duration"]),
                word=word_from_obj(s["word"], f"step {i} word"),
                force=float(s.get("force", 0.0)),
            )
        )
    kwargs = {k: obj[k] for k in allowed - {"steps"} if k in obj}
    if "seed" in kwargs:
        kwargs["seed"] = int(kwargs["seed"])
    return Scenario(steps=steps, **kwargs)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(obj)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


# ----------------------------------------------------------------------- faults

def parse_fault_token(token: str, n_per_dfcu: int) -> FaultSpec:
    """CLI shorthand 'AT3:closed' or 'AT3:closed:1200' (onset sample)."""
    parts = token.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"bad fault {token!r}; expected VALVE:MODE[:ONSET], e.g. AT3:closed")
    idx = valve_index(parts[0], n_per_dfcu)
    try:
        mode = FaultMode(parts[1].strip().lower())
    except ValueError:
        raise ConfigError(f"bad fault mode {parts[1]!r}; expected 'open' or 'closed'") from None
    onset = int(parts[2]) if len(parts) == 3 else 0
    return FaultSpec(valve_index=idx, mode=mode, onset_sample=onset)


def fault_from_dict(obj: dict, n_per_dfcu: int) -> FaultSpec:
    _require_keys(obj, {"valve", "mode", "onset"}, {"valve", "mode"}, "fault")
    valve = obj["valve"]
    idx = valve_index(valve, n_per_dfcu) if isinstance(valve, str) else int(valve)
    try:
        mode = FaultMode(str(obj["mode"]).lower())
    except ValueError:
        raise ConfigError(f"bad fault mode {obj['mode']!r}") from None
    return FaultSpec(valve_index=idx, mode=mode, onset_sample=int(obj.get("onset", 0)))


def load_faults(path, n_per_dfcu: int) -> list:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(obj, dict):
        obj = [obj]
    return [fault_from_dict(f, n_per_dfcu) for f in obj]


# ------------------------------------------------------------ diagnostics config

def diagnostics_config_from_dict(obj: dict):
    from .estimator import PenaltyConfig
    from .pipeline import DiagnosticsConfig

    allowed = {
        "period_len",
        "lambda",
        "activity_threshold",
        "spike_threshold",
        "spike_window",
        "verdict_threshold",
        "verdict_periods",
        "min_retained_fraction",
        "tau",
        "penalty_gain",
        "penalty_closed_weight",
    }
    _require_keys(obj, allowed, set(), "diagnostics config")
    kwargs = {}
    mapping = {
        "period_len": ("period_len", int),
        "lambda": ("ewma_lambda", float),
        "activity_threshold": ("activity_threshold", float),
        "spike_threshold": ("spike_threshold", float),
        "spike_window": ("spike_window", int),
        "verdict_threshold": ("verdict_threshold", float),
        "verdict_periods": ("verdict_periods", int),
        "min_retained_fraction": ("min_retained_fraction", float),
        "tau": ("tau", float),
    }
    for key, (attr, conv) in mapping.items():
        if key in obj:
            kwargs[attr] = conv(obj[key])
    if "penalty_gain" in obj or "penalty_closed_weight" in obj:
        kwargs["penalty"] = PenaltyConfig(
            gain=float(obj.get("penalty_gain", 1.0)),
            closed_weight=float(obj.get("penalty_closed_weight", 1.0)),
        )
    return DiagnosticsConfig(**kwargs)


def load_diagnostics_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return diagnostics_config_from_dict(obj)


# -------------------------------------------------------------------- trace CSV

def trace_header(n_per_dfcu: int) -> str:
    return "t,p_s,p_a,p_b," + ",".join(f"u_{v}" for v in valve_names(n_per_dfcu))


def write_trace_csv(trace: Trace, path) -> None:
    n = trace.n_valves // 4
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if trace.config_digest:
            fh.write(f"# config_digest={trace.config_digest}\n")
        fh.write(f"# sample_period={trace.sample_period:.9g}\n")
        fh.write(trace_header(n) + "\n")
        for i in range(len(trace)):
            cells = [
                f"{trace.t[i]:.9g}",
                f"{trace.p_s[i]:.9g}",
                f"{trace.p_a[i]:.9g}",
                f"{trace.p_b[i]:.9g}",
            ]
            cells += [str(int(b)) for b in trace.commanded[i]]
            fh.write(",".join(cells) + "\n")


def read_trace_csv(path) -> Trace:
    digest = ""
    sample_period = None
    header = None
    rows_t, rows_s, rows_a, rows_b, rows_u = [], [], [], [], []
    n_cols = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta = line[1:].strip()
                if meta.startswith("config_digest="):
                    digest = meta.split("=", 1)[1]
                elif meta.startswith("sample_period="):
                    try:
                        sample_period = float(meta.split("=", 1)[1])
                    except ValueError:
                        raise TraceFormatError(f"line {lineno}: bad sample_period") from None
                continue
            if header is None:
                header = line.split(",")
                if header[:4] != ["t", "p_s", "p_a", "p_b"] or not all(
                    c.startswith("u_") for c in header[4:]
                ):
                    raise TraceFormatError(
                        f"line {lineno}: bad header; expected 't,p_s,p_a,p_b,u_...'"
                    )
                n_cols = len(header)
                if (n_cols - 4) % 4 != 0 or n_cols == 4:
                    raise TraceFormatError(
                        f"line {lineno}: valve column count must be a positive multiple of 4"
                    )
                continue
            cells = line.split(",")
            if len(cells) != n_cols:
                raise TraceFormatError(
                    f"line {lineno}: expected {n_cols} columns, got {len(cells)}"
                )
            try:
                rows_t.append(float(cells[0]))
                rows_s.append(float(cells[1]))
                rows_a.append(float(cells[2]))
                rows_b.append(float(cells[3]))
                bits = [int(c) for c in cells[4:]]
            except ValueError as exc:
                raise TraceFormatError(f"line {lineno}: {exc}") from None
            if any(b not in (0, 1) for b in bits):
                raise TraceFormatError(f"line {lineno}: valve bits must be 0/1")
            rows_u.append(bits)
    if header is None:
        raise TraceFormatError("no header line found")
    if not rows_t:
        raise TraceFormatError("no samples")
    if sample_period is None:
        sample_period = rows_t[1] - rows_t[0] if len(rows_t) > 1 else 1.0
    return Trace(
        t=np.array(rows_t),
        p_s=np.array(rows_s),
        p_a=np.array(rows_a),
        p_b=np.array(rows_b),
        commanded=np.array(rows_u, dtype=np.uint8),
        sample_period=float(sample_period),
        config_digest=digest,
    )


# ----------------------------------------------------------------------- report

def write_report_json(report_dict: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_dict, fh, indent=2)
        fh.write("\n")


def load_report_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ReportFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ReportFormatError("report must be a JSON object")
    for key in ("periods", "filtered", "table", "verdicts"):
        if key not in obj:
            raise ReportFormatError(f"report missing {key!r} key")
    table = obj["table"]
    for key in ("filtered_max", "unfiltered_max"):
        if key not in table or "open" not in table[key] or "closed" not in table[key]:
            raise ReportFormatError(f"report table missing {key!r} open/closed arrays")
    return obj


def write_series_csv(report, path) -> None:
    """Plot-ready per-period series: period, valve, estimates, filtered values."""
    names = valve_names(report.n_valves // 4)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("period,valve,x_open,x_closed,filtered_open,filtered_closed\n")
        for p in report.periods:
            for v, name in enumerate(names):
                if p.estimates is not None:
                    eo = f"{p.estimates.x_open[v]:.9g}"
                    ec = f"{p.estimates.x_closed[v]:.9g}"
                else:
                    eo = ec = ""
                fh.write(
                    f"{p.index},{name},{eo},{ec},"
                    f"{p.filtered_open[v]:.9g},{p.filtered_closed[v]:.9g}\n"
                )


def format_report_table(report_dict: dict) -> str:
    """Aligned filtered vs not-filtered maxima per valve, plus verdicts."""
    table = report_dict["table"]
    fo = table["filtered_max"]["open"]
    fc = table["filtered_max"]["closed"]
    uo = table["unfiltered_max"]["open"]
    uc = table["unfiltered_max"]["closed"]
    names = report_dict.get("valves") or valve_names(len(fo) // 4)
    flagged = {}
    for v in report_dict["verdicts"]:
        flagged[v["valve"]] = v["mode"]

    lines = []
    head = (
        f"{'Valve':<6} {'Filt x_open':>12} {'Filt x_closed':>14} "
        f"{'Raw x_open':>12} {'Raw x_closed':>14}  Fault"
    )
    lines.append(head)
    lines.append("-" * len(head))
    for i, name in enumerate(names):
        mark = f"* {flagged[name]}" if name in flagged else ""
        lines.append(
            f"{name:<6} {fo[i]:>12.3f} {fc[i]:>14.3f} {uo[i]:>12.3f} {uc[i]:>14.3f}  {mark}"
        )
    lines.append("")
    if report_dict["verdicts"]:
        for v in report_dict["verdicts"]:
            lines.append(
                f"{v['valve']} {v['mode']} confidence={v['confidence']:.2f}"
                f" at period {v['period']}"
            )
    else:
        lines.append("no faults identified")
    return "\n".join(lines)
