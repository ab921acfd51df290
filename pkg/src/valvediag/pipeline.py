"""Online diagnostics loop: spike rejection, per-period estimation, gating,
EWMA filtering and fault verdicts.

The trace is cut into fixed non-overlapping periods (default 100 samples,
one second). Samples around pressure peaks are discarded, the remaining
samples form one sensing system whose quantile-regression solution feeds an
EWMA filter per fault variable. A variable's filter is only updated in
periods where its valve actually produced evidence (activity gating);
sustained high filtered values become verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalFailure
from .estimator import FaultVariables, PenaltyConfig, build_system, quantile_regression
from .model import SystemConfig, valve_names
from .simulator import FaultMode, SampleBlock, Trace, as_block

PERIOD_SOLVED = "solved"
PERIOD_SKIPPED = "skipped"
PERIOD_UNINFORMATIVE = "uninformative"


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Tunables of the diagnostics loop."""

    period_len: int = 100              # samples per analysis period
    ewma_lambda: float = 0.10          # filter weight on the newest estimate
    activity_threshold: float = 0.10   # min evidence fraction to update a variable
    spike_threshold: float = 3e5       # Pa jump per sample that flags a spike
    spike_window: int = 5              # samples discarded on each side of a spike
    verdict_threshold: float = 0.5     # filtered value declaring a fault
    verdict_periods: int = 3           # consecutive gated periods above threshold
    min_retained_fraction: float = 0.25  # else the period is uninformative
    tau: float = 0.5                   # quantile level of the regression
    penalty: PenaltyConfig = PenaltyConfig()

    def __post_init__(self):
        if self.period_len < 1:
            raise ConfigError("period_len must be >= 1")
        if not (0.0 < self.ewma_lambda <= 1.0):
            raise ConfigError("lambda must be in (0, 1]")
        if not (0.0 <= self.activity_threshold <= 1.0):
            raise ConfigError("activity_threshold must be in [0, 1]")
        if self.spike_threshold <= 0.0:
            raise ConfigError("spike_threshold must be positive (inf disables rejection)")
        if self.spike_window < 0:
            raise ConfigError("spike_window must be >= 0")
        if not (0.0 <= self.verdict_threshold <= 1.0):
            raise ConfigError("verdict_threshold must be in [0, 1]")
        if self.verdict_periods < 1:
            raise ConfigError("verdict_periods must be >= 1")
        if not (0.0 <= self.min_retained_fraction <= 1.0):
            raise ConfigError("min_retained_fraction must be in [0, 1]")
        if not (0.0 < self.tau < 1.0):
            raise ConfigError("tau must be in (0, 1)")


@dataclass
class FilterState:
    """EWMA state of the 8N fault variables plus bookkeeping counters."""

    y_open: np.ndarray
    y_closed: np.ndarray
    periods_seen: int
    gated_open: np.ndarray    # per-variable count of gated-in periods
    gated_closed: np.ndarray

    @classmethod
    def initial(cls, n_valves: int) -> "FilterState":
        return cls(
            y_open=np.zeros(n_valves),
            y_closed=np.zeros(n_valves),
            periods_seen=0,
            gated_open=np.zeros(n_valves, dtype=int),
            gated_closed=np.zeros(n_valves, dtype=int),
        )


@dataclass
class PeriodResult:
    """Outcome of one analysis period."""

    index: int
    status: str
    estimates: FaultVariables | None
    gated_open: np.ndarray
    gated_closed: np.ndarray
    retained: int
    filtered_open: np.ndarray   # filter snapshot after this period
    filtered_closed: np.ndarray


@dataclass
class FaultVerdict:
    valve_index: int
    valve: str
    mode: FaultMode
    confidence: float
    period: int


@dataclass
class FaultReport:
    """Everything the diagnostics run produced."""

    n_valves: int
    period_len: int
    config_digest: str
    periods: list
    filtered_open: np.ndarray
    filtered_closed: np.ndarray
    filtered_max_open: np.ndarray
    filtered_max_closed: np.ndarray
    unfiltered_max_open: np.ndarray
    unfiltered_max_closed: np.ndarray
    verdicts: list

    def to_dict(self) -> dict:
        names = valve_names(self.n_valves // 4)
        periods = []
        for p in self.periods:
            if p.estimates is not None:
                eo = [round(float(v), 9) for v in p.estimates.x_open]
                ec = [round(float(v), 9) for v in p.estimates.x_closed]
            else:
                eo, ec = [], []
            gated = [int(g) for g in p.gated_open] + [int(g) for g in p.gated_closed]
            periods.append(
                {
                    "index": p.index,
                    "estimates_open": eo,
                    "estimates_closed": ec,
                    "gated": gated,
                    "status": p.status,
                    "retained": p.retained,
                }
            )
        return {
            "n_valves": self.n_valves,
            "period_len": self.period_len,
            "config_digest": self.config_digest,
            "valves": names,
            "periods": periods,
            "filtered": {
                "open": [float(v) for v in self.filtered_open],
                "closed": [float(v) for v in self.filtered_closed],
            },
            "table": {
                "filtered_max": {
                    "open": [float(v) for v in self.filtered_max_open],
                    "closed": [float(v) for v in self.filtered_max_closed],
                },
                "unfiltered_max": {
                    "open": [float(v) for v in self.unfiltered_max_open],
                    "closed": [float(v) for v in self.unfiltered_max_closed],
                },
            },
            "verdicts": [
                {
                    "valve": v.valve,
                    "mode": "jammed-closed" if v.mode is FaultMode.JAMMED_CLOSED else "jammed-open",
                    "confidence": float(v.confidence),
                    "period": v.period,
                }
                for v in self.verdicts
            ],
        }


def reject_spikes(samples, cfg: DiagnosticsConfig) -> SampleBlock:
    """Drop samples within spike_window of any pressure jump above threshold."""
    block = as_block(samples)
    k = len(block)
    if k <= 1 or not math.isfinite(cfg.spike_threshold):
        return block
    jump = np.maximum(
        np.abs(np.diff(block.p_a)),
        np.maximum(np.abs(np.diff(block.p_s)), np.abs(np.diff(block.p_b))),
    )
    events = np.nonzero(jump > cfg.spike_threshold)[0] + 1  # jump sits at index j
    if events.size == 0:
        return block
    drop = np.zeros(k, dtype=bool)
    w = cfg.spike_window
    for j in events:
        drop[max(0, j - w) : j + w + 1] = True
    return block.take(~drop)


def activity_fractions(
    config: SystemConfig, samples
) -> tuple[np.ndarray, np.ndarray]:
    """Evidence fractions for all valves: (open modes, closed modes)."""
    block = as_block(samples)
    nv = config.n_valves
    n = config.n_per_dfcu
    k = len(block)
    if k == 0:
        return np.zeros(nv), np.zeros(nv)
    pt = config.tank_pressure
    drops = np.stack(
        [
            block.p_s - block.p_a,
            block.p_b - pt,
            block.p_a - pt,
            block.p_s - block.p_b,
        ],
        axis=1,
    )
    dp = np.repeat(drops, n, axis=1)
    nz = dp != 0.0
    bits = block.commanded.astype(bool)
    frac_open = (bits & nz).mean(axis=0)
    frac_closed = (~bits & nz).mean(axis=0)
    return frac_open, frac_closed


def activity_fraction(config: SystemConfig, samples, valve_index: int, mode: FaultMode) -> float:
    """Evidence fraction for one valve in one mode."""
    fo, fc = activity_fractions(config, samples)
    return float(fo[valve_index] if mode is FaultMode.JAMMED_CLOSED else fc[valve_index])


def ewma_update(y_prev: float, u: float, lam: float) -> float:
    """One exponentially weighted moving average step."""
    return lam * u + (1.0 - lam) * y_prev


def _advance_filter(
    state: FilterState,
    estimates: FaultVariables,
    gate_open: np.ndarray,
    gate_closed: np.ndarray,
    lam: float,
) -> FilterState:
    y_open = np.where(
        gate_open, lam * estimates.x_open + (1.0 - lam) * state.y_open, state.y_open
    )
    y_closed = np.where(
        gate_closed, lam * estimates.x_closed + (1.0 - lam) * state.y_closed, state.y_closed
    )
    return FilterState(
        y_open=y_open,
        y_closed=y_closed,
        periods_seen=state.periods_seen + 1,
        gated_open=state.gated_open + gate_open.astype(int),
        gated_closed=state.gated_closed + gate_closed.astype(int),
    )


def diagnose_period(
    config: SystemConfig, samples, cfg: DiagnosticsConfig, state: FilterState
) -> tuple[FaultVariables, FilterState]:
    """Estimate one (already spike-rejected) period and fold it into the filter.

    NumericalFailure from the LP propagates; the caller decides to skip.
    """
    block = as_block(samples)
    system = build_system(config, block, cfg.penalty)
    if system.degenerate:
        # idle period: nothing gates in, counters still advance
        estimates = FaultVariables.zeros(config.n_valves)
        zeros = np.zeros(config.n_valves, dtype=bool)
        return estimates, _advance_filter(state, estimates, zeros, zeros, cfg.ewma_lambda)
    estimates = quantile_regression(system, cfg.tau)
    frac_open, frac_closed = activity_fractions(config, block)
    gate_open = frac_open >= cfg.activity_threshold
    gate_closed = frac_closed >= cfg.activity_threshold
    return estimates, _advance_filter(state, estimates, gate_open, gate_closed, cfg.ewma_lambda)


def run_diagnostics(
    config: SystemConfig, trace: Trace, cfg: DiagnosticsConfig = DiagnosticsConfig()
) -> FaultReport:
    """Segment the trace into periods and run the full diagnostics fold."""
    nv = config.n_valves
    length = cfg.period_len
    n_periods = len(trace) // length
    min_retained = max(1, math.ceil(cfg.min_retained_fraction * length))

    state = FilterState.initial(nv)
    periods: list[PeriodResult] = []
    unf_max_open = np.zeros(nv)
    unf_max_closed = np.zeros(nv)
    flt_max_open = np.zeros(nv)
    flt_max_closed = np.zeros(nv)

    for p in range(n_periods):
        window = trace.window(p * length, (p + 1) * length)
        retained = reject_spikes(window, cfg)
        estimates: FaultVariables | None = None
        gate_open = np.zeros(nv, dtype=bool)
        gate_closed = np.zeros(nv, dtype=bool)

        if len(retained) < min_retained:
            status = PERIOD_UNINFORMATIVE
            state = replace(state, periods_seen=state.periods_seen + 1)
        else:
            system = build_system(config, retained, cfg.penalty)
            if system.degenerate:
                status = PERIOD_UNINFORMATIVE
                state = replace(state, periods_seen=state.periods_seen + 1)
            else:
                try:
                    estimates = quantile_regression(system, cfg.tau)
                except NumericalFailure:
                    status = PERIOD_SKIPPED
                    state = replace(state, periods_seen=state.periods_seen + 1)
                else:
                    status = PERIOD_SOLVED
                    frac_open, frac_closed = activity_fractions(config, retained)
                    gate_open = frac_open >= cfg.activity_threshold
                    gate_closed = frac_closed >= cfg.activity_threshold
                    state = _advance_filter(
                        state, estimates, gate_open, gate_closed, cfg.ewma_lambda
                    )
                    unf_max_open[gate_open] = np.maximum(
                        unf_max_open[gate_open], estimates.x_open[gate_open]
                    )
                    unf_max_closed[gate_closed] = np.maximum(
                        unf_max_closed[gate_closed], estimates.x_closed[gate_closed]
                    )

        flt_max_open = np.maximum(flt_max_open, state.y_open)
        flt_max_closed = np.maximum(flt_max_closed, state.y_closed)
        periods.append(
            PeriodResult(
                index=p,
                status=status,
                estimates=estimates,
                gated_open=gate_open,
                gated_closed=gate_closed,
                retained=len(retained),
                filtered_open=state.y_open.copy(),
                filtered_closed=state.y_closed.copy(),
            )
        )

    verdicts = _collect_verdicts(periods, cfg, nv)
    return FaultReport(
        n_valves=nv,
        period_len=length,
        config_digest=trace.config_digest,
        periods=periods,
        filtered_open=state.y_open,
        filtered_closed=state.y_closed,
        filtered_max_open=flt_max_open,
        filtered_max_closed=flt_max_closed,
        unfiltered_max_open=unf_max_open,
        unfiltered_max_closed=unf_max_closed,
        verdicts=verdicts,
    )


def _collect_verdicts(
    periods: Sequence[PeriodResult], cfg: DiagnosticsConfig, n_valves: int
) -> list:
    """A verdict needs the filtered value above threshold for
    cfg.verdict_periods consecutive gated periods; confidence is the maximum
    filtered value reached over the run."""
    names = valve_names(n_valves // 4)
    verdicts: list[FaultVerdict] = []
    for mode, gated_attr, snap_attr in (
        (FaultMode.JAMMED_CLOSED, "gated_open", "filtered_open"),
        (FaultMode.JAMMED_OPEN, "gated_closed", "filtered_closed"),
    ):
        for v in range(n_valves):
            streak = 0
            confirmed_at = -1
            peak = 0.0
            for p in periods:
                y = float(getattr(p, snap_attr)[v])
                peak = max(peak, y)
                if not getattr(p, gated_attr)[v]:
                    continue
                if y >= cfg.verdict_threshold:
                    streak += 1
                    if streak >= cfg.verdict_periods and confirmed_at < 0:
                        confirmed_at = p.index
                else:
                    streak = 0
            if confirmed_at >= 0:
                verdicts.append(
                    FaultVerdict(
                        valve_index=v,
                        valve=names[v],
                        mode=mode,
                        confidence=peak,
                        period=confirmed_at,
                    )
                )
    verdicts.sort(key=lambda x: (x.period, x.valve_index))
    return verdicts
