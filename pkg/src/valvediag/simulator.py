"""Synthetic measurement traces for scripted duty cycles with fault injection.

Each sample is an independent steady-state solve of the hydraulic model for
the *actual* (fault-applied) valve word; the trace records only the
*commanded* word plus noisy pressures, so the estimator never sees the
ground truth. Pressure spikes are superimposed around control transitions
to mimic the transients a real machine shows on fast direction changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ConflictingFaults, SimulationError, ValvediagError
from .model import PressureState, SystemConfig, as_word, steady_state_solve


class FaultMode(Enum):
    JAMMED_OPEN = "open"
    JAMMED_CLOSED = "closed"


@dataclass(frozen=True)
class FaultSpec:
    """Ground-truth fault injected into a simulation."""

    valve_index: int
    mode: FaultMode
    onset_sample: int = 0

    def __post_init__(self):
        if self.valve_index < 0:
            raise ConfigError(f"valve_index must be >= 0, got {self.valve_index}")
        if self.onset_sample < 0:
            raise ConfigError(f"onset_sample must be >= 0, got {self.onset_sample}")


@dataclass(frozen=True)
class ScenarioStep:
    """Hold one commanded valve word for a number of samples.

    The external load ramps linearly from ``force`` to ``force_end`` across
    the step (default: constant), giving the pressures a continuous drift
    like a moving machine instead of flat plateaus.
    """

    duration: int          # samples
    word: tuple            # commanded bits, length 4N
    force: float = 0.0     # external load at the first sample (N)
    force_end: float | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError(f"step duration must be positive, got {self.duration}")
        object.__setattr__(self, "word", tuple(int(b) for b in self.word))
        if self.force_end is None:
            object.__setattr__(self, "force_end", float(self.force))

    def force_at(self, i: int) -> float:
        return self.force + (self.force_end - self.force) * (i / self.duration)


@dataclass
class Scenario:
    """A scripted duty cycle plus the sensor/transient noise model."""

    steps: list
    sample_period: float = 0.01      # s
    noise_sigma: float = 2e4         # Pa, i.i.d. Gaussian on every recorded pressure
    spike_magnitude: float = 5e5     # Pa, initial chamber-pressure spike at transitions
    spike_decay: float = 3.0         # samples, exponential decay constant
    supply_pressure: float = 1e7     # Pa
    seed: int = 0

    def __post_init__(self):
        if not self.steps:
            raise ConfigError("scenario must have at least one step")
        self.steps = [s if isinstance(s, ScenarioStep) else ScenarioStep(**s) for s in self.steps]
        if self.sample_period <= 0.0:
            raise ConfigError("sample_period must be positive")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.spike_magnitude < 0.0 or self.spike_decay <= 0.0:
            raise ConfigError("spike parameters must be spike_magnitude >= 0, spike_decay > 0")
        if self.supply_pressure < 0.0:
            raise ConfigError("supply_pressure must be >= 0")

    @property
    def n_samples(self) -> int:
        return sum(s.duration for s in self.steps)


@dataclass(frozen=True)
class Sample:
    """One timestamped measurement: pressures plus the commanded word."""

    t: float
    pressures: PressureState
    commanded: tuple


@dataclass
class Trace:
    """Uniformly sampled measurement sequence, stored column-wise."""

    t: np.ndarray           # (K,)
    p_s: np.ndarray         # (K,)
    p_a: np.ndarray         # (K,)
    p_b: np.ndarray         # (K,)
    commanded: np.ndarray   # (K, 4N) uint8
    sample_period: float
    config_digest: str = ""

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def n_valves(self) -> int:
        return self.commanded.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(
            t=float(self.t[i]),
            pressures=PressureState(
                p_s=float(self.p_s[i]), p_a=float(self.p_a[i]), p_b=float(self.p_b[i])
            ),
            commanded=tuple(int(b) for b in self.commanded[i]),
        )

    def samples(self) -> list:
        return [self.sample(i) for i in range(len(self))]

    def block(self) -> "SampleBlock":
        return SampleBlock(
            t=self.t,
            p_s=self.p_s,
            p_a=self.p_a,
            p_b=self.p_b,
            commanded=self.commanded,
            indices=np.arange(len(self)),
        )

    def window(self, start: int, stop: int) -> "SampleBlock":
        return SampleBlock(
            t=self.t[start:stop],
            p_s=self.p_s[start:stop],
            p_a=self.p_a[start:stop],
            p_b=self.p_b[start:stop],
            commanded=self.commanded[start:stop],
            indices=np.arange(start, min(stop, len(self))),
        )


@dataclass
class SampleBlock:
    """Column view of a set of samples; ``indices`` are trace positions."""

    t: np.ndarray
    p_s: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray
    commanded: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def n_valves(self) -> int:
        return self.commanded.shape[1]

    def take(self, keep: np.ndarray) -> "SampleBlock":
        return SampleBlock(
            t=self.t[keep],
            p_s=self.p_s[keep],
            p_a=self.p_a[keep],
            p_b=self.p_b[keep],
            commanded=self.commanded[keep],
            indices=self.indices[keep],
        )

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "SampleBlock":
        k = len(samples)
        nv = len(samples[0].commanded) if k else 0
        t = np.array([s.t for s in samples])
        return cls(
            t=t,
            p_s=np.array([s.pressures.p_s for s in samples]),
            p_a=np.array([s.pressures.p_a for s in samples]),
            p_b=np.array([s.pressures.p_b for s in samples]),
            commanded=np.array([s.commanded for s in samples], dtype=np.uint8).reshape(k, nv),
            indices=np.arange(k),
        )


def as_block(samples) -> SampleBlock:
    """Accept a Trace, SampleBlock or a sequence of Samples."""
    if isinstance(samples, SampleBlock):
        return samples
    if isinstance(samples, Trace):
        return samples.block()
    return SampleBlock.from_samples(list(samples))


def apply_fault(commanded, faults: Iterable[FaultSpec], sample_index: int) -> np.ndarray:
    """Actual valve word after forcing each active fault's bit.

    JammedClosed forces the bit to 0, JammedOpen to 1; the commanded word is
    never mutated. Raises ConflictingFaults when two faults target the same
    valve.
    """
    word = np.array(commanded, dtype=np.uint8).copy()
    seen = set()
    for f in faults:
        if f.valve_index >= word.shape[0]:
            raise ConfigError(
                f"valve index out of range: {f.valve_index} (word has {word.shape[0]} valves)"
            )
        if f.valve_index in seen:
            raise ConflictingFaults(f"two faults target valve {f.valve_index}")
        seen.add(f.valve_index)
        if sample_index >= f.onset_sample:
            word[f.valve_index] = 0 if f.mode is FaultMode.JAMMED_CLOSED else 1
    return word


def simulate(config: SystemConfig, scenario: Scenario, faults: Sequence[FaultSpec] = ()) -> Trace:
    """Run the scripted duty cycle and record a measurement trace.

    Deterministic for a given (config, scenario, faults) triple. Steady
    states are solved per actual valve word; solver failures are re-raised
    as SimulationError carrying the offending sample index.
    """
    from .io import config_digest  # deferred: io imports this module

    faults = tuple(faults)
    for f in faults:
        if f.valve_index >= config.n_valves:
            raise ConfigError(
                f"valve index out of range: {f.valve_index} (config has {config.n_valves} valves)"
            )
    k_total = scenario.n_samples
    rng = np.random.default_rng(scenario.seed)
    noise = (
        rng.normal(0.0, scenario.noise_sigma, size=(k_total, 3))
        if scenario.noise_sigma > 0.0
        else np.zeros((k_total, 3))
    )

    t = np.arange(k_total) * scenario.sample_period
    p_s = np.empty(k_total)
    p_a = np.empty(k_total)
    p_b = np.empty(k_total)
    commanded = np.empty((k_total, config.n_valves), dtype=np.uint8)

    decay = math.exp(-1.0 / scenario.spike_decay)
    spike = 0.0
    prev_cmd: bytes | None = None
    k = 0
    for step in scenario.steps:
        cmd = as_word(step.word, config.n_valves)
        cmd_key = cmd.tobytes()
        for i in range(step.duration):
            actual = apply_fault(cmd, faults, k)
            try:
                state = steady_state_solve(
                    config, actual, scenario.supply_pressure, step.force_at(i)
                )
            except ValvediagError as exc:
                raise SimulationError(k, exc) from exc
            if prev_cmd is not None and cmd_key != prev_cmd:
                spike = scenario.spike_magnitude
            prev_cmd = cmd_key
            p_s[k] = max(0.0, scenario.supply_pressure + noise[k, 0])
            p_a[k] = max(0.0, state.pressure.p_a + spike + noise[k, 1])
            p_b[k] = max(0.0, state.pressure.p_b + spike + noise[k, 2])
            commanded[k] = cmd
            spike *= decay
            k += 1

    return Trace(
        t=t,
        p_s=p_s,
        p_a=p_a,
        p_b=p_b,
        commanded=commanded,
        sample_period=scenario.sample_period,
        config_digest=config_digest(config),
    )
