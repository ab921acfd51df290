"""Steady-state hydraulic model of a four-DFCU cylinder actuator.

The actuator has four digital flow control units (DFCUs), each a bank of N
parallel on/off valves, on the paths pump->A (PA), B->tank (BT), A->tank
(AT) and pump->B (PB). Valve state words and all per-valve arrays use the
fixed block order PA, BT, AT, PB.

Conventions: SI units throughout (Pa, m^3/s, m^2, N, m/s); positive piston
velocity extends chamber A.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from . import _backend
from .errors import ConfigError, NoConvergence, OutOfRange, SingularSystem

DFCU_NAMES = ("PA", "BT", "AT", "PB")

#: below this |dp| the orifice law is blended into an odd cubic (bounded slope)
DEFAULT_DP_LAMINAR = 1e3


@dataclass(frozen=True)
class ValveParams:
    """One on/off valve: Q = kv * SP(dp)^alpha when open."""

    kv: float      # flow coefficient, m^3/s/Pa^alpha
    alpha: float   # flow exponent, dimensionless

    def __post_init__(self):
        if not (self.kv > 0.0 and math.isfinite(self.kv)):
            raise ConfigError(f"kv must be positive, got {self.kv}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class SystemConfig:
    """Geometry and valve parameters of the actuator."""

    dfcus: tuple          # four tuples of ValveParams, order PA, BT, AT, PB
    area_a: float         # piston area, chamber A (m^2)
    area_b: float         # piston area, chamber B (m^2)
    tank_pressure: float  # p_T (Pa)
    dp_laminar: float = DEFAULT_DP_LAMINAR

    def __post_init__(self):
        if len(self.dfcus) != 4:
            raise ConfigError("dfcus must hold exactly four valve lists (PA, BT, AT, PB)")
        counts = {len(d) for d in self.dfcus}
        if len(counts) != 1 or min(counts) < 1:
            raise ConfigError("all four DFCUs must have the same valve count N >= 1")
        object.__setattr__(self, "dfcus", tuple(tuple(d) for d in self.dfcus))
        if not (self.area_a > 0.0 and self.area_b > 0.0):
            raise ConfigError("piston areas must be positive")
        if self.tank_pressure < 0.0:
            raise ConfigError("tank pressure must be >= 0")
        if self.dp_laminar <= 0.0:
            raise ConfigError("dp_laminar must be positive")

    @property
    def n_per_dfcu(self) -> int:
        return len(self.dfcus[0])

    @property
    def n_valves(self) -> int:
        return 4 * self.n_per_dfcu

    @cached_property
    def kv_array(self) -> np.ndarray:
        return np.array([v.kv for d in self.dfcus for v in d], dtype=np.float64)

    @cached_property
    def alpha_array(self) -> np.ndarray:
        return np.array([v.alpha for d in self.dfcus for v in d], dtype=np.float64)


def default_config(
    n: int = 5,
    kv_base: float = 1e-8,
    alpha: float = 0.5,
    area_a: float = 2e-3,
    area_b: float = 1e-3,
    tank_pressure: float = 0.0,
) -> SystemConfig:
    """Config with power-of-two valve capacities on every DFCU."""
    bank = tuple(ValveParams(kv=kv_base * 2.0**i, alpha=alpha) for i in range(n))
    return SystemConfig(
        dfcus=(bank, bank, bank, bank),
        area_a=area_a,
        area_b=area_b,
        tank_pressure=tank_pressure,
    )


def valve_names(n_per_dfcu: int = 5) -> list:
    """Valve names in word order: PA1..PAn, BT1..BTn, AT1..ATn, PB1..PBn."""
    return [f"{d}{i + 1}" for d in DFCU_NAMES for i in range(n_per_dfcu)]


def valve_index(name: str, n_per_dfcu: int = 5) -> int:
    """Word index of a valve name such as 'AT3'."""
    name = name.strip().upper()
    dfcu, num = name[:2], name[2:]
    if dfcu not in DFCU_NAMES or not num.isdigit():
        raise ConfigError(f"bad valve name {name!r}; expected e.g. 'AT3'")
    i = int(num)
    if not (1 <= i <= n_per_dfcu):
        raise ConfigError(f"valve index out of range: {name!r} (N={n_per_dfcu})")
    return DFCU_NAMES.index(dfcu) * n_per_dfcu + (i - 1)


def as_word(bits: Iterable[int], n_valves: int) -> np.ndarray:
    """Validate and normalize a valve state word to a uint8 array."""
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
    if arr.ndim != 1 or arr.shape[0] != n_valves:
        raise ConfigError(f"valve state word must have length {n_valves}, got {arr.shape}")
    if not np.isin(arr, (0, 1, False, True)).all():
        raise ConfigError("valve state word entries must be 0/1")
    return arr.astype(np.uint8)


@dataclass(frozen=True)
class PressureState:
    """Supply and chamber pressures (Pa)."""

    p_s: float
    p_a: float
    p_b: float

    def __post_init__(self):
        for name in ("p_s", "p_a", "p_b"):
            p = getattr(self, name)
            if not math.isfinite(p) or p < 0.0:
                raise ConfigError(f"{name} must be finite and >= 0, got {p}")


@dataclass(frozen=True)
class SteadyState:
    """Solution of the balance equations for one valve state word."""

    pressure: PressureState
    velocity: float  # m/s, positive extends chamber A
    force: float     # N, external load
    iterations: int = 0


def signed_power(x: float, alpha: float) -> float:
    """sign(x) * |x|^alpha; odd and monotone increasing in x."""
    return math.copysign(abs(x) ** alpha, x)


def _flow(kv: float, alpha: float, dp: float, dp_laminar: float) -> float:
    if dp >= dp_laminar or dp <= -dp_laminar:
        return kv * signed_power(dp, alpha)
    c1 = kv * dp_laminar ** (alpha - 1.0) * (3.0 - alpha) * 0.5
    c3 = kv * (alpha - 1.0) * dp_laminar ** (alpha - 3.0) * 0.5
    return c1 * dp + c3 * dp * dp * dp


def valve_flow(
    u: int, params: ValveParams, dp: float, dp_laminar: float = DEFAULT_DP_LAMINAR
) -> float:
    """Flow through one valve given its commanded bit; 0 when commanded closed."""
    if not u:
        return 0.0
    return _flow(params.kv, params.alpha, dp, dp_laminar)


def complement_flow(
    u: int, params: ValveParams, dp: float, dp_laminar: float = DEFAULT_DP_LAMINAR
) -> float:
    """Flow the valve would pass if it were open while commanded closed.

    valve_flow(u) + complement_flow(u) equals the fully open flow for any u.
    """
    if u:
        return 0.0
    return _flow(params.kv, params.alpha, dp, dp_laminar)


def dfcu_pressure_drops(pressures: PressureState, tank_pressure: float) -> tuple:
    """Pressure differences across the four DFCU paths (PA, BT, AT, PB)."""
    return (
        pressures.p_s - pressures.p_a,
        pressures.p_b - tank_pressure,
        pressures.p_a - tank_pressure,
        pressures.p_s - pressures.p_b,
    )


def valve_flows(
    config: SystemConfig, word, pressures: PressureState
) -> tuple[np.ndarray, np.ndarray]:
    """Per-valve commanded flows q and complement flows q^c at the given pressures.

    Both arrays have length 4N in word order; exactly one of q[i], qc[i] is
    nonzero for each valve with a nonzero pressure difference.
    """
    bits = as_word(word, config.n_valves)
    n = config.n_per_dfcu
    drops = dfcu_pressure_drops(pressures, config.tank_pressure)
    full = np.empty(config.n_valves)
    kv = config.kv_array
    al = config.alpha_array
    lam = config.dp_laminar
    for d in range(4):
        dp = drops[d]
        for i in range(d * n, (d + 1) * n):
            full[i] = _flow(kv[i], al[i], dp, lam)
    q = np.where(bits == 1, full, 0.0)
    qc = np.where(bits == 0, full, 0.0)
    return q, qc


@dataclass(frozen=True)
class DfcuFlows:
    """Aggregate flows per DFCU (m^3/s), word order."""

    q_pa: float
    q_bt: float
    q_at: float
    q_pb: float


def dfcu_flows(config: SystemConfig, word, pressures: PressureState) -> DfcuFlows:
    """Sum of commanded per-valve flows on each of the four DFCU paths."""
    q, _ = valve_flows(config, word, pressures)
    n = config.n_per_dfcu
    return DfcuFlows(
        q_pa=float(q[0:n].sum()),
        q_bt=float(q[n : 2 * n].sum()),
        q_at=float(q[2 * n : 3 * n].sum()),
        q_pb=float(q[3 * n :].sum()),
    )


def balance_residual(config: SystemConfig, word, pressures: PressureState) -> float:
    """Flow-balance residual (Q_PA - Q_AT)/A_A + (Q_PB - Q_BT)/A_B.

    Zero for a healthy system in steady state; a jammed valve leaves the
    signature of its missing or extra flow.
    """
    f = dfcu_flows(config, word, pressures)
    return (f.q_pa - f.q_at) / config.area_a + (f.q_pb - f.q_bt) / config.area_b


def steady_state_solve(
    config: SystemConfig,
    word,
    p_s: float,
    force: float,
    max_iters: int = 100,
    tol: float = 1e-11,
    p_max: float | None = None,
) -> SteadyState:
    """Solve the balance equations for piston velocity and chamber pressures.

    Raises SingularSystem when no valve is open anywhere (chamber pressures
    indeterminate), NoConvergence when the damped Newton iteration exhausts
    max_iters, and OutOfRange when a chamber pressure lands outside
    [0, p_max] (default p_max = 3 * max(p_s, p_T)).
    """
    bits = as_word(word, config.n_valves)
    if p_max is None:
        p_max = 3.0 * max(p_s, config.tank_pressure, 1.0)
    v, pa, pb, iters, status = _backend.solve_steady_state(
        config.kv_array,
        config.alpha_array,
        bits,
        config.area_a,
        config.area_b,
        float(p_s),
        config.tank_pressure,
        float(force),
        config.dp_laminar,
        tol,
        int(max_iters),
    )
    if status == _backend.STEADY_SINGULAR:
        raise SingularSystem("no open valve connects a chamber; pressures indeterminate")
    if status == _backend.STEADY_MAXITER:
        raise NoConvergence(f"Newton iteration did not converge in {max_iters} iterations")
    if not (0.0 <= pa <= p_max and 0.0 <= pb <= p_max):
        raise OutOfRange(f"solution pressures p_a={pa:.6g}, p_b={pb:.6g} outside [0, {p_max:.6g}]")
    return SteadyState(
        pressure=PressureState(p_s=float(p_s), p_a=pa, p_b=pb),
        velocity=v,
        force=float(force),
        iterations=iters,
    )
