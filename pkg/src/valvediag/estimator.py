"""Sensing-system construction and quantile-regression fault estimation.

For a period of K samples the estimator stacks one row per sample relating
the 8N fault variables (x_open then x_closed, word order) to the observed
flow-balance residual, appends 8N diagonal penalty rows that pull the
variables toward "no error", and solves the box-constrained least-absolute-
deviations problem (quantile regression at tau = 0.5) by linear
programming.

Column conventions (N valves per DFCU):
  x_open  block: +q_PA/A_A, -q_BT/A_B, -q_AT/A_A, +q_PB/A_B
  x_closed block: the complement flows with the opposite signs.

A variable near 1 in x_open means the valve does not deliver its commanded
open flow (jammed closed); near 1 in x_closed means it passes flow while
commanded closed (jammed open).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import EmptyPeriod, NumericalFailure
from .model import PressureState, SystemConfig, valve_names
from .simulator import as_block


@dataclass(frozen=True)
class PenaltyConfig:
    """Weights of the diagonal penalty rows.

    x_open entries are period means of the active column magnitudes (so the
    busiest column gets exactly ``gain``); x_closed entries are
    ``closed_weight * gain`` in the normalized flow units.
    """

    gain: float = 1.0
    closed_weight: float = 1.0


@dataclass
class FaultVariables:
    """Per-valve deviation estimates in [0, 1], word order."""

    x_open: np.ndarray
    x_closed: np.ndarray

    @classmethod
    def zeros(cls, n_valves: int) -> "FaultVariables":
        return cls(x_open=np.zeros(n_valves), x_closed=np.zeros(n_valves))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x_open, self.x_closed])


@dataclass
class SensingSystem:
    """The stacked (K + 8N) x 8N system A x = b for one analysis period."""

    matrix: np.ndarray        # (K + 8N, 8N)
    rhs: np.ndarray           # (K + 8N,)
    row_meta: np.ndarray      # trace sample index per data row, length K
    n_data: int               # K
    scale: float              # flow normalization divisor (m/s units)
    penalties: np.ndarray     # the 8N diagonal entries
    degenerate: bool = False  # no flow activity at all; solution pinned to 0

    @property
    def n_variables(self) -> int:
        return self.matrix.shape[1]


def _flow_matrix(config: SystemConfig, block) -> np.ndarray:
    """Fully open per-valve flows, shape (K, 4N)."""
    n = config.n_per_dfcu
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
    kv = config.kv_array[np.newaxis, :]
    al = config.alpha_array[np.newaxis, :]
    lam = config.dp_laminar
    ad = np.abs(dp)
    turb = ad >= lam
    out = np.empty_like(dp)
    out[turb] = (kv * np.sign(dp) * ad**al)[turb]
    c1 = kv * lam ** (al - 1.0) * (3.0 - al) * 0.5
    c3 = kv * (al - 1.0) * lam ** (al - 3.0) * 0.5
    cubic = ~turb
    out[cubic] = (c1 * dp + c3 * dp**3)[cubic]
    return out


def coefficient_rows(config: SystemConfig, samples) -> tuple[np.ndarray, np.ndarray]:
    """Data rows (K, 8N) and residual rhs (K,) for a set of samples."""
    block = as_block(samples)
    n = config.n_per_dfcu
    full = _flow_matrix(config, block)
    bits = block.commanded.astype(np.float64)
    q = full * bits
    qc = full * (1.0 - bits)
    sign = np.concatenate(
        [
            np.full(n, 1.0 / config.area_a),
            np.full(n, -1.0 / config.area_b),
            np.full(n, -1.0 / config.area_a),
            np.full(n, 1.0 / config.area_b),
        ]
    )
    coef_open = q * sign
    coef_closed = -qc * sign
    rhs = coef_open.sum(axis=1)
    return np.hstack([coef_open, coef_closed]), rhs


def sensing_row(
    config: SystemConfig, pressures: PressureState, commanded
) -> tuple[np.ndarray, float]:
    """One data row of the sensing system and its residual."""
    from .simulator import Sample

    block = as_block([Sample(t=0.0, pressures=pressures, commanded=tuple(commanded))])
    coef, rhs = coefficient_rows(config, block)
    return coef[0], float(rhs[0])


def build_system(
    config: SystemConfig, samples, penalty: PenaltyConfig = PenaltyConfig()
) -> SensingSystem:
    """Stack the data rows of a period and append the penalty block.

    Rows and rhs are normalized by the period's dominant mean column
    magnitude so the x_closed penalty weight 1 is commensurate with the
    data. A period with no flow activity anywhere is flagged degenerate.
    """
    block = as_block(samples)
    k = len(block)
    if k == 0:
        raise EmptyPeriod("no samples in period")
    nv = config.n_valves
    coef, rhs = coefficient_rows(config, block)

    mag = np.abs(coef)
    counts = (mag > 0.0).sum(axis=0)
    sums = mag.sum(axis=0)
    mean_active = np.divide(sums, counts, out=np.zeros(2 * nv), where=counts > 0)

    scale = float(mean_active[:nv].max())
    if scale <= 0.0:
        # no commanded-open activity; fall back to complement columns
        scale = float(mean_active[nv:].max())
    degenerate = scale <= 0.0

    pen = np.empty(2 * nv)
    if degenerate:
        scale = 1.0
        pen[:] = max(1.0, penalty.closed_weight)
    else:
        p_open = mean_active[:nv] / scale
        floor = max(1.0, penalty.closed_weight)
        pen[:nv] = np.where(counts[:nv] > 0, p_open, floor)
        pen[nv:] = penalty.closed_weight
    pen *= penalty.gain

    matrix = np.vstack([coef / scale, np.diag(pen)])
    rhs_full = np.concatenate([rhs / scale, np.zeros(2 * nv)])
    return SensingSystem(
        matrix=matrix,
        rhs=rhs_full,
        row_meta=block.indices.copy(),
        n_data=k,
        scale=scale,
        penalties=pen,
        degenerate=degenerate,
    )


def solve_quantile_lp(
    matrix: np.ndarray, rhs: np.ndarray, tau: float = 0.5, max_iter: int = 0
) -> tuple[np.ndarray, float]:
    """Minimize sum rho_tau(b - Ax) over the box [0, 1]^n; returns (x, objective).

    Raises NumericalFailure when the simplex exceeds its iteration budget.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if not (np.isfinite(matrix).all() and np.isfinite(rhs).all()):
        raise ValueError("sensing system contains non-finite entries")
    x, obj, iters, status = _backend.solve_box_lad(matrix, rhs, tau, max_iter)
    if status != _backend.LP_OPTIMAL:
        raise NumericalFailure(f"LP did not terminate (status={status}, iterations={iters})")
    return x, obj


def quantile_regression(
    system: SensingSystem, tau: float = 0.5, max_iter: int = 0
) -> FaultVariables:
    """Estimate the 8N fault variables for one period."""
    nv = system.n_variables // 2
    if system.degenerate:
        return FaultVariables.zeros(nv)
    x, _ = solve_quantile_lp(system.matrix, system.rhs, tau, max_iter)
    return FaultVariables(x_open=x[:nv], x_closed=x[nv:])


def dump_system_csv(system: SensingSystem, path) -> None:
    """Write a sensing system to CSV for inspection."""
    nv = system.n_variables // 2
    names = valve_names(nv // 4)
    header = (
        ["row", "kind", "sample"]
        + [f"xo_{v}" for v in names]
        + [f"xc_{v}" for v in names]
        + ["rhs"]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(system.matrix.shape[0]):
            kind = "data" if i < system.n_data else "penalty"
            meta = str(int(system.row_meta[i])) if i < system.n_data else ""
            cells = [str(i), kind, meta]
            cells += [f"{v:.9g}" for v in system.matrix[i]]
            cells.append(f"{system.rhs[i]:.9g}")
            fh.write(",".join(cells) + "\n")
