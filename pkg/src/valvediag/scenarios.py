"""Built-in duty cycles for simulation and testing.

``standard_duty`` emulates a controller working through varied control
states: extend and retract sub-steps alternate four times per second, each
sub-step opening a randomly drawn valve subset on the inflow bank paired
with an outflow subset of commensurate power-of-two capacity (so chamber
pressures stay well inside (p_T, p_S)). The external load ramps
continuously, which makes every retained sample a distinct pressure state.

Two knobs support fault experiments:

* ``focus_valve`` keeps one valve in every same-bank subset while its two
  companions sets per second are disjoint, so the valve is commanded open
  at least 50 samples of every period and no sibling shadows it.
* ``chatter_valve`` overrides one valve's commanded bit with a random
  sequence, the classic construction for exercising a jammed-open valve
  that is physically stuck while its command toggles.

A short lead-in keeps control transitions away from period boundaries
(spike rejection works within periods).
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .simulator import Scenario, ScenarioStep

#: kv ratio windows (inflow sum / outflow sum) keeping pressures mid-range
#: for |F|/A_A up to ~1 MPa at 10 MPa supply with A_A/A_B = 2
_EXTEND_RATIO = (1.0, 1.9)   # sum kv PA / sum kv BT
_RETRACT_RATIO = (0.5, 1.6)  # sum kv PB / sum kv AT


def _all_subsets(n: int) -> list:
    """Nonempty subsets of range(n) with their power-of-two kv sums."""
    out = []
    for size in range(1, n + 1):
        for combo in combinations(range(n), size):
            out.append((frozenset(combo), sum(2**i for i in combo)))
    return out


def _partner(rng, subsets, s_in: float, lo: float, hi: float):
    """Random outflow subset whose kv sum lands the ratio in [lo, hi]."""
    valid = [fs for fs, s in subsets if lo <= s_in / s <= hi]
    if not valid:
        return None
    return valid[rng.integers(0, len(valid))]


def _draw_bank_pair(rng, subsets, ratio, pinned=None, companions=None):
    """(inflow subset, outflow subset) honoring the capacity ratio window.

    ``pinned``/``companions`` restrict the inflow side for focus sub-steps.
    """
    lo, hi = ratio
    for _ in range(200):
        if pinned is None:
            fs, s_in = subsets[rng.integers(0, len(subsets))]
        else:
            # always at least one companion: the bank keeps a flow path even
            # if the pinned valve is jammed closed
            pool = sorted(companions)
            k = int(rng.integers(1, min(2, len(pool)) + 1))
            extra = rng.choice(pool, size=k, replace=False)
            fs = frozenset({pinned} | {int(e) for e in extra})
            s_in = sum(2**i for i in fs)
        out = _partner(rng, subsets, s_in, lo, hi)
        if out is not None:
            return fs, out
    raise RuntimeError("no feasible valve subset pair found")


def _force_profile(g: int, amplitude: float) -> float:
    """Smooth deterministic load trajectory sampled at sub-step boundaries."""
    return amplitude * (
        math.sin(2.0 * math.pi * g / 9.7) + 0.35 * math.sin(2.0 * math.pi * g / 3.33 + 1.0)
    )


def standard_duty(
    seconds: int = 60,
    n: int = 5,
    force_amplitude: float = 1500.0,
    noise_sigma: float = 2e4,
    spike_magnitude: float = 5e5,
    spike_decay: float = 3.0,
    supply_pressure: float = 1e7,
    sample_period: float = 0.01,
    seed: int = 0,
    focus_valve: int | None = None,
    chatter_valve: int | None = None,
    pattern_seed: int = 104729,
    substep_len: int = 25,
    lead_in: int = 12,
) -> Scenario:
    """Mixed extend/retract duty cycle with randomized capacity-paired subsets."""
    rng = np.random.default_rng(pattern_seed)
    subsets = _all_subsets(n)

    focus_bank = focus_valve // n if focus_valve is not None else None
    focus_pos = focus_valve % n if focus_valve is not None else None
    # bank index -> (phase parity, inflow side?) ; banks: 0 PA, 1 BT, 2 AT, 3 PB
    # extend opens PA (in) + BT (out); retract opens AT (out of A) + PB (in to B)

    steps = []
    for j in range(seconds):
        # companion sets for the focus valve's two same-phase sub-steps:
        # disjoint, not both empty, so every sibling is absent at least once
        r1 = r2 = None
        if focus_pos is not None:
            # nonempty so a jam on the focus valve never strands a chamber
            siblings = [i for i in range(n) if i != focus_pos]
            k1 = int(rng.integers(1, 3))
            r1 = {int(x) for x in rng.choice(siblings, size=k1, replace=False)}
            rest = sorted(set(siblings) - r1)
            k2 = int(rng.integers(1, min(2, len(rest)) + 1))
            r2 = {int(x) for x in rng.choice(rest, size=k2, replace=False)}

        for k in range(4):
            g = 4 * j + k
            extend = k % 2 == 0
            same_phase_idx = k // 2  # 0 for the first extend/retract of the second
            bits = [0] * (4 * n)
            pinned = companions = None
            if focus_pos is not None:
                in_extend_banks = focus_bank in (0, 1)
                if extend and in_extend_banks or (not extend and focus_bank in (2, 3)):
                    pinned = focus_pos
                    companions = r1 if same_phase_idx == 0 else r2

            if extend:
                # inflow PA, outflow BT; pin applies to whichever bank holds the focus
                if pinned is not None and focus_bank == 1:
                    # focus on the outflow bank: draw it pinned, partner on PA
                    bt, pa = _draw_bank_pair(
                        rng, subsets, (1.0 / _EXTEND_RATIO[1], 1.0 / _EXTEND_RATIO[0]),
                        pinned, companions,
                    )
                else:
                    pa, bt = _draw_bank_pair(rng, subsets, _EXTEND_RATIO, pinned, companions)
                for i in pa:
                    bits[i] = 1
                for i in bt:
                    bits[n + i] = 1
            else:
                if pinned is not None and focus_bank == 2:
                    at, pb = _draw_bank_pair(
                        rng, subsets, (1.0 / _RETRACT_RATIO[1], 1.0 / _RETRACT_RATIO[0]),
                        pinned, companions,
                    )
                else:
                    pb, at = _draw_bank_pair(rng, subsets, _RETRACT_RATIO, pinned, companions)
                for i in at:
                    bits[2 * n + i] = 1
                for i in pb:
                    bits[3 * n + i] = 1

            if chatter_valve is not None:
                bits[chatter_valve] = int(rng.integers(0, 2))

            steps.append(
                ScenarioStep(
                    duration=substep_len + (lead_in if g == 0 else 0),
                    word=tuple(bits),
                    force=_force_profile(g, force_amplitude),
                    force_end=_force_profile(g + 1, force_amplitude),
                )
            )
    return Scenario(
        steps=steps,
        sample_period=sample_period,
        noise_sigma=noise_sigma,
        spike_magnitude=spike_magnitude,
        spike_decay=spike_decay,
        supply_pressure=supply_pressure,
        seed=seed,
    )


def single_state(
    word,
    duration: int = 100,
    force: float = 0.0,
    noise_sigma: float = 0.0,
    spike_magnitude: float = 0.0,
    supply_pressure: float = 1e7,
    seed: int = 0,
) -> Scenario:
    """One constant valve word; handy for tests and quick experiments."""
    return Scenario(
        steps=[ScenarioStep(duration=duration, word=tuple(word), force=force)],
        noise_sigma=noise_sigma,
        spike_magnitude=spike_magnitude,
        supply_pressure=supply_pressure,
        seed=seed,
    )
