"""Named operating scenarios for condition checks and the closeness metric.

Devices are classified by their injection set: fixed sets are loads, discrete
capacitors and PV inverters are what they say, boxes and constant-power-factor
sets count as generic controllable injections. Scenarios:

``paper-peak``   every load draws its stated peak, every capacitor is switched
                 on, every PV inverter exports its full real rating at zero
                 reactive power. Used as the default operating point for the
                 closeness metric.
``bad-case``     per-bus upper injection bounds with loads kept at their data
                 values, capacitors at nameplate, PV at full real rating with
                 no reactive contribution.
``worst-case``   like bad-case but load draws are replaced by zero, enlarging
                 the bounds at every bus.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .netmodel import (Box, CapacitorDiscrete, ConstantPF, Fixed, InjectionSum,
                       InverterPV, Network, injection_box)

BOUND_PRESETS = ("worst-case", "bad-case")
INJECTION_PRESETS = ("paper-peak",)
ALL_PRESETS = BOUND_PRESETS + INJECTION_PRESETS


def _parts(injection):
    return injection.parts if isinstance(injection, InjectionSum) else (injection,)


def _part_bounds(part, zero_loads: bool) -> tuple[float, float]:
    if isinstance(part, Fixed):
        return (0.0, 0.0) if zero_loads else (part.p, part.q)
    if isinstance(part, CapacitorDiscrete):
        return (0.0, part.q_cap)
    if isinstance(part, InverterPV):
        # full real rating, reactive capability not exercised
        return (min(part.p_cap, part.s_cap), 0.0)
    _, p_hi, _, q_hi = injection_box(part)
    return (p_hi, q_hi)


def preset_bounds(net: Network, name: str) -> dict[int, tuple[float, float]]:
    """Per-bus (p_hi, q_hi) overrides for the condition checkers."""
    if name not in BOUND_PRESETS:
        raise ValidationError(f"unknown bound preset {name!r} (have {BOUND_PRESETS})")
    zero_loads = name == "worst-case"
    out = {}
    for b in net.non_root_buses():
        p_hi = q_hi = 0.0
        for part in _parts(b.injection):
            dp, dq = _part_bounds(part, zero_loads)
            p_hi += dp
            q_hi += dq
        out[b.id] = (p_hi, q_hi)
    return out


def _part_peak(part) -> complex:
    if isinstance(part, Fixed):
        return complex(part.p, part.q)
    if isinstance(part, CapacitorDiscrete):
        return complex(0.0, part.q_cap)
    if isinstance(part, InverterPV):
        return complex(min(part.p_cap, part.s_cap), 0.0)
    if isinstance(part, Box):
        if not (math.isfinite(part.p_hi) and math.isfinite(part.q_hi)):
            raise ValidationError("peak preset needs finite upper bounds")
        return complex(part.p_hi, part.q_hi)
    if isinstance(part, ConstantPF):
        if not math.isfinite(part.p_hi):
            raise ValidationError("peak preset needs finite upper bounds")
        return complex(part.p_hi, part.tan_phi * part.p_hi)
    raise ValidationError(f"cannot evaluate peak of {part!r}")


def preset_injections(net: Network, name: str) -> dict[int, complex]:
    """Concrete injection vector for a named operating point."""
    if name not in INJECTION_PRESETS:
        raise ValidationError(f"unknown injection preset {name!r} (have {INJECTION_PRESETS})")
    return {b.id: sum((_part_peak(p) for p in _parts(b.injection)), 0j)
            for b in net.non_root_buses()}


def _sample_part(part, rng: np.random.Generator) -> complex:
    if isinstance(part, Fixed):
        return complex(part.p, part.q)
    if isinstance(part, CapacitorDiscrete):
        return complex(0.0, part.q_cap if rng.random() < 0.5 else 0.0)
    if isinstance(part, InverterPV):
        while True:
            p = rng.uniform(0.0, min(part.p_cap, part.s_cap))
            q = rng.uniform(-part.s_cap, part.s_cap)
            if p * p + q * q <= part.s_cap ** 2:
                return complex(p, q)
    if isinstance(part, Box):
        lo_p, hi_p, lo_q, hi_q = part.p_lo, part.p_hi, part.q_lo, part.q_hi
        if not all(map(math.isfinite, (lo_p, hi_p, lo_q, hi_q))):
            raise ValidationError("cannot sample an unbounded box")
        return complex(rng.uniform(lo_p, hi_p), rng.uniform(lo_q, hi_q))
    if isinstance(part, ConstantPF):
        if not (math.isfinite(part.p_lo) and math.isfinite(part.p_hi)):
            raise ValidationError("cannot sample an unbounded segment")
        p = rng.uniform(part.p_lo, part.p_hi)
        return complex(p, part.tan_phi * p)
    raise ValidationError(f"cannot sample {part!r}")


def sample_injections(net: Network, seed: int = 0) -> dict[int, complex]:
    """One uniform draw from every bus's feasible injection set."""
    rng = np.random.default_rng(seed)
    return {b.id: sum((_sample_part(p, rng) for p in _parts(b.injection)), 0j)
            for b in net.non_root_buses()}
