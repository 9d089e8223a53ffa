"""Lossless linear branch-flow quantities and a-priori exactness checkers.

The linear model replaces each line flow by the total injection of the subtree
hanging off the line and makes squared voltage affine in the injections. Both
quantities upper-bound their exact counterparts on any feasible relaxation
point, which is what makes the checkers in this module sound.

Injection vectors are mappings ``bus id -> complex`` over non-substation buses.
Per-line quantities are keyed by the line's child bus (unique on a tree).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import PowerFlowError, ValidationError
from .netmodel import Network, injection_box

INF = math.inf


def _check_injection_keys(net: Network, s: Mapping[int, complex]):
    expected = {b.id for b in net.non_root_buses()}
    if set(s.keys()) != expected:
        missing = sorted(expected - set(s.keys()))
        extra = sorted(set(s.keys()) - expected)
        raise ValidationError(
            f"injection vector mismatch (missing buses {missing}, unknown {extra})")


def subtree_injection(net: Network, s: Mapping[int, complex]) -> dict[int, complex]:
    """Per-line subtree injection sums, one bottom-up pass, O(n).

    Returns ``{child bus id: sum of s over the subtree rooted at the child}``.
    """
    _check_injection_keys(net, s)
    acc = {i: complex(s[i]) for i in s}
    acc[net.root] = 0j
    for b in reversed(net.topological_order()):
        if b != net.root:
            acc[net.parent_of(b)] += acc[b]
    return {ln.child: acc[ln.child] for ln in net.lines}


def linear_voltage(net: Network, s: Mapping[int, complex]) -> dict[int, float]:
    """Affine squared-voltage profile under the lossless linear model.

    ``w[root] == net.v0``; along every line, the child value drops by
    ``2*Re(conj(z) * S_subtree)`` from the parent.
    """
    s_hat = subtree_injection(net, s)
    w = {net.root: net.v0}
    for b in net.topological_order():
        if b == net.root:
            continue
        ln = net.line_to_parent(b)
        sh = s_hat[b]
        w[b] = w[ln.parent] + 2.0 * (ln.r * sh.real + ln.x * sh.imag)
    return w


@dataclass(frozen=True)
class LinearFlowSummary:
    s_hat: dict[int, complex]     # keyed by line child
    w_hat: dict[int, float]       # keyed by bus, includes the root


def linear_flow(net: Network, s: Mapping[int, complex]) -> LinearFlowSummary:
    return LinearFlowSummary(subtree_injection(net, s), linear_voltage(net, s))


# ---------------------------------------------------------------------------
# a-coefficients and condition C1

def upper_bounds(net: Network,
                 bounds: Mapping[int, tuple[float, float]] | None = None
                 ) -> dict[int, tuple[float, float]]:
    """Per-bus (p_hi, q_hi) used by the checkers; default from injection_box."""
    out = {}
    for b in net.non_root_buses():
        if bounds is not None and b.id in bounds:
            out[b.id] = bounds[b.id]
        else:
            _, p_hi, _, q_hi = injection_box(b.injection)
            out[b.id] = (p_hi, q_hi)
    return out


@dataclass(frozen=True)
class ACoefficients:
    """Path-accumulated voltage-drop factors per bus.

    a1/a4 are products of ``1 - 2*r*P+/v_min`` (resp. x, Q+) over the path to
    the root; a2/a3 the matching sums. b_lo = a2/a1 and b_hi = a4/a3 bound the
    admissible r/x ratio of any line whose parent is that bus (b_hi = +inf when
    a3 = 0, b_lo = +inf when a1 <= 0 so that the interval test fails).
    """
    a1: dict[int, float]
    a2: dict[int, float]
    a3: dict[int, float]
    a4: dict[int, float]
    b_lo: dict[int, float]
    b_hi: dict[int, float]


def a_coefficients(net: Network,
                   bounds: Mapping[int, tuple[float, float]] | None = None
                   ) -> ACoefficients:
    """One root-to-leaf pass computing the C1 coefficient quadruple per bus.

    Raises if any bus has an infinite upper injection bound (the checkers are
    then vacuous) or a vanishing voltage floor.
    """
    ub = upper_bounds(net, bounds)
    for i, (p_hi, q_hi) in ub.items():
        if not (math.isfinite(p_hi) and math.isfinite(q_hi)):
            raise ValidationError(
                f"bus {i}: infinite upper injection bound; C1 is not checkable")

    p_bar = {i: complex(p, q) for i, (p, q) in ub.items()}
    s_hat = subtree_injection(net, p_bar)

    a1 = {net.root: 1.0}
    a2 = {net.root: 0.0}
    a3 = {net.root: 0.0}
    a4 = {net.root: 1.0}
    for b in net.topological_order():
        if b == net.root:
            continue
        ln = net.line_to_parent(b)
        v_floor = net.bus(b).v_min
        p_plus = max(s_hat[b].real, 0.0)
        q_plus = max(s_hat[b].imag, 0.0)
        j = ln.parent
        a1[b] = a1[j] * (1.0 - 2.0 * ln.r * p_plus / v_floor)
        a2[b] = a2[j] + 2.0 * ln.r * q_plus / v_floor
        a3[b] = a3[j] + 2.0 * ln.x * p_plus / v_floor
        a4[b] = a4[j] * (1.0 - 2.0 * ln.x * q_plus / v_floor)

    b_lo = {}
    b_hi = {}
    for i in a1:
        b_lo[i] = a2[i] / a1[i] if a1[i] > 0.0 else INF
        b_hi[i] = a4[i] / a3[i] if a3[i] > 0.0 else INF
    return ACoefficients(a1, a2, a3, a4, b_lo, b_hi)


@dataclass(frozen=True)
class LineC1Record:
    child: int
    parent: int
    margin1: float        # a1_parent * r - a2_parent * x, must be > 0
    margin2: float        # a4_parent * x - a3_parent * r, must be > 0
    holds: bool
    rx: float             # r/x, inf when x == 0
    b_lo: float           # parent-bus interval
    b_hi: float


@dataclass(frozen=True)
class C1Report:
    lines: tuple[LineC1Record, ...]
    holds: bool
    coefficients: ACoefficients = field(compare=False)


# relative slack accepted when deciding strict positivity of C1 margins
STRICT_TOL = 1e-12


def check_c1(net: Network,
             bounds: Mapping[int, tuple[float, float]] | None = None) -> C1Report:
    """Per-line strict-inequality margins of condition C1 and the verdict.

    A margin counts as strictly positive when it exceeds ``STRICT_TOL`` times
    the magnitude of the terms forming it; reported margins are raw.
    """
    coef = a_coefficients(net, bounds)
    records = []
    holds = True
    for ln in net.lines:
        j = ln.parent
        t1a, t1b = coef.a1[j] * ln.r, coef.a2[j] * ln.x
        t2a, t2b = coef.a4[j] * ln.x, coef.a3[j] * ln.r
        m1 = t1a - t1b
        m2 = t2a - t2b
        ok = (m1 > STRICT_TOL * max(abs(t1a), abs(t1b), 1e-300)
              and m2 > STRICT_TOL * max(abs(t2a), abs(t2b), 1e-300))
        holds &= ok
        records.append(LineC1Record(
            child=ln.child, parent=j, margin1=m1, margin2=m2, holds=ok,
            rx=(ln.r / ln.x if ln.x > 0.0 else INF),
            b_lo=coef.b_lo[j], b_hi=coef.b_hi[j]))
    return C1Report(tuple(records), holds, coef)


def minimum_interval(coef: ACoefficients) -> tuple[float, float]:
    """Intersection over all buses of the per-bus (b_lo, b_hi) intervals."""
    return (max(coef.b_lo.values()), min(coef.b_hi.values()))


@dataclass(frozen=True)
class RxRangeReport:
    lo: float
    hi: float
    undefined_lines: tuple[tuple[int, int], ...]   # x == 0 < r: ratio undefined


def rx_range(net: Network) -> RxRangeReport:
    """Min and max of r/x over lines; lines with x = 0 are reported, not skipped silently."""
    ratios = []
    undefined = []
    for ln in net.lines:
        if ln.x > 0.0:
            ratios.append(ln.r / ln.x)
        else:
            undefined.append((ln.child, ln.parent))
    if not ratios:
        raise ValidationError("no line has x > 0; r/x range undefined")
    return RxRangeReport(min(ratios), max(ratios), tuple(undefined))


# ---------------------------------------------------------------------------
# well-constrained lines

@dataclass(frozen=True)
class SemicircleVerdict:
    child: int
    parent: int
    angles: tuple[float, ...]
    ok: bool
    alpha: float | None          # left endpoint of the witness semicircle [alpha, alpha+pi]
    zero_margin: float           # distance of angle 0 from the semicircle boundary


def _wrap(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t <= 0.0:
        t += 2.0 * math.pi
    return t - math.pi


# angle 0 must sit strictly inside the witness semicircle by at least this much
INTERIOR_TOL = 1e-9


def _semicircle_fit(angles: list[float]) -> tuple[bool, float | None, float]:
    """Closed semicircle covering all angles with 0 strictly inside.

    Returns (ok, left endpoint, margin of 0 from the boundary). A covering
    semicircle exists iff the largest circular gap between consecutive angles
    is >= pi; among valid placements the one keeping 0 farthest from the
    boundary is returned.
    """
    if not angles:
        return True, -math.pi / 2.0, math.pi / 2.0
    pts = sorted(_wrap(a) for a in angles)
    k = len(pts)
    best_margin = -INF
    best_center = None
    for idx in range(k):
        lo = pts[idx]
        hi = pts[(idx + 1) % k] + (2.0 * math.pi if idx == k - 1 else 0.0)
        gap = hi - lo
        if gap < math.pi - 1e-15:
            continue
        # all angles lie on the arc [hi - 2pi, lo]; valid semicircle centers
        # form the arc of length gap - pi starting at lo - pi/2
        c_lo = lo - math.pi / 2.0
        span = max(gap - math.pi, 0.0)
        # closest point of the center arc to angle 0, circularly
        u0 = (-c_lo) % (2.0 * math.pi)
        if u0 <= span:
            center = 0.0
        else:
            center = min((c_lo, c_lo + span), key=lambda c: abs(_wrap(c)))
        margin = math.pi / 2.0 - abs(_wrap(center))
        if margin > best_margin:
            best_margin = margin
            best_center = center
    if best_center is None:
        return False, None, -INF
    if best_margin < INTERIOR_TOL:
        return False, None, best_margin
    return True, _wrap(best_center - math.pi / 2.0), best_margin


def check_well_constrained(net: Network) -> dict[tuple[int, int], SemicircleVerdict]:
    """Per-line test that the finite injection bounds of its two end buses map
    to angles fitting in a closed semicircle containing 0 strictly inside.

    Each finite bound of the child (resp. parent) bus contributes one angle at
    an offset of -theta (resp. +theta) from the axis, theta = atan(x/r);
    infinite bounds contribute nothing, and the substation has none.
    """
    out = {}
    for ln in net.lines:
        theta = math.atan2(ln.x, ln.r)
        angles = []

        def add(bus_id: int, sign: float):
            if bus_id == net.root:
                return
            p_lo, p_hi, q_lo, q_hi = injection_box(net.bus(bus_id).injection)
            base = sign * theta
            if math.isfinite(p_hi):
                angles.append(base)
            if math.isfinite(q_hi):
                angles.append(base - sign * math.pi / 2.0)
            if math.isfinite(p_lo):
                angles.append(base + sign * math.pi)
            if math.isfinite(q_lo):
                angles.append(base + sign * math.pi / 2.0)

        add(ln.child, -1.0)
        add(ln.parent, +1.0)
        ok, alpha, margin = _semicircle_fit(angles)
        out[ln.key] = SemicircleVerdict(ln.child, ln.parent,
                                        tuple(_wrap(a) for a in angles),
                                        ok, alpha, margin)
    return out


# ---------------------------------------------------------------------------
# restricted sufficient conditions (ratio-monotone networks, no-DG, ...)

@dataclass(frozen=True)
class PropConditionReport:
    load_over_satisfaction: bool
    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    cond_iv: bool
    margins_ii: dict[tuple[int, int], float] = field(compare=False, default_factory=dict)
    margins_iii: dict[tuple[int, int], float] = field(compare=False, default_factory=dict)
    margins_iv: dict[tuple[int, int], float] = field(compare=False, default_factory=dict)


RATIO_TOL = 1e-9


def check_proposition_conditions(net: Network,
                                 bounds: Mapping[int, tuple[float, float]] | None = None
                                 ) -> PropConditionReport:
    """Verdicts for the classical special-case exactness conditions.

    (i) every subtree bound is non-positive (no reverse flow possible);
    (ii) uniform r/x ratio plus a positive voltage-drop margin per line;
    (iii) ratios non-increasing toward the root with no real reverse flow;
    (iv) mirror of (iii) for reactive flow. Load over-satisfaction is simply
    the absence of lower injection bounds.
    """
    ub = upper_bounds(net, bounds)
    p_bar = {i: complex(p, q) for i, (p, q) in ub.items()}
    s_hat = subtree_injection(net, p_bar)

    over_satisfied = all(
        injection_box(b.injection)[0] == -INF and injection_box(b.injection)[2] == -INF
        for b in net.non_root_buses())

    cond_i = all(s_hat[ln.child].real <= 0.0 and s_hat[ln.child].imag <= 0.0
                 for ln in net.lines)

    ratios = {}
    for ln in net.lines:
        if ln.x <= 0.0:
            ratios = None
            break
        ratios[ln.child] = ln.r / ln.x

    def ratio_rel(cmp: Callable[[float, float], bool]) -> bool:
        if ratios is None:
            return False
        for ln in net.lines:
            up = net.parent_of(ln.parent)
            if up is None:
                continue
            r_leafward = ratios[ln.child]
            r_rootward = ratios[ln.parent]
            if not cmp(r_leafward, r_rootward):
                return False
        return True

    eq = ratio_rel(lambda a, b: abs(a - b) <= RATIO_TOL * max(abs(a), abs(b), 1.0))
    geq = ratio_rel(lambda a, b: a >= b - RATIO_TOL * max(abs(a), abs(b), 1.0))
    leq = ratio_rel(lambda a, b: a <= b + RATIO_TOL * max(abs(a), abs(b), 1.0))

    margins_ii = {}
    margins_iii = {}
    margins_iv = {}
    for ln in net.lines:
        v_floor = net.bus(ln.child).v_min
        p_plus = max(s_hat[ln.child].real, 0.0)
        q_plus = max(s_hat[ln.child].imag, 0.0)
        margins_ii[ln.key] = v_floor - 2.0 * ln.r * p_plus - 2.0 * ln.x * q_plus
        margins_iii[ln.key] = v_floor - 2.0 * ln.x * q_plus
        margins_iv[ln.key] = v_floor - 2.0 * ln.r * p_plus

    cond_ii = eq and all(m > 0.0 for m in margins_ii.values())
    no_rev_p = all(s_hat[ln.child].real <= 0.0 for ln in net.lines)
    no_rev_q = all(s_hat[ln.child].imag <= 0.0 for ln in net.lines)
    cond_iii = geq and no_rev_p and all(m > 0.0 for m in margins_iii.values())
    cond_iv = leq and no_rev_q and all(m > 0.0 for m in margins_iv.values())

    return PropConditionReport(over_satisfied, cond_i, cond_ii, cond_iii, cond_iv,
                               margins_ii, margins_iii, margins_iv)


# ---------------------------------------------------------------------------
# aggregate report

@dataclass(frozen=True)
class ConditionReport:
    """Everything the a-priori checkers can say about one network."""
    c1: C1Report | None                 # None when not checkable
    c1_unavailable_reason: str | None
    minimum_interval: tuple[float, float] | None
    rx: RxRangeReport
    interval_contains_rx_range: bool | None
    well_constrained: dict[tuple[int, int], SemicircleVerdict]
    prop_conditions: PropConditionReport

    def to_json_dict(self) -> dict:
        doc: dict = {
            "rx_range": {"lo": self.rx.lo, "hi": self.rx.hi,
                         "undefined_lines": [list(l) for l in self.rx.undefined_lines]},
            "well_constrained": {
                "all": all(v.ok for v in self.well_constrained.values()),
                "lines": [{"line": [v.child, v.parent], "ok": v.ok,
                           "alpha": v.alpha if v.alpha is not None else "none"}
                          for v in self.well_constrained.values()],
            },
            "special_conditions": {
                "load_over_satisfaction": self.prop_conditions.load_over_satisfaction,
                "no_reverse_flow": self.prop_conditions.cond_i,
                "uniform_ratio": self.prop_conditions.cond_ii,
                "ratio_nonincreasing_no_real_reverse": self.prop_conditions.cond_iii,
                "ratio_nondecreasing_no_reactive_reverse": self.prop_conditions.cond_iv,
            },
        }
        if self.c1 is None:
            doc["c1"] = {"checkable": False, "reason": self.c1_unavailable_reason}
        else:
            lo, hi = self.minimum_interval
            doc["c1"] = {
                "checkable": True,
                "holds": self.c1.holds,
                "minimum_interval": {"lo": lo, "hi": hi},
                "interval_contains_rx_range": self.interval_contains_rx_range,
                "lines": [{"line": [r.child, r.parent], "margin1": r.margin1,
                           "margin2": r.margin2, "b_lo": r.b_lo, "b_hi": r.b_hi,
                           "rx": r.rx, "holds": r.holds} for r in self.c1.lines],
            }
        return doc


def condition_report(net: Network,
                     bounds: Mapping[int, tuple[float, float]] | None = None
                     ) -> ConditionReport:
    """Run every a-priori checker and collect the results.

    The per-line ratio condition needs finite upper injection bounds; when a
    bus lacks them the report carries the reason instead of a verdict while
    the bound-free checkers still run.
    """
    rx = rx_range(net)
    wc = check_well_constrained(net)
    props = check_proposition_conditions(net, bounds)
    try:
        c1 = check_c1(net, bounds)
    except ValidationError as e:
        return ConditionReport(None, str(e), None, rx, None, wc, props)
    mi = minimum_interval(c1.coefficients)
    contains = mi[0] < rx.lo and rx.hi < mi[1]
    return ConditionReport(c1, None, mi, rx, contains, wc, props)


# ---------------------------------------------------------------------------
# closeness metric between the linear and the exact voltage profile

@dataclass(frozen=True)
class EpsilonReport:
    epsilon: float
    argmax_bus: int
    policy: str
    sampled_lower_bound: bool      # True when estimated from samples only
    samples: int = 1


def epsilon_at_point(net: Network, s: Mapping[int, complex]) -> tuple[float, int]:
    """max_i (linear squared voltage - exact squared voltage) at a fixed s."""
    from .powerflow import solve_power_flow  # local import to avoid a cycle

    w_hat = linear_voltage(net, s)
    sol = solve_power_flow(net, s)
    eps = 0.0
    arg = net.root
    for b in net.buses:
        d = w_hat[b.id] - abs(sol.V[b.id]) ** 2
        if d > eps:
            eps, arg = d, b.id
    return eps, arg


def epsilon_metric(net: Network, *,
                   s: Mapping[int, complex] | None = None,
                   preset: str | None = None,
                   samples: int | None = None,
                   seed: int = 0) -> EpsilonReport:
    """Closeness metric between the linear and the exact voltage profile.

    Exactly one policy must be given: a fixed operating point ``s``, a named
    ``preset`` (see :mod:`opfkit.presets`), or a ``samples`` count. Sampling
    draws injections uniformly from each bus's feasible set, so the result is
    a lower bound on the true maximum and is flagged as such.
    """
    chosen = [p is not None for p in (s, preset, samples)]
    if sum(chosen) != 1:
        raise ValidationError("exactly one epsilon policy must be given")
    if preset is not None:
        from .presets import preset_injections
        s = preset_injections(net, preset)
        eps, arg = epsilon_at_point(net, s)
        return EpsilonReport(eps, arg, f"preset:{preset}", False)
    if s is not None:
        eps, arg = epsilon_at_point(net, dict(s))
        return EpsilonReport(eps, arg, "operating-point", False)

    from .presets import sample_injections
    assert samples is not None
    if samples < 1:
        raise ValidationError("sample count must be >= 1")
    best, arg = 0.0, net.root
    successes = 0
    for k in range(samples):
        sk = sample_injections(net, seed=seed + k)
        try:
            eps, a = epsilon_at_point(net, sk)
        except PowerFlowError:
            continue
        successes += 1
        if eps > best:
            best, arg = eps, a
    if successes == 0:
        raise PowerFlowError("power flow diverged at every sampled operating point")
    return EpsilonReport(best, arg, "sampled", True, samples)
