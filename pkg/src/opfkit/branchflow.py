"""Branch-flow operating points and the checks every module agrees on.

A :class:`BranchFlowPoint` is the tuple (s, S, ell, v, s0): per-bus complex
injections, per-line sending-end complex flows (child -> parent), per-line
squared current magnitudes, per-bus squared voltage magnitudes, and the
substation injection. Per-line values are keyed by the line's child bus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError
from .netmodel import Network

# relative cone-slack threshold below which a point counts as exact
EXACTNESS_TOL = 1e-6


@dataclass(frozen=True)
class BranchFlowPoint:
    s: dict[int, complex]        # non-substation buses
    S: dict[int, complex]        # keyed by line child
    ell: dict[int, float]        # keyed by line child
    v: dict[int, float]          # all buses, including the substation
    s0: complex

    def copy(self) -> "BranchFlowPoint":
        return BranchFlowPoint(dict(self.s), dict(self.S), dict(self.ell),
                               dict(self.v), self.s0)


@dataclass(frozen=True)
class GapReport:
    gaps: dict[int, float]             # ell*v_child - |S|^2 per line child
    relative: dict[int, float]         # gap / (ell*v_child + 1)
    max_relative: float
    exact: bool


def exactness_gap(point: BranchFlowPoint, *, tol: float = EXACTNESS_TOL,
                  feas_tol: float = 1e-8) -> GapReport:
    """Cone slack per line and the exactness verdict.

    Raises when a gap is more negative than ``-feas_tol`` relative to its
    scale: such a point violates the cone and is not a relaxation point.
    """
    gaps = {}
    rel = {}
    worst = 0.0
    for child, ell in point.ell.items():
        S = point.S[child]
        lv = ell * point.v[child]
        g = lv - (S.real * S.real + S.imag * S.imag)
        r = g / (lv + 1.0)
        if r < -feas_tol:
            raise ValidationError(
                f"line into bus {child}: cone violated (relative gap {r:.3e})")
        gaps[child] = g
        rel[child] = r
        worst = max(worst, r)
    return GapReport(gaps, rel, worst, worst <= tol)


@dataclass(frozen=True)
class FeasibilityReport:
    voltage_drop: float        # max |voltage-drop equation residual|
    conservation: float        # max |flow balance residual|, complex magnitude
    bound_violation: float     # max violation of v bounds, 0 when inside
    cone_violation: float      # max (|S|^2 - ell*v)+ , absolute
    ell_negative: float        # max (-ell)+

    def ok(self, tol: float = 1e-8) -> bool:
        return (self.voltage_drop <= tol and self.conservation <= tol
                and self.bound_violation <= tol and self.cone_violation <= tol
                and self.ell_negative <= tol)


def feasibility(net: Network, point: BranchFlowPoint) -> FeasibilityReport:
    """Residuals of the branch-flow constraints at a point (all >= 0)."""
    vd = 0.0
    for ln in net.lines:
        S = point.S[ln.child]
        drop = 2.0 * (ln.r * S.real + ln.x * S.imag) - (ln.r**2 + ln.x**2) * point.ell[ln.child]
        vd = max(vd, abs(point.v[ln.child] - point.v[ln.parent] - drop))

    cons = 0.0
    for b in net.buses:
        inflow = 0j
        for c in net.children_of(b.id):
            ln = net.line_to_parent(c)
            inflow += point.S[c] - ln.z * point.ell[c]
        inj = point.s0 if b.id == net.root else point.s[b.id]
        outflow = point.S[b.id] if b.id != net.root else 0j
        cons = max(cons, abs(inflow + inj - outflow))

    bound = 0.0
    for b in net.buses:
        if b.id == net.root:
            continue
        v = point.v[b.id]
        bound = max(bound, b.v_min - v, v - b.v_max if math.isfinite(b.v_max) else 0.0, 0.0)

    cone = 0.0
    neg = 0.0
    for child, ell in point.ell.items():
        S = point.S[child]
        cone = max(cone, (S.real**2 + S.imag**2) - ell * point.v[child], 0.0)
        neg = max(neg, -ell, 0.0)
    return FeasibilityReport(vd, cons, bound, cone, neg)


@dataclass(frozen=True)
class Lemma1Margins:
    """Headroom of the lossless linear model over a branch-flow point.

    The linear flow/voltage dominate the exact ones on any point satisfying
    the relaxation constraints, so all margins should be >= -tolerance.
    """
    flow_real: dict[int, float]
    flow_imag: dict[int, float]
    voltage: dict[int, float]
    min_margin: float = field(compare=False)

    def ok(self, tol: float = 1e-9) -> bool:
        return self.min_margin >= -tol


def check_lemma1_bounds(point: BranchFlowPoint, net: Network) -> Lemma1Margins:
    from .lindistflow import linear_flow

    lf = linear_flow(net, point.s)
    fr = {c: lf.s_hat[c].real - point.S[c].real for c in point.S}
    fi = {c: lf.s_hat[c].imag - point.S[c].imag for c in point.S}
    vw = {b.id: lf.w_hat[b.id] - point.v[b.id] for b in net.buses}
    worst = min(min(fr.values(), default=0.0), min(fi.values(), default=0.0),
                min(vw.values(), default=0.0))
    return Lemma1Margins(fr, fi, vw, worst)


def objective_value(net: Network, point: BranchFlowPoint, objective: str | None = None) -> float:
    """Evaluate the network objective at a point.

    LOSS is total line loss plus any per-bus cost terms carried by the data;
    SUM_COST sums per-bus costs of real injection, identity by default, and
    includes the substation term.
    """
    from .netmodel import DEFAULT_COST, LOSS, OBJECTIVES

    kind = objective if objective is not None else net.objective
    if kind not in OBJECTIVES:
        raise ValidationError(f"unknown objective {kind!r}")
    if kind == LOSS:
        total = sum(ln.r * point.ell[ln.child] for ln in net.lines)
        for b in net.non_root_buses():
            if b.cost is not None:
                total += b.cost(point.s[b.id].real)
        return total
    total = (net.buses[0].cost or DEFAULT_COST)(point.s0.real)
    for b in net.non_root_buses():
        total += (b.cost or DEFAULT_COST)(point.s[b.id].real)
    return total


# ---------------------------------------------------------------------------
# JSON solution files

def point_to_json(net: Network, point: BranchFlowPoint) -> dict:
    buses = []
    for b in net.buses:
        rec = {"id": b.id, "v": point.v[b.id]}
        if b.id == net.root:
            rec["p"], rec["q"] = point.s0.real, point.s0.imag
        else:
            rec["p"], rec["q"] = point.s[b.id].real, point.s[b.id].imag
        buses.append(rec)
    lines = [{"child": ln.child, "parent": ln.parent,
              "P": point.S[ln.child].real, "Q": point.S[ln.child].imag,
              "ell": point.ell[ln.child]} for ln in net.lines]
    return {"buses": buses, "lines": lines,
            "s0": {"p": point.s0.real, "q": point.s0.imag}}


def point_from_json(net: Network, doc: dict) -> BranchFlowPoint:
    try:
        v = {int(b["id"]): float(b["v"]) for b in doc["buses"]}
        s = {int(b["id"]): complex(float(b["p"]), float(b["q"]))
             for b in doc["buses"] if int(b["id"]) != net.root}
        S = {int(l["child"]): complex(float(l["P"]), float(l["Q"])) for l in doc["lines"]}
        ell = {int(l["child"]): float(l["ell"]) for l in doc["lines"]}
        s0 = complex(float(doc["s0"]["p"]), float(doc["s0"]["q"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"malformed solution document: {e}") from None
    expected_buses = {b.id for b in net.buses}
    if set(v) != expected_buses or set(S) != {ln.child for ln in net.lines}:
        raise ValidationError("solution document does not match the network")
    return BranchFlowPoint(s, S, ell, v, s0)
