"""Executable certificates around non-exact relaxation points.

Given a feasible relaxation point with slack on some cone, this module finds
a line whose slack can be traded for a strictly cheaper feasible point, runs
the constructive improvement along the path from that line to the substation,
and evaluates the product-positivity condition that guarantees the trade
propagates. It also ships the 2-bus instance on which the plain relaxation
provably fails, and a brute-force checker for the matrix inequality behind
the propagation argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .branchflow import (EXACTNESS_TOL, BranchFlowPoint, exactness_gap, feasibility,
                         objective_value)
from .errors import ImprovementError, ValidationError
from .netmodel import (LOSS, Box, Bus, LinearCost, Line, Network,
                       network_from_components, path_to_root)


def find_violating_line(point: BranchFlowPoint, net: Network,
                        tol: float = EXACTNESS_TOL) -> Line | None:
    """A line with strict cone slack whose path below it is exact.

    Returns None when the point is exact. When several lines qualify the one
    with the shortest path to the substation wins, ties broken by smallest
    child id, so runs are deterministic.
    """
    gaps = exactness_gap(point, tol=tol)
    candidates = []
    for ln in net.lines:
        if gaps.relative[ln.child] <= tol:
            continue
        below = path_to_root(net, ln.parent)
        if all(gaps.relative[l.child] <= tol for l in below):
            candidates.append((len(below), ln.child, ln))
    if not candidates:
        return None
    return min(candidates)[2]


@dataclass(frozen=True)
class ImprovementResult:
    improved: BranchFlowPoint
    step: float
    objective_delta: float
    feasible: bool
    cone_ok: bool
    voltage_ok: bool
    affine_ok: bool
    injections_unchanged: bool
    max_voltage_violation: float = field(compare=False, default=0.0)

    def accepted(self) -> bool:
        return self.feasible and self.objective_delta < 0.0


def construct_improved_point(point: BranchFlowPoint, net: Network, line: Line,
                             step: float, *, feas_tol: float = 1e-8) -> ImprovementResult:
    """Trade cone slack on ``line`` for smaller upstream flows.

    Injections stay fixed and everything off the path from the line's child to
    the substation is untouched. The slack on the chosen line shrinks by
    ``step``; each path line below recomputes its squared current so its cone
    constraint keeps holding against the larger of old and new flows; squared
    voltages are rebuilt from the substation. The result carries a full
    feasibility audit and the objective change (negative means improvement).
    """
    child = line.child
    try:
        known = net.line_to_parent(child)
    except ValidationError:
        known = None
    if known != line:
        raise ImprovementError(f"line {line} does not belong to the network")
    S_m = point.S[child]
    slack = point.ell[child] - abs(S_m) ** 2 / point.v[child]
    if not (0.0 < step <= slack + feas_tol):
        raise ImprovementError(
            f"step must lie in (0, {slack:.6g}], got {step:.6g}")

    path = path_to_root(net, child)    # line itself first, substation last
    new_S = dict(point.S)
    new_ell = dict(point.ell)

    new_ell[child] = point.ell[child] - step
    delta_S = line.z * step            # flow change arriving at the next line down
    for ln in path[1:]:
        c = ln.child
        old = point.S[c]
        new = old + delta_S
        new_S[c] = new
        new_ell[c] = (max(new.real ** 2, old.real ** 2)
                      + max(new.imag ** 2, old.imag ** 2)) / point.v[c]
        delta_S = delta_S - ln.z * (new_ell[c] - point.ell[c])
    # delta_S is now the change in (S - z*ell) delivered to the substation
    s0 = point.s0 - delta_S

    new_v = {net.root: point.v[net.root]}
    for b in net.topological_order():
        if b == net.root:
            continue
        ln = net.line_to_parent(b)
        S = new_S[b]
        new_v[b] = (new_v[ln.parent] + 2.0 * (ln.r * S.real + ln.x * S.imag)
                    - (ln.r ** 2 + ln.x ** 2) * new_ell[b])

    improved = BranchFlowPoint(dict(point.s), new_S, new_ell, new_v, s0)
    audit = feasibility(net, improved)
    cone_ok = audit.cone_violation <= feas_tol and audit.ell_negative <= feas_tol
    voltage_ok = audit.bound_violation <= feas_tol
    affine_ok = audit.voltage_drop <= feas_tol and audit.conservation <= feas_tol
    delta = (objective_value(net, improved, net.objective)
             - objective_value(net, point, net.objective))
    return ImprovementResult(
        improved=improved, step=step, objective_delta=delta,
        feasible=cone_ok and voltage_ok and affine_ok,
        cone_ok=cone_ok, voltage_ok=voltage_ok, affine_ok=affine_ok,
        injections_unchanged=improved.s == point.s,
        max_voltage_violation=audit.bound_violation)


def improve_with_line_search(point: BranchFlowPoint, net: Network,
                             line: Line | None = None, *,
                             max_halvings: int = 60,
                             min_decrease: float = 1e-6,
                             tol: float = EXACTNESS_TOL) -> ImprovementResult | None:
    """Find an accepted improvement by halving the step from full slack.

    A step is accepted when the new point passes the feasibility audit and
    lowers the objective by more than ``min_decrease``; the default sits well
    above interior-point feasibility slop, so tolerance-scale pseudo
    improvements of an already-optimal solver point are rejected. Returns
    None when the point is exact. Raises when no step within ``max_halvings``
    halvings is accepted, which signals that the sufficient conditions for
    improvement do not hold at this point; the full-slack attempt rides on
    the exception as ``last_result`` so callers can report its audit.
    """
    if line is None:
        line = find_violating_line(point, net, tol=tol)
        if line is None:
            return None
    step = point.ell[line.child] - abs(point.S[line.child]) ** 2 / point.v[line.child]
    first = None
    for _ in range(max_halvings + 1):
        result = construct_improved_point(point, net, line, step)
        first = first or result
        if result.feasible and result.objective_delta < -min_decrease:
            return result
        step *= 0.5
    err = ImprovementError("no accepted step found; improvement conditions violated")
    err.last_result = first
    raise err


# ---------------------------------------------------------------------------
# propagation condition and its matrix inequality

@dataclass(frozen=True)
class KeyStepData:
    """Per-line 2x2 damping matrices evaluated at a branch-flow point.

    Entries c, d, e, f store (1 - 2rP+/v, 2rQ+/v, 2xP+/v, 1 - 2xQ+/v) with v
    taken at the line's child bus; u is the line's (r, x).
    """
    c: dict[int, float]
    d: dict[int, float]
    e: dict[int, float]
    f: dict[int, float]
    u: dict[int, tuple[float, float]]

    def matrix(self, child: int) -> np.ndarray:
        return np.array([[self.c[child], -self.d[child]],
                         [-self.e[child], self.f[child]]])

    def to_json_dict(self) -> dict:
        """Per-line entry dump for debugging the propagation condition."""
        return {"lines": [{"child": c, "c": self.c[c], "d": self.d[c],
                           "e": self.e[c], "f": self.f[c],
                           "r": self.u[c][0], "x": self.u[c][1]}
                          for c in sorted(self.c)]}


def key_step_data(point: BranchFlowPoint, net: Network) -> KeyStepData:
    c, d, e, f, u = {}, {}, {}, {}, {}
    for ln in net.lines:
        S = point.S[ln.child]
        v = point.v[ln.child]
        p_plus = max(S.real, 0.0)
        q_plus = max(S.imag, 0.0)
        c[ln.child] = 1.0 - 2.0 * ln.r * p_plus / v
        d[ln.child] = 2.0 * ln.r * q_plus / v
        e[ln.child] = 2.0 * ln.x * p_plus / v
        f[ln.child] = 1.0 - 2.0 * ln.x * q_plus / v
        u[ln.child] = (ln.r, ln.x)
    return KeyStepData(c, d, e, f, u)


@dataclass(frozen=True)
class KeyStepReport:
    verdicts: dict[tuple[int, int], bool]   # (bus, depth along its path) -> product > 0
    holds: bool
    data: KeyStepData = field(compare=False)


def key_step_check(point: BranchFlowPoint, net: Network) -> KeyStepReport:
    """Strict positivity of every truncated damping product along every path.

    For each bus, the (r, x) of its own line is pushed down through the
    damping matrices of the lines between it and the substation; the point
    supports slack-trading improvements when every partial product stays
    componentwise positive.
    """
    data = key_step_data(point, net)
    verdicts: dict[tuple[int, int], bool] = {}
    holds = True
    for b in net.non_root_buses():
        path = path_to_root(net, b.id)
        depth = len(path)
        vec = np.array(data.u[path[0].child])
        ok = bool(np.all(vec > 0.0))
        verdicts[(b.id, depth)] = ok
        holds &= ok
        t = depth - 1
        for ln in path[1:]:
            vec = data.matrix(ln.child) @ vec
            ok = bool(np.all(vec > 0.0))
            verdicts[(b.id, t)] = ok
            holds &= ok
            t -= 1
    return KeyStepReport(verdicts, holds, data)


def check_matrix_lemma(c, d, e, f, u) -> tuple[bool, bool]:
    """Evaluate both sides of the damping-product implication by brute force.

    Hypothesis: the aggregate matrix ``[[prod c, -sum d], [-sum e, prod f]]``
    maps u to a positive vector. Conclusion: every suffix product of the
    individual matrices does too. Inputs must satisfy 0 < c <= 1, d >= 0,
    e >= 0, 0 < f <= 1 componentwise and u > 0.
    """
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    u = np.asarray(u, dtype=float)
    if not (np.all(c > 0) and np.all(c <= 1) and np.all(f > 0) and np.all(f <= 1)
            and np.all(d >= 0) and np.all(e >= 0) and u.shape == (2,) and np.all(u > 0)):
        raise ValidationError("matrix lemma inputs out of range")
    agg = np.array([[np.prod(c), -np.sum(d)], [-np.sum(e), np.prod(f)]])
    hypothesis = bool(np.all(agg @ u > 0))
    vec = u.copy()
    conclusion = True
    for j in range(len(c) - 1, -1, -1):
        vec = np.array([[c[j], -d[j]], [-e[j], f[j]]]) @ vec
        if not np.all(vec > 0):
            conclusion = False
            break
    return hypothesis, conclusion


# ---------------------------------------------------------------------------
# the 2-bus instance on which the plain relaxation fails

def two_bus_counterexample() -> tuple[Network, str]:
    """2-bus network with a PV bus whose plain relaxation is not exact.

    Substation at squared voltage 1; one line with impedance 0.1 + 0.2j; the
    far bus injects Re(s) in [0, 1] at zero reactive power, squared-voltage
    band [0.9, 1.1]. The objective charges line loss plus the curtailed
    generation 1 - Re(s). The relaxed optimum parks the squared voltage at
    its ceiling with strict cone slack, so the relaxation is not exact; the
    modified variant caps Re(s) at 0.5 and is exact.
    """
    buses = [
        Bus(0, v_min=0.81, v_max=math.inf),
        Bus(1, v_min=0.9, v_max=1.1,
            injection=Box(0.0, 1.0, 0.0, 0.0),
            cost=LinearCost(-1.0, 1.0)),
    ]
    lines = [Line(child=1, parent=0, r=0.1, x=0.2)]
    net = network_from_components(1.0, buses, lines, objective=LOSS)
    return net, LOSS
