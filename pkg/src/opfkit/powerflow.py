"""Exact power flow on radial networks via backward/forward sweeps.

The sweep iterates the branch-flow recursions: a backward pass accumulates
sending-end flows including loss terms, a forward pass propagates squared
voltages from the substation. On convergence the cone equalities hold by
construction, so complex voltages follow by accumulating the flow angles
along each path. Only the solution near nominal voltage is sought (flat
start); low-voltage solutions are out of scope.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping

from .branchflow import BranchFlowPoint
from .errors import PowerFlowError, ValidationError
from .lindistflow import _check_injection_keys
from .netmodel import Network

RESIDUAL_TOL = 1e-10
SWEEP_TOL = 1e-12
MAX_SWEEPS = 100


@dataclass(frozen=True)
class PowerFlowSolution:
    V: dict[int, complex]        # all buses; substation fixed at angle 0
    s0: complex
    iterations: int
    residual_norm: float


def pf_residual(net: Network, V: Mapping[int, complex],
                s: Mapping[int, complex]) -> dict[int, complex]:
    """Bus power mismatch s_i - V_i * sum_j (V_i - V_j)* y_ij* over neighbors.

    The substation is excluded: its injection is free. This is a direct
    evaluation of the nodal power-balance law and is deliberately independent
    of the sweep machinery, so it can arbitrate any solve.
    """
    _check_injection_keys(net, s)
    if set(V.keys()) != {b.id for b in net.buses}:
        raise ValidationError("voltage vector does not match the network buses")
    out = {}
    for b in net.non_root_buses():
        i = b.id
        acc = 0j
        neighbors = list(net.children_of(i))
        neighbors.append(net.parent_of(i))
        for j in neighbors:
            ln = net.line_to_parent(i) if j == net.parent_of(i) else net.line_to_parent(j)
            y = 1.0 / ln.z
            acc += (V[i].conjugate() - V[j].conjugate()) * y.conjugate()
        out[i] = s[i] - V[i] * acc
    return out


def _sweep(net: Network, s: Mapping[int, complex], tol: float, max_sweeps: int
           ) -> tuple[dict[int, complex], dict[int, float], dict[int, float], int]:
    order = net.topological_order()
    v = {b: net.v0 for b in order}
    S: dict[int, complex] = {}
    ell: dict[int, float] = {}
    for sweep in range(1, max_sweeps + 1):
        # backward: flows with loss terms, leaves first
        for b in reversed(order):
            if b == net.root:
                continue
            acc = complex(s[b])
            for c in net.children_of(b):
                ln = net.line_to_parent(c)
                acc += S[c] - ln.z * ell[c]
            S[b] = acc
            ell[b] = abs(acc) ** 2 / v[b]
        # forward: voltages from the substation down
        delta = 0.0
        for b in order:
            if b == net.root:
                continue
            ln = net.line_to_parent(b)
            drop = 2.0 * (ln.r * S[b].real + ln.x * S[b].imag) \
                - (ln.r ** 2 + ln.x ** 2) * ell[b]
            new_v = v[ln.parent] + drop
            if not (new_v > 0.0) or math.isnan(new_v):
                raise PowerFlowError(
                    f"voltage collapsed at bus {b}; operating point outside the solvable region")
            delta = max(delta, abs(new_v - v[b]))
            v[b] = new_v
        if delta <= tol:
            return S, ell, v, sweep
    raise PowerFlowError(f"sweep did not converge in {max_sweeps} iterations")


def _angles(net: Network, S: Mapping[int, complex], v: Mapping[int, float]
            ) -> dict[int, complex]:
    V = {net.root: complex(math.sqrt(net.v0), 0.0)}
    for b in net.topological_order():
        if b == net.root:
            continue
        ln = net.line_to_parent(b)
        w_off = v[b] - ln.z.conjugate() * S[b]
        theta = cmath.phase(V[ln.parent]) + cmath.phase(w_off)
        V[b] = cmath.rect(math.sqrt(v[b]), theta)
    return V


def solve_power_flow(net: Network, s: Mapping[int, complex], *,
                     tol: float = SWEEP_TOL, max_sweeps: int = MAX_SWEEPS
                     ) -> PowerFlowSolution:
    """Solve the exact power flow for fixed injections from a flat start.

    Convergence is declared when the largest squared-voltage change across a
    sweep drops to ``tol``; the returned point is then certified against the
    nodal power-balance law (max residual <= 1e-10).
    """
    _check_injection_keys(net, s)
    S, ell, v, sweeps = _sweep(net, s, tol, max_sweeps)
    V = _angles(net, S, v)
    res = pf_residual(net, V, s)
    worst = max(abs(r) for r in res.values()) if res else 0.0
    if worst > RESIDUAL_TOL:
        raise PowerFlowError(f"sweep fixed point violates power balance ({worst:.3e})")
    s0 = -sum(S[c] - net.line_to_parent(c).z * ell[c] for c in net.children_of(net.root))
    return PowerFlowSolution(V, s0, sweeps, worst)


def to_branch_flow(net: Network, solution: PowerFlowSolution,
                   s: Mapping[int, complex]) -> BranchFlowPoint:
    """Branch-flow tuple of a converged solve; cone equalities hold exactly."""
    _check_injection_keys(net, s)
    V = solution.V
    v = {b.id: abs(V[b.id]) ** 2 for b in net.buses}
    S = {}
    ell = {}
    for ln in net.lines:
        y_conj = (1.0 / ln.z).conjugate()
        S[ln.child] = (v[ln.child] - V[ln.child] * V[ln.parent].conjugate()) * y_conj
        ell[ln.child] = abs(V[ln.child] - V[ln.parent]) ** 2 * abs(1.0 / ln.z) ** 2
    return BranchFlowPoint({i: complex(si) for i, si in s.items()}, S, ell, v, solution.s0)
