"""Shared fixtures: bundled feeders, tiny hand nets, random tree instances."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from opfkit import (Box, Bus, CapacitorDiscrete, Fixed, InverterPV, Line,
                    load_network, network_from_components)
from opfkit.branchflow import BranchFlowPoint
from opfkit.lindistflow import check_c1, linear_voltage

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "opfkit" / "data"


def load_bundled(name):
    return load_network((DATA_DIR / name).read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def sce47():
    return load_bundled("sce47.json")


@pytest.fixture(scope="session")
def sce56():
    return load_bundled("sce56.json")


@pytest.fixture(scope="session")
def counterexample_net():
    return load_bundled("twobus_counterexample.json")


def chain_network(impedances, injections, v_min=0.81, v_max=math.inf, v0=1.0):
    """Path network 0-1-2-...; impedances and injections for buses 1..n."""
    buses = [Bus(0, 0.81, math.inf)]
    lines = []
    for k, (r, x) in enumerate(impedances, start=1):
        inj = injections.get(k, Fixed(0.0, 0.0))
        buses.append(Bus(k, v_min, v_max, inj))
        lines.append(Line(child=k, parent=k - 1, r=r, x=x))
    return network_from_components(v0, buses, lines)


def two_bus(r=0.1, x=0.2, injection=Fixed(0.0, 0.0), v_min=0.81, v_max=math.inf):
    return chain_network([(r, x)], {1: injection}, v_min=v_min, v_max=v_max)


def random_network(rng: np.random.Generator, n: int, *, scale=1.0,
                   v_min=0.81, v_max=1.21, with_caps=True, with_pv=True,
                   box_lower=None, require_c1=True):
    """Random radial network with a load/capacitor/PV device mix.

    Device sizes shrink geometrically until the ratio condition holds when
    ``require_c1`` is set. ``box_lower`` widens every device into a box with
    that lower bound (used for the no-lower-bound suites).
    """
    for _ in range(12):
        buses = [Bus(0, 0.81, math.inf)]
        lines = []
        for i in range(1, n + 1):
            parent = int(rng.integers(0, i))
            r = float(rng.uniform(0.002, 0.03))
            x = float(rng.uniform(0.002, 0.03))
            kind = rng.random()
            if kind < 0.55:
                mva = scale * float(rng.uniform(0.005, 0.06))
                inj = Fixed(-0.97 * mva, -0.243 * mva)
            elif kind < 0.75 and with_caps:
                inj = CapacitorDiscrete(scale * float(rng.uniform(0.005, 0.04)))
            elif kind < 0.95 and with_pv:
                cap = scale * float(rng.uniform(0.01, 0.08))
                inj = InverterPV(cap, 1.05 * cap)
            else:
                inj = Fixed(0.0, 0.0)
            if box_lower is not None:
                p_hi = max(0.0, inj.p if isinstance(inj, Fixed) else
                           getattr(inj, "p_cap", 0.0))
                q_hi = max(0.0, inj.q if isinstance(inj, Fixed) else
                           getattr(inj, "q_cap", 0.0))
                inj = Box(box_lower, p_hi, box_lower, q_hi)
            buses.append(Bus(i, v_min, v_max, inj))
            lines.append(Line(child=i, parent=parent, r=r, x=x))
        net = network_from_components(1.0, buses, lines)
        if not require_c1 or check_c1(net).holds:
            return net
        scale *= 0.5
    raise AssertionError("could not draw a condition-satisfying random network")


def slackened_point(net, s, slack_child: int, delta: float,
                    sweeps: int = 200, tol: float = 1e-13) -> BranchFlowPoint:
    """Feasible relaxation point with cone slack ``delta`` on one line.

    Independent fixed-point sweep (not the production solver): every line is
    held at cone equality except the chosen one, whose squared current is
    inflated by ``delta``. The result satisfies the affine constraints to
    machine precision with slack concentrated on the chosen line.
    """
    order = net.topological_order()
    v = {b: net.v0 for b in order}
    S = {}
    ell = {}
    for _ in range(sweeps):
        for b in reversed(order):
            if b == net.root:
                continue
            acc = complex(s[b])
            for c in net.children_of(b):
                ln = net.line_to_parent(c)
                acc += S[c] - ln.z * ell[c]
            S[b] = acc
            ell[b] = abs(acc) ** 2 / v[b] + (delta if b == slack_child else 0.0)
        worst = 0.0
        for b in order:
            if b == net.root:
                continue
            ln = net.line_to_parent(b)
            nv = (v[ln.parent] + 2.0 * (ln.r * S[b].real + ln.x * S[b].imag)
                  - (ln.r ** 2 + ln.x ** 2) * ell[b])
            worst = max(worst, abs(nv - v[b]))
            v[b] = nv
        if worst <= tol:
            break
    s0 = -sum(S[c] - net.line_to_parent(c).z * ell[c]
              for c in net.children_of(net.root))
    return BranchFlowPoint({i: complex(x) for i, x in s.items()}, S, ell,
                           {b: v[b] for b in order}, s0)


def with_voltage_ceiling(net, s, margin=1e-9):
    """Copy of ``net`` whose upper voltage bounds sit at the linear profile."""
    w = linear_voltage(net, s)
    buses = [Bus(b.id, b.v_min, max(w[b.id], net.v0) + margin if b.id != net.root
                 else b.v_max, b.injection, b.cost, b.merged_ids)
             for b in net.buses]
    return network_from_components(net.v0, buses, list(net.lines),
                                   base=net.base, objective=net.objective)


def write_tmp_net(tmp_path, doc, name="net.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return p
