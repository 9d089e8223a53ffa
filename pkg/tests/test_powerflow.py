"""Exact power flow: sweep solver, residual law, branch-flow conversion."""

import cmath
import math

import numpy as np
import pytest

from opfkit import (PowerFlowError, ValidationError, check_lemma1_bounds,
                    exactness_gap, pf_residual, solve_power_flow, to_branch_flow)
from opfkit.branchflow import feasibility

from conftest import random_network, two_bus


def closed_form_two_bus(v0, z, s1):
    """Near-nominal root of the single-line quadratic; independent oracle."""
    b = v0 + 2 * (z.conjugate() * s1).real
    c = abs(z) ** 2 * abs(s1) ** 2
    disc = b * b - 4 * c
    assert disc > 0
    return (b + math.sqrt(disc)) / 2


def zero_s(net):
    return {b.id: 0j for b in net.non_root_buses()}


def test_two_bus_matches_closed_form():
    z = 0.1 + 0.2j
    s1 = -0.5 - 0.125j
    net = two_bus(r=z.real, x=z.imag)
    v1 = closed_form_two_bus(1.0, z, s1)
    # frozen oracle value: near-nominal root of v^2 - 0.85 v + 0.0132813 = 0
    assert v1 == pytest.approx(0.8340767042988393, rel=1e-12)
    sol = solve_power_flow(net, {1: s1})
    assert abs(sol.V[1]) ** 2 == pytest.approx(v1, abs=1e-10)
    assert sol.residual_norm <= 1e-10
    point = to_branch_flow(net, sol, {1: s1})
    assert point.ell[1] == pytest.approx(abs(s1) ** 2 / v1, abs=1e-9)
    assert point.ell[1] == pytest.approx(0.3185, abs=1e-4)


def test_flat_network_converges_immediately(sce47):
    sol = solve_power_flow(sce47, zero_s(sce47))
    assert sol.iterations == 1
    assert all(V == pytest.approx(1.0) for V in map(abs, sol.V.values()))
    assert sol.s0 == 0j


def test_pf_residual_zero_point(sce56):
    V = {b.id: 1.0 + 0j for b in sce56.buses}
    res = pf_residual(sce56, V, zero_s(sce56))
    assert max(abs(r) for r in res.values()) == 0.0


def independent_residual(net, V, s):
    """Second implementation of the nodal power law, for arbitration.

    Builds the neighbor sums from an adjacency dictionary assembled from
    scratch rather than through the network's topology cache.
    """
    adj = {}
    for ln in net.lines:
        y = 1.0 / complex(ln.r, ln.x)
        adj.setdefault(ln.child, []).append((ln.parent, y))
        adj.setdefault(ln.parent, []).append((ln.child, y))
    out = {}
    for b in net.non_root_buses():
        i = b.id
        inj = sum((V[i].conjugate() - V[j].conjugate()) * y.conjugate()
                  for j, y in adj[i])
        out[i] = s[i] - V[i] * inj
    return out


def test_pf_residual_matches_independent_evaluation():
    rng = np.random.default_rng(21)
    net = random_network(rng, 14, require_c1=False)
    V = {b.id: cmath.rect(rng.uniform(0.9, 1.1), rng.uniform(-0.2, 0.2))
         for b in net.buses}
    s = {b.id: complex(rng.normal(0, 0.1), rng.normal(0, 0.1))
         for b in net.non_root_buses()}
    mine = pf_residual(net, V, s)
    other = independent_residual(net, V, s)
    for i in mine:
        assert abs(mine[i] - other[i]) < 1e-12


def test_pf_residual_dimension_mismatch(sce47):
    with pytest.raises(ValidationError):
        pf_residual(sce47, {1: 1 + 0j}, zero_s(sce47))


def test_solve_satisfies_power_balance_and_energy_accounting():
    rng = np.random.default_rng(9)
    for _ in range(10):
        net = random_network(rng, int(rng.integers(2, 20)), require_c1=False)
        s = {b.id: complex(-abs(rng.normal(0, 0.05)), -abs(rng.normal(0, 0.02)))
             for b in net.non_root_buses()}
        sol = solve_power_flow(net, s)
        assert sol.residual_norm <= 1e-10
        point = to_branch_flow(net, sol, s)
        loss = sum(net.line_to_parent(c).r * point.ell[c] for c in point.ell)
        total_in = sol.s0.real + sum(si.real for si in s.values())
        assert total_in == pytest.approx(loss, abs=1e-9)
        # linear model dominates the exact solution componentwise
        margins = check_lemma1_bounds(point, net)
        assert margins.ok(1e-9)


def test_to_branch_flow_zero_point(sce56):
    sol = solve_power_flow(sce56, zero_s(sce56))
    point = to_branch_flow(sce56, sol, zero_s(sce56))
    assert all(abs(S) == 0.0 for S in point.S.values())
    assert all(l == 0.0 for l in point.ell.values())
    assert all(v == pytest.approx(1.0) for v in point.v.values())


def test_to_branch_flow_is_cone_tight_and_feasible():
    rng = np.random.default_rng(33)
    net = random_network(rng, 12, require_c1=False)
    s = {b.id: complex(rng.uniform(-0.05, 0.02), rng.uniform(-0.02, 0.01))
         for b in net.non_root_buses()}
    point = to_branch_flow(net, solve_power_flow(net, s), s)
    gaps = exactness_gap(point)
    assert gaps.exact
    assert max(abs(g) for g in gaps.gaps.values()) <= 1e-9
    audit = feasibility(net, point)
    assert audit.voltage_drop <= 1e-9 and audit.conservation <= 1e-9


def test_divergence_reported():
    net = two_bus(r=0.1, x=0.2)
    with pytest.raises(PowerFlowError):
        solve_power_flow(net, {1: -20.0 - 5.0j})


def test_sce_networks_converge_at_peak(sce47, sce56):
    from opfkit.presets import preset_injections

    for net in (sce47, sce56):
        s = preset_injections(net, "paper-peak")
        sol = solve_power_flow(net, s)
        assert sol.residual_norm <= 1e-10
        assert check_lemma1_bounds(to_branch_flow(net, sol, s), net).ok(1e-9)
