"""Relaxation assembly, the solver contract, exactness, recovery."""

import math

import numpy as np
import pytest

from opfkit import (SOCP, SOCP_M, Fixed, InfeasibleError,
                    RecoveryError, SolveSettings, ValidationError,
                    build_relaxation, check_lemma1_bounds, exactness_gap,
                    objective_value, recover_voltages,
                    solve_network, solve_power_flow, to_branch_flow)
from opfkit.lindistflow import linear_voltage
from opfkit.netmodel import LOSS, CapacitorDiscrete

from conftest import chain_network, random_network, two_bus

TIGHT = SolveSettings(feas_tol=1e-9, gap_tol=1e-9)


def zero_s(net):
    return {b.id: 0j for b in net.non_root_buses()}


# ---------------------------------------------------------------------------
# problem assembly

def test_build_counterexample_problem(counterexample_net):
    prob = build_relaxation(counterexample_net, SOCP, LOSS)
    assert prob.soc_dims == [4]                      # one cone row, no inverters
    assert counterexample_net.bus(1).v_min == 0.9
    assert counterexample_net.bus(1).v_max == 1.1


def test_build_sce47_socp_m_cone_count(sce47):
    prob = build_relaxation(sce47, SOCP_M, LOSS)
    # one rotated cone per line after merging, plus one per PV inverter
    n_inverters = 5
    assert len([d for d in prob.soc_dims if d == 4]) == 41
    assert len([d for d in prob.soc_dims if d == 3]) == n_inverters


def test_socp_m_replaces_upper_voltage_bound_rows(sce47):
    plain = build_relaxation(sce47, SOCP, LOSS)
    modified = build_relaxation(sce47, SOCP_M, LOSS)
    # rows: plain has v-lower and v-upper, modified v-lower and one affine
    # surrogate row per bounded bus; counts match but the variables differ
    assert plain.n_ineq == modified.n_ineq
    finite = sum(1 for b in sce47.non_root_buses() if math.isfinite(b.v_max))
    assert finite == 41


def test_socp_m_affine_rows_match_linear_model(sce56):
    # the surrogate row coefficients must reproduce the linear voltage profile
    prob = build_relaxation(sce56, SOCP_M, LOSS)
    rng = np.random.default_rng(4)
    s = {b.id: complex(rng.normal(0, 0.2), rng.normal(0, 0.2))
         for b in sce56.non_root_buses()}
    w = linear_voltage(sce56, s)
    A = prob.A.toarray()
    # surrogate rows sit after the per-bus v-lower rows in the inequality block
    row0 = prob.n_eq + len(sce56.non_root_buses())
    x = np.zeros(prob.n_vars)
    for b in sce56.non_root_buses():
        x[prob.p_idx[b.id]] = s[b.id].real
        x[prob.q_idx[b.id]] = s[b.id].imag
    for k, b in enumerate(sce56.non_root_buses()):
        lhs = A[row0 + k] @ x
        assert lhs + sce56.v0 == pytest.approx(w[b.id], abs=1e-9)
        assert prob.b[row0 + k] == pytest.approx(b.v_max - sce56.v0)


def test_build_rejects_bad_arguments(sce47):
    with pytest.raises(ValidationError):
        build_relaxation(sce47, "sdp", LOSS)
    with pytest.raises(ValidationError):
        build_relaxation(sce47, SOCP, "profit")
    with pytest.raises(ValidationError):
        SolveSettings(feas_tol=-1.0)


# ---------------------------------------------------------------------------
# solving

def test_counterexample_socp_reproduces_reference_solution(counterexample_net):
    sol = solve_network(counterexample_net, SOCP, LOSS)
    assert sol.stats.status == "optimal"
    assert not sol.exact
    assert sol.point.v[1] == pytest.approx(1.1, abs=1e-3)
    assert sol.point.S[1].real == pytest.approx(1.0, abs=1e-3)
    assert sol.point.ell[1] == pytest.approx(2.0, abs=1e-2)
    assert sol.objective_value == pytest.approx(0.2, abs=1e-3)
    assert sol.gaps.gaps[1] == pytest.approx(1.2, abs=0.02)
    assert sol.recovered is None


def test_counterexample_socp_m_is_exact(counterexample_net):
    sol = solve_network(counterexample_net, SOCP_M, LOSS)
    assert sol.exact
    assert sol.point.s[1].real == pytest.approx(0.5, abs=1e-4)
    assert sol.recovered is not None


def test_zero_injection_network_solves_to_zero_loss():
    net = chain_network([(0.01, 0.02)] * 3, {})
    sol = solve_network(net, SOCP, LOSS, TIGHT)
    assert sol.exact
    assert sol.objective_value == pytest.approx(0.0, abs=1e-8)
    assert all(l == pytest.approx(0.0, abs=1e-8) for l in sol.point.ell.values())
    assert all(v == pytest.approx(net.v0, abs=1e-7) for v in sol.point.v.values())


def test_pure_load_two_bus_matches_power_flow():
    s1 = -0.5 - 0.125j
    net = two_bus(r=0.1, x=0.2, injection=Fixed(s1.real, s1.imag), v_min=0.5)
    sol = solve_network(net, SOCP, LOSS, TIGHT)
    assert sol.exact
    pf = to_branch_flow(net, solve_power_flow(net, {1: s1}), {1: s1})
    assert sol.point.v[1] == pytest.approx(pf.v[1], abs=1e-6)
    assert abs(sol.point.S[1] - pf.S[1]) < 1e-6
    assert sol.point.ell[1] == pytest.approx(pf.ell[1], abs=1e-6)
    # recovered angle agrees with the sweep's
    assert abs(sol.recovered.V[1] - solve_power_flow(net, {1: s1}).V[1]) < 1e-6


def test_infeasible_network_raises_with_certificate():
    # load bus whose voltage floor cannot be met
    net = two_bus(r=0.3, x=0.3, injection=Fixed(-1.5, -0.5), v_min=0.99)
    with pytest.raises(InfeasibleError) as err:
        solve_network(net, SOCP, LOSS)
    assert err.value.certificate is not None


def test_max_iter_status_is_reported(sce56):
    sol = solve_network(sce56, SOCP_M, LOSS,
                        SolveSettings(feas_tol=1e-12, gap_tol=1e-13, max_iter=3))
    assert sol.stats.status == "max_iter"
    assert not sol.exact


# ---------------------------------------------------------------------------
# exactness measurement

def test_exactness_gap_arithmetic(counterexample_net):
    sol = solve_network(counterexample_net, SOCP, LOSS)
    g = exactness_gap(sol.point)
    # ell * v - |S|^2 = 2 * 1.1 - 1
    assert g.gaps[1] == pytest.approx(1.2, abs=0.02)
    assert g.relative[1] == pytest.approx(1.2 / (2.2 + 1.0), abs=0.01)
    assert not g.exact


def test_exactness_gap_rejects_cone_violation():
    net = two_bus()
    point = to_branch_flow(net, solve_power_flow(net, {1: -0.1 - 0.05j}),
                           {1: -0.1 - 0.05j})
    bad = point.copy()
    bad.ell[1] -= 1e-3
    with pytest.raises(ValidationError):
        exactness_gap(bad)


def test_recover_voltages_requires_exactness(counterexample_net):
    sol = solve_network(counterexample_net, SOCP, LOSS)
    with pytest.raises(RecoveryError):
        recover_voltages(sol.point, counterexample_net)


def test_recovery_round_trip():
    rng = np.random.default_rng(17)
    for _ in range(6):
        net = random_network(rng, int(rng.integers(3, 16)))
        sol = solve_network(net, SOCP_M, LOSS, TIGHT)
        if not sol.exact:
            continue
        rec = recover_voltages(sol.point, net)
        again = to_branch_flow(net, rec, sol.point.s)
        for c in sol.point.S:
            assert abs(again.S[c] - sol.point.S[c]) < 1e-6
            assert again.ell[c] == pytest.approx(sol.point.ell[c], abs=1e-6)
        for b in sol.point.v:
            assert again.v[b] == pytest.approx(sol.point.v[b], abs=1e-6)


def test_real_drop_keeps_angles_zero():
    net = two_bus(r=0.1, x=0.0, injection=Fixed(-0.2, 0.0), v_min=0.5)
    s = {1: -0.2 + 0j}
    point = to_branch_flow(net, solve_power_flow(net, s), s)
    rec = recover_voltages(point, net)
    assert rec.V[1].imag == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# objective evaluation

def test_objective_values(counterexample_net):
    net = counterexample_net
    zero_point = to_branch_flow(net, solve_power_flow(net, {1: 0j}), {1: 0j})
    # curtailment cost 1 - Re(s) at zero output, zero loss
    assert objective_value(net, zero_point, LOSS) == pytest.approx(1.0)
    sol = solve_network(net, SOCP, LOSS)
    assert objective_value(net, sol.point, LOSS) == pytest.approx(0.2, abs=1e-3)


def test_loss_equals_net_injection_on_feasible_points():
    rng = np.random.default_rng(2)
    net = random_network(rng, 10, require_c1=False)
    s = {b.id: complex(rng.uniform(-0.05, 0.0), rng.uniform(-0.02, 0.0))
         for b in net.non_root_buses()}
    point = to_branch_flow(net, solve_power_flow(net, s), s)
    loss = sum(net.line_to_parent(c).r * point.ell[c] for c in point.ell)
    total = point.s0.real + sum(v.real for v in point.s.values())
    assert loss == pytest.approx(total, abs=1e-9)


# ---------------------------------------------------------------------------
# ordering and bound properties

def test_relaxation_ordering():
    rng = np.random.default_rng(31)
    for _ in range(5):
        net = random_network(rng, int(rng.integers(3, 14)), v_max=1.1025)
        try:
            lo = solve_network(net, SOCP, LOSS, TIGHT)
            hi = solve_network(net, SOCP_M, LOSS, TIGHT)
        except InfeasibleError:
            continue
        assert lo.objective_value <= hi.objective_value + 1e-7
        # any exact feasible point costs at least the modified optimum
        from opfkit.presets import sample_injections
        s = sample_injections(net, seed=int(rng.integers(1e6)))
        try:
            pf = to_branch_flow(net, solve_power_flow(net, s), s)
        except Exception:
            continue
        w_hat = linear_voltage(net, s)
        if any(w_hat[b.id] > b.v_max or pf.v[b.id] < b.v_min
               for b in net.non_root_buses()):
            continue
        assert hi.objective_value <= objective_value(net, pf, LOSS) + 1e-7


def test_lemma_bounds_on_solver_points():
    rng = np.random.default_rng(41)
    for _ in range(8):
        net = random_network(rng, int(rng.integers(3, 18)), require_c1=False)
        try:
            sol = solve_network(net, SOCP, LOSS)
        except InfeasibleError:
            continue
        assert check_lemma1_bounds(sol.point, net).ok(1e-7)


def test_discrete_capacitor_enumeration():
    from opfkit import resolve_discrete_capacitors

    net = chain_network([(0.01, 0.02)] * 2,
                        {1: Fixed(-0.3, -0.1), 2: CapacitorDiscrete(0.2)},
                        v_min=0.5)
    sol = resolve_discrete_capacitors(net, SOCP, LOSS)
    q = sol.point.s[2].imag
    assert min(abs(q), abs(q - 0.2)) < 1e-5


def test_sce47_exact_solve_recovers_physical_voltages(sce47):
    sol = solve_network(sce47, SOCP_M, LOSS, TIGHT)
    assert sol.exact
    from opfkit import pf_residual

    res = pf_residual(sce47, sol.recovered.V, sol.point.s)
    assert max(abs(r) for r in res.values()) <= 1e-6


def test_quadratic_substation_cost_through_the_solver():
    from opfkit import Bus, Line, network_from_components
    from opfkit.netmodel import QuadraticCost, SUM_COST

    buses = [Bus(0, 0.81, math.inf, cost=QuadraticCost(2.0, 1.0, 0.25)),
             Bus(1, 0.81, 1.21, Fixed(-0.3, -0.1))]
    net = network_from_components(
        1.0, buses, [Line(1, 0, 0.02, 0.04)], objective=SUM_COST)
    sol = solve_network(net, SOCP, SUM_COST, TIGHT)
    assert sol.exact
    # the load pins the flow, so the substation draw follows from power flow
    pf = to_branch_flow(net, solve_power_flow(net, {1: -0.3 - 0.1j}),
                        {1: -0.3 - 0.1j})
    p0 = pf.s0.real
    expect = (2.0 * p0 + 1.0) * p0 + 0.25 + (-0.3)
    assert sol.objective_value == pytest.approx(expect, abs=1e-6)
    assert sol.point.s0.real == pytest.approx(p0, abs=1e-6)
