"""Linear branch-flow quantities, coefficient checkers, closeness metric."""

import math
import time

import numpy as np
import pytest

from opfkit import (Box, Bus, Fixed, Line,
                    ValidationError, a_coefficients, check_c1,
                    check_proposition_conditions, check_well_constrained,
                    epsilon_metric, linear_voltage, network_from_components,
                    rx_range, subtree_injection)
from opfkit.lindistflow import linear_flow

from conftest import chain_network, random_network, two_bus


def zero_s(net):
    return {b.id: 0j for b in net.non_root_buses()}


# ---------------------------------------------------------------------------
# linear flow and voltage

def test_subtree_injection_path():
    net = chain_network([(0.01, 0.01), (0.01, 0.01)], {})
    s = {1: 1 + 1j, 2: -2 - 1j}
    sh = subtree_injection(net, s)
    assert sh[2] == -2 - 1j
    assert sh[1] == -1 + 0j


def test_subtree_injection_zero_and_star():
    net = chain_network([(0.01, 0.01), (0.01, 0.01)], {})
    assert all(v == 0 for v in subtree_injection(net, zero_s(net)).values())
    star = network_from_components(
        1.0,
        [Bus(0, 0.81, math.inf), Bus(1, 0.81, 1.21), Bus(2, 0.81, 1.21),
         Bus(3, 0.81, 1.21)],
        [Line(1, 0, 0.01, 0.01), Line(2, 1, 0.01, 0.01), Line(3, 1, 0.01, 0.01)])
    sh = subtree_injection(star, {1: 0.1 + 0j, 2: -0.2 + 0.05j, 3: 0.3 - 0.1j})
    assert sh[1] == pytest.approx(0.2 - 0.05j)


def test_subtree_injection_dimension_mismatch():
    net = two_bus()
    with pytest.raises(ValidationError):
        subtree_injection(net, {})
    with pytest.raises(ValidationError):
        subtree_injection(net, {1: 0j, 7: 0j})


def test_linear_voltage_two_bus_hand_value():
    net = two_bus(r=0.1, x=0.2)
    w = linear_voltage(net, {1: -0.1 - 0.05j})
    assert w[0] == 1.0
    assert w[1] == pytest.approx(1.0 + 2 * (0.1 * -0.1 + 0.2 * -0.05), abs=1e-15)
    assert w[1] == pytest.approx(0.96)


def test_linear_voltage_zero_injections(sce47):
    w = linear_voltage(sce47, zero_s(sce47))
    assert all(v == pytest.approx(sce47.v0) for v in w.values())


def test_linear_voltage_counterexample_exceeds_ceiling(counterexample_net):
    w = linear_voltage(counterexample_net, {1: 1.0 + 0j})
    assert w[1] == pytest.approx(1.2)
    assert w[1] > counterexample_net.bus(1).v_max


def test_linear_recursions_consistency(sce47, sce56):
    rng = np.random.default_rng(7)
    for net in (sce47, sce56, random_network(rng, 25, require_c1=False)):
        s = {b.id: complex(rng.normal(0, 0.1), rng.normal(0, 0.1))
             for b in net.non_root_buses()}
        lf = linear_flow(net, s)
        for ln in net.lines:
            children_sum = sum(lf.s_hat[c] for c in net.children_of(ln.child))
            assert abs(lf.s_hat[ln.child] - (s[ln.child] + children_sum)) < 1e-12
            drop = lf.w_hat[ln.parent] - lf.w_hat[ln.child]
            expect = -2 * (ln.z.conjugate() * lf.s_hat[ln.child]).real
            assert abs(drop - expect) < 1e-12


# ---------------------------------------------------------------------------
# coefficients and C1

def test_a_coefficients_no_reverse_flow_is_identity():
    net = chain_network([(0.01, 0.02)] * 3,
                        {1: Fixed(-0.1, -0.02), 2: Fixed(-0.05, 0.0)})
    coef = a_coefficients(net)
    for b in (0, 1, 2, 3):
        assert coef.a1[b] == 1.0 and coef.a4[b] == 1.0
        assert coef.a2[b] == 0.0 and coef.a3[b] == 0.0


def test_a_coefficients_three_bus_hand_values():
    # independent evaluation of the defining products/sums
    net = chain_network([(0.01, 0.02)] * 2, {}, v_min=0.9025)
    bounds = {1: (0.5, 0.0), 2: (0.5, 0.0)}
    coef = a_coefficients(net, bounds)
    assert coef.a1[0] == 1.0 and coef.a2[0] == 0.0
    assert coef.a1[1] == pytest.approx(1 - 2 * 0.01 * 1.0 / 0.9025, rel=1e-12)
    assert coef.a1[1] == pytest.approx(0.977839, abs=1e-6)
    assert coef.a2[1] == 0.0
    assert coef.a3[1] == pytest.approx(2 * 0.02 * 1.0 / 0.9025, rel=1e-12)
    assert coef.a3[1] == pytest.approx(0.044321, abs=1e-6)
    assert coef.a4[1] == 1.0
    # deeper bus accumulates both lines
    assert coef.a1[2] == pytest.approx(coef.a1[1] * (1 - 2 * 0.01 * 0.5 / 0.9025))


def test_a_coefficients_require_finite_bounds():
    net = two_bus(injection=Box(0.0, math.inf, 0.0, 0.0))
    with pytest.raises(ValidationError):
        a_coefficients(net)


def test_c1_holds_without_generation():
    net = chain_network([(0.01, 0.02)] * 4, {k: Fixed(-0.05, -0.01)
                                             for k in range(1, 5)})
    rep = check_c1(net)
    assert rep.holds
    for rec, ln in zip(rep.lines, net.lines):
        # margins reduce to the raw impedances when the coefficients are identity
        assert rec.margin1 == pytest.approx(ln.r)
        assert rec.margin2 == pytest.approx(ln.x)


def test_c1_interval_equivalence_random():
    rng = np.random.default_rng(3)
    for _ in range(40):
        net = random_network(rng, int(rng.integers(3, 18)), require_c1=False,
                             scale=float(rng.choice([0.5, 2.0, 8.0])))
        rep = check_c1(net)
        by_interval = all(rec.b_lo < rec.rx < rec.b_hi for rec in rep.lines)
        assert rep.holds == by_interval


def test_c1_monotone_in_bounds():
    from opfkit import injection_box

    rng = np.random.default_rng(11)
    for _ in range(25):
        net = random_network(rng, int(rng.integers(3, 15)), require_c1=False,
                             scale=float(rng.choice([1.0, 4.0, 16.0])))
        big = {}
        for b in net.non_root_buses():
            _, p_hi, _, q_hi = injection_box(b.injection)
            big[b.id] = (max(p_hi, 0.0) * 1.5 + 0.01, max(q_hi, 0.0) * 1.5 + 0.01)
        small = {i: (p * 0.25, q * 0.25) for i, (p, q) in big.items()}
        if check_c1(net, big).holds:
            assert check_c1(net, small).holds


def test_rx_range_single_line_and_undefined():
    net = two_bus(r=0.05, x=0.05)
    rr = rx_range(net)
    assert (rr.lo, rr.hi) == (1.0, 1.0)
    assert rr.undefined_lines == ()
    net2 = chain_network([(0.05, 0.05), (0.02, 0.0)], {})
    rr2 = rx_range(net2)
    assert rr2.undefined_lines == ((2, 1),)
    assert (rr2.lo, rr2.hi) == (1.0, 1.0)


def test_a_coefficients_linear_runtime():
    # one pass per bus: chains of 1e4 and 1e5 buses should scale ~linearly
    def build(n):
        buses = [Bus(0, 0.81, math.inf)]
        lines = []
        for i in range(1, n + 1):
            buses.append(Bus(i, 0.81, 1.21, Fixed(0.001, 0.0005)))
            lines.append(Line(i, i - 1, 1e-5, 2e-5))
        return network_from_components(1.0, buses, lines)

    def timed(n):
        net = build(n)
        t0 = time.perf_counter()
        a_coefficients(net)
        return time.perf_counter() - t0

    t4 = max(timed(10_000), 1e-4)
    t5 = timed(100_000)
    assert t5 / t4 < 40, f"superlinear scaling: {t4:.4f}s -> {t5:.4f}s"


# ---------------------------------------------------------------------------
# well-constrained lines

def test_well_constrained_no_lower_bounds():
    net = two_bus(injection=Box(-math.inf, 0.2, -math.inf, 0.1))
    verdicts = check_well_constrained(net)
    v = verdicts[(1, 0)]
    assert v.ok
    # the canonical right-half-circle placement must be admissible
    assert all(abs(a) <= math.pi / 2 + 1e-12 for a in v.angles)


def test_well_constrained_all_bounds_theta_45deg():
    # upper bounds only: two angles a quarter-circle apart, fits easily
    net = two_bus(r=0.1, x=0.1,   # theta = pi/4
                  injection=Box(-math.inf, 0.1, -math.inf, 0.1))
    assert check_well_constrained(net)[(1, 0)].ok
    # a fully bounded box already spreads its four angles a half-circle apart;
    # eight finite bounds on a line cover the circle and nothing fits
    net1 = two_bus(r=0.1, x=0.1, injection=Box(-0.1, 0.1, -0.1, 0.1))
    assert not check_well_constrained(net1)[(1, 0)].ok
    buses3 = [Bus(0, 0.81, math.inf),
              Bus(1, 0.81, 1.21, Box(-0.1, 0.1, -0.1, 0.1)),
              Bus(2, 0.81, 1.21, Box(-0.1, 0.1, -0.1, 0.1))]
    lines3 = [Line(1, 0, 0.1, 0.1), Line(2, 1, 0.1, 0.1)]
    net3 = network_from_components(1.0, buses3, lines3)
    assert not check_well_constrained(net3)[(2, 1)].ok


def test_well_constrained_case_b():
    # r >= x, lower real bounds and the child's lower reactive bound removed
    buses = [Bus(0, 0.81, math.inf),
             Bus(1, 0.81, 1.21, Box(-math.inf, 0.1, -math.inf, 0.1)),
             Bus(2, 0.81, 1.21, Box(-math.inf, 0.2, -0.3, 0.2))]
    lines = [Line(1, 0, 0.2, 0.1), Line(2, 1, 0.2, 0.1)]
    net = network_from_components(1.0, buses, lines)
    v = check_well_constrained(net)[(2, 1)]
    assert v.ok
    assert v.alpha is not None


# ---------------------------------------------------------------------------
# special-case conditions

def test_prop_conditions_no_generation():
    net = chain_network([(0.01, 0.02)] * 3, {1: Fixed(-0.1, -0.01)})
    rep = check_proposition_conditions(net)
    assert rep.cond_i


def test_prop_conditions_uniform_ratio():
    net = chain_network([(0.01, 0.02), (0.02, 0.04), (0.005, 0.01)],
                        {1: Fixed(0.01, 0.005)})
    rep = check_proposition_conditions(net)
    assert rep.cond_ii
    assert all(m > 0 for m in rep.margins_ii.values())


def test_prop_conditions_sce47_ratios_not_uniform(sce47):
    rep = check_proposition_conditions(sce47)
    assert not rep.cond_ii


def test_load_over_satisfaction_flag():
    net = two_bus(injection=Box(-math.inf, 0.0, -math.inf, 0.0))
    assert check_proposition_conditions(net).load_over_satisfaction
    assert not check_proposition_conditions(two_bus()).load_over_satisfaction


# ---------------------------------------------------------------------------
# closeness metric

def test_epsilon_zero_injections(sce47):
    rep = epsilon_metric(sce47, s=zero_s(sce47))
    assert rep.epsilon == pytest.approx(0.0, abs=1e-12)


def test_epsilon_policy_exclusivity(sce47):
    with pytest.raises(ValidationError):
        epsilon_metric(sce47)
    with pytest.raises(ValidationError):
        epsilon_metric(sce47, s=zero_s(sce47), preset="paper-peak")


def test_epsilon_nonnegative_and_sampling():
    rng = np.random.default_rng(5)
    net = random_network(rng, 10, require_c1=False)
    rep = epsilon_metric(net, samples=8, seed=1)
    assert rep.epsilon >= 0.0
    assert rep.sampled_lower_bound
    point = epsilon_metric(net, preset="paper-peak")
    assert point.epsilon >= 0.0
    assert not point.sampled_lower_bound


# ---------------------------------------------------------------------------
# semicircle fitting properties

from hypothesis import given, settings as hsettings
from hypothesis import strategies as hst

angle_lists = hst.lists(hst.floats(-10 * math.pi, 10 * math.pi,
                                   allow_nan=False), max_size=9)


@given(angle_lists, hst.integers(-3, 3))
@hsettings(max_examples=300)
def test_semicircle_fit_invariant_under_full_turns(angles, turns):
    from opfkit.lindistflow import _semicircle_fit

    shifted = [a + 2 * math.pi * turns for a in angles]
    ok_a, _, margin_a = _semicircle_fit(list(angles))
    ok_b, _, margin_b = _semicircle_fit(shifted)
    assert ok_a == ok_b
    if ok_a:
        assert margin_a == pytest.approx(margin_b, abs=1e-9)


@given(angle_lists)
@hsettings(max_examples=300)
def test_semicircle_witness_actually_covers(angles):
    from opfkit.lindistflow import _semicircle_fit, _wrap

    ok, alpha, margin = _semicircle_fit(list(angles))
    if not ok:
        return
    center = alpha + math.pi / 2
    # every angle within a quarter turn of the witness center, zero strictly inside
    for a in angles:
        assert abs(_wrap(a - center)) <= math.pi / 2 + 1e-9
    assert abs(_wrap(0.0 - center)) < math.pi / 2
    assert margin >= 1e-9


@given(angle_lists, hst.floats(-math.pi, math.pi, allow_nan=False))
@hsettings(max_examples=200)
def test_semicircle_fit_monotone_in_constraints(angles, extra):
    # adding one more finite-bound angle can never repair a failing line
    from opfkit.lindistflow import _semicircle_fit

    ok_more, _, _ = _semicircle_fit(list(angles) + [extra])
    ok_less, _, _ = _semicircle_fit(list(angles))
    if not ok_less:
        assert not ok_more


def test_condition_checks_are_parallel_safe(sce47):
    # the network is immutable; checkers are pure functions of (net, s)
    from concurrent.futures import ThreadPoolExecutor

    from opfkit.presets import preset_bounds

    def one(preset):
        rep = check_c1(sce47, preset_bounds(sce47, preset))
        return rep.holds, tuple(r.margin1 for r in rep.lines)

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(one, ["worst-case", "bad-case"] * 8))
    assert results[0::2] == [results[0]] * 8
    assert results[1::2] == [results[1]] * 8


def test_condition_report_aggregates_everything(sce56):
    from opfkit import condition_report
    from opfkit.presets import preset_bounds

    rep = condition_report(sce56, preset_bounds(sce56, "worst-case"))
    assert rep.c1 is not None and rep.c1.holds
    assert rep.interval_contains_rx_range is False
    doc = rep.to_json_dict()
    assert doc["c1"]["holds"] and not doc["c1"]["interval_contains_rx_range"]
    assert len(doc["c1"]["lines"]) == len(sce56.lines)
    # not checkable when any upper bound is infinite
    bad = condition_report(two_bus(injection=Box(0.0, math.inf, 0.0, 0.0)))
    assert bad.c1 is None and bad.c1_unavailable_reason
    assert bad.to_json_dict()["c1"]["checkable"] is False
