"""Conic relaxations of optimal power flow in branch-flow variables.

``build_relaxation`` assembles a self-contained conic program (affine
equalities, nonnegativity rows, second-order-cone blocks, quadratic-cost
terms) for either the plain relaxation or the modified one that replaces each
voltage upper bound by its affine linear-model surrogate. ``solve`` hands the
standard form to an interior-point engine behind a fixed contract: tolerance
settings and status semantics are pinned here so callers never depend on the
engine. Exactness measurement, voltage recovery, and the linear-model bound
checks operate on the extracted :class:`BranchFlowPoint`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .branchflow import (EXACTNESS_TOL, BranchFlowPoint, GapReport, check_lemma1_bounds,
                         exactness_gap, feasibility, objective_value)
from .errors import InfeasibleError, RecoveryError, SolverError, ValidationError
from .netmodel import (DEFAULT_COST, LOSS, OBJECTIVES, SUM_COST, Box, CapacitorDiscrete,
                       ConstantPF, Fixed, InjectionSum, InverterPV, LinearCost, Network,
                       QuadraticCost, convexify)
from .powerflow import PowerFlowSolution, pf_residual

SOCP = "socp"
SOCP_M = "socp_m"
VARIANTS = (SOCP, SOCP_M)


@dataclass(frozen=True)
class SolveSettings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    exact_tol: float = EXACTNESS_TOL
    verbose: bool = False

    def __post_init__(self):
        if self.feas_tol <= 0 or self.gap_tol <= 0 or self.exact_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")


@dataclass
class _Rows:
    """Triplet accumulator for one cone block."""
    data: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    rhs: list = field(default_factory=list)

    def add(self, coeffs: dict[int, float], b: float):
        r = len(self.rhs)
        for c, val in coeffs.items():
            if val != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.data.append(val)
        self.rhs.append(b)

    def __len__(self):
        return len(self.rhs)


@dataclass
class RelaxationProblem:
    """Standard-form conic program plus the maps to read a solution back.

    Constraint rows are grouped as ``A x + slack = b`` with the slack in a
    zero cone (equalities), a nonnegative cone, then a list of second-order
    cones. ``soc_dims`` records the cone sizes in row order.
    """
    net: Network
    variant: str
    objective: str
    n_vars: int
    A: sparse.csc_matrix
    b: np.ndarray
    n_eq: int
    n_ineq: int
    soc_dims: list[int]
    q: np.ndarray
    quad: sparse.csc_matrix
    obj_const: float
    p_idx: dict[int, int]
    q_idx: dict[int, int]
    v_idx: dict[int, int]
    flow_p_idx: dict[int, int]
    flow_q_idx: dict[int, int]
    ell_idx: dict[int, int]
    p0_idx: int
    q0_idx: int
    relaxed_discrete: tuple[tuple[int, int], ...]   # (bus, part index) of relaxed capacitors

    def extract_point(self, x: np.ndarray) -> BranchFlowPoint:
        """Read a solver iterate back into branch-flow variables.

        Squared voltages are rebuilt from the substation through the voltage
        drop equations rather than read off the iterate: the interior-point
        engine satisfies equality rows only to its (equilibrated) tolerance,
        and recovery amplifies any drop-equation slack by the line admittance.
        The polish keeps s, S, ell verbatim and moves each v by at most the
        iterate's own drop residual.
        """
        net = self.net
        s = {b.id: complex(x[self.p_idx[b.id]], x[self.q_idx[b.id]])
             for b in net.non_root_buses()}
        S = {ln.child: complex(x[self.flow_p_idx[ln.child]], x[self.flow_q_idx[ln.child]])
             for ln in net.lines}
        ell = {ln.child: float(x[self.ell_idx[ln.child]]) for ln in net.lines}
        s0 = complex(x[self.p0_idx], x[self.q0_idx])
        v = {net.root: net.v0}
        for b in net.topological_order():
            if b == net.root:
                continue
            ln = net.line_to_parent(b)
            flow = S[ln.child]
            v[b] = (v[ln.parent] + 2.0 * (ln.r * flow.real + ln.x * flow.imag)
                    - (ln.r ** 2 + ln.x ** 2) * ell[ln.child])
        return BranchFlowPoint(s, S, ell, v, s0)


def _path_aggregates(net: Network):
    """Per-bus cumulative path impedance and ancestor lists (deep to shallow)."""
    cum_r = {net.root: 0.0}
    cum_x = {net.root: 0.0}
    anc: dict[int, list[int]] = {net.root: [net.root]}
    for b in net.topological_order():
        if b == net.root:
            continue
        ln = net.line_to_parent(b)
        cum_r[b] = cum_r[ln.parent] + ln.r
        cum_x[b] = cum_x[ln.parent] + ln.x
        anc[b] = [b] + anc[ln.parent]
    return cum_r, cum_x, anc


def build_relaxation(net: Network, variant: str = SOCP_M,
                     objective: str | None = None,
                     shuffle_seed: int | None = None) -> RelaxationProblem:
    """Assemble the conic relaxation of the given variant.

    Injection sets are convexified (discrete capacitors relax to their
    interval and are recorded). Under the modified variant the per-bus
    voltage upper bound is replaced by the affine row bounding the linear
    squared-voltage surrogate, and the voltage variable keeps only its lower
    bound. ``shuffle_seed`` permutes the assembly order without changing the
    problem; useful for solution-uniqueness experiments.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    objective = objective if objective is not None else net.objective
    if objective not in OBJECTIVES:
        raise ValidationError(f"unknown objective {objective!r}")
    if objective == SUM_COST:
        f0 = net.buses[0].cost or DEFAULT_COST
        if isinstance(f0, LinearCost) and f0.a <= 0:
            raise ValidationError("substation cost must be strictly increasing")

    bus_order = list(net.non_root_buses())
    line_order = list(net.lines)
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
        rng.shuffle(bus_order)
        rng.shuffle(line_order)

    # variable layout
    nv = 0

    def new_var() -> int:
        nonlocal nv
        nv += 1
        return nv - 1

    p_idx = {b.id: new_var() for b in bus_order}
    q_idx = {b.id: new_var() for b in bus_order}
    v_idx = {b.id: new_var() for b in bus_order}
    flow_p = {ln.child: new_var() for ln in line_order}
    flow_q = {ln.child: new_var() for ln in line_order}
    ell_idx = {ln.child: new_var() for ln in line_order}
    p0 = new_var()
    q0 = new_var()

    # convexified device parts; single parts act on the bus variables directly
    parts: list[tuple[int, int, object, int, int]] = []   # bus, k, set, p var, q var
    relaxed: list[tuple[int, int]] = []
    eq = _Rows()
    for b in bus_order:
        conv = convexify(b.injection)
        members = conv.set.parts if isinstance(conv.set, InjectionSum) else (conv.set,)
        if isinstance(conv.set, InjectionSum):
            pvars = [new_var() for _ in members]
            qvars = [new_var() for _ in members]
            eq.add({p_idx[b.id]: 1.0, **{pv: -1.0 for pv in pvars}}, 0.0)
            eq.add({q_idx[b.id]: 1.0, **{qv: -1.0 for qv in qvars}}, 0.0)
        else:
            pvars = [p_idx[b.id]]
            qvars = [q_idx[b.id]]
        for k, part in enumerate(members):
            parts.append((b.id, k, part, pvars[k], qvars[k]))
            if isinstance(b.injection, CapacitorDiscrete) or (
                    isinstance(b.injection, InjectionSum)
                    and isinstance(b.injection.parts[k], CapacitorDiscrete)):
                relaxed.append((b.id, k))

    # flow conservation at every bus, and voltage drop along every line
    for ln in line_order:
        coeffs = {v_idx[ln.child]: 1.0,
                  flow_p[ln.child]: -2.0 * ln.r,
                  flow_q[ln.child]: -2.0 * ln.x,
                  ell_idx[ln.child]: ln.r ** 2 + ln.x ** 2}
        rhs = 0.0
        if ln.parent == net.root:
            rhs = net.v0
        else:
            coeffs[v_idx[ln.parent]] = -1.0
        eq.add(coeffs, rhs)
    for b in [net.buses[0]] + bus_order:
        re: dict[int, float] = {}
        im: dict[int, float] = {}
        for c in net.children_of(b.id):
            ln = net.line_to_parent(c)
            re[flow_p[c]] = 1.0
            re[ell_idx[c]] = -ln.r
            im[flow_q[c]] = 1.0
            im[ell_idx[c]] = -ln.x
        if b.id == net.root:
            re[p0] = 1.0
            im[q0] = 1.0
        else:
            re[p_idx[b.id]] = 1.0
            re[flow_p[b.id]] = re.get(flow_p[b.id], 0.0) - 1.0
            im[q_idx[b.id]] = 1.0
            im[flow_q[b.id]] = im.get(flow_q[b.id], 0.0) - 1.0
        eq.add(re, 0.0)
        eq.add(im, 0.0)

    # injection-set equality rows
    for bus, _k, part, pv, qv in parts:
        if isinstance(part, Fixed):
            eq.add({pv: 1.0}, part.p)
            eq.add({qv: 1.0}, part.q)
        elif isinstance(part, ConstantPF):
            eq.add({qv: 1.0, pv: -part.tan_phi}, 0.0)

    ineq = _Rows()
    for b in bus_order:
        ineq.add({v_idx[b.id]: -1.0}, -b.v_min)
        if variant == SOCP and math.isfinite(b.v_max):
            ineq.add({v_idx[b.id]: 1.0}, b.v_max)
    if variant == SOCP_M:
        cum_r, cum_x, anc = _path_aggregates(net)
        anc_set = {i: set(a) for i, a in anc.items()}
        for b in bus_order:
            if not math.isfinite(b.v_max):
                continue
            row: dict[int, float] = {}
            for m in net.non_root_buses():
                lca = next(a for a in anc[b.id] if a in anc_set[m.id])
                if cum_r[lca] != 0.0:
                    row[p_idx[m.id]] = 2.0 * cum_r[lca]
                if cum_x[lca] != 0.0:
                    row[q_idx[m.id]] = 2.0 * cum_x[lca]
            ineq.add(row, b.v_max - net.v0)

    for bus, _k, part, pv, qv in parts:
        if isinstance(part, Box):
            for var, lo, hi in ((pv, part.p_lo, part.p_hi), (qv, part.q_lo, part.q_hi)):
                if math.isfinite(lo):
                    ineq.add({var: -1.0}, -lo)
                if math.isfinite(hi):
                    ineq.add({var: 1.0}, hi)
        elif isinstance(part, InverterPV):
            ineq.add({pv: -1.0}, 0.0)
            ineq.add({pv: 1.0}, part.p_cap)
        elif isinstance(part, ConstantPF):
            if math.isfinite(part.p_lo):
                ineq.add({pv: -1.0}, -part.p_lo)
            if math.isfinite(part.p_hi):
                ineq.add({pv: 1.0}, part.p_hi)

    # second-order cones: inverter apparent-power limits, then one rotated
    # cone per line, ell * v_child >= P^2 + Q^2, written as a 4-dim cone
    soc = _Rows()
    soc_dims: list[int] = []
    for bus, _k, part, pv, qv in parts:
        if isinstance(part, InverterPV):
            soc.add({}, part.s_cap)
            soc.add({pv: -1.0}, 0.0)
            soc.add({qv: -1.0}, 0.0)
            soc_dims.append(3)
    for ln in line_order:
        le, vc = ell_idx[ln.child], v_idx[ln.child]
        soc.add({le: -1.0, vc: -1.0}, 0.0)
        soc.add({le: -1.0, vc: 1.0}, 0.0)
        soc.add({flow_p[ln.child]: -2.0}, 0.0)
        soc.add({flow_q[ln.child]: -2.0}, 0.0)
        soc_dims.append(4)

    # objective
    qvec = np.zeros(nv)
    quad = _Rows()
    const = 0.0

    def add_cost(cost, var):
        nonlocal const
        if isinstance(cost, LinearCost):
            qvec[var] += cost.a
            const += cost.b
        elif isinstance(cost, QuadraticCost):
            quad.add({var: 2.0 * cost.a2}, 0.0)
            qvec[var] += cost.a1
            const += cost.a0
        else:
            raise ValidationError(f"unsupported cost {cost!r}")

    if objective == LOSS:
        for ln in net.lines:
            qvec[ell_idx[ln.child]] += ln.r
        for b in net.non_root_buses():
            if b.cost is not None:
                add_cost(b.cost, p_idx[b.id])
    else:
        add_cost(net.buses[0].cost or DEFAULT_COST, p0)
        for b in net.non_root_buses():
            add_cost(b.cost or DEFAULT_COST, p_idx[b.id])

    n_eq, n_ineq = len(eq), len(ineq)
    rows_all = eq.rows + [r + n_eq for r in ineq.rows] + [r + n_eq + n_ineq for r in soc.rows]
    data_all = eq.data + ineq.data + soc.data
    cols_all = eq.cols + ineq.cols + soc.cols
    b_all = np.array(eq.rhs + ineq.rhs + soc.rhs)
    A = sparse.csc_matrix((data_all, (rows_all, cols_all)), shape=(len(b_all), nv))
    P = sparse.csc_matrix((quad.data, (quad.cols, quad.cols)), shape=(nv, nv))

    return RelaxationProblem(
        net=net, variant=variant, objective=objective, n_vars=nv,
        A=A, b=b_all, n_eq=n_eq, n_ineq=n_ineq, soc_dims=soc_dims,
        q=qvec, quad=P, obj_const=const,
        p_idx=p_idx, q_idx=q_idx, v_idx=v_idx,
        flow_p_idx=flow_p, flow_q_idx=flow_q, ell_idx=ell_idx,
        p0_idx=p0, q0_idx=q0, relaxed_discrete=tuple(relaxed))


# ---------------------------------------------------------------------------
# solving

@dataclass(frozen=True)
class SolverStats:
    status: str                   # optimal | infeasible | max_iter
    iterations: int
    primal_residual: float
    dual_residual: float
    solve_time: float
    raw_status: str


@dataclass(frozen=True)
class SocpSolution:
    point: BranchFlowPoint
    objective_value: float
    gaps: GapReport
    exact: bool
    recovered: PowerFlowSolution | None
    stats: SolverStats
    variant: str
    objective: str


def _run_clarabel(problem: RelaxationProblem, settings: SolveSettings):
    import clarabel

    cones = [clarabel.ZeroConeT(problem.n_eq),
             clarabel.NonnegativeConeT(problem.n_ineq)]
    cones += [clarabel.SecondOrderConeT(d) for d in problem.soc_dims]
    cfg = clarabel.DefaultSettings()
    cfg.verbose = settings.verbose
    cfg.max_iter = settings.max_iter
    cfg.tol_feas = settings.feas_tol
    cfg.tol_gap_abs = settings.gap_tol
    cfg.tol_gap_rel = settings.gap_tol
    solver = clarabel.DefaultSolver(problem.quad, problem.q, problem.A, problem.b,
                                    cones, cfg)
    return solver.solve()


def solve(problem: RelaxationProblem,
          settings: SolveSettings = SolveSettings()) -> SocpSolution:
    """Solve a built relaxation through the conic-solver contract.

    Returns a solution whose point satisfies all constraints to ``feas_tol``
    with relative duality gap at most ``gap_tol``. Primal infeasibility
    raises :class:`InfeasibleError` carrying the dual certificate; numerical
    breakdown raises :class:`SolverError`. Iteration exhaustion is reported
    through ``stats.status == "max_iter"`` with the last iterate attached.
    """
    sol = _run_clarabel(problem, settings)
    raw = str(sol.status)
    if raw in ("Solved", "AlmostSolved"):
        status = "optimal"
    elif raw in ("MaxIterations", "MaxTime"):
        status = "max_iter"
    elif raw == "PrimalInfeasible":
        raise InfeasibleError("relaxation is primal infeasible",
                              certificate=np.asarray(sol.z))
    elif raw == "DualInfeasible":
        raise SolverError("relaxation is unbounded (dual infeasible)")
    else:
        raise SolverError(f"conic solver failed: {raw}")

    x = np.asarray(sol.x)
    point = problem.extract_point(x)
    # an exhausted solver may hand back a cone-violating iterate; report it
    # instead of rejecting it. For optimal iterates, the voltage polish in
    # extract_point can push a tight cone negative by the iterate's drop
    # residual, which certification noise at the exactness scale must absorb.
    neg_guard = (max(settings.exact_tol, 10.0 * settings.feas_tol)
                 if status == "optimal" else math.inf)
    gaps = exactness_gap(point, tol=settings.exact_tol, feas_tol=neg_guard)
    exact = status == "optimal" and gaps.exact
    recovered = None
    if exact:
        # exactness is the cone property; on borderline-exact points of deep
        # low-impedance networks the strict recovery certificate may still
        # fail, in which case the solution ships without recovered voltages
        try:
            recovered = recover_voltages(point, problem.net, tol=settings.exact_tol)
        except RecoveryError:
            recovered = None
    stats = SolverStats(status=status, iterations=int(sol.iterations),
                        primal_residual=float(sol.r_prim),
                        dual_residual=float(sol.r_dual),
                        solve_time=float(sol.solve_time), raw_status=raw)
    obj = objective_value(problem.net, point, problem.objective)
    return SocpSolution(point=point, objective_value=obj, gaps=gaps, exact=exact,
                        recovered=recovered, stats=stats,
                        variant=problem.variant, objective=problem.objective)


def solve_network(net: Network, variant: str = SOCP_M, objective: str | None = None,
                  settings: SolveSettings = SolveSettings()) -> SocpSolution:
    return solve(build_relaxation(net, variant, objective), settings)


def resolve_discrete_capacitors(net: Network, variant: str, objective: str | None,
                                settings: SolveSettings = SolveSettings(),
                                interior_tol: float = 1e-6) -> SocpSolution:
    """Enumerate capacitor on/off states when the relaxed solve lands interior.

    Discrete capacitors are solved on their convexified interval first; if
    every relaxed value sits at an endpoint the solution is returned as-is,
    otherwise all on/off combinations are solved and the best feasible one
    wins. The sets are few and binary, so enumeration is exact.
    """
    base = solve_network(net, variant, objective, settings)
    prob = build_relaxation(net, variant, objective)
    loose = []
    for bus, k in prob.relaxed_discrete:
        inj = net.bus(bus).injection
        cap = inj.parts[k] if isinstance(inj, InjectionSum) else inj
        val = base.point.s[bus].imag
        if isinstance(inj, InjectionSum):
            # attribute the interior check to the whole bus; conservative
            val = base.point.s[bus].imag
        if min(abs(val), abs(val - cap.q_cap)) > interior_tol * max(cap.q_cap, 1.0):
            loose.append((bus, k, cap.q_cap))
    if not loose:
        return base
    best = None
    for mask in range(2 ** len(loose)):
        pinned_buses = []
        for j, (bus, k, q_cap) in enumerate(loose):
            setting = q_cap if (mask >> j) & 1 else 0.0
            pinned_buses.append((bus, k, setting))
        pinned = _pin_capacitors(net, pinned_buses)
        try:
            cand = solve_network(pinned, variant, objective, settings)
        except (InfeasibleError, SolverError):
            continue
        if best is None or cand.objective_value < best.objective_value:
            best = cand
    if best is None:
        raise InfeasibleError("no discrete capacitor setting is feasible")
    return best


def _pin_capacitors(net: Network, pins: list[tuple[int, int, float]]) -> Network:
    from .netmodel import Bus

    pin_map: dict[tuple[int, int], float] = {(b, k): v for b, k, v in pins}
    buses = []
    for b in net.buses:
        inj = b.injection
        if isinstance(inj, CapacitorDiscrete) and (b.id, 0) in pin_map:
            inj = Fixed(0.0, pin_map[(b.id, 0)])
        elif isinstance(inj, InjectionSum):
            new_parts = []
            for k, part in enumerate(inj.parts):
                if isinstance(part, CapacitorDiscrete) and (b.id, k) in pin_map:
                    new_parts.append(Fixed(0.0, pin_map[(b.id, k)]))
                else:
                    new_parts.append(part)
            inj = InjectionSum(tuple(new_parts))
        buses.append(Bus(b.id, b.v_min, b.v_max, inj, b.cost, b.merged_ids))
    return Network(buses, net.lines, net.v0, net.base, net.objective)


# ---------------------------------------------------------------------------
# recovery of physical voltages from an exact point

def recover_voltages(point: BranchFlowPoint, net: Network,
                     tol: float = EXACTNESS_TOL,
                     residual_tol: float = 1e-6) -> PowerFlowSolution:
    """Rebuild complex voltages from an exact branch-flow point.

    Magnitudes come from the squared-voltage variables; the angle difference
    across each line is the argument of ``v_child - conj(z) * S``, accumulated
    from the substation (fixed at angle 0). The result is certified against
    the nodal power-balance law.
    """
    gaps = exactness_gap(point, tol=tol)
    if not gaps.exact:
        raise RecoveryError(
            f"point is not exact (max relative cone slack {gaps.max_relative:.3e})")
    import cmath

    V = {net.root: complex(math.sqrt(point.v[net.root]), 0.0)}
    for b in net.topological_order():
        if b == net.root:
            continue
        ln = net.line_to_parent(b)
        w_off = point.v[b] - ln.z.conjugate() * point.S[b]
        theta = cmath.phase(V[ln.parent]) + cmath.phase(w_off)
        V[b] = cmath.rect(math.sqrt(point.v[b]), theta)
    res = pf_residual(net, V, point.s)
    worst = max(abs(r) for r in res.values()) if res else 0.0
    if worst > residual_tol:
        raise RecoveryError(f"recovered voltages violate power balance ({worst:.3e})")
    return PowerFlowSolution(V, point.s0, 0, worst)


# convenient re-exports so the relaxation surface is one import away
__all__ = [
    "SOCP", "SOCP_M", "VARIANTS", "SolveSettings", "RelaxationProblem",
    "SocpSolution", "SolverStats", "build_relaxation", "solve", "solve_network",
    "resolve_discrete_capacitors", "recover_voltages", "exactness_gap",
    "check_lemma1_bounds", "objective_value", "BranchFlowPoint", "feasibility",
]
