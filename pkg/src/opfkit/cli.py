"""Command-line front end.

Commands: validate, conditions, solve, epsilon, certify, powerflow, emit-data.
Reports go to stdout (or --output) as canonical JSON or fixed-width text;
identical inputs and flags produce byte-identical output. Exit codes follow
a per-command contract, with 2 reserved for hard errors everywhere.
"""

from __future__ import annotations

import argparse
import cmath
import importlib.resources
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import certificate, lindistflow, presets, socp
from .branchflow import point_from_json, point_to_json
from .errors import OpfkitError
from .netmodel import Network, load_network, path_to_root
from .powerflow import solve_power_flow, to_branch_flow
from .reportfmt import table, to_json

DATA_FILES = ("sce47.json", "sce56.json", "twobus_counterexample.json",
              "ieee13_stub.json")


@dataclass
class RunConfig:
    command: str
    paths: list[str]
    fmt: str = "json"
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    exact_tol: float = 1e-6
    preset: str | None = None
    injections: str | None = None
    samples: int | None = None
    seed: int = 0
    variant: str = socp.SOCP_M
    objective: str | None = None
    step: float | None = None
    output: str | None = None

    def solver_settings(self) -> socp.SolveSettings:
        return socp.SolveSettings(feas_tol=self.feas_tol, gap_tol=self.gap_tol,
                                  max_iter=self.max_iter, exact_tol=self.exact_tol)

    def epsilon_policy(self):
        chosen = [p for p in (self.preset, self.injections, self.samples)
                  if p is not None]
        if len(chosen) != 1:
            raise OpfkitError("exactly one of --preset/--injections/--samples is required")


def _emit(config: RunConfig, doc: dict, text: str | None = None):
    payload = to_json(doc) if config.fmt == "json" else (text if text is not None
                                                         else to_json(doc))
    if config.output:
        Path(config.output).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def _load_net(path: str) -> Network:
    return load_network(Path(path).read_text(encoding="utf-8"))


def _load_injections(net: Network, path: str) -> dict[int, complex]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise OpfkitError("injection file must be a JSON array of {bus, p, q}")
    return {int(rec["bus"]): complex(float(rec["p"]), float(rec["q"])) for rec in doc}


# ---------------------------------------------------------------------------
# commands

def cmd_validate(config: RunConfig) -> int:
    try:
        net = _load_net(config.paths[0])
    except OpfkitError as e:
        _emit(config, {"valid": False, "error": str(e)},
              text=f"invalid: {e}\n")
        return 2
    doc = {
        "valid": True,
        "buses": len(net.buses),
        "lines": len(net.lines),
        "substation": net.root,
        "merges": [{"kept": m.kept, "removed": m.removed} for m in net.merge_log],
        "max_depth": max((len(path_to_root(net, b.id)) for b in net.buses), default=0),
        "objective": net.objective,
    }
    text = (f"valid network: {doc['buses']} buses, {doc['lines']} lines, "
            f"substation {net.root}, {len(net.merge_log)} zero-impedance merges\n")
    for m in net.merge_log:
        text += f"  merged bus {m.removed} into {m.kept}\n"
    _emit(config, doc, text=text)
    return 0


def cmd_conditions(config: RunConfig) -> int:
    net = _load_net(config.paths[0])
    bounds = None
    if config.preset is not None:
        bounds = presets.preset_bounds(net, config.preset)
    report = lindistflow.condition_report(net, bounds)
    doc = report.to_json_dict()
    if report.c1 is None:
        _emit(config, doc, text=f"C1 not checkable: {report.c1_unavailable_reason}\n")
        return 1
    if config.fmt == "text":
        rows = [[f"{r.child}->{r.parent}", r.rx, r.b_lo, r.b_hi,
                 r.margin1, r.margin2, r.holds] for r in report.c1.lines]
        text = table(["line", "r/x", "b_lo", "b_hi", "margin1", "margin2", "ok"], rows)
        lo, hi = report.minimum_interval
        text += (f"\nC1 holds: {report.c1.holds}"
                 f"\nr/x range: [{report.rx.lo:.6g}, {report.rx.hi:.6g}]"
                 f"\nminimum interval: ({lo:.6g}, {hi:.6g})"
                 f"\ninterval contains r/x range: {report.interval_contains_rx_range}\n")
    else:
        text = None
    _emit(config, doc, text=text)
    return 0 if report.c1.holds else 1


def _solution_doc(net: Network, sol: socp.SocpSolution) -> dict:
    buses = []
    for b in net.buses:
        rec: dict = {"id": b.id}
        if b.id == net.root:
            rec["p"], rec["q"] = sol.point.s0.real, sol.point.s0.imag
        else:
            rec["p"], rec["q"] = sol.point.s[b.id].real, sol.point.s[b.id].imag
        rec["v"] = sol.point.v[b.id]
        if sol.recovered is not None:
            V = sol.recovered.V[b.id]
            rec["v_mag"] = abs(V)
            rec["v_angle_rad"] = cmath.phase(V)
        buses.append(rec)
    lines = [{"child": ln.child, "parent": ln.parent,
              "P": sol.point.S[ln.child].real, "Q": sol.point.S[ln.child].imag,
              "ell": sol.point.ell[ln.child], "gap": sol.gaps.gaps[ln.child]}
             for ln in net.lines]
    return {
        "variant": sol.variant,
        "objective_kind": sol.objective,
        "objective": sol.objective_value,
        "exact": sol.exact,
        "max_relative_gap": sol.gaps.max_relative,
        "s0": {"p": sol.point.s0.real, "q": sol.point.s0.imag},
        "buses": buses,
        "lines": lines,
        "solver_stats": {
            "status": sol.stats.status,
            "iterations": sol.stats.iterations,
            "primal_residual": sol.stats.primal_residual,
            "dual_residual": sol.stats.dual_residual,
        },
    }


def cmd_solve(config: RunConfig) -> int:
    net = _load_net(config.paths[0])
    sol = socp.solve_network(net, config.variant, config.objective,
                             config.solver_settings())
    doc = _solution_doc(net, sol)
    if config.fmt == "text":
        rows = [[f"{l['child']}->{l['parent']}", l["P"], l["Q"], l["ell"], l["gap"]]
                for l in doc["lines"]]
        text = table(["line", "P", "Q", "ell", "gap"], rows)
        text += (f"\nvariant {sol.variant}, objective {sol.objective_value:.9g}, "
                 f"exact: {sol.exact} (max relative gap {sol.gaps.max_relative:.3g})\n")
    else:
        text = None
    _emit(config, doc, text=text)
    if sol.stats.status != "optimal":
        return 2
    return 0 if sol.exact else 1


def cmd_epsilon(config: RunConfig) -> int:
    config.epsilon_policy()
    net = _load_net(config.paths[0])
    if config.injections is not None:
        s = _load_injections(net, config.injections)
        rep = lindistflow.epsilon_metric(net, s=s)
    elif config.samples is not None:
        rep = lindistflow.epsilon_metric(net, samples=config.samples, seed=config.seed)
    else:
        rep = lindistflow.epsilon_metric(net, preset=config.preset)
    vmax_vals = sorted({b.v_max for b in net.non_root_buses() if math.isfinite(b.v_max)})
    doc = {
        "epsilon": rep.epsilon,
        "argmax_bus": rep.argmax_bus,
        "policy": rep.policy,
        "sampled_lower_bound": rep.sampled_lower_bound,
        "tightened_upper_bounds": [{"v_max": vm, "v_max_minus_epsilon": vm - rep.epsilon}
                                   for vm in vmax_vals],
    }
    text = (f"epsilon = {rep.epsilon:.6g} at bus {rep.argmax_bus} ({rep.policy})\n"
            + "".join(f"tightened bound: {vm:.6g} -> {vm - rep.epsilon:.6g}\n"
                      for vm in vmax_vals))
    _emit(config, doc, text=text)
    return 0


def cmd_certify(config: RunConfig) -> int:
    from .branchflow import feasibility

    net = _load_net(config.paths[0])
    sol_doc = json.loads(Path(config.paths[1]).read_text(encoding="utf-8"))
    point = point_from_json(net, sol_doc)
    audit = feasibility(net, point)
    if audit.voltage_drop > 1e-6 or audit.conservation > 1e-6:
        raise OpfkitError(
            "solution file is not affine-feasible for this network "
            f"(voltage-drop residual {audit.voltage_drop:.3g}, "
            f"conservation residual {audit.conservation:.3g})")
    line = certificate.find_violating_line(point, net, tol=config.exact_tol)
    if line is None:
        _emit(config, {"exact": True, "improvement": None},
              text="point is exact; nothing to improve\n")
        return 1
    if config.step is not None:
        result = certificate.construct_improved_point(point, net, line, config.step)
    else:
        try:
            result = certificate.improve_with_line_search(point, net, line)
        except OpfkitError as e:
            doc = {"exact": False, "violating_line": [line.child, line.parent],
                   "error": str(e)}
            last = getattr(e, "last_result", None)
            if last is not None:
                doc["full_slack_audit"] = {
                    "cone_ok": last.cone_ok, "voltage_ok": last.voltage_ok,
                    "affine_ok": last.affine_ok,
                    "max_voltage_violation": last.max_voltage_violation,
                }
            _emit(config, doc, text=f"audit failure: {e}\n")
            return 2
    doc = {
        "exact": False,
        "violating_line": [line.child, line.parent],
        "step": result.step,
        "objective_delta": result.objective_delta,
        "feasible": result.feasible,
        "audit": {
            "cone_ok": result.cone_ok,
            "voltage_ok": result.voltage_ok,
            "affine_ok": result.affine_ok,
            "injections_unchanged": result.injections_unchanged,
            "max_voltage_violation": result.max_voltage_violation,
        },
        "accepted": result.accepted(),
        "improved_point": point_to_json(net, result.improved),
    }
    text = (f"violating line {line.child}->{line.parent}; step {result.step:.6g}; "
            f"objective delta {result.objective_delta:.6g}; feasible {result.feasible}\n")
    _emit(config, doc, text=text)
    return 0 if result.accepted() else 2


def cmd_powerflow(config: RunConfig) -> int:
    net = _load_net(config.paths[0])
    if config.injections is not None:
        s = _load_injections(net, config.injections)
    elif config.preset is not None:
        s = presets.preset_injections(net, config.preset)
    else:
        raise OpfkitError("powerflow needs --preset or --injections")
    sol = solve_power_flow(net, s)
    point = to_branch_flow(net, sol, s)
    doc = point_to_json(net, point)
    doc["iterations"] = sol.iterations
    doc["residual_norm"] = sol.residual_norm
    for rec in doc["buses"]:
        V = sol.V[rec["id"]]
        rec["v_mag"] = abs(V)
        rec["v_angle_rad"] = cmath.phase(V)
    text = (f"power flow converged in {sol.iterations} sweeps, "
            f"residual {sol.residual_norm:.3g}\n")
    _emit(config, doc, text=text)
    return 0


def cmd_emit_data(config: RunConfig) -> int:
    target = Path(config.paths[0] if config.paths else ".")
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name in DATA_FILES:
        payload = importlib.resources.files("opfkit.data").joinpath(name).read_text()
        (target / name).write_text(payload, encoding="utf-8")
        written.append(str(target / name))
    _emit(config, {"written": written},
          text="".join(f"wrote {p}\n" for p in written))
    return 0


# ---------------------------------------------------------------------------

def _common_flags(parser: argparse.ArgumentParser, suppress: bool):
    # the same flags are accepted before and after the subcommand; the
    # subcommand copy only overrides when given explicitly
    d = argparse.SUPPRESS if suppress else None
    kw = {"default": d} if suppress else {}
    parser.add_argument("--format", choices=("json", "text"), dest="fmt",
                        **(kw or {"default": "json"}))
    parser.add_argument("--feas-tol", type=float, **(kw or {"default": 1e-8}))
    parser.add_argument("--gap-tol", type=float, **(kw or {"default": 1e-8}))
    parser.add_argument("--exact-tol", type=float, **(kw or {"default": 1e-6}))
    parser.add_argument("--max-iter", type=int, **(kw or {"default": 200}))
    parser.add_argument("--output", **(kw or {"default": None}),
                        help="write the report to a file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="opfkit",
        description="conic relaxations of optimal power flow on radial networks")
    _common_flags(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _common_flags(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=(
        lambda **kw: argparse.ArgumentParser(parents=[common], **kw)))

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network")

    p = sub.add_parser("conditions", help="exactness condition report")
    p.add_argument("network")
    p.add_argument("--preset", choices=presets.BOUND_PRESETS,
                   help="bound scenario (default: bounds from the device sets)")

    p = sub.add_parser("solve", help="solve a conic relaxation")
    p.add_argument("network")
    p.add_argument("--variant", choices=socp.VARIANTS, default=socp.SOCP_M)
    p.add_argument("--objective", choices=("loss", "sum_cost"), default=None)

    p = sub.add_parser("epsilon", help="closeness of the linear voltage model")
    p.add_argument("network")
    p.add_argument("--preset", choices=presets.INJECTION_PRESETS)
    p.add_argument("--injections", help="JSON array of {bus, p, q}")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("certify", help="improvement construction on a solution file")
    p.add_argument("network")
    p.add_argument("solution")
    p.add_argument("--step", type=float, default=None,
                   help="fixed slack reduction (default: halving line search)")

    p = sub.add_parser("powerflow", help="exact power flow at an operating point")
    p.add_argument("network")
    p.add_argument("--preset", choices=presets.INJECTION_PRESETS)
    p.add_argument("--injections")

    p = sub.add_parser("emit-data", help="write the bundled network files")
    p.add_argument("directory", nargs="?", default=".")
    return ap


COMMANDS = {
    "validate": cmd_validate,
    "conditions": cmd_conditions,
    "solve": cmd_solve,
    "epsilon": cmd_epsilon,
    "certify": cmd_certify,
    "powerflow": cmd_powerflow,
    "emit-data": cmd_emit_data,
}


def config_from_args(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    paths = [p for p in (getattr(ns, "network", None), getattr(ns, "solution", None),
                         getattr(ns, "directory", None)) if p is not None]
    cfg = RunConfig(
        command=ns.command, paths=paths, fmt=ns.fmt,
        feas_tol=ns.feas_tol, gap_tol=ns.gap_tol, max_iter=ns.max_iter,
        exact_tol=ns.exact_tol, output=ns.output,
        preset=getattr(ns, "preset", None),
        injections=getattr(ns, "injections", None),
        samples=getattr(ns, "samples", None),
        seed=getattr(ns, "seed", 0),
        variant=getattr(ns, "variant", socp.SOCP_M),
        objective=getattr(ns, "objective", None),
        step=getattr(ns, "step", None),
    )
    if cfg.feas_tol <= 0 or cfg.gap_tol <= 0 or cfg.exact_tol <= 0:
        raise OpfkitError("tolerances must be positive")
    return cfg


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv if argv is not None else sys.argv[1:])
        return COMMANDS[cfg.command](cfg)
    except OpfkitError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except FileNotFoundError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
