"""Radial distribution network model: data types, file ingestion, topology queries.

Everything downstream of this module works in per-unit. Voltages are carried as
squared magnitudes (the natural variable of the branch-flow formulation), so
``Network.v0`` and the per-bus ``v_min``/``v_max`` are per-unit squared.

Network files are UTF-8 JSON; see ``load_network`` for the schema. Lines listed
with zero impedance are treated as closed switches: the two end buses are merged
into one electrical node (injections summed, tighter voltage bounds kept).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import NetworkFormatError, TopologyError, ValidationError

INF = math.inf


# ---------------------------------------------------------------------------
# injection sets

@dataclass(frozen=True)
class Fixed:
    """Single-point injection set: s = p + iq."""
    p: float
    q: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle; any bound may be +-inf."""
    p_lo: float
    p_hi: float
    q_lo: float
    q_hi: float

    def __post_init__(self):
        if self.p_lo > self.p_hi or self.q_lo > self.q_hi:
            raise ValidationError(f"box bounds out of order: {self}")


@dataclass(frozen=True)
class CapacitorDiscrete:
    """Switched shunt capacitor: Re(s) = 0, Im(s) in {0, q_cap}."""
    q_cap: float

    def __post_init__(self):
        if self.q_cap < 0:
            raise ValidationError("capacitor nameplate must be >= 0")


@dataclass(frozen=True)
class InverterPV:
    """PV panel behind an inverter: 0 <= Re(s) <= p_cap, |s| <= s_cap."""
    p_cap: float
    s_cap: float

    def __post_init__(self):
        if self.p_cap < 0 or self.s_cap < 0:
            raise ValidationError("inverter ratings must be >= 0")


@dataclass(frozen=True)
class ConstantPF:
    """Controllable load at power factor eta: Im(s) = sqrt(1-eta^2)/eta * Re(s)."""
    p_lo: float
    p_hi: float
    eta: float

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError("power factor must be in (0, 1]")
        if self.p_lo > self.p_hi:
            raise ValidationError("constant-pf bounds out of order")

    @property
    def tan_phi(self) -> float:
        return math.sqrt(1.0 - self.eta * self.eta) / self.eta


@dataclass(frozen=True)
class InjectionSum:
    """Minkowski sum of several device sets on one bus.

    Arises when zero-impedance lines merge buses carrying different devices;
    not part of the file schema for authored inputs but accepted on re-load so
    merged networks round-trip.
    """
    parts: tuple

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValidationError("injection sum needs at least two parts")


InjectionSet = Union[Fixed, Box, CapacitorDiscrete, InverterPV, ConstantPF, InjectionSum]

ZERO_INJECTION = Fixed(0.0, 0.0)


def injection_box(s: InjectionSet) -> tuple[float, float, float, float]:
    """Tightest axis-aligned box (p_lo, p_hi, q_lo, q_hi) containing the set."""
    if isinstance(s, Fixed):
        return (s.p, s.p, s.q, s.q)
    if isinstance(s, Box):
        return (s.p_lo, s.p_hi, s.q_lo, s.q_hi)
    if isinstance(s, CapacitorDiscrete):
        return (0.0, 0.0, 0.0, s.q_cap)
    if isinstance(s, InverterPV):
        # q extremes +-s_cap are attained at p = 0 on the half-disc
        return (0.0, min(s.p_cap, s.s_cap), -s.s_cap, s.s_cap)
    if isinstance(s, ConstantPF):
        t = s.tan_phi
        if t == 0.0:
            return (s.p_lo, s.p_hi, 0.0, 0.0)
        return (s.p_lo, s.p_hi, t * s.p_lo, t * s.p_hi)
    if isinstance(s, InjectionSum):
        boxes = [injection_box(p) for p in s.parts]
        return tuple(sum(b[k] for b in boxes) for k in range(4))  # type: ignore[return-value]
    raise TypeError(f"unknown injection set {s!r}")


@dataclass(frozen=True)
class Convexified:
    """Convex relaxation of an injection set, with a flag when it enlarged it."""
    set: InjectionSet
    relaxed_discrete: bool


def convexify(s: InjectionSet) -> Convexified:
    """Convex hull description of an injection set.

    All variants are already convex except the discrete capacitor, which is
    relaxed to the interval Im(s) in [0, q_cap] and flagged.
    """
    if isinstance(s, CapacitorDiscrete):
        return Convexified(Box(0.0, 0.0, 0.0, s.q_cap), True)
    if isinstance(s, InjectionSum):
        parts = [convexify(p) for p in s.parts]
        return Convexified(InjectionSum(tuple(c.set for c in parts)),
                           any(c.relaxed_discrete for c in parts))
    return Convexified(s, False)


# ---------------------------------------------------------------------------
# costs

@dataclass(frozen=True)
class LinearCost:
    a: float
    b: float = 0.0

    def __call__(self, x: float) -> float:
        return self.a * x + self.b


@dataclass(frozen=True)
class QuadraticCost:
    a2: float
    a1: float
    a0: float = 0.0

    def __post_init__(self):
        if self.a2 < 0:
            raise ValidationError("quadratic cost must be convex (a2 >= 0)")

    def __call__(self, x: float) -> float:
        return (self.a2 * x + self.a1) * x + self.a0


CostSpec = Union[LinearCost, QuadraticCost]

# Network-level objective selector. LOSS minimises total line loss (sum of
# r * ell) plus any per-bus cost terms present in the data; SUM_COST minimises
# the sum of per-bus generation costs, buses without an explicit cost
# contributing identity f(x) = x (so the default SUM_COST is again total loss).
LOSS = "loss"
SUM_COST = "sum_cost"
OBJECTIVES = (LOSS, SUM_COST)

DEFAULT_COST = LinearCost(1.0, 0.0)


# ---------------------------------------------------------------------------
# buses, lines, network

@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float                      # per-unit squared
    v_max: float                      # per-unit squared, may be +inf
    injection: InjectionSet = ZERO_INJECTION
    cost: CostSpec | None = None
    merged_ids: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (0.0 < self.v_min <= self.v_max):
            raise ValidationError(
                f"bus {self.id}: need 0 < v_min <= v_max, got [{self.v_min}, {self.v_max}]")


@dataclass(frozen=True)
class Line:
    """Directed line child -> parent, parent being nearer the substation."""
    child: int
    parent: int
    r: float                          # per-unit
    x: float                          # per-unit

    def __post_init__(self):
        if self.r < 0 or self.x < 0:
            raise ValidationError(f"line ({self.child},{self.parent}): negative impedance")

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)

    @property
    def key(self) -> tuple[int, int]:
        return (self.child, self.parent)


@dataclass(frozen=True)
class BaseSystem:
    v_base_kv: float
    s_base_mva: float

    def __post_init__(self):
        if self.v_base_kv <= 0 or self.s_base_mva <= 0:
            raise ValidationError("base quantities must be positive")

    @property
    def z_base_ohm(self) -> float:
        return self.v_base_kv ** 2 / self.s_base_mva


@dataclass(frozen=True)
class MergeRecord:
    kept: int
    removed: int


class Network:
    """Immutable tree-topology distribution network in per-unit.

    ``buses[0]`` is the substation; every other bus has exactly one line to its
    parent. Construction validates the tree invariants and freezes topology
    lookups, so instances are safe for concurrent read.
    """

    def __init__(self, buses: Sequence[Bus], lines: Sequence[Line], v0: float,
                 base: BaseSystem | None = None, objective: str = LOSS,
                 merge_log: Sequence[MergeRecord] = ()):
        if v0 <= 0:
            raise ValidationError("substation squared voltage must be positive")
        if objective not in OBJECTIVES:
            raise ValidationError(f"unknown objective {objective!r}")
        self.buses = tuple(buses)
        self.lines = tuple(lines)
        self.v0 = float(v0)
        self.base = base
        self.objective = objective
        self.merge_log = tuple(merge_log)
        self._validate()

    # -- construction helpers ------------------------------------------------

    def _validate(self):
        if not self.buses:
            raise TopologyError("network has no buses")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise TopologyError("duplicate bus ids")
        self._bus_by_id = {b.id: b for b in self.buses}
        root = self.buses[0].id
        if len(self.lines) != len(self.buses) - 1:
            raise TopologyError(
                f"{len(self.buses)} buses need {len(self.buses) - 1} lines, got {len(self.lines)}")
        parent: dict[int, int] = {}
        line_by_child: dict[int, Line] = {}
        for ln in self.lines:
            if ln.child not in self._bus_by_id or ln.parent not in self._bus_by_id:
                raise TopologyError(f"line ({ln.child},{ln.parent}) references unknown bus")
            if ln.child == root:
                raise TopologyError("substation bus cannot be a line's child")
            if ln.child in line_by_child:
                raise TopologyError(f"bus {ln.child} has more than one parent line")
            if ln.r == 0.0 and ln.x == 0.0:
                raise ValidationError(
                    f"line ({ln.child},{ln.parent}) has zero impedance; merge it first")
            parent[ln.child] = ln.parent
            line_by_child[ln.child] = ln
        children: dict[int, list[int]] = {b.id: [] for b in self.buses}
        for ln in self.lines:
            children[ln.parent].append(ln.child)
        # breadth-first order from the root; reaching every bus certifies a tree
        order = [root]
        seen = {root}
        for b in order:
            for c in children[b]:
                if c in seen:
                    raise TopologyError("cycle detected")
                seen.add(c)
                order.append(c)
        if len(order) != len(self.buses):
            missing = sorted(set(ids) - seen)
            raise TopologyError(f"buses not connected to the substation: {missing}")
        self._parent = parent
        self._children = {k: tuple(v) for k, v in children.items()}
        self._line_by_child = line_by_child
        self._topo_order = tuple(order)
        if self.objective == SUM_COST:
            f0 = self.buses[0].cost or DEFAULT_COST
            if isinstance(f0, LinearCost) and f0.a <= 0:
                raise ValidationError("substation cost must be strictly increasing")
            if isinstance(f0, QuadraticCost) and f0.a1 <= 0:
                raise ValidationError(
                    "substation quadratic cost must have positive slope at the origin")

    # -- queries ---------------------------------------------------------

    @property
    def root(self) -> int:
        return self.buses[0].id

    @property
    def n(self) -> int:
        """Number of non-substation buses (= number of lines)."""
        return len(self.lines)

    def bus(self, i: int) -> Bus:
        try:
            return self._bus_by_id[i]
        except KeyError:
            raise ValidationError(f"unknown bus id {i}") from None

    def parent_of(self, i: int) -> int | None:
        self.bus(i)
        return self._parent.get(i)

    def children_of(self, i: int) -> tuple[int, ...]:
        self.bus(i)
        return self._children[i]

    def line_to_parent(self, i: int) -> Line:
        self.bus(i)
        if i == self.root:
            raise ValidationError("the substation has no parent line")
        return self._line_by_child[i]

    def topological_order(self) -> tuple[int, ...]:
        """Bus ids with every parent before its children; starts at the root."""
        return self._topo_order

    def non_root_buses(self) -> tuple[Bus, ...]:
        return self.buses[1:]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.buses == other.buses and self.lines == other.lines
                and self.v0 == other.v0 and self.base == other.base
                and self.objective == other.objective)

    def __repr__(self):
        return f"Network(n_buses={len(self.buses)}, n_lines={len(self.lines)}, v0={self.v0})"


def path_to_root(net: Network, i: int) -> list[Line]:
    """Lines from bus ``i`` down to the substation, in child -> parent order."""
    net.bus(i)
    path = []
    while i != net.root:
        ln = net.line_to_parent(i)
        path.append(ln)
        i = ln.parent
    return path


def subtree_buses(net: Network, line: Line | tuple[int, int]) -> frozenset[int]:
    """All buses whose route to the substation passes through ``line``.

    Includes the line's child itself.
    """
    child = line[0] if isinstance(line, tuple) else line.child
    if net.parent_of(child) is None:
        raise ValidationError(f"({child}, ...) is not a line of this network")
    if not isinstance(line, tuple):
        if net.line_to_parent(child) != line:
            raise ValidationError(f"line {line} does not belong to this network")
    stack = [child]
    out = set()
    while stack:
        b = stack.pop()
        out.add(b)
        stack.extend(net.children_of(b))
    return frozenset(out)


# ---------------------------------------------------------------------------
# merging of zero-impedance lines

def _merge_injections(a: InjectionSet, b: InjectionSet) -> InjectionSet:
    if a == ZERO_INJECTION:
        return b
    if b == ZERO_INJECTION:
        return a
    if isinstance(a, Fixed) and isinstance(b, Fixed):
        return Fixed(a.p + b.p, a.q + b.q)
    pa = a.parts if isinstance(a, InjectionSum) else (a,)
    pb = b.parts if isinstance(b, InjectionSum) else (b,)
    return InjectionSum(pa + pb)


def _merge_costs(a: CostSpec | None, b: CostSpec | None, kept: int, removed: int):
    if a is None and b is None:
        return None
    if isinstance(a, LinearCost) and isinstance(b, LinearCost) and a.a == b.a:
        return LinearCost(a.a, a.b + b.b)
    if a is None or b is None:
        # identity default on one side and an explicit cost on the other act on
        # different injections; their sum is not a function of the merged total
        raise ValidationError(
            f"cannot merge cost specs of buses {kept} and {removed}")
    raise ValidationError(f"cannot merge cost specs of buses {kept} and {removed}")


def merge_zero_impedance(buses: Sequence[Bus], lines: Sequence[Line]
                         ) -> tuple[list[Bus], list[Line], list[MergeRecord]]:
    """Collapse r = x = 0 lines, treating them as closed switches.

    The child bus is absorbed into its parent: injections are summed, the
    tighter voltage bounds kept, and grandchildren re-attach to the parent.
    """
    bus_by_id = {b.id: b for b in buses}
    alias: dict[int, int] = {}

    def resolve(i: int) -> int:
        while i in alias:
            i = alias[i]
        return i

    log: list[MergeRecord] = []
    keep_lines: list[Line] = []
    for ln in lines:
        if ln.r == 0.0 and ln.x == 0.0:
            parent = resolve(ln.parent)
            child = resolve(ln.child)
            p, c = bus_by_id[parent], bus_by_id[child]
            bus_by_id[parent] = Bus(
                id=p.id,
                v_min=max(p.v_min, c.v_min),
                v_max=min(p.v_max, c.v_max),
                injection=_merge_injections(p.injection, c.injection),
                cost=_merge_costs(p.cost, c.cost, p.id, c.id),
                merged_ids=p.merged_ids + (c.id,) + c.merged_ids,
            )
            del bus_by_id[child]
            alias[child] = parent
            log.append(MergeRecord(kept=parent, removed=child))
        else:
            keep_lines.append(ln)
    out_lines = [Line(resolve(l.child), resolve(l.parent), l.r, l.x) for l in keep_lines]
    out_buses = [bus_by_id[b.id] for b in buses if b.id in bus_by_id]
    return out_buses, out_lines, log


def network_from_components(v0: float, buses: Sequence[Bus], lines: Sequence[Line],
                            base: BaseSystem | None = None,
                            objective: str = LOSS) -> Network:
    """Assemble a Network from already-oriented components, merging switches."""
    mbuses, mlines, log = merge_zero_impedance(buses, lines)
    return Network(mbuses, mlines, v0, base=base, objective=objective, merge_log=log)


# ---------------------------------------------------------------------------
# file ingestion / serialization

def _num(value, where: str, allow_inf: bool = False) -> float:
    if isinstance(value, str):
        if allow_inf and value in ("inf", "-inf"):
            return INF if value == "inf" else -INF
        raise NetworkFormatError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _parse_injection(obj, where: str, s_base: float, default_pf: float) -> InjectionSet:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise NetworkFormatError(f"{where}: injection must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "fixed":
        return Fixed(_num(obj["p"], where), _num(obj["q"], where))
    if kind == "box":
        return Box(_num(obj["p_lo"], where, True), _num(obj["p_hi"], where, True),
                   _num(obj["q_lo"], where, True), _num(obj["q_hi"], where, True))
    if kind == "capacitor":
        return CapacitorDiscrete(_num(obj["q_cap"], where))
    if kind == "inverter_pv":
        return InverterPV(_num(obj["p_cap"], where), _num(obj["s_cap"], where))
    if kind == "constant_pf":
        return ConstantPF(_num(obj["p_lo"], where, True), _num(obj["p_hi"], where, True),
                          _num(obj["eta"], where))
    if kind == "load_mva":
        # peak apparent-power draw; split by power factor, consumption is negative
        mva = _num(obj["mva"], where) / s_base
        pf = _num(obj.get("pf", default_pf), where)
        if not (0.0 < pf <= 1.0):
            raise NetworkFormatError(f"{where}: power factor out of range")
        return Fixed(-pf * mva, -math.sqrt(1.0 - pf * pf) * mva)
    if kind == "sum":
        parts = obj.get("parts")
        if not isinstance(parts, list):
            raise NetworkFormatError(f"{where}: 'sum' injection needs a parts list")
        return InjectionSum(tuple(_parse_injection(p, where, s_base, default_pf)
                                  for p in parts))
    raise NetworkFormatError(f"{where}: unknown injection kind {kind!r}")


def _parse_cost(obj, where: str) -> CostSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise NetworkFormatError(f"{where}: cost must be an object with a 'kind'")
    if obj["kind"] == "linear":
        return LinearCost(_num(obj["a"], where), _num(obj.get("b", 0.0), where))
    if obj["kind"] == "quadratic":
        return QuadraticCost(_num(obj["a2"], where), _num(obj["a1"], where),
                             _num(obj.get("a0", 0.0), where))
    raise NetworkFormatError(f"{where}: unknown cost kind {obj['kind']!r}")


def load_network(document: Union[str, bytes, dict], default_pf: float = 0.97) -> Network:
    """Parse a network file into a per-unit :class:`Network`.

    Schema (UTF-8 JSON)::

        {
          "base": {"v_base_kv": number, "s_base_mva": number},   # optional
          "substation": {"v0_pu": number},          # squared magnitude, pu^2
          "objective": "loss" | "sum_cost",         # optional, default "loss"
          "buses": [{"id": int,
                     "vmin_pu": number,             # squared magnitude, pu^2
                     "vmax_pu": number | "inf",
                     "injection": {"kind": ...},    # optional
                     "cost": {"kind": "linear", ...}}],          # optional
          "lines": [{"from": int, "to": int, "r": number, "x": number,
                     "unit": "ohm" | "pu"}]
        }

    ``from`` is the end nearer the substation; ingestion reorients every line
    to the child -> parent convention. Ohmic impedances are divided by the
    base impedance; ``load_mva`` injections are divided by the power base.
    The substation is the unique bus never appearing on a ``to`` end; any
    injection or cost attached to it is dropped (its injection is free).
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise NetworkFormatError(f"invalid JSON: {e}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise NetworkFormatError("top level must be an object")

    base = None
    if "base" in doc and doc["base"] is not None:
        b = doc["base"]
        base = BaseSystem(_num(b["v_base_kv"], "base"), _num(b["s_base_mva"], "base"))
    s_base = base.s_base_mva if base else 1.0
    z_base = base.z_base_ohm if base else None

    try:
        v0 = _num(doc["substation"]["v0_pu"], "substation")
    except KeyError:
        raise NetworkFormatError("missing substation.v0_pu") from None

    objective = doc.get("objective", LOSS)

    raw_lines = doc.get("lines")
    raw_buses = doc.get("buses")
    if not isinstance(raw_buses, list) or not isinstance(raw_lines, list):
        raise NetworkFormatError("'buses' and 'lines' must be lists")

    to_ids = set()
    from_ids = set()
    seen_pairs = set()
    oriented: list[Line] = []
    for k, ln in enumerate(raw_lines):
        where = f"lines[{k}]"
        try:
            f, t = int(ln["from"]), int(ln["to"])
        except (KeyError, TypeError, ValueError):
            raise NetworkFormatError(f"{where}: needs integer 'from' and 'to'") from None
        r = _num(ln["r"], where)
        x = _num(ln["x"], where)
        unit = ln.get("unit", "pu")
        if unit == "ohm":
            if z_base is None:
                raise NetworkFormatError(f"{where}: ohmic impedance requires a base block")
            r, x = r / z_base, x / z_base
        elif unit != "pu":
            raise NetworkFormatError(f"{where}: unit must be 'ohm' or 'pu'")
        if (f, t) in seen_pairs or (t, f) in seen_pairs:
            raise NetworkFormatError(f"{where}: duplicate line {f}-{t}")
        seen_pairs.add((f, t))
        oriented.append(Line(child=t, parent=f, r=r, x=x))
        to_ids.add(t)
        from_ids.add(f)

    roots = from_ids - to_ids
    if len(roots) != 1:
        raise TopologyError(
            "cannot identify a unique substation bus from line orientation "
            f"(candidates {sorted(roots)})")
    root = roots.pop()

    buses: list[Bus] = []
    seen_root = False
    for k, rb in enumerate(raw_buses):
        where = f"buses[{k}]"
        if not isinstance(rb, dict) or "id" not in rb:
            raise NetworkFormatError(f"{where}: bus needs an 'id'")
        bid = int(rb["id"])
        v_min = _num(rb["vmin_pu"], where)
        v_max = _num(rb["vmax_pu"], where, allow_inf=True)
        inj = ZERO_INJECTION
        cost = None
        if bid == root:
            seen_root = True
            # the substation's own devices do not constrain anything: s0 is free
            inj, cost = ZERO_INJECTION, None
        else:
            if rb.get("injection") is not None:
                inj = _parse_injection(rb["injection"], where, s_base, default_pf)
            if rb.get("cost") is not None:
                cost = _parse_cost(rb["cost"], where)
        buses.append(Bus(bid, v_min, v_max, inj, cost))
    if not seen_root:
        raise NetworkFormatError(f"substation bus {root} missing from 'buses'")

    buses.sort(key=lambda b: b.id != root)  # root first, otherwise stable
    return network_from_components(v0, buses, oriented, base=base, objective=objective)


def _injection_to_json(s: InjectionSet):
    if isinstance(s, Fixed):
        return {"kind": "fixed", "p": s.p, "q": s.q}
    if isinstance(s, Box):
        return {"kind": "box", "p_lo": _json_num(s.p_lo), "p_hi": _json_num(s.p_hi),
                "q_lo": _json_num(s.q_lo), "q_hi": _json_num(s.q_hi)}
    if isinstance(s, CapacitorDiscrete):
        return {"kind": "capacitor", "q_cap": s.q_cap}
    if isinstance(s, InverterPV):
        return {"kind": "inverter_pv", "p_cap": s.p_cap, "s_cap": s.s_cap}
    if isinstance(s, ConstantPF):
        return {"kind": "constant_pf", "p_lo": _json_num(s.p_lo),
                "p_hi": _json_num(s.p_hi), "eta": s.eta}
    if isinstance(s, InjectionSum):
        return {"kind": "sum", "parts": [_injection_to_json(p) for p in s.parts]}
    raise TypeError(f"unknown injection set {s!r}")


def _json_num(x: float):
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return x


def serialize(net: Network) -> dict:
    """Network -> schema dict; ``load_network(serialize(net))`` equals ``net``."""
    out: dict = {}
    if net.base is not None:
        out["base"] = {"v_base_kv": net.base.v_base_kv, "s_base_mva": net.base.s_base_mva}
    out["substation"] = {"v0_pu": net.v0}
    out["objective"] = net.objective
    buses = []
    for b in net.buses:
        rb: dict = {"id": b.id, "vmin_pu": b.v_min, "vmax_pu": _json_num(b.v_max)}
        if b.id != net.root:
            if b.injection != ZERO_INJECTION:
                rb["injection"] = _injection_to_json(b.injection)
            if b.cost is not None:
                if isinstance(b.cost, LinearCost):
                    rb["cost"] = {"kind": "linear", "a": b.cost.a, "b": b.cost.b}
                else:
                    rb["cost"] = {"kind": "quadratic", "a2": b.cost.a2,
                                  "a1": b.cost.a1, "a0": b.cost.a0}
        buses.append(rb)
    out["buses"] = buses
    out["lines"] = [{"from": l.parent, "to": l.child, "r": l.r, "x": l.x, "unit": "pu"}
                    for l in net.lines]
    return out
