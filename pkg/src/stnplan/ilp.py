"""Exact linearized ILP for joint placement and multi-slot routing.

Builds the full binary program from a TEG and a service batch: routing
and placement variables plus the auxiliary families (stay indicators f,
completion selectors h and their cumulative form k, active-slot
indicators a, and placement-stay products b), with big-M rows for the
per-slot latency bound and the five flow-conservation cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .model import LatencyParams, ServiceRequest
from .teg import Link, TimeEvolvingGraph


class IlpError(ValueError):
    """Raised for inconsistent model construction inputs."""


@dataclass
class Row:
    coeffs: dict[int, float]
    sense: str                 # "<=", "=", ">="
    rhs: float
    label: str


@dataclass
class IlpModel:
    var_names: list[str] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    obj_offset: float = 0.0
    var_index: dict[tuple, int] = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(self, key: tuple, name: str, lower=0.0, upper=1.0, integer=True) -> int:
        if key in self.var_index:
            raise IlpError(f"duplicate variable {key}")
        col = len(self.var_names)
        self.var_index[key] = col
        self.var_names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        self.integer.append(integer)
        return col

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float, label: str) -> None:
        for col in coeffs:
            if not 0 <= col < len(self.var_names):
                raise IlpError(f"row {label} references unknown column {col}")
        self.rows.append(Row(dict(coeffs), sense, float(rhs), label))

    def col(self, *key) -> int:
        return self.var_index[tuple(key)]

    def objective_value(self, x) -> float:
        return sum(c * x[j] for j, c in self.objective.items()) + self.obj_offset


def _link_name(link: Link) -> str:
    return f"{link.src}__{link.dst}"


def _sorted_links(teg: TimeEvolvingGraph) -> list[Link]:
    return sorted(teg.links, key=lambda l: (l.src, l.dst))


def build_full_model(teg: TimeEvolvingGraph, services: list[ServiceRequest],
             params: LatencyParams) -> IlpModel:
    """Construct the linearized binary program.

    Variable blocks in order: x, y, f, h, k, a, b, each lexicographic by
    (service, vnf/virtual-link, slot, link/node), which fixes export
    determinism. All variables are binary.
    """
    if teg.slots < 1:
        raise IlpError("TEG must have at least one slot")
    if not services:
        raise IlpError("service batch must be non-empty")
    for s in services:
        if s.source not in teg.classes or s.destination not in teg.classes:
            raise IlpError(f"service {s.id}: endpoint not a TEG node")

    T = teg.slots
    tau = params.slot_length
    links = _sorted_links(teg)
    comm = [l for l in links if not l.is_stay]
    stay = {l.src: l for l in links if l.is_stay}
    nodes = teg.nodes
    m = IlpModel()
    Q = len(services)
    sum_lq = sum(s.num_virtual_links for s in services)
    L = len(links)

    # variables
    for s in services:
        for i in range(1, s.num_vnfs + 1):
            for n in nodes:
                m.add_var(("x", s.id, i, n), f"x_q{s.id}_i{i}_{n}")
    for s in services:
        for i in range(1, s.num_virtual_links + 1):
            for t in range(1, T + 1):
                for l in links:
                    m.add_var(("y", s.id, i, t, l), f"y_q{s.id}_i{i}_t{t}_{_link_name(l)}")
    for s in services:
        for t in range(1, T + 1):
            for l in links:
                m.add_var(("f", s.id, t, l), f"f_q{s.id}_t{t}_{_link_name(l)}")
    for sym in ("h", "k", "a"):
        for s in services:
            for t in range(1, T + 1):
                m.add_var((sym, s.id, t), f"{sym}_q{s.id}_t{t}")
    for s in services:
        for i in range(1, s.num_virtual_links + 1):
            for t in range(1, T + 1):
                for n in nodes:
                    m.add_var(("b", s.id, i, t, n), f"b_q{s.id}_i{i}_t{t}_{n}")

    def y(q, i, t, l):
        return m.col("y", q, i, t, l)

    def in_cols(q, i, t, n):
        return [y(q, i, t, l) for l in links if l.dst == n]

    def out_cols(q, i, t, n):
        return [y(q, i, t, l) for l in links if l.src == n]

    def accumulate(coeffs, cols, w):
        for c in cols:
            coeffs[c] = coeffs.get(c, 0.0) + w

    for s in services:
        q = s.id
        per_vnf_latency = s.data_size * params.epsilon / s.compute_rate
        # stay time covers processing (12)
        for n in nodes:
            coeffs: dict[int, float] = {}
            for i in s.interior_vnfs():
                coeffs[m.col("x", q, i, n)] = per_vnf_latency
            for i in range(1, s.num_virtual_links + 1):
                for t in range(1, T + 1):
                    accumulate(coeffs, [y(q, i, t, stay[n])], -tau)
            m.add_row(coeffs, "<=", 0.0, f"stayTime[q{q},{n}]")
        # one node per VNF (13)
        for i in range(1, s.num_vnfs + 1):
            m.add_row({m.col("x", q, i, n): 1.0 for n in nodes}, "=", 1.0,
                      f"onePlacement[q{q},i{i}]")
        # endpoint pinning (14)
        m.add_row({m.col("x", q, 1, s.source): 1.0}, "=", 1.0, f"pinSource[q{q}]")
        m.add_row({m.col("x", q, s.num_vnfs, s.destination): 1.0}, "=", 1.0,
                  f"pinDestination[q{q}]")
        # ingress at slot 1 (15)
        m.add_row({c: 1.0 for c in out_cols(q, 1, 1, s.source)}, "=", 1.0,
                  f"ingress[q{q}]")
        # routing visits hosts of real VNFs (16)
        for i in s.interior_vnfs():
            for n in nodes:
                coeffs = {m.col("x", q, i, n): 1.0}
                for t in range(1, T + 1):
                    accumulate(coeffs, [y(q, i, t, stay[n])], -1.0)
                m.add_row(coeffs, "<=", 0.0, f"visitVnf[q{q},i{i},{n}]")

    # per-slot communication latency big-M (27)
    big_m = tau * T
    for l in comm:
        for t in range(1, T + 1):
            if not teg.available[l][t - 1]:
                continue  # the link-status row zeroes all y on this link-slot
            rate = teg.rate[l][t - 1]
            prop = teg.distance_km[l][t - 1] * 1e3 / params.prop_speed
            for s in services:
                q = s.id
                share = s.data_size / rate if not math.isinf(rate) else 0.0
                for i in range(1, s.num_virtual_links + 1):
                    coeffs: dict[int, float] = {}
                    for s2 in services:
                        for i2 in range(1, s2.num_virtual_links + 1):
                            accumulate(coeffs, [y(s2.id, i2, t, l)], share)
                    coeffs[y(q, i, t, l)] = coeffs.get(y(q, i, t, l), 0.0) + big_m
                    m.add_row(coeffs, "<=", tau + big_m - prop,
                              f"commLatency[q{q},i{i},t{t},{_link_name(l)}]")

    for s in services:
        q = s.id
        lq = s.num_virtual_links
        # stay/link usage indicators f (Lemma 1)
        for t in range(1, T + 1):
            for l in links:
                ys = [y(q, i, t, l) for i in range(1, lq + 1)]
                coeffs = {c: 1.0 for c in ys}
                coeffs[m.col("f", q, t, l)] = -float(lq)
                m.add_row(coeffs, "<=", 0.0, f"fUpper[q{q},t{t},{_link_name(l)}]")
                coeffs = {m.col("f", q, t, l): 1.0}
                accumulate(coeffs, ys, -1.0)
                m.add_row(coeffs, "<=", 0.0, f"fLower[q{q},t{t},{_link_name(l)}]")
        # one communication link or one stay node per slot (29)
        for t in range(1, T + 1):
            coeffs = {}
            for l in comm:
                accumulate(coeffs, [y(q, i, t, l) for i in range(1, lq + 1)], 1.0)
            for n in nodes:
                coeffs[m.col("f", q, t, stay[n])] = 1.0
            m.add_row(coeffs, "<=", 1.0, f"oneLinkPerSlot[q{q},t{t}]")
        # completion selector h (32) and cumulative form k (34)
        m.add_row({m.col("h", q, t): 1.0 for t in range(1, T + 1)}, "=", 1.0,
                  f"oneCompletion[q{q}]")
        for t in range(1, T + 1):
            coeffs = {m.col("h", q, tp): 1.0 for tp in range(1, t + 1)}
            coeffs[m.col("k", q, t)] = -float(T)
            m.add_row(coeffs, "<=", 0.0, f"kUpper[q{q},t{t}]")
            coeffs = {m.col("k", q, t): 1.0}
            for tp in range(1, t + 1):
                coeffs[m.col("h", q, tp)] = -1.0
            m.add_row(coeffs, "<=", 0.0, f"kLower[q{q},t{t}]")
        # flow conservation as a single timed trajectory:
        # exactly one routing entry per slot up to the completion slot,
        # none after; each entry departs where the previous one ended; the
        # virtual-link index advances by at most one per slot.
        last = lq
        for t in range(1, T + 1):
            coeffs = {y(q, i, t, l): 1.0
                      for i in range(1, last + 1) for l in links}
            coeffs[m.col("k", q, t)] = 1.0
            coeffs[m.col("h", q, t)] = -1.0
            m.add_row(coeffs, "=", 1.0, f"slotEntry[q{q},t{t}]")
        for n in nodes:
            for t in range(1, T):
                for i in range(1, last + 1):
                    coeffs = {}
                    accumulate(coeffs, out_cols(q, i, t + 1, n), 1.0)
                    accumulate(coeffs, in_cols(q, i, t, n), -1.0)
                    if i > 1:
                        accumulate(coeffs, in_cols(q, i - 1, t, n), -1.0)
                    m.add_row(coeffs, "<=", 0.0, f"flowChain[q{q},i{i},t{t + 1},{n}]")
        for t in range(1, T + 1):
            coeffs = {m.col("h", q, t): 1.0}
            accumulate(coeffs, in_cols(q, last, t, s.destination), -1.0)
            m.add_row(coeffs, "<=", 0.0, f"arrival[q{q},t{t}]")

    # link status (Lemma 2)
    for l in links:
        for t in range(1, T + 1):
            coeffs = {}
            for s in services:
                accumulate(coeffs, [y(s.id, i, t, l)
                                    for i in range(1, s.num_virtual_links + 1)], 1.0)
            m.add_row(coeffs, "<=", float(sum_lq) * float(teg.available[l][t - 1]),
                      f"linkStatus[t{t},{_link_name(l)}]")
    # compute capacity with product variables b
    for n in nodes:
        for t in range(1, T + 1):
            coeffs = {}
            for s in services:
                q = s.id
                for i in range(1, s.num_vnfs):
                    coeffs[m.col("x", q, i, n)] = \
                        coeffs.get(m.col("x", q, i, n), 0.0) + s.vnf_costs[i - 1]
                    coeffs[m.col("b", q, i, t, n)] = s.compute_rate
            m.add_row(coeffs, "<=", teg.capacity[n], f"capacity[{n},t{t}]")
    for s in services:
        q = s.id
        for i in range(1, s.num_virtual_links + 1):
            for t in range(1, T + 1):
                for n in nodes:
                    bb = m.col("b", q, i, t, n)
                    xx = m.col("x", q, i, n)
                    yy = y(q, i, t, stay[n])
                    m.add_row({bb: 1.0, xx: -1.0}, "<=", 0.0, f"bLeX[q{q},i{i},t{t},{n}]")
                    m.add_row({bb: 1.0, yy: -1.0}, "<=", 0.0, f"bLeY[q{q},i{i},t{t},{n}]")
                    m.add_row({xx: 1.0, yy: 1.0, bb: -1.0}, "<=", 1.0,
                              f"bGeXY[q{q},i{i},t{t},{n}]")
    # active-slot indicator a and the objective
    for s in services:
        q = s.id
        lq = s.num_virtual_links
        for t in range(1, T + 1):
            ys = [y(q, i, t, l) for i in range(1, lq + 1) for l in links]
            coeffs = {c: 1.0 for c in ys}
            coeffs[m.col("a", q, t)] = -float(lq * L)
            m.add_row(coeffs, "<=", 0.0, f"aUpper[q{q},t{t}]")
            coeffs = {m.col("a", q, t): 1.0}
            accumulate(coeffs, ys, -1.0)
            m.add_row(coeffs, "<=", 0.0, f"aLower[q{q},t{t}]")
            m.objective[m.col("a", q, t)] = tau / Q
    return m


def count_model(teg: TimeEvolvingGraph, services: list[ServiceRequest],
                params: LatencyParams | None = None) -> dict:
    """Exact variable/row counts of the built model plus the closed-form
    approximations L*T*sum(I_q - 1) and T*L*(1 + 2Q)."""
    if params is None:
        params = LatencyParams(epsilon=1e-9, prop_speed=299792458.0,
                               slot_length=teg.slot_length or 1.0)
    model = build_full_model(teg, services, params)
    L = len(teg.links)
    T = teg.slots
    Q = len(services)
    sum_links = sum(s.num_virtual_links for s in services)
    return {
        "variables": model.num_vars,
        "constraints": model.num_rows,
        "variablesApprox": L * T * sum_links,
        "constraintsApprox": T * L * (1 + 2 * Q),
    }


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def export_lp(model: IlpModel) -> str:
    """Standard LP-format text with deterministic ordering."""
    out = ["\\ generated by stnplan", "Minimize"]
    terms = [f"{'+' if c >= 0 else '-'} {_fmt(abs(c))} {model.var_names[j]}"
             for j, c in sorted(model.objective.items())]
    out.append(" obj: " + (" ".join(terms).lstrip("+ ") if terms else "0"))
    out.append("Subject To")
    sense_txt = {"<=": "<=", ">=": ">=", "=": "="}
    for idx, row in enumerate(model.rows):
        terms = []
        for j, c in sorted(row.coeffs.items()):
            if c == 0:
                continue
            sign = "+" if c >= 0 else "-"
            terms.append(f"{sign} {_fmt(abs(c))} {model.var_names[j]}")
        body = " ".join(terms).lstrip("+ ") if terms else "0 " + model.var_names[0]
        name = f"c{idx}"
        out.append(f" {name}: {body} {sense_txt[row.sense]} {_fmt(row.rhs)}")
    out.append("Bounds")
    for j in range(model.num_vars):
        if not model.integer[j]:
            out.append(f" {_fmt(model.lower[j])} <= {model.var_names[j]} <= {_fmt(model.upper[j])}")
    out.append("Binaries")
    for j in range(model.num_vars):
        if model.integer[j]:
            out.append(f" {model.var_names[j]}")
    out.append("End")
    return "\n".join(out) + "\n"


def export_metadata(model: IlpModel) -> str:
    """JSON sidecar: counts and the (symbol, subscripts) -> column map."""
    doc = {
        "variables": model.num_vars,
        "constraints": model.num_rows,
        "index": {repr(k): v for k, v in model.var_index.items()},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def assignment_to_plan(model: IlpModel, x, teg: TimeEvolvingGraph,
                       services: list[ServiceRequest]):
    """Project a full-model assignment onto a Plan (placement, routing, completion)."""
    from .model import Plan

    plan = Plan()
    for key, col in model.var_index.items():
        if x[col] < 0.5:
            continue
        if key[0] == "x":
            _, q, i, n = key
            plan.placement[(q, i)] = n
        elif key[0] == "y":
            _, q, i, t, link = key
            plan.routing.add((q, i, t, link))
        elif key[0] == "h":
            _, q, t = key
            plan.completion[q] = t
    return plan


def derive_auxiliaries(model: IlpModel, teg: TimeEvolvingGraph,
                       services: list[ServiceRequest],
                       placement: dict, routing: set, completion: dict) -> list[float]:
    """Full model assignment implied by (x, y, h): every auxiliary variable is
    functionally determined, so this is the unique consistent completion."""
    x = [0.0] * model.num_vars
    for (q, i), n in placement.items():
        x[model.col("x", q, i, n)] = 1.0
    for (q, i, t, link) in routing:
        x[model.col("y", q, i, t, link)] = 1.0
    for s in services:
        q = s.id
        lq = s.num_virtual_links
        t_q = completion[q]
        for t in range(1, teg.slots + 1):
            x[model.col("h", q, t)] = 1.0 if t == t_q else 0.0
            x[model.col("k", q, t)] = 1.0 if t >= t_q else 0.0
            used = [l for i in range(1, lq + 1) for l in teg.links
                    if (q, i, t, l) in routing]
            x[model.col("a", q, t)] = 1.0 if used else 0.0
            for l in _sorted_links(teg):
                any_i = any((q, i, t, l) in routing for i in range(1, lq + 1))
                x[model.col("f", q, t, l)] = 1.0 if any_i else 0.0
            for i in range(1, lq + 1):
                for n in teg.nodes:
                    xv = x[model.col("x", q, i, n)]
                    yv = x[model.col("y", q, i, t, Link(n, n))]
                    x[model.col("b", q, i, t, n)] = xv * yv
    return x


def check_assignment(model: IlpModel, x, tol: float = 1e-9) -> list[str]:
    """Labels of rows violated by assignment `x`."""
    bad = []
    for row in model.rows:
        val = sum(c * x[j] for j, c in row.coeffs.items())
        if row.sense == "<=" and val > row.rhs + tol:
            bad.append(row.label)
        elif row.sense == ">=" and val < row.rhs - tol:
            bad.append(row.label)
        elif row.sense == "=" and abs(val - row.rhs) > tol:
            bad.append(row.label)
    return bad
