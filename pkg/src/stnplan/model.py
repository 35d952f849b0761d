"""Service model, plan representation, latency arithmetic, and the
plan validator used as the feasibility oracle by every solver.

Conventions: VNFs of a service are indexed 1..I_q with the first and last
being zero-cost dummies pinned to the source and destination. Virtual
link i (1..I_q-1) runs from VNF i to VNF i+1. Routing entries are
(service, virtual link, slot, directed physical link).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .teg import Link, TimeEvolvingGraph

LATENCY_TOL = 1e-9


class ModelError(ValueError):
    """Raised for malformed services or plans."""


@dataclass(frozen=True)
class ServiceRequest:
    id: int
    source: str
    destination: str
    data_size: float          # bits
    compute_rate: float       # compute units dedicated while processing
    vnf_costs: tuple[float, ...]  # deployment cost per VNF, dummies first/last

    def __post_init__(self):
        if len(self.vnf_costs) < 2:
            raise ModelError(f"service {self.id}: needs at least the two dummy VNFs")
        if self.vnf_costs[0] != 0 or self.vnf_costs[-1] != 0:
            raise ModelError(f"service {self.id}: dummy VNFs must have zero cost")
        if self.data_size <= 0 or self.compute_rate <= 0:
            raise ModelError(f"service {self.id}: data size and compute rate must be positive")

    @property
    def num_vnfs(self) -> int:
        return len(self.vnf_costs)

    @property
    def num_virtual_links(self) -> int:
        return len(self.vnf_costs) - 1

    def interior_vnfs(self) -> range:
        """Indices of the real (non-dummy) VNFs."""
        return range(2, self.num_vnfs)


@dataclass(frozen=True)
class LatencyParams:
    epsilon: float            # compute units * s per bit
    prop_speed: float         # m/s
    slot_length: float        # s

    def __post_init__(self):
        if self.epsilon <= 0 or self.prop_speed <= 0 or self.slot_length <= 0:
            raise ModelError("latency parameters must be positive")


RouteEntry = tuple[int, int, int, Link]  # (service id, virtual link, slot, link)


@dataclass
class Plan:
    placement: dict[tuple[int, int], str] = field(default_factory=dict)
    routing: set[RouteEntry] = field(default_factory=set)
    completion: dict[int, int] = field(default_factory=dict)
    discarded: set[int] = field(default_factory=set)

    def active_slots(self, qid: int) -> set[int]:
        return {t for (q, _i, t, _l) in self.routing if q == qid}

    def stays(self, qid: int, node: str) -> list[tuple[int, int]]:
        """(virtual link, slot) pairs where the service stays at `node`."""
        return [(i, t) for (q, i, t, l) in self.routing
                if q == qid and l.is_stay and l.src == node]


@dataclass(frozen=True)
class Violation:
    constraint: str
    service: int | None
    slot: int | None
    where: str
    detail: str

    def __str__(self):
        loc = f"q={self.service} t={self.slot} at {self.where}"
        return f"[{self.constraint}] {loc}: {self.detail}"


def comm_latency(service: ServiceRequest, link: Link, t: int, concurrent_flows: int,
                 teg: TimeEvolvingGraph, params: LatencyParams) -> float:
    """Per-slot latency of the service's flow on `link`: transmission with
    the link rate shared equally over `concurrent_flows`, plus propagation."""
    if link.is_stay:
        return 0.0
    if concurrent_flows < 1:
        raise ModelError("concurrent flow count must be >= 1")
    if not teg.available[link][t - 1]:
        raise ModelError(f"link {link.src}->{link.dst} unavailable in slot {t}")
    rate = teg.rate[link][t - 1]
    trans = service.data_size * concurrent_flows / rate if not math.isinf(rate) else 0.0
    prop = teg.distance_km[link][t - 1] * 1e3 / params.prop_speed
    return trans + prop


def comp_latency(service: ServiceRequest, node: str,
                 placement: dict[tuple[int, int], str], params: LatencyParams) -> float:
    """Total processing time of the service's real VNFs placed on `node`."""
    per_vnf = service.data_size * params.epsilon / service.compute_rate
    count = sum(1 for i in service.interior_vnfs()
                if placement.get((service.id, i)) == node)
    return count * per_vnf


def e2e_latency(plan: Plan, qid: int, params: LatencyParams) -> float:
    """Slot length times the number of slots with any routing activity."""
    return params.slot_length * len(plan.active_slots(qid))


def objective(plan: Plan, services: list[ServiceRequest], params: LatencyParams) -> float:
    """Average end-to-end latency over non-discarded services."""
    active = [s for s in services if s.id not in plan.discarded]
    if not active:
        return 0.0
    return sum(e2e_latency(plan, s.id, params) for s in active) / len(active)


def min_slots(service: ServiceRequest, params: LatencyParams) -> int:
    """Minimum number of processing slots for this service's real VNFs."""
    per_vnf = service.data_size * params.epsilon / (service.compute_rate * params.slot_length)
    total = per_vnf * len(service.interior_vnfs())
    if total <= 0:
        return 0
    return math.ceil(total - 1e-9)


def validate_plan(plan: Plan, teg: TimeEvolvingGraph, services: list[ServiceRequest],
                  params: LatencyParams) -> list[Violation]:
    """Check every problem constraint; an empty list means the plan is feasible.

    Constraint tags follow the model: per-link communication latency within
    a slot (commLatency), cumulative stay covers processing (stayTime),
    single placement per VNF (onePlacement), endpoint pinning (endpoints),
    slot-1 ingress (ingress), routing visits VNF hosts (visitVnf), one
    communication-or-stay link per slot (oneLinkPerSlot), flow conservation
    as a single timed trajectory (flowSlotCount, flowChain, flowArrival),
    link availability (linkStatus), and per-slot compute capacity (capacity).

    Flow conservation: before its completion slot a service occupies exactly
    one link per slot; consecutive entries chain tail-to-head; the virtual
    link index is nondecreasing and advances by at most one per slot; the
    last virtual link reaches the destination exactly in the completion slot.
    """
    out: list[Violation] = []
    svc = {s.id: s for s in services}
    active = [s for s in services if s.id not in plan.discarded]
    tau, T = params.slot_length, teg.slots

    # structural sanity of the routing set
    for (q, i, t, link) in plan.routing:
        if q in plan.discarded:
            out.append(Violation("structure", q, t, f"{link.src}->{link.dst}",
                                 "routing present for a discarded service"))
            continue
        if q not in svc:
            out.append(Violation("structure", q, t, "-", "unknown service id"))
            continue
        if not 1 <= i <= svc[q].num_virtual_links:
            out.append(Violation("structure", q, t, "-", f"virtual link {i} out of range"))
        if not 1 <= t <= T:
            out.append(Violation("structure", q, t, "-", "slot out of range"))
        if link not in teg.available:
            out.append(Violation("structure", q, t, f"{link.src}->{link.dst}",
                                 "link not present in the TEG"))
    if out:
        return out

    # concurrency per (link, slot) across all services -- constraint on
    # per-link communication latency (11)
    flow_count: dict[tuple[Link, int], int] = {}
    for (q, i, t, link) in plan.routing:
        if not link.is_stay:
            flow_count[(link, t)] = flow_count.get((link, t), 0) + 1
    for (q, i, t, link) in sorted(plan.routing, key=lambda e: (e[0], e[1], e[2])):
        if link.is_stay:
            continue
        lat = comm_latency(svc[q], link, t, flow_count[(link, t)], teg, params) \
            if teg.available[link][t - 1] else math.inf
        if lat > tau + LATENCY_TOL:
            out.append(Violation("commLatency", q, t, f"{link.src}->{link.dst}",
                                 f"latency {lat:.6g} s exceeds slot length {tau:g} s"))

    for s in active:
        q = s.id
        # (13) one node per VNF
        for i in range(1, s.num_vnfs + 1):
            nodes = [n for (qq, ii), n in plan.placement.items() if qq == q and ii == i]
            if len(nodes) != 1:
                out.append(Violation("onePlacement", q, None, f"VNF {i}",
                                     f"placed on {len(nodes)} nodes, expected 1"))
        # (14) endpoint pinning
        if plan.placement.get((q, 1)) != s.source:
            out.append(Violation("endpoints", q, None, "VNF 1",
                                 f"first dummy must sit on source {s.source}"))
        if plan.placement.get((q, s.num_vnfs)) != s.destination:
            out.append(Violation("endpoints", q, None, f"VNF {s.num_vnfs}",
                                 f"last dummy must sit on destination {s.destination}"))
        # completion slot
        t_q = plan.completion.get(q)
        if t_q is None or not 1 <= t_q <= T:
            out.append(Violation("completion", q, t_q, "-",
                                 "completion slot missing or out of range"))
            continue

        # (12) stay time covers processing
        for node in teg.nodes:
            need = comp_latency(s, node, plan.placement, params)
            have = tau * len(plan.stays(q, node))
            if need > have + LATENCY_TOL:
                out.append(Violation("stayTime", q, None, node,
                                     f"processing needs {need:.6g} s, stays cover {have:.6g} s"))
        # (15) ingress at slot 1 from the source
        ingress = sum(1 for (qq, i, t, l) in plan.routing
                      if qq == q and i == 1 and t == 1 and l.src == s.source)
        if ingress != 1:
            out.append(Violation("ingress", q, 1, s.source,
                                 f"slot-1 egress count from source is {ingress}, expected 1"))
        # (16) routing visits hosts of real VNFs
        for i in s.interior_vnfs():
            node = plan.placement.get((q, i))
            if node is None:
                continue
            if not any(vt for (qq, vi, vt, l) in plan.routing
                       if qq == q and vi == i and l.is_stay and l.src == node):
                out.append(Violation("visitVnf", q, None, node,
                                     f"virtual link {i} never stays at the host of VNF {i}"))
        # (17) one communication link or one stay node per slot
        for t in range(1, T + 1):
            comm = sum(1 for (qq, vi, vt, l) in plan.routing
                       if qq == q and vt == t and not l.is_stay)
            stay_nodes = {l.src for (qq, vi, vt, l) in plan.routing
                          if qq == q and vt == t and l.is_stay}
            if comm + len(stay_nodes) > 1:
                out.append(Violation("oneLinkPerSlot", q, t, "-",
                                     f"{comm} communication links and {len(stay_nodes)} stay nodes in one slot"))
        # flow conservation as a single timed trajectory
        last = s.num_virtual_links
        by_slot: dict[int, list[tuple[int, Link]]] = {}
        for (qq, vi, vt, l) in plan.routing:
            if qq == q:
                by_slot.setdefault(vt, []).append((vi, l))
        chain_ok = True
        for t in range(1, T + 1):
            want = 1 if t <= t_q else 0
            if len(by_slot.get(t, [])) != want:
                out.append(Violation("flowSlotCount", q, t, "-",
                                     f"{len(by_slot.get(t, []))} routing entries, "
                                     f"expected {want} (completion slot {t_q})"))
                chain_ok = False
        if chain_ok and t_q >= 1:
            for t in range(1, t_q):
                (i, l), (i2, l2) = by_slot[t][0], by_slot[t + 1][0]
                if l2.src != l.dst:
                    out.append(Violation("flowChain", q, t + 1, l2.src,
                                         f"slot {t + 1} departs {l2.src}, "
                                         f"slot {t} ended at {l.dst}"))
                if i2 not in (i, i + 1):
                    out.append(Violation("flowChain", q, t + 1, l2.src,
                                         f"virtual link jumps {i} -> {i2}"))
            i_end, l_end = by_slot[t_q][0]
            if i_end != last or l_end.dst != s.destination:
                out.append(Violation("flowArrival", q, t_q, l_end.dst,
                                     f"completion entry is link {i_end} into {l_end.dst}, "
                                     f"expected link {last} into {s.destination}"))
    # (19) link availability
    for (q, i, t, link) in plan.routing:
        if not teg.available[link][t - 1]:
            out.append(Violation("linkStatus", q, t, f"{link.src}->{link.dst}",
                                 "link used while unavailable"))
    # (20) per-slot compute capacity
    for n in teg.nodes:
        for t in range(1, T + 1):
            load = 0.0
            for s in active:
                q = s.id
                for i in range(1, s.num_vnfs):  # i = 1 .. I_q - 1
                    if plan.placement.get((q, i)) == n:
                        load += s.vnf_costs[i - 1]
                        if (q, i, t, Link(n, n)) in plan.routing:
                            load += s.compute_rate
            if load > teg.capacity[n] + LATENCY_TOL:
                out.append(Violation("capacity", None, t, n,
                                     f"load {load:g} exceeds capacity {teg.capacity[n]:g}"))
    return out


def plan_to_json(plan: Plan, services: list[ServiceRequest] | None = None) -> str:
    """Canonical (byte-deterministic) JSON form of a plan."""
    doc = {
        "version": 1,
        "placement": [
            {"service": q, "vnf": i, "node": n}
            for (q, i), n in sorted(plan.placement.items())
        ],
        "routing": [
            {"service": q, "virtualLink": i, "slot": t, "src": l.src, "dst": l.dst}
            for (q, i, t, l) in sorted(plan.routing, key=lambda e: (e[0], e[1], e[2], e[3].src, e[3].dst))
        ],
        "completion": {str(q): t for q, t in sorted(plan.completion.items())},
        "discarded": sorted(plan.discarded),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def plan_from_json(document: str) -> Plan:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed plan document: {exc}") from exc
    plan = Plan()
    for entry in doc.get("placement", []):
        plan.placement[(int(entry["service"]), int(entry["vnf"]))] = entry["node"]
    for entry in doc.get("routing", []):
        plan.routing.add((int(entry["service"]), int(entry["virtualLink"]),
                          int(entry["slot"]), Link(entry["src"], entry["dst"])))
    plan.completion = {int(q): int(t) for q, t in doc.get("completion", {}).items()}
    plan.discarded = set(int(q) for q in doc.get("discarded", []))
    return plan


def services_to_json(services: list[ServiceRequest]) -> str:
    doc = [
        {
            "id": s.id,
            "source": s.source,
            "destination": s.destination,
            "dataSizeBits": s.data_size,
            "computeRate": s.compute_rate,
            "vnfCosts": list(s.vnf_costs),
        }
        for s in services
    ]
    return json.dumps(doc, indent=2, sort_keys=True)


def services_from_json(document: str) -> list[ServiceRequest]:
    doc = json.loads(document)
    return [
        ServiceRequest(
            id=int(e["id"]),
            source=e["source"],
            destination=e["destination"],
            data_size=float(e["dataSizeBits"]),
            compute_rate=float(e["computeRate"]),
            vnf_costs=tuple(float(b) for b in e["vnfCosts"]),
        )
        for e in doc
    ]
