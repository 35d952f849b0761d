"""Time-expanded heuristic planner.

Each service is planned on a layered copy of the network (one layer per
slot). Stay links are weighted by residual compute through a max-min
normalization into [0.5, 0.9] so path search prefers compute-rich
nodes; communication links cost 1 when they can carry the service
within a slot and are unusable otherwise. Candidate paths come from a
k-shortest-path search, filtered by the minimum number of stay slots
the service's processing needs, and VNFs are placed greedily in order
along the stay segments of a candidate path.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import LATENCY_TOL, LatencyParams, Plan, ServiceRequest, min_slots
from .teg import Link, ResidualState, TimeEvolvingGraph


@dataclass
class ExpandedAdjacency:
    """Layered weight matrix for one service: side N*(horizon+1); entry
    (u, v) is the edge weight from layer ell to layer ell+1, infinity if
    absent. Expanded index = node ordinal + N * layer (0-based)."""
    service_id: int
    horizon: int
    node_order: tuple[str, ...]
    weights: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.node_order)

    def index(self, node: str, layer: int) -> int:
        return self.node_order.index(node) + self.num_nodes * layer

    def out_edges(self) -> list[list[tuple[int, float]]]:
        side = self.weights.shape[0]
        out: list[list[tuple[int, float]]] = [[] for _ in range(side)]
        rows, cols = np.nonzero(np.isfinite(self.weights))
        for u, v in zip(rows.tolist(), cols.tolist()):
            out[u].append((v, float(self.weights[u, v])))
        return out


@dataclass
class CandidatePath:
    indices: tuple[int, ...]   # expanded indices from layer 0 to arrival layer
    weight: float

    def steps(self, num_nodes: int) -> list[tuple[int, int, int]]:
        """(slot, src ordinal, dst ordinal) per hop; ordinals are 0-based."""
        return [(pos + 1, u % num_nodes, v % num_nodes)
                for pos, (u, v) in enumerate(zip(self.indices, self.indices[1:]))]

    def stay_slots(self, num_nodes: int) -> int:
        return sum(1 for _t, a, b in self.steps(num_nodes) if a == b)


def _admissible(teg: TimeEvolvingGraph, residual: ResidualState,
                service: ServiceRequest, link: Link, t: int,
                params: LatencyParams, exclusive: bool = False) -> bool:
    """Can this service join `link` in slot t without pushing any flow on it
    (existing or new) past the slot length?"""
    if not teg.available[link][t - 1]:
        return False
    sizes = residual.flow_sizes(link, t)
    if exclusive and sizes:
        return False
    rate = teg.rate[link][t - 1]
    if math.isinf(rate):
        return True
    worst = max(sizes + [service.data_size])
    lat = worst * (len(sizes) + 1) / rate \
        + teg.distance_km[link][t - 1] * 1e3 / params.prop_speed
    return lat <= params.slot_length + LATENCY_TOL


def _stay_threshold(service: ServiceRequest, params: LatencyParams,
                    mode: str) -> float:
    betas = [service.vnf_costs[i - 1] for i in service.interior_vnfs()]
    if not betas:
        return 0.0
    if mode == "asPrinted":
        return min(betas) * params.slot_length + service.compute_rate
    if mode == "betaPlusC":
        return min(betas) + service.compute_rate
    raise ValueError(f"unknown stay threshold mode {mode!r}")


def build_adjacency(teg: TimeEvolvingGraph, residual: ResidualState,
                    service: ServiceRequest, horizon: int, params: LatencyParams,
                    threshold_mode: str = "asPrinted", equal_weight: bool = False,
                    exclusive: bool = False) -> ExpandedAdjacency:
    """Layered adjacency for one service over slots 1..horizon."""
    if not 1 <= horizon <= teg.slots:
        raise ValueError(f"horizon {horizon} out of range [1, {teg.slots}]")
    N = len(teg.nodes)
    ordinal = {n: j for j, n in enumerate(teg.nodes)}
    side = N * (horizon + 1)
    w = np.full((side, side), math.inf)
    thr = _stay_threshold(service, params, threshold_mode)
    stats = {n: (float(residual.compute[n].min()), float(residual.compute[n].max()))
             for n in teg.nodes}
    for t in range(1, horizon + 1):
        base_src = N * (t - 1)
        base_dst = N * t
        for link in teg.comm_links():
            if _admissible(teg, residual, service, link, t, params,
                           exclusive=exclusive):
                w[base_src + ordinal[link.src], base_dst + ordinal[link.dst]] = 1.0
        for n in teg.nodes:
            if equal_weight:
                weight = 1.0
            else:
                c = float(residual.compute[n][t - 1])
                lo, hi = stats[n]
                if c < thr:
                    weight = 0.9          # store/forward only
                elif hi == lo:
                    weight = 0.5
                else:
                    weight = 0.9 - 0.4 * (c - lo) / (hi - lo)
            w[base_src + ordinal[n], base_dst + ordinal[n]] = weight
    return ExpandedAdjacency(service.id, horizon, tuple(teg.nodes), w)


def _shortest(out_edges, src: int, dst: int, banned_nodes,
              banned_edges) -> tuple[float, tuple[int, ...]] | None:
    """Dijkstra with deterministic lexicographic tie-break on the node
    sequence (heap keys are (cost, path))."""
    heap = [(0.0, (src,))]
    done = set()
    while heap:
        cost, path = heapq.heappop(heap)
        u = path[-1]
        if u == dst:
            return cost, path
        if u in done:
            continue
        done.add(u)
        for v, wt in out_edges[u]:
            if v in done or v in banned_nodes or (u, v) in banned_edges:
                continue
            heapq.heappush(heap, (cost + wt, path + (v,)))
    return None


def yen_paths(adj: ExpandedAdjacency, src: int, dst: int):
    """Generate loopless paths in nondecreasing weight (Yen's algorithm),
    ties broken by lexicographic node sequence."""
    out_edges = adj.out_edges()
    wt = {(u, v): x for u, lst in enumerate(out_edges) for v, x in lst}
    first = _shortest(out_edges, src, dst, set(), set())
    if first is None:
        return
    accepted = [first]
    yield CandidatePath(first[1], first[0])
    candidates: list[tuple[float, tuple[int, ...]]] = []
    seen = {first[1]}
    while True:
        _, prev = accepted[-1]
        for i in range(len(prev) - 1):
            root = prev[:i + 1]
            root_cost = sum(wt[(root[j], root[j + 1])] for j in range(i))
            banned_edges = {(p[i], p[i + 1]) for _c, p in accepted
                            if len(p) > i + 1 and p[:i + 1] == root}
            banned_nodes = set(root[:-1])
            res = _shortest(out_edges, root[-1], dst, banned_nodes, banned_edges)
            if res is None:
                continue
            cost, tail = res
            full = root[:-1] + tail
            if full not in seen:
                seen.add(full)
                heapq.heappush(candidates, (root_cost + cost, full))
        if not candidates:
            return
        nxt = heapq.heappop(candidates)
        accepted.append(nxt)
        yield CandidatePath(nxt[1], nxt[0])


def yen_k_shortest(adj: ExpandedAdjacency, src: int, dst: int,
                   k: int) -> list[CandidatePath]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(itertools.islice(yen_paths(adj, src, dst), k))


def gen_path_set(adj: ExpandedAdjacency, service: ServiceRequest, horizon: int,
                 k: int, params: LatencyParams) -> list[CandidatePath]:
    """Candidate paths to the destination's index in the arrival layer,
    keeping those with enough stay slots for the service's processing."""
    src = adj.index(service.source, 0)
    dst = adj.index(service.destination, horizon)
    need = min_slots(service, params)
    return [p for p in yen_k_shortest(adj, src, dst, k)
            if p.stay_slots(adj.num_nodes) >= need]


def place_vnfs(teg: TimeEvolvingGraph, residual: ResidualState,
               service: ServiceRequest, path: CandidatePath,
               params: LatencyParams, assignment: list[int] | None = None,
               period_reserve: bool = False):
    """Greedy in-order placement of the real VNFs on a candidate path's stay
    segments. Returns (ok, placement, routing); on success the residual
    compute is decremented (period-wide peak when `period_reserve`),
    otherwise nothing is mutated.

    `assignment` optionally pins each real VNF to a stay-segment index
    (monotone over the chain) instead of the greedy scan.
    """
    N = len(teg.nodes)
    steps = path.steps(N)
    segments: list[tuple[int, list[int]]] = []   # (node ordinal, slots)
    for t, a, b in steps:
        if a == b:
            if segments and segments[-1][0] == a and segments[-1][1][-1] == t - 1:
                segments[-1][1].append(t)
            else:
                segments.append((a, [t]))
    interior = list(service.interior_vnfs())
    if assignment is None:
        assignment = _greedy_assignment(teg, residual, service, steps,
                                        segments, params)
        if assignment is None:
            return False, {}, set()
    else:
        if len(assignment) != len(interior) or \
                any(not 0 <= j < len(segments) for j in assignment) or \
                any(later < earlier for earlier, later in zip(assignment, assignment[1:])):
            return False, {}, set()
    ok, placement, routing, usage = _simulate(teg, residual, service, steps,
                                              segments, assignment, params)
    if not ok:
        return False, {}, set()
    for n, load in usage.items():
        if period_reserve:
            residual.compute[n] = residual.compute[n] - float(load.max())
        else:
            residual.compute[n] = residual.compute[n] - load
    return True, placement, routing


def _greedy_assignment(teg, residual, service, steps, segments, params):
    """Scan segments left to right, packing each real VNF into the first
    segment where the partial schedule stays feasible."""
    interior = list(service.interior_vnfs())
    chosen: list[int] = []
    seg = 0
    for _vnf in interior:
        placed = False
        while seg < len(segments):
            trial = chosen + [seg]
            ok, *_rest = _simulate(teg, residual, service, steps, segments,
                                   trial, params, partial=True)
            if ok:
                chosen = trial
                placed = True
                break
            seg += 1
        if not placed:
            return None
    return chosen


def _simulate(teg, residual, service, steps, segments, assignment, params,
              partial: bool = False):
    """Label every path step for a VNF->segment assignment and check
    stay-time and compute capacity against the residual.

    With `partial`, only the assigned prefix of the chain is checked (used
    by the greedy scan); a full run also requires the chain to finish on
    the last virtual link.
    """
    q = service.id
    nodes = teg.nodes
    interior = list(service.interior_vnfs())
    active = interior[:len(assignment)]
    placement = {(q, 1): service.source,
                 (q, service.num_vnfs): service.destination}
    per_seg: dict[int, list[int]] = {}
    for vnf, segidx in zip(active, assignment):
        per_seg.setdefault(segidx, []).append(vnf)
        placement[(q, vnf)] = nodes[segments[segidx][0]]
    for segidx, vnfs in per_seg.items():
        if len(vnfs) > len(segments[segidx][1]):
            return False, {}, set(), {}
    seg_at_slot = {t: j for j, (_n, slots) in enumerate(segments) for t in slots}
    routing: set = set()
    label = 1
    for t, a, b in steps:
        if a != b:
            routing.add((q, label, t, Link(nodes[a], nodes[b])))
            continue
        segidx = seg_at_slot[t]
        vnfs = per_seg.get(segidx, [])
        slots = segments[segidx][1]
        pos = slots.index(t)
        # pads first (store/forward on the incoming virtual link), then one
        # slot per hosted VNF, converting the label upward as each completes
        pads = len(slots) - len(vnfs)
        if vnfs and pos >= pads:
            label = vnfs[pos - pads]
        routing.add((q, label, t, Link(nodes[a], nodes[a])))
    if not partial and label != service.num_virtual_links:
        return False, {}, set(), {}
    # stay time covers processing at every hosting node
    per_vnf_s = service.data_size * params.epsilon / service.compute_rate
    stays_at: dict[str, int] = {}
    for (_q, _i, _t, l) in routing:
        if l.is_stay:
            stays_at[l.src] = stays_at.get(l.src, 0) + 1
    for n in {placement[key] for key in placement}:
        hosted = sum(1 for vnf in active if placement.get((q, vnf)) == n)
        if hosted * per_vnf_s > params.slot_length * stays_at.get(n, 0) + LATENCY_TOL:
            return False, {}, set(), {}
    # compute capacity: deployment load in every slot, processing load in
    # slots where a hosted VNF's virtual link stays at its host
    usage: dict[str, np.ndarray] = {}
    for (_qi, i), n in placement.items():
        beta = service.vnf_costs[i - 1]
        if beta:
            usage.setdefault(n, np.zeros(teg.slots))
            usage[n] += beta
    for (_q, i, t, l) in routing:
        if l.is_stay and i <= service.num_virtual_links \
                and placement.get((q, i)) == l.src:
            usage.setdefault(l.src, np.zeros(teg.slots))
            usage[l.src][t - 1] += service.compute_rate
    for n, load in usage.items():
        if np.any(residual.compute[n] - load < -LATENCY_TOL):
            return False, {}, set(), {}
    return True, placement, routing, usage


def tedg_plan(teg: TimeEvolvingGraph, services: list[ServiceRequest],
              params: LatencyParams, k: int = 100,
              threshold_mode: str = "asPrinted", equal_weight: bool = False,
              exclusive: bool = False, trace: list | None = None) -> Plan:
    """Plan all services in input order; each service's horizon starts at
    its processing lower bound and advances one slot at a time until a
    candidate path admits a full placement, else the service is discarded."""
    residual = ResidualState(teg)
    plan = Plan()
    N = len(teg.nodes)
    ordinal = {n: j for j, n in enumerate(teg.nodes)}
    for s in services:
        adj = build_adjacency(teg, residual, s, teg.slots, params,
                              threshold_mode=threshold_mode,
                              equal_weight=equal_weight, exclusive=exclusive)
        tmin = max(1, min_slots(s, params))
        need = min_slots(s, params)
        done = False
        for t in range(tmin, teg.slots + 1):
            dst = ordinal[s.destination] + N * t
            for path in itertools.islice(yen_paths(adj, ordinal[s.source], dst), k):
                if path.stay_slots(N) < need:
                    continue
                ok, placement, routing = place_vnfs(
                    teg, residual, s, path, params, period_reserve=exclusive)
                if not ok:
                    continue
                plan.placement.update(placement)
                plan.routing |= routing
                plan.completion[s.id] = t
                for (_q, _i, tt, l) in routing:
                    if not l.is_stay:
                        for rt in (range(1, teg.slots + 1) if exclusive else (tt,)):
                            residual.add_flow(l, rt, s.data_size)
                if trace is not None:
                    trace.append({"service": s.id, "horizon": t,
                                  "weight": path.weight})
                done = True
                break
            if done:
                break
        if not done:
            plan.discarded.add(s.id)
            if trace is not None:
                trace.append({"service": s.id, "horizon": None, "weight": None})
    return plan
