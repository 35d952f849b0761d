"""Time-evolving graph assembly, serialization, and index arithmetic.

The TEG carries, per directed link and slot, availability, distance and
achievable rate, plus per-node compute capacity. Stay links (n == n) are
always available with zero distance and unbounded rate, so store/forward
and processing slots never incur transmission latency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import ChannelParams, GeometrySnapshot, isl_rate, stl_rate

INF_RATE = math.inf

TEG_FORMAT_VERSION = 1


class TegError(ValueError):
    """Raised for malformed TEG construction inputs or documents."""


@dataclass(frozen=True)
class Link:
    src: str
    dst: str

    @property
    def is_stay(self) -> bool:
        return self.src == self.dst


@dataclass
class TimeEvolvingGraph:
    """Immutable-after-build network model over T slots of length tau."""

    nodes: list[str]
    classes: dict[str, str]
    capacity: dict[str, float]
    slots: int
    slot_length: float
    links: list[Link] = field(default_factory=list)
    # per link: arrays of length T
    available: dict[Link, np.ndarray] = field(default_factory=dict)
    distance_km: dict[Link, np.ndarray] = field(default_factory=dict)
    rate: dict[Link, np.ndarray] = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def comm_links(self) -> list[Link]:
        return [l for l in self.links if not l.is_stay]

    def stay_links(self) -> list[Link]:
        return [l for l in self.links if l.is_stay]

    def node_class(self, name: str) -> str:
        return self.classes[name]

    def validate(self) -> None:
        for node in self.nodes:
            stay = Link(node, node)
            if stay not in self.available:
                raise TegError(f"missing stay link for node {node}")
            if not np.all(self.available[stay] == 1):
                raise TegError(f"stay link {node} must be always available")
            if np.any(self.distance_km[stay] != 0.0):
                raise TegError(f"stay link {node} must have zero distance")
            if not np.all(np.isinf(self.rate[stay])):
                raise TegError(f"stay link {node} must have infinite rate")
        for link in self.links:
            for table in (self.available, self.distance_km, self.rate):
                if len(table[link]) != self.slots:
                    raise TegError(f"link {link.src}->{link.dst} table length != T")
            if not link.is_stay:
                avail = self.available[link].astype(bool)
                if np.any(avail & ~(self.rate[link] > 0)):
                    raise TegError(f"link {link.src}->{link.dst} available with rate <= 0")


def node_index(n: int, layer: int, num_nodes: int, num_slots: int) -> int:
    """Time-expanded index of node ordinal n (1..N) at layer (0..T): n + N * layer."""
    if not 1 <= n <= num_nodes:
        raise TegError(f"node ordinal {n} out of range [1, {num_nodes}]")
    if not 0 <= layer <= num_slots:
        raise TegError(f"layer {layer} out of range [0, {num_slots}]")
    return n + num_nodes * layer


def expanded_size(num_nodes: int, num_slots: int) -> int:
    return num_nodes * (num_slots + 1)


def build_teg(geometry: list[GeometrySnapshot], channel: ChannelParams,
              capacities: dict[str, float], slot_length: float = 0.0,
              ground_fiber_rate: float = 1e9) -> TimeEvolvingGraph:
    """Assemble a TEG from propagated geometry.

    A communication link is kept only for node pairs visible in at least
    one slot. Ground-station pairs get a fixed fiber rate; satellite pairs
    use the ISL model and satellite-ground pairs the (LoS-only) STL model.
    Every node gets a stay link.
    """
    if not geometry:
        raise TegError("geometry must contain at least one snapshot")
    first = geometry[0]
    slots = len(geometry)
    names = list(first.names)
    classes = {n: c for n, c in zip(first.names, first.classes)}
    teg = TimeEvolvingGraph(
        nodes=names,
        classes=classes,
        capacity={n: float(capacities.get(n, 0.0)) for n in names},
        slots=slots,
        slot_length=float(slot_length),
        links=[],
    )
    n = len(names)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            avail = np.array([snap.visible[i, j] for snap in geometry], dtype=np.int8)
            if not avail.any():
                continue
            dist = np.array([snap.distance[i, j] for snap in geometry])
            rates = np.zeros(slots)
            ci, cj = first.classes[i], first.classes[j]
            for t in range(slots):
                if not avail[t]:
                    continue
                if ci == "satellite" and cj == "satellite":
                    rates[t] = isl_rate(dist[t], channel)
                elif ci == "groundStation" and cj == "groundStation":
                    rates[t] = ground_fiber_rate
                else:
                    direction = "up" if cj == "satellite" else "down"
                    rates[t] = stl_rate(dist[t], channel, direction=direction, fading="losOnly")
            link = Link(names[i], names[j])
            teg.links.append(link)
            teg.available[link] = avail
            teg.distance_km[link] = dist
            teg.rate[link] = rates
    for name in names:
        stay = Link(name, name)
        teg.links.append(stay)
        teg.available[stay] = np.ones(slots, dtype=np.int8)
        teg.distance_km[stay] = np.zeros(slots)
        teg.rate[stay] = np.full(slots, INF_RATE)
    teg.validate()
    return teg


def make_teg(nodes: dict[str, tuple[str, float]], slots: int, slot_length: float,
             comm: dict[tuple[str, str], dict] | None = None,
             symmetric: bool = True) -> TimeEvolvingGraph:
    """Hand-build a TEG for tests and synthetic scenarios.

    `nodes` maps name -> (class, capacity). `comm` maps (src, dst) ->
    {"available": seq, "rate": seq or scalar, "distance": seq or scalar}.
    With `symmetric`, each pair is mirrored with shared tables.
    """
    names = list(nodes)
    teg = TimeEvolvingGraph(
        nodes=names,
        classes={k: v[0] for k, v in nodes.items()},
        capacity={k: float(v[1]) for k, v in nodes.items()},
        slots=slots,
        slot_length=float(slot_length),
        links=[],
    )

    def _expand(val, default):
        if val is None:
            val = default
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 0:
            arr = np.full(slots, float(arr))
        if len(arr) != slots:
            raise TegError("per-slot table length != T")
        return arr

    seen = set()
    for (src, dst), spec in (comm or {}).items():
        pairs = [(src, dst)] + ([(dst, src)] if symmetric else [])
        for a, b in pairs:
            if (a, b) in seen:
                continue
            seen.add((a, b))
            link = Link(a, b)
            teg.links.append(link)
            teg.available[link] = _expand(spec.get("available"), 1).astype(np.int8)
            teg.distance_km[link] = _expand(spec.get("distance"), 0.0)
            teg.rate[link] = _expand(spec.get("rate"), INF_RATE)
    for name in names:
        stay = Link(name, name)
        teg.links.append(stay)
        teg.available[stay] = np.ones(slots, dtype=np.int8)
        teg.distance_km[stay] = np.zeros(slots)
        teg.rate[stay] = np.full(slots, INF_RATE)
    teg.validate()
    return teg


def serialize(teg: TimeEvolvingGraph) -> str:
    """Versioned JSON document with deterministic key ordering."""

    def _rate_list(arr):
        return ["inf" if math.isinf(v) else v for v in arr.tolist()]

    doc = {
        "version": TEG_FORMAT_VERSION,
        "slots": teg.slots,
        "slotLength": teg.slot_length,
        "nodes": [
            {"name": n, "class": teg.classes[n], "capacity": teg.capacity[n]}
            for n in teg.nodes
        ],
        "links": [
            {
                "src": l.src,
                "dst": l.dst,
                "available": teg.available[l].astype(int).tolist(),
                "distanceKm": teg.distance_km[l].tolist(),
                "rate": _rate_list(teg.rate[l]),
            }
            for l in sorted(teg.links, key=lambda l: (l.src, l.dst))
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def deserialize(document: str) -> TimeEvolvingGraph:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TegError(f"malformed TEG document: {exc}") from exc
    if doc.get("version") != TEG_FORMAT_VERSION:
        raise TegError(f"unsupported TEG format version {doc.get('version')!r}")
    slots = int(doc["slots"])
    teg = TimeEvolvingGraph(
        nodes=[n["name"] for n in doc["nodes"]],
        classes={n["name"]: n["class"] for n in doc["nodes"]},
        capacity={n["name"]: float(n["capacity"]) for n in doc["nodes"]},
        slots=slots,
        slot_length=float(doc["slotLength"]),
        links=[],
    )
    for entry in doc["links"]:
        link = Link(entry["src"], entry["dst"])
        for key in ("available", "distanceKm", "rate"):
            if key not in entry or len(entry[key]) != slots:
                raise TegError(
                    f"link {link.src}->{link.dst}: missing or short table {key!r}")
        teg.links.append(link)
        teg.available[link] = np.array(entry["available"], dtype=np.int8)
        teg.distance_km[link] = np.array(entry["distanceKm"], dtype=float)
        teg.rate[link] = np.array(
            [math.inf if v == "inf" else float(v) for v in entry["rate"]])
    teg.validate()
    return teg


class ResidualState:
    """Per-slot residual compute and per-link flow counts for one planning run."""

    def __init__(self, teg: TimeEvolvingGraph):
        self.teg = teg
        self.compute = {n: np.full(teg.slots, teg.capacity[n]) for n in teg.nodes}
        self.flows: dict[tuple[Link, int], list] = {}

    def flow_count(self, link: Link, t: int) -> int:
        """Number of virtual links already assigned to `link` in slot t (1-based)."""
        return len(self.flows.get((link, t), []))

    def flow_sizes(self, link: Link, t: int) -> list[float]:
        return [d for d in self.flows.get((link, t), [])]

    def add_flow(self, link: Link, t: int, data_size: float) -> None:
        self.flows.setdefault((link, t), []).append(data_size)

    def copy(self) -> "ResidualState":
        dup = ResidualState.__new__(ResidualState)
        dup.teg = self.teg
        dup.compute = {n: arr.copy() for n, arr in self.compute.items()}
        dup.flows = {k: list(v) for k, v in self.flows.items()}
        return dup
