"""Scenario configuration, service generation, end-to-end runs, and sweeps.

Everything is seed-driven: the same configuration yields byte-identical
plans and CSV tables. Metrics are always recomputed from the returned
plan, never taken from an algorithm's own bookkeeping, and a plan that
fails validation aborts the run instead of reporting numbers.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import GaConfig, dg_plan, ew_plan, ga_plan
from .benders import bdbc_solve
from .constellation import ChannelParams, ConstellationConfig, propagate
from .ilp import assignment_to_plan, build_full_model
from .lpcore import bb_solve
from .model import (LatencyParams, Plan, ServiceRequest, e2e_latency,
                    validate_plan)
from .teg import TimeEvolvingGraph, build_teg
from .tedg import tedg_plan

# the four reference ground stations and four reference user sites (lat, lon)
DEFAULT_STATIONS = ((39.76, 98.56), (37.87, 112.56), (19.62, 110.75), (27.89, 102.27))
DEFAULT_USERS = ((31.49, 110.13), (34.45, 84.98), (52.26, 124.35), (21.98, 100.94))

# refusal limits for the exact solvers (model columns / search nodes blow up
# combinatorially past desk scale)
EXACT_MAX_NODES = 8
EXACT_MAX_SLOTS = 8
EXACT_MAX_SERVICES = 4

MBIT = 1e6
ALGORITHMS = ("tedg", "ew", "dg", "ga", "exact", "benders")


class ConfigError(ValueError):
    pass


class CapExceeded(RuntimeError):
    pass


class ValidationFailure(RuntimeError):
    def __init__(self, violations):
        super().__init__("plan failed validation:\n"
                         + "\n".join(str(v) for v in violations))
        self.violations = violations


@dataclass(frozen=True)
class ServiceSpec:
    count: int = 12
    data_size_mbit: tuple[float, float] = (100.0, 1000.0)
    compute_rate_choices: tuple[float, ...] = (20.0, 80.0)
    deploy_cost_choices: tuple[float, ...] = (20.0, 30.0)
    vnf_count: int = 4
    rng_seed: int = 1

    @staticmethod
    def from_dict(doc: dict) -> "ServiceSpec":
        d = ServiceSpec()
        return ServiceSpec(
            count=int(doc.get("count", d.count)),
            data_size_mbit=tuple(doc.get("dataSizeMbit", d.data_size_mbit)),
            compute_rate_choices=tuple(doc.get("computeRateChoices",
                                               d.compute_rate_choices)),
            deploy_cost_choices=tuple(doc.get("deployCostChoices",
                                              d.deploy_cost_choices)),
            vnf_count=int(doc.get("vnfCount", d.vnf_count)),
            rng_seed=int(doc.get("rngSeed", d.rng_seed)),
        )


@dataclass
class ScenarioConfig:
    constellation: ConstellationConfig
    channel: ChannelParams = field(default_factory=ChannelParams)
    period_s: float = 3600.0
    slot_length_s: float = 100.0
    capacities: dict = field(default_factory=lambda: {"satellite": 200.0,
                                                      "station": 200.0,
                                                      "user": 0.0})
    sds_count: int | None = None   # VNF-capable satellites; None = all
    services: ServiceSpec = field(default_factory=ServiceSpec)
    algorithm: str = "tedg"
    k: int = 100
    ga: GaConfig = field(default_factory=GaConfig)
    epsilon: float = 4e-5          # compute units * s per bit
    prop_speed: float = 299792458.0

    def __post_init__(self):
        slots = self.period_s / self.slot_length_s
        if abs(slots - round(slots)) > 1e-9:
            raise ConfigError("period must be an exact multiple of the slot length")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; "
                              f"expected one of {ALGORITHMS}")
        n_sat = self.constellation.num_satellites
        if self.sds_count is not None and not 0 <= self.sds_count <= n_sat:
            raise ConfigError(f"sdsCount {self.sds_count} exceeds the "
                              f"{n_sat} satellites")

    @property
    def slots(self) -> int:
        return round(self.period_s / self.slot_length_s)

    def latency_params(self) -> LatencyParams:
        return LatencyParams(epsilon=self.epsilon, prop_speed=self.prop_speed,
                             slot_length=self.slot_length_s)

    @staticmethod
    def from_dict(doc: dict) -> "ScenarioConfig":
        try:
            cons = dict(doc["constellation"])
        except KeyError as exc:
            raise ConfigError("config must define a constellation") from exc
        cons.setdefault("groundStations", DEFAULT_STATIONS)
        cons.setdefault("groundUsers", DEFAULT_USERS)
        try:
            return ScenarioConfig(
                constellation=ConstellationConfig.from_dict(cons),
                channel=ChannelParams.from_dict(doc.get("channel", {})),
                period_s=float(doc.get("periodS", 3600.0)),
                slot_length_s=float(doc.get("slotLengthS", 100.0)),
                capacities=dict(doc.get("capacities",
                                        {"satellite": 200.0, "station": 200.0,
                                         "user": 0.0})),
                sds_count=doc.get("sdsCount"),
                services=ServiceSpec.from_dict(doc.get("services", {})),
                algorithm=doc.get("algorithm", "tedg"),
                k=int(doc.get("k", 100)),
                ga=GaConfig.from_dict(doc.get("ga", {})),
                epsilon=float(doc.get("epsilon", 4e-5)),
            )
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad scenario config: {exc}") from exc

    @staticmethod
    def from_json(text: str) -> "ScenarioConfig":
        try:
            return ScenarioConfig.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


def build_scenario_teg(config: ScenarioConfig) -> TimeEvolvingGraph:
    geometry = propagate(config.constellation, config.slots, config.slot_length_s)
    caps = {}
    sds = (config.constellation.num_satellites if config.sds_count is None
           else config.sds_count)
    sat_seen = 0
    for name in config.constellation.node_names():
        cls = "satellite" if name.startswith("S") else \
              "station" if name.startswith("G") else "user"
        value = float(config.capacities.get(cls, 0.0))
        if cls == "satellite":
            if sat_seen >= sds:
                value = 0.0
            sat_seen += 1
        caps[name] = value
    return build_teg(geometry, config.channel, caps,
                     slot_length=config.slot_length_s)


def generate_services(spec: ServiceSpec, teg: TimeEvolvingGraph) -> list[ServiceRequest]:
    """Seeded service batch: uplink services run user -> station through the
    satellite layer; downlink services run satellite -> station or user."""
    rng = np.random.default_rng(spec.rng_seed)
    sats = [n for n in teg.nodes if teg.classes[n] == "satellite"]
    stations = [n for n in teg.nodes if teg.classes[n] == "groundStation"]
    users = [n for n in teg.nodes if teg.classes[n] == "groundUser"]
    if not stations or not (sats or users):
        raise ConfigError("scenario needs stations plus satellites or users")
    out = []
    for qid in range(1, spec.count + 1):
        size = float(rng.uniform(*spec.data_size_mbit)) * MBIT
        rate = float(rng.choice(spec.compute_rate_choices)) * size / (100 * MBIT)
        betas = [float(rng.choice(spec.deploy_cost_choices))
                 for _ in range(spec.vnf_count - 2)]
        uplink = bool(rng.random() < 0.5) if users and sats else bool(users)
        if uplink:
            src = users[int(rng.integers(len(users)))]
            dst = stations[int(rng.integers(len(stations)))]
        else:
            src = sats[int(rng.integers(len(sats)))]
            ground = stations + users
            dst = ground[int(rng.integers(len(ground)))]
        out.append(ServiceRequest(id=qid, source=src, destination=dst,
                                  data_size=size, compute_rate=rate,
                                  vnf_costs=(0.0, *betas, 0.0)))
    return out


def _check_exact_caps(teg: TimeEvolvingGraph, services) -> None:
    if len(teg.nodes) > EXACT_MAX_NODES:
        raise CapExceeded(f"exact solvers accept at most {EXACT_MAX_NODES} "
                          f"nodes, got {len(teg.nodes)}")
    if teg.slots > EXACT_MAX_SLOTS:
        raise CapExceeded(f"exact solvers accept at most {EXACT_MAX_SLOTS} "
                          f"slots, got {teg.slots}")
    if len(services) > EXACT_MAX_SERVICES:
        raise CapExceeded(f"exact solvers accept at most {EXACT_MAX_SERVICES} "
                          f"services, got {len(services)}")


def plan_with(algorithm: str, teg: TimeEvolvingGraph, services,
              params: LatencyParams, k: int = 100,
              ga: GaConfig | None = None) -> tuple[Plan, dict]:
    """Dispatch to a planner; returns (plan, solver info)."""
    info: dict = {}
    if algorithm == "tedg":
        plan = tedg_plan(teg, services, params, k=k)
    elif algorithm == "ew":
        plan = ew_plan(teg, services, params, k=k)
    elif algorithm == "dg":
        plan = dg_plan(teg, services, params, k=k)
    elif algorithm == "ga":
        plan = ga_plan(teg, services, params, cfg=ga, k=k)
    elif algorithm == "exact":
        _check_exact_caps(teg, services)
        model = build_full_model(teg, services, params)
        res = bb_solve(model)
        if res.status != "optimal":
            raise CapExceeded(f"exact solve ended with status {res.status}")
        plan = assignment_to_plan(model, res.x, teg, services)
        info = {"objective": res.objective, "nodes": res.nodes,
                "bound": res.best_bound}
    elif algorithm == "benders":
        _check_exact_caps(teg, services)
        res = bdbc_solve(teg, services, params)
        if res.status != "optimal":
            raise CapExceeded(f"decomposition solve ended with status {res.status}")
        model = build_full_model(teg, services, params)
        plan = assignment_to_plan(model, res.assignment, teg, services)
        info = {"objective": res.objective, "nodes": res.nodes,
                "cuts": len(res.cuts)}
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    return plan, info


def run_scenario(config: ScenarioConfig, teg: TimeEvolvingGraph | None = None,
                 services: list[ServiceRequest] | None = None):
    """Build geometry, TEG and services, plan, validate, and measure.

    Returns (metrics dict, plan). Raises ValidationFailure rather than
    reporting metrics for an invalid plan.
    """
    if teg is None:
        teg = build_scenario_teg(config)
    if services is None:
        services = generate_services(config.services, teg)
    params = config.latency_params()
    start = time.perf_counter()
    plan, info = plan_with(config.algorithm, teg, services, params,
                           k=config.k, ga=config.ga)
    wall = time.perf_counter() - start
    violations = validate_plan(plan, teg, services, params)
    if violations:
        raise ValidationFailure(violations)
    completed = [s for s in services if s.id not in plan.discarded]
    per_service = {s.id: e2e_latency(plan, s.id, params) for s in completed}
    metrics = {
        "completedCount": len(completed),
        "discardedIds": sorted(plan.discarded),
        "averageE2eLatency": (sum(per_service.values()) / len(completed)
                              if completed else math.nan),
        "perServiceLatency": per_service,
        "wallTime": wall,
        "solver": info,
    }
    return metrics, plan


def _apply_axis(config: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    import copy
    cfg = copy.deepcopy(config)
    if axis == "capacity":
        cfg.capacities["satellite"] = float(value)
        cfg.capacities["station"] = float(value)
    elif axis == "sdsCount":
        cfg.sds_count = int(value)
    elif axis == "serviceCount":
        cfg.services = ServiceSpec(**{**cfg.services.__dict__, "count": int(value)})
    elif axis == "k":
        cfg.k = int(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected capacity, "
                          "sdsCount, serviceCount, or k")
    return cfg


def sweep(axis: str, values, config: ScenarioConfig,
          algorithms: tuple[str, ...] | None = None,
          timing: bool = True) -> str:
    """One run per (value, algorithm); long-format CSV.

    With `timing=False` the wallTime column is left empty so the whole
    table is byte-deterministic under fixed seeds."""
    algorithms = algorithms or (config.algorithm,)
    out = io.StringIO()
    out.write("axis,value,algorithm,completed,avgLatency,wallTime,seed\n")
    base_teg = None
    for value in values:
        for algo in algorithms:
            cfg = _apply_axis(config, axis, value)
            cfg.algorithm = algo
            try:
                if axis in ("serviceCount", "k") and base_teg is None:
                    base_teg = build_scenario_teg(cfg)
                teg = base_teg if axis in ("serviceCount", "k") else None
                metrics, _plan = run_scenario(cfg, teg=teg)
                avg = metrics["averageE2eLatency"]
                wall = f"{metrics['wallTime']:.6f}" if timing else ""
                out.write(f"{axis},{value},{algo},{metrics['completedCount']},"
                          f"{'' if math.isnan(avg) else repr(avg)},"
                          f"{wall},{cfg.services.rng_seed}\n")
            except (CapExceeded, ValidationFailure) as exc:
                out.write(f"{axis},{value},{algo},,"
                          f",,{cfg.services.rng_seed}\n")
                out.write(f"# error: {type(exc).__name__}\n")
    return out.getvalue()
