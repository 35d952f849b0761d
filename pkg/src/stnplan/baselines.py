"""Comparison planners: equal-weight path search, decoupled greedy with
period-exclusive reservations, and a genetic algorithm over joint
placement and routing."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import (LatencyParams, Plan, ServiceRequest, e2e_latency,
                    min_slots, validate_plan)
from .teg import Link, ResidualState, TimeEvolvingGraph
from .tedg import _admissible, build_adjacency, gen_path_set, place_vnfs, tedg_plan


def ew_plan(teg: TimeEvolvingGraph, services: list[ServiceRequest],
            params: LatencyParams, k: int = 100) -> Plan:
    """Identical to the max-min planner except every usable edge costs 1."""
    return tedg_plan(teg, services, params, k=k, equal_weight=True)


def dg_plan(teg: TimeEvolvingGraph, services: list[ServiceRequest],
            params: LatencyParams, k: int = 100) -> Plan:
    """Decoupled greedy: shortest feasible path under equal weights, but a
    node's compute taken by a service and every link it touches are
    reserved exclusively for the whole configuration period."""
    return tedg_plan(teg, services, params, k=k, equal_weight=True,
                     exclusive=True)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 80
    generations: int = 300
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    tournament_size: int = 4
    rng_seed: int = 0
    infeasibility_penalty: float | None = None  # default 10 * T * slot length

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population must hold at least 2 individuals")
        for r in (self.crossover_rate, self.mutation_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")

    @staticmethod
    def from_dict(doc: dict) -> "GaConfig":
        return GaConfig(
            population_size=int(doc.get("populationSize", 80)),
            generations=int(doc.get("generations", 300)),
            crossover_rate=float(doc.get("crossoverRate", 0.9)),
            mutation_rate=float(doc.get("mutationRate", 0.05)),
            tournament_size=int(doc.get("tournamentSize", 4)),
            rng_seed=int(doc.get("rngSeed", 0)),
            infeasibility_penalty=doc.get("infeasibilityPenalty"),
        )


def _build_pools(teg, services, params, k):
    """Per-service candidate (horizon, path, segment count) pool from an
    uncontended equal-weight search."""
    pools = []
    empty = ResidualState(teg)
    for s in services:
        adj = build_adjacency(teg, empty, s, teg.slots, params, equal_weight=True)
        pool = []
        tmin = max(1, min_slots(s, params))
        for t in range(tmin, teg.slots + 1):
            for p in gen_path_set(adj, s, t, k, params):
                segs = _segment_count(p, len(teg.nodes))
                if segs >= 1 or not list(s.interior_vnfs()):
                    pool.append((t, p, max(segs, 1)))
            if len(pool) >= k:
                break
        pools.append(pool[:k])
    return pools


def _segment_count(path, num_nodes) -> int:
    segs = 0
    prev_stay_node = None
    for _t, a, b in path.steps(num_nodes):
        if a == b:
            if prev_stay_node != a:
                segs += 1
            prev_stay_node = a
        else:
            prev_stay_node = None
    return segs


def _decode(teg, services, params, pools, genes):
    """Apply every gene in service order on a fresh residual; genes that do
    not fit are repaired by discarding their service."""
    residual = ResidualState(teg)
    plan = Plan()
    for s, pool, gene in zip(services, pools, genes):
        if gene is None or not pool:
            plan.discarded.add(s.id)
            continue
        path_idx, seg_choice = gene
        t, path, segs = pool[path_idx % len(pool)]
        interior = list(s.interior_vnfs())
        assignment = sorted(j % segs for j in seg_choice[:len(interior)])
        # the pool was built without contention, so shared-link latency has
        # to be re-checked against the flows committed by earlier genes
        admissible = all(_admissible(teg, residual, s, Link(teg.nodes[a], teg.nodes[b]),
                                     tt, params)
                         for tt, a, b in path.steps(len(teg.nodes)) if a != b)
        if not admissible:
            plan.discarded.add(s.id)
            continue
        ok, placement, routing = place_vnfs(teg, residual, s, path, params,
                                            assignment=assignment)
        if not ok:
            plan.discarded.add(s.id)
            continue
        plan.placement.update(placement)
        plan.routing |= routing
        plan.completion[s.id] = t
        for (_q, _i, tt, l) in routing:
            if not l.is_stay:
                residual.add_flow(l, tt, s.data_size)
    return plan


def _fitness(plan, teg, services, params, penalty):
    completed = [s for s in services if s.id not in plan.discarded]
    avg = (sum(e2e_latency(plan, s.id, params) for s in completed) / len(completed)
           if completed else 0.0)
    violations = validate_plan(plan, teg, services, params)
    return avg + penalty * (len(plan.discarded) + len(violations))


def ga_plan(teg: TimeEvolvingGraph, services: list[ServiceRequest],
            params: LatencyParams, cfg: GaConfig | None = None, k: int = 100,
            fitness_log: str | None = None) -> Plan:
    """Genetic search over (candidate path, VNF-to-segment assignment) genes
    with tournament selection, one-point crossover over the service axis,
    uniform mutation, and repair-by-discard. Deterministic given the seed."""
    cfg = cfg or GaConfig()
    penalty = cfg.infeasibility_penalty
    if penalty is None:
        penalty = 10.0 * teg.slots * params.slot_length
    rng = np.random.default_rng(cfg.rng_seed)
    pools = _build_pools(teg, services, params, k)
    max_interior = max((len(list(s.interior_vnfs())) for s in services), default=0)

    def random_gene(qi):
        if not pools[qi]:
            return None
        return (int(rng.integers(0, len(pools[qi]))),
                tuple(int(rng.integers(0, 64)) for _ in range(max_interior)))

    def evaluate(genes):
        plan = _decode(teg, services, params, pools, genes)
        return _fitness(plan, teg, services, params, penalty), plan

    population = [tuple(random_gene(qi) for qi in range(len(services)))
                  for _ in range(cfg.population_size)]
    scored = [(evaluate(ind)[0], ind) for ind in population]
    history = []
    for gen in range(cfg.generations):
        scored.sort(key=lambda sx: sx[0])
        history.append((gen, scored[0][0]))
        elite = scored[0][1]
        next_pop = [elite]
        while len(next_pop) < cfg.population_size:
            parents = []
            for _ in range(2):
                picks = rng.integers(0, len(scored), size=cfg.tournament_size)
                parents.append(min((scored[i] for i in picks),
                                   key=lambda sx: sx[0])[1])
            a, b = parents
            if rng.random() < cfg.crossover_rate and len(services) > 1:
                cut = int(rng.integers(1, len(services)))
                child = a[:cut] + b[cut:]
            else:
                child = a
            child = tuple(random_gene(qi) if rng.random() < cfg.mutation_rate
                          else g for qi, g in enumerate(child))
            next_pop.append(child)
        scored = [(evaluate(ind)[0], ind) for ind in next_pop]
    scored.sort(key=lambda sx: sx[0])
    history.append((cfg.generations, scored[0][0]))
    if fitness_log is not None:
        with open(fitness_log, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "bestFitness"])
            for gen, fit in history:
                w.writerow([gen, repr(fit)])
    _, best = evaluate(scored[0][1])
    return best
