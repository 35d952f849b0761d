"""Layered-graph heuristic: path search, weighting, and placement."""

import itertools
import math

import numpy as np
import pytest

from stnplan.model import LatencyParams, ServiceRequest, validate_plan
from stnplan.teg import Link, ResidualState, make_teg
from stnplan.tedg import (CandidatePath, build_adjacency, gen_path_set,
                          place_vnfs, tedg_plan, yen_k_shortest, yen_paths)

PARAMS = LatencyParams(epsilon=4e-5, prop_speed=3e8, slot_length=100.0)


def diamond_teg(slots=3):
    """Two disjoint two-hop routes A->X->B and A->Y->B, always available."""
    spec = {"available": [1] * slots, "rate": 1e8, "distance": 500.0}
    return make_teg(
        {"A": ("groundUser", 0.0), "X": ("satellite", 200.0),
         "Y": ("satellite", 100.0), "B": ("groundStation", 200.0)},
        slots=slots, slot_length=100.0,
        comm={("A", "X"): dict(spec), ("X", "B"): dict(spec),
              ("A", "Y"): dict(spec), ("Y", "B"): dict(spec)})


def simple_service(qid=1, size=1e8, rate=80.0):
    return ServiceRequest(id=qid, source="A", destination="B",
                          data_size=size, compute_rate=rate,
                          vnf_costs=(0.0, 20.0, 0.0))


def brute_force_paths(adj, src, dst):
    """All loopless paths by exhaustive DFS over the layered weights."""
    out = adj.out_edges()
    results = []

    def dfs(path, cost):
        u = path[-1]
        if u == dst:
            results.append((cost, tuple(path)))
            return
        for v, w in out[u]:
            if v not in path:
                dfs(path + [v], cost + w)

    dfs([src], 0.0)
    return sorted(results)


def test_yen_enumerates_paths_in_brute_force_order():
    teg = diamond_teg()
    svc = simple_service()
    adj = build_adjacency(teg, ResidualState(teg), svc, 3, PARAMS)
    src = adj.index("A", 0)
    dst = adj.index("B", 3)
    expected = brute_force_paths(adj, src, dst)
    got = yen_k_shortest(adj, src, dst, len(expected) + 5)
    assert len(got) == len(expected)
    for path, (cost, nodes) in zip(got, expected):
        assert path.weight == pytest.approx(cost)
    # weights nondecreasing, no duplicates
    weights = [p.weight for p in got]
    assert weights == sorted(weights)
    assert len({p.indices for p in got}) == len(got)


def test_yen_is_deterministic():
    teg = diamond_teg()
    svc = simple_service()
    adj = build_adjacency(teg, ResidualState(teg), svc, 3, PARAMS)
    a = yen_k_shortest(adj, adj.index("A", 0), adj.index("B", 3), 10)
    b = yen_k_shortest(adj, adj.index("A", 0), adj.index("B", 3), 10)
    assert [p.indices for p in a] == [p.indices for p in b]


def test_stay_weights_prefer_compute_rich_nodes():
    teg = diamond_teg()
    # small deployment cost so the sufficiency threshold (min beta * tau + c)
    # lands between the two satellite capacities
    svc = ServiceRequest(id=1, source="A", destination="B", data_size=1e8,
                         compute_rate=80.0, vnf_costs=(0.0, 0.5, 0.0))
    adj = build_adjacency(teg, ResidualState(teg), svc, 3, PARAMS)
    wx = adj.weights[adj.index("X", 0), adj.index("X", 1)]
    wy = adj.weights[adj.index("Y", 0), adj.index("Y", 1)]
    assert wx == pytest.approx(0.5)          # constant sufficient residual
    assert wy == pytest.approx(0.9)          # below the threshold
    wu = adj.weights[adj.index("A", 0), adj.index("A", 1)]
    assert wu == pytest.approx(0.9)          # store/forward only


def test_max_min_normalization_formula():
    teg = diamond_teg()
    svc = ServiceRequest(id=1, source="A", destination="B", data_size=1e8,
                         compute_rate=80.0, vnf_costs=(0.0, 0.5, 0.0))
    residual = ResidualState(teg)
    residual.compute["X"] = np.array([100.0, 200.0, 300.0])
    adj = build_adjacency(teg, residual, svc, 3, PARAMS)
    # slot 2 residual 200 with lo=100, hi=300: W = 0.9 - 0.4*(200-100)/200
    w = adj.weights[adj.index("X", 1), adj.index("X", 2)]
    assert w == pytest.approx(0.7)


def test_equal_weight_mode_flattens_stays():
    teg = diamond_teg()
    svc = simple_service()
    adj = build_adjacency(teg, ResidualState(teg), svc, 3, PARAMS,
                          equal_weight=True)
    assert adj.weights[adj.index("X", 0), adj.index("X", 1)] == 1.0
    assert adj.weights[adj.index("Y", 0), adj.index("Y", 1)] == 1.0


def test_admission_excludes_overloaded_links():
    spec = {"available": [1] * 3, "rate": 1.5e7, "distance": 500.0}
    teg = make_teg(
        {"A": ("groundUser", 0.0), "X": ("satellite", 200.0),
         "Y": ("satellite", 100.0), "B": ("groundStation", 200.0)},
        slots=3, slot_length=100.0,
        comm={("A", "X"): dict(spec), ("X", "B"): dict(spec),
              ("A", "Y"): dict(spec), ("Y", "B"): dict(spec)})
    svc = simple_service(size=9e8)               # solo: 60 s, fits
    residual = ResidualState(teg)
    # an existing equal-size flow pushes the shared latency to 120 s > slot
    residual.add_flow(Link("A", "X"), 1, 9e8)
    adj = build_adjacency(teg, residual, svc, 3, PARAMS)
    assert math.isinf(adj.weights[adj.index("A", 0), adj.index("X", 1)])
    assert adj.weights[adj.index("A", 0), adj.index("Y", 1)] == 1.0
    # slot 2 on the same link is unaffected
    assert adj.weights[adj.index("A", 1), adj.index("X", 2)] == 1.0


def test_exclusive_mode_blocks_any_shared_link():
    teg = diamond_teg()
    svc = simple_service()
    residual = ResidualState(teg)
    residual.add_flow(Link("A", "X"), 1, 1.0)   # tiny flow still blocks
    adj = build_adjacency(teg, residual, svc, 3, PARAMS, exclusive=True)
    assert math.isinf(adj.weights[adj.index("A", 0), adj.index("X", 1)])


def test_candidate_filter_requires_processing_slots():
    teg = diamond_teg(slots=4)
    svc = simple_service(rate=20.0)             # needs 2 processing slots
    adj = build_adjacency(teg, ResidualState(teg), svc, 4, PARAMS)
    paths = gen_path_set(adj, svc, 4, 50, PARAMS)
    n = adj.num_nodes
    assert paths
    assert all(p.stay_slots(n) >= 2 for p in paths)


def test_placement_respects_capacity():
    teg = diamond_teg(slots=4)
    svc = simple_service(rate=300.0)            # exceeds both node capacities
    plan = tedg_plan(teg, [svc], PARAMS)
    assert plan.discarded == {svc.id}


def test_plans_are_validator_clean_across_random_instances():
    import sys
    sys.path.insert(0, "tests")
    from tiny import tiny_instance
    for seed in range(25):
        teg, services = tiny_instance(seed)
        plan = tedg_plan(teg, services, PARAMS)
        assert validate_plan(plan, teg, services, PARAMS) == []


def test_tedg_plan_deterministic():
    teg = diamond_teg(slots=4)
    svcs = [simple_service(qid=1), simple_service(qid=2, rate=40.0)]
    a = tedg_plan(teg, svcs, PARAMS)
    b = tedg_plan(teg, svcs, PARAMS)
    assert a.routing == b.routing and a.placement == b.placement
    assert a.completion == b.completion and a.discarded == b.discarded
