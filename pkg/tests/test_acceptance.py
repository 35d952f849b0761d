"""End-to-end acceptance gate.

Covers, in order: exact-solver agreement on enumerable instances,
equivalence of the ILP-feasible and validator-feasible assignment sets,
validity of every decomposition cut, heuristic plan quality and speed,
scenario-level comparisons at desk and full scale, candidate-budget and
scaling behavior of the planner, orbital/channel physics, LP duality and
infeasibility certificates, and byte-level reproducibility of artifacts.
"""

import itertools
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from stnplan.benders import bdbc_solve, decompose
from stnplan.constellation import (ChannelParams, isl_rate, orbital_period,
                                   stl_gain_los_power)
from stnplan.harness import ScenarioConfig, _apply_axis, run_scenario, sweep
from stnplan.baselines import GaConfig
from stnplan.ilp import (build_full_model, check_assignment, derive_auxiliaries,
                         export_lp)
from stnplan.lpcore import bb_solve, enumerate_solve, solve_lp, verify_farkas
from stnplan.model import Plan, ServiceRequest, objective, validate_plan
from stnplan.tedg import tedg_plan
from stnplan.teg import make_teg

from tiny import PARAMS, tiny_instance
from test_lpcore import infeasible_lp, random_lp

ROOT = Path(__file__).resolve().parent.parent
DESK_CONFIG = ROOT / "configs" / "desk.json"
FULL_CONFIG = ROOT / "configs" / "full.json"
GA_BUDGET = GaConfig(population_size=24, generations=20, rng_seed=3)
GA_BUDGET_LARGE = GaConfig(population_size=20, generations=10, rng_seed=3)

# Instance mix for the exact-solver agreement suite: mostly small graphs,
# a band of mid-size ones, and one at the size caps (4 nodes, 4 slots,
# 2 services, up to 3 VNFs).
EXACT_MIX = (
    [(s, dict(max_nodes=3, max_slots=3, max_services=1, max_vnfs=3))
     for s in range(40)]
    + [(100 + s, dict(max_nodes=4, max_slots=3, max_services=1, max_vnfs=3))
       for s in range(6)]
    + [(200 + s, dict(max_nodes=3, max_slots=4, max_services=2, max_vnfs=3))
       for s in range(3)]
    + [(0, dict(max_nodes=4, max_slots=4, max_services=2, max_vnfs=3))]
)


@pytest.fixture(scope="module")
def exact_records():
    """Solve every mixed-size instance with all three exact solvers."""
    records = []
    start = time.perf_counter()
    for seed, kw in EXACT_MIX:
        teg, services = tiny_instance(seed, **kw)
        model = build_full_model(teg, services, PARAMS)
        t0 = time.perf_counter()
        bb = bb_solve(model)
        t1 = time.perf_counter()
        enum = enumerate_solve(model)
        t2 = time.perf_counter()
        bdbc = bdbc_solve(teg, services, PARAMS, full=model)
        t3 = time.perf_counter()
        records.append({
            "seed": seed, "kw": kw, "teg": teg, "services": services,
            "model": model, "bb": bb, "enum": enum, "bdbc": bdbc,
            "wallBb": t1 - t0, "wallEnum": t2 - t1, "wallBdbc": t3 - t2,
        })
    elapsed = time.perf_counter() - start
    return {"records": records, "elapsed": elapsed}


def test_exact_solvers_agree_on_fifty_instances(exact_records):
    records = exact_records["records"]
    assert len(records) >= 50
    for rec in records:
        bb, enum, bdbc = rec["bb"], rec["enum"], rec["bdbc"]
        statuses = {bb.status, enum.status, bdbc.status}
        assert statuses in ({"optimal"}, {"infeasible"}), \
            f"seed {rec['seed']}: {bb.status}/{enum.status}/{bdbc.status}"
        if bb.status == "optimal":
            assert bb.objective == pytest.approx(enum.objective, abs=1e-6)
            assert bb.objective == pytest.approx(bdbc.objective, abs=1e-6)
    assert exact_records["elapsed"] < 600.0


def _structured_assignments(teg, svc):
    """Every (placement, routing, completion) candidate consistent with the
    model's structure for a single service: one node per VNF with pinned
    endpoints, exactly one routing entry per slot up to the completion slot,
    and nothing after it. Both the ILP rows and the plan validator confine
    feasible assignments to this space, so enumerating it enumerates both
    feasible sets."""
    q = svc.id
    links = sorted(teg.links, key=lambda l: (l.src, l.dst))
    interior = list(svc.interior_vnfs())
    pins = {(q, 1): svc.source, (q, svc.num_vnfs): svc.destination}
    moves = [(i, l) for i in range(1, svc.num_virtual_links + 1) for l in links]
    for combo in itertools.product(teg.nodes, repeat=len(interior)):
        placement = dict(pins)
        placement.update({(q, i): n for i, n in zip(interior, combo)})
        for t_q in range(1, teg.slots + 1):
            for seq in itertools.product(moves, repeat=t_q):
                routing = {(q, i, t + 1, l) for t, (i, l) in enumerate(seq)}
                if len(routing) < t_q:
                    continue  # duplicate entries collapse; not one-per-slot
                yield placement, routing, {q: t_q}


ENUM_SEEDS = list(range(12))


@pytest.fixture(scope="module")
def enumeration_records():
    """Exhaustively classify every structured assignment of twelve
    single-service instances under both the ILP rows and the validator."""
    records = []
    for seed in ENUM_SEEDS:
        teg, services = tiny_instance(
            seed, max_nodes=3, max_slots=3, max_services=1, max_vnfs=3)
        model = build_full_model(teg, services, PARAMS)
        dec = decompose(model)
        feasible = []           # (full x, master projection, objective)
        mismatches = []
        objective_gaps = []
        for placement, routing, completion in _structured_assignments(
                teg, services[0]):
            x = derive_auxiliaries(model, teg, services, placement, routing,
                                   completion)
            ilp_ok = not check_assignment(model, x)
            plan = Plan(placement=dict(placement), routing=set(routing),
                        completion=dict(completion))
            val_ok = not validate_plan(plan, teg, services, PARAMS)
            if ilp_ok != val_ok:
                mismatches.append((placement, routing, completion))
            if ilp_ok and val_ok:
                y = np.zeros(dec.master.num_vars)
                for j_full, j_master in dec.master_of_full.items():
                    y[j_master] = x[j_full]
                objective_gaps.append(
                    abs(model.objective_value(x)
                        - objective(plan, services, PARAMS)))
                feasible.append((x, y, model.objective_value(x)))
        records.append({
            "seed": seed, "teg": teg, "services": services, "model": model,
            "dec": dec, "feasible": feasible, "mismatches": mismatches,
            "objectiveGaps": objective_gaps,
            "bb": bb_solve(model),
            "bdbc": bdbc_solve(teg, services, PARAMS, full=model),
        })
    return records


def test_ilp_feasible_set_equals_validator_feasible_set(enumeration_records):
    assert len(enumeration_records) >= 10
    for rec in enumeration_records:
        assert not rec["mismatches"], \
            f"seed {rec['seed']}: {len(rec['mismatches'])} assignments " \
            "classified differently by the ILP rows and the validator"
        for gap in rec["objectiveGaps"]:
            assert gap <= 1e-9
        # cross-check: the best enumerated assignment is the exact optimum
        if rec["feasible"]:
            best = min(obj for _x, _y, obj in rec["feasible"])
            assert rec["bb"].status == "optimal"
            assert best == pytest.approx(rec["bb"].objective, abs=1e-9)
        else:
            assert rec["bb"].status == "infeasible"


def test_every_cut_separates_its_generator_and_spares_feasible_points(
        enumeration_records):
    total_cuts = 0
    for rec in enumeration_records:
        for cut in rec["bdbc"].cuts:
            total_cuts += 1
            assert cut.y_hat is not None, \
                f"seed {rec['seed']}: cut without its generating assignment"
            assert cut.violated_by(cut.y_hat), \
                f"seed {rec['seed']}: {cut.kind} cut does not cut off its " \
                "generating assignment"
            for _x, y, _obj in rec["feasible"]:
                assert not cut.violated_by(y), \
                    f"seed {rec['seed']}: {cut.kind} cut removes a feasible " \
                    "assignment"
    assert total_cuts > 0


def test_heuristic_plans_validate_and_never_beat_the_optimum(exact_records):
    gaps = []
    for rec in exact_records["records"]:
        plan = tedg_plan(rec["teg"], rec["services"], PARAMS, k=20)
        assert validate_plan(plan, rec["teg"], rec["services"], PARAMS) == []
        if rec["bb"].status == "optimal" and not plan.discarded:
            heur = objective(plan, rec["services"], PARAMS)
            assert heur >= rec["bb"].objective - 1e-9
            gaps.append((heur - rec["bb"].objective)
                        / max(1.0, rec["bb"].objective))
    assert gaps, "no instance allowed an optimality-gap comparison"
    print(f"\nheuristic optimality gaps over {len(gaps)} instances: "
          f"mean {np.mean(gaps):.4f}, max {np.max(gaps):.4f}")


def test_heuristic_runs_within_one_percent_of_exact_wall_time(exact_records):
    candidates = [rec for rec in exact_records["records"]
                  if rec["wallBdbc"] <= 300.0]
    rec = max(candidates, key=lambda r: r["model"].num_vars)
    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        tedg_plan(rec["teg"], rec["services"], PARAMS, k=20)
        best = min(best, time.perf_counter() - t0)
    assert best <= 0.01 * rec["wallBdbc"], \
        f"heuristic {best:.4f}s vs exact {rec['wallBdbc']:.1f}s"


def _load_config(path: Path) -> ScenarioConfig:
    return ScenarioConfig.from_json(path.read_text())


def test_desk_scale_completion_nondecreasing_and_dominates_ga():
    cfg = _load_config(DESK_CONFIG)
    cfg.ga = GA_BUDGET
    tedg_done, ga_done = [], []
    for cap in (100, 200, 300, 400):
        c = _apply_axis(cfg, "capacity", cap)
        c.algorithm = "tedg"
        tedg_done.append(run_scenario(c)[0]["completedCount"])
        c.algorithm = "ga"
        ga_done.append(run_scenario(c)[0]["completedCount"])
    assert tedg_done == sorted(tedg_done), tedg_done
    for t_val, g_val in zip(tedg_done, ga_done):
        assert t_val >= g_val, (tedg_done, ga_done)


def test_full_scale_heuristic_leads_all_baselines():
    start = time.perf_counter()
    cfg = _load_config(FULL_CONFIG)
    cfg = _apply_axis(cfg, "capacity", 360)
    cfg.ga = GA_BUDGET_LARGE
    results = {}
    for algo in ("tedg", "ew", "dg", "ga"):
        cfg.algorithm = algo
        metrics, _plan = run_scenario(cfg)
        results[algo] = metrics
    for algo in ("ew", "dg", "ga"):
        assert results["tedg"]["completedCount"] >= \
            results[algo]["completedCount"], \
            {a: m["completedCount"] for a, m in results.items()}
    assert results["tedg"]["averageE2eLatency"] <= \
        results["ga"]["averageE2eLatency"]
    assert time.perf_counter() - start < 900.0


def test_candidate_budget_grows_completion_and_wall_time():
    cfg = _load_config(DESK_CONFIG)
    done, walls = [], []
    for k in (1, 5, 20, 100):
        c = _apply_axis(cfg, "k", k)
        metrics, _plan = run_scenario(c)
        done.append(metrics["completedCount"])
        walls.append(metrics["wallTime"])
    assert done == sorted(done), done
    assert all(a < b for a, b in zip(walls, walls[1:])), walls


def _synthetic_instance(num_services, slots, num_nodes):
    """Dense synthetic network where every service is eventually rejected
    for lack of deployable capacity, so the planner scans its whole search
    space: the worst case its complexity bound describes."""
    nodes = {"U": ("groundUser", 0.0), "G": ("groundStation", 10.0)}
    sats = [f"S{j}" for j in range(num_nodes - 2)]
    for j, s in enumerate(sats):
        nodes[s] = ("satellite", 10.0 + j * 0.7)   # all below the 20-unit VNF
    comm = {}
    for s in sats:
        comm[("U", s)] = {"available": 1.0, "rate": 1e9, "distance": 1000.0}
        comm[(s, "G")] = {"available": 1.0, "rate": 1e9, "distance": 1000.0}
    for a in range(len(sats)):
        for b in range(a + 1, len(sats)):
            comm[(sats[a], sats[b])] = {"available": 1.0, "rate": 1e9,
                                        "distance": 800.0}
    teg = make_teg(nodes, slots=slots, slot_length=PARAMS.slot_length,
                   comm=comm)
    size = 1e8
    rate = size * PARAMS.epsilon / PARAMS.slot_length
    services = [ServiceRequest(id=q, source="U", destination="G",
                               data_size=size, compute_rate=rate,
                               vnf_costs=(0.0, 20.0, 0.0))
                for q in range(1, num_services + 1)]
    return teg, services


def _planner_seconds(num_services, slots, num_nodes, reps=4):
    teg, services = _synthetic_instance(num_services, slots, num_nodes)
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        tedg_plan(teg, services, PARAMS, k=1)
        best = min(best, time.perf_counter() - t0)
    return best


def _slope(points):
    xs = np.log([p for p, _ in points])
    ys = np.log([t for _, t in points])
    return float(np.polyfit(xs, ys, 1)[0])


def test_planner_scaling_matches_complexity_exponents():
    slope_q = _slope([(q, _planner_seconds(q, 8, 6)) for q in (2, 4, 8, 16)])
    slope_t = _slope([(t, _planner_seconds(2, t, 6)) for t in (8, 16, 32)])
    slope_n = _slope([(n, _planner_seconds(2, 8, n)) for n in (6, 12, 24)])
    assert abs(slope_q - 1.0) <= 0.5, slope_q
    assert abs(slope_t - 2.0) <= 0.5, slope_t
    assert abs(slope_n - 2.0) <= 0.5, slope_n


def test_orbital_period_and_channel_laws():
    assert orbital_period(700.0) == pytest.approx(5927.0, abs=1.0)
    p = ChannelParams()
    grid = np.linspace(100.0, 5000.0, 60)
    rates = [isl_rate(d, p) for d in grid]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    for d in (300.0, 900.0, 2500.0):
        ratio = stl_gain_los_power(d, p) / stl_gain_los_power(2.0 * d, p)
        assert ratio == pytest.approx(2.0 ** p.path_loss_exp, rel=1e-9)


def test_duality_gap_and_farkas_certificates():
    for seed in range(50):
        lp = random_lp(seed + 5000)
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        dual_obj = sum(y * row.rhs for y, row in zip(sol.duals, lp.rows))
        assert abs(dual_obj - sol.objective) / max(1.0, abs(sol.objective)) \
            <= 1e-7
    for seed in range(30):
        lp = infeasible_lp(seed + 5000)
        sol = solve_lp(lp)
        assert sol.status == "infeasible"
        assert sol.farkas is not None
        assert verify_farkas(lp, sol.farkas)


def _cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "stnplan.cli", *args],
        capture_output=True, text=True, cwd=ROOT)


def test_artifacts_are_byte_identical_across_runs(tmp_path):
    # plan JSON via two separate interpreter runs
    outs = []
    for i in (1, 2):
        out = tmp_path / f"plan{i}.json"
        res = _cli("plan", "--config", str(DESK_CONFIG), "--out", str(out))
        assert res.returncode == 0, res.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    json.loads(outs[0])

    # LP text export, twice in-process
    teg, services = tiny_instance(0, max_nodes=3, max_slots=3,
                                  max_services=1, max_vnfs=3)
    first = export_lp(build_full_model(teg, services, PARAMS))
    second = export_lp(build_full_model(teg, services, PARAMS))
    assert first == second

    # sweep CSV with timing masked, twice
    cfg = _load_config(DESK_CONFIG)
    tables = [sweep("capacity", [100, 200], cfg, ("tedg",), timing=False)
              for _ in (1, 2)]
    assert tables[0] == tables[1]
