"""Full linearized model: construction, export, and assignment checking."""

import json

import pytest

from stnplan.ilp import (IlpError, assignment_to_plan, build_full_model,
                         check_assignment, count_model, derive_auxiliaries,
                         export_lp, export_metadata)
from stnplan.lpcore import bb_solve
from stnplan.model import LatencyParams, ServiceRequest, objective, validate_plan
from stnplan.teg import make_teg
from stnplan.tedg import tedg_plan

PARAMS = LatencyParams(epsilon=4e-5, prop_speed=3e8, slot_length=100.0)


def instance(slots=4, rate=80.0):
    teg = make_teg(
        {"A": ("groundUser", 0.0), "S": ("satellite", 100.0),
         "B": ("groundStation", 100.0)},
        slots=slots, slot_length=100.0,
        comm={("A", "S"): {"available": [1] * slots, "rate": 1e7,
                           "distance": 1000.0},
              ("S", "B"): {"available": [1] * slots, "rate": 1e7,
                           "distance": 1000.0}})
    svc = ServiceRequest(id=1, source="A", destination="B", data_size=1e8,
                         compute_rate=rate, vnf_costs=(0.0, 20.0, 0.0))
    return teg, [svc]


def test_count_model_reports_exact_and_approximate_sizes():
    teg, svcs = instance()
    counts = count_model(teg, svcs, PARAMS)
    model = build_full_model(teg, svcs, PARAMS)
    assert counts["variables"] == model.num_vars
    assert counts["constraints"] == model.num_rows
    L, T = len(teg.links), teg.slots
    assert counts["variablesApprox"] == L * T * sum(s.num_virtual_links for s in svcs)
    assert counts["constraintsApprox"] == T * L * (1 + 2 * len(svcs))


def test_lp_export_is_deterministic_and_structured():
    teg, svcs = instance()
    model = build_full_model(teg, svcs, PARAMS)
    text = export_lp(model)
    assert text == export_lp(build_full_model(teg, svcs, PARAMS))
    for section in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert section in text
    meta = json.loads(export_metadata(model))
    assert meta["variables"] == model.num_vars
    assert meta["constraints"] == model.num_rows


def test_exact_solution_projects_to_valid_plan():
    teg, svcs = instance()
    model = build_full_model(teg, svcs, PARAMS)
    res = bb_solve(model)
    assert res.status == "optimal"
    plan = assignment_to_plan(model, res.x, teg, svcs)
    assert validate_plan(plan, teg, svcs, PARAMS) == []
    assert objective(plan, svcs, PARAMS) == pytest.approx(res.objective)


def test_derived_auxiliaries_satisfy_all_rows():
    teg, svcs = instance()
    plan = tedg_plan(teg, svcs, PARAMS)
    assert not plan.discarded
    model = build_full_model(teg, svcs, PARAMS)
    x = derive_auxiliaries(model, teg, svcs, plan.placement, plan.routing,
                           plan.completion)
    assert check_assignment(model, x) == []


def test_corrupted_assignment_is_flagged():
    teg, svcs = instance()
    plan = tedg_plan(teg, svcs, PARAMS)
    model = build_full_model(teg, svcs, PARAMS)
    x = derive_auxiliaries(model, teg, svcs, plan.placement, plan.routing,
                           plan.completion)
    col = model.col("x", 1, 2, "S")
    x[col] = 1.0 - x[col]
    assert check_assignment(model, x) != []


def test_model_infeasible_when_processing_cannot_fit():
    teg, svcs = instance(slots=3, rate=10.0)    # needs 4 processing slots
    model = build_full_model(teg, svcs, PARAMS)
    assert bb_solve(model).status == "infeasible"


def test_objective_is_average_latency_over_services():
    teg, svcs = instance()
    model = build_full_model(teg, svcs, PARAMS)
    res = bb_solve(model)
    # single service: objective equals tau times its active-slot count
    assert res.objective % PARAMS.slot_length == pytest.approx(0.0, abs=1e-9)
