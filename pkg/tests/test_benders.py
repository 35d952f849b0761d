"""Decomposition branch-and-cut: structure, cut validity, and exactness."""

import sys

import numpy as np
import pytest

from stnplan.benders import (MASTER_SYMBOLS, SUB_SYMBOLS, bdbc_solve,
                             build_rsp, decompose, generate_cut)
from stnplan.ilp import build_full_model
from stnplan.lpcore import bb_solve, solve_lp, verify_farkas

sys.path.insert(0, "tests")
from tiny import PARAMS, tiny_instance


def small_model():
    # seed 0 has a real (interior) VNF, so zero routing forbids placement
    teg, services = tiny_instance(0, max_nodes=3, max_slots=3, max_services=1)
    assert services[0].num_vnfs == 3
    return teg, services, build_full_model(teg, services, PARAMS)


def test_decomposition_splits_variables_by_symbol():
    _teg, _svcs, full = small_model()
    dec = decompose(full)
    master_names = set(dec.master.var_names)
    sub_names = set(dec.sub_names)
    assert master_names.isdisjoint(sub_names)
    assert master_names | sub_names == set(full.var_names)
    for name in master_names:
        assert name.split("_", 1)[0] in MASTER_SYMBOLS
    for name in sub_names:
        assert name.split("_", 1)[0] in SUB_SYMBOLS
    # the objective involves only master variables
    for j in full.objective:
        assert full.var_names[j] in master_names


def test_master_rows_touch_only_master_columns():
    _teg, _svcs, full = small_model()
    dec = decompose(full)
    for row in dec.master.rows:
        for j in row.coeffs:
            assert dec.master.var_names[j] in set(dec.master.var_names)


def test_infeasible_subproblem_yields_violated_valid_cut():
    _teg, _svcs, full = small_model()
    dec = decompose(full)
    # a routing guess with no routing at all cannot admit any placement
    y_hat = np.zeros(len(dec.master.var_names))
    rsp = build_rsp(dec, y_hat)
    sol = solve_lp(rsp)
    assert sol.status == "infeasible"
    assert verify_farkas(rsp, sol.farkas)
    cut = generate_cut(dec, y_hat, sol.farkas)
    assert cut.violated_by(y_hat)


def test_bdbc_matches_branch_and_bound_objective():
    for seed in (0, 3, 7, 11):
        teg, services = tiny_instance(seed, max_nodes=3, max_slots=3,
                                      max_services=1)
        full = build_full_model(teg, services, PARAMS)
        bb = bb_solve(full)
        bd = bdbc_solve(teg, services, PARAMS, full=full)
        assert bb.status == bd.status
        if bb.status == "optimal":
            assert bd.objective == pytest.approx(bb.objective, abs=1e-9)


def test_bdbc_log_records_progress(tmp_path):
    teg, services = tiny_instance(7, max_nodes=3, max_slots=3, max_services=1)
    log = tmp_path / "bdbc.csv"
    res = bdbc_solve(teg, services, PARAMS, log_path=str(log))
    assert log.exists()
    header = log.read_text().splitlines()[0]
    assert "event" in header
    if res.status == "optimal":
        assert any("incumbent" in line for line in log.read_text().splitlines())
