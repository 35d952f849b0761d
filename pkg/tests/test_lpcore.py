"""Simplex core: duality, Farkas certificates, and MIP cross-checks."""

import numpy as np
import pytest

from stnplan.ilp import IlpModel, Row
from stnplan.lpcore import (LinearProgram, bb_solve, enumerate_solve,
                            relaxation, solve_lp, verify_farkas)

scipy_opt = pytest.importorskip("scipy.optimize")


def random_lp(seed: int, m: int = 6, n: int = 8) -> LinearProgram:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, n))
    sense = rng.choice(["<=", ">=", "="], size=m, p=[0.6, 0.3, 0.1])
    x0 = rng.uniform(0.0, 2.0, size=n)          # a feasible point by design
    rhs = a @ x0
    rows = []
    for i in range(m):
        coeffs = {j: float(a[i, j]) for j in range(n)}
        slack = float(rng.uniform(0.0, 1.0))
        if sense[i] == "<=":
            rows.append(Row(coeffs, "<=", float(rhs[i] + slack), f"r{i}"))
        elif sense[i] == ">=":
            rows.append(Row(coeffs, ">=", float(rhs[i] - slack), f"r{i}"))
        else:
            rows.append(Row(coeffs, "=", float(rhs[i]), f"r{i}"))
    for j in range(n):                          # keep the region bounded
        rows.append(Row({j: 1.0}, "<=", 5.0, f"ub{j}"))
    return LinearProgram(num_vars=n, objective=rng.normal(size=n), rows=rows)


def scipy_solve(lp: LinearProgram):
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for row in lp.rows:
        dense = np.zeros(lp.num_vars)
        for j, c in row.coeffs.items():
            dense[j] = c
        if row.sense == "<=":
            a_ub.append(dense); b_ub.append(row.rhs)
        elif row.sense == ">=":
            a_ub.append(-dense); b_ub.append(-row.rhs)
        else:
            a_eq.append(dense); b_eq.append(row.rhs)
    return scipy_opt.linprog(lp.objective,
                             A_ub=np.array(a_ub) if a_ub else None,
                             b_ub=np.array(b_ub) if b_ub else None,
                             A_eq=np.array(a_eq) if a_eq else None,
                             b_eq=np.array(b_eq) if b_eq else None,
                             bounds=(0, None), method="highs")


@pytest.mark.parametrize("seed", range(25))
def test_simplex_matches_reference_solver(seed):
    lp = random_lp(seed)
    ours = solve_lp(lp)
    ref = scipy_solve(lp)
    assert ours.status == "optimal"
    assert ref.status == 0
    assert ours.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("seed", range(50))
def test_strong_duality_on_random_feasible_lps(seed):
    lp = random_lp(seed + 1000)
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    dual_obj = sum(y * row.rhs for y, row in zip(sol.duals, lp.rows))
    denom = max(1.0, abs(sol.objective))
    assert abs(dual_obj - sol.objective) / denom <= 1e-7


def infeasible_lp(seed: int) -> LinearProgram:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    rows = [Row({j: 1.0 for j in range(n)}, "<=", 1.0, "low"),
            Row({j: float(rng.uniform(1.0, 2.0)) for j in range(n)}, ">=",
                float(rng.uniform(3.0, 6.0)), "high")]
    return LinearProgram(num_vars=n, objective=rng.normal(size=n), rows=rows)


@pytest.mark.parametrize("seed", range(30))
def test_farkas_certificate_is_mechanically_verified(seed):
    lp = infeasible_lp(seed)
    sol = solve_lp(lp)
    assert sol.status == "infeasible"
    assert sol.farkas is not None
    assert verify_farkas(lp, sol.farkas)


def knapsack_model(seed: int) -> IlpModel:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 9))
    m = IlpModel()
    vals = rng.uniform(1.0, 10.0, size=n)
    wts = rng.uniform(1.0, 10.0, size=n)
    for j in range(n):
        col = m.add_var(("x", j), f"x[{j}]")
        m.objective[col] = -float(vals[j])
    m.add_row({j: float(wts[j]) for j in range(n)}, "<=",
              float(wts.sum() * 0.4), "cap")
    return m


@pytest.mark.parametrize("seed", range(15))
def test_branch_and_bound_matches_reference_milp(seed):
    model = knapsack_model(seed)
    res = bb_solve(model)
    assert res.status == "optimal"
    n = model.num_vars
    wrow = model.rows[0]
    a = np.zeros((1, n))
    for j, c in wrow.coeffs.items():
        a[0, j] = c
    c = np.zeros(n)
    for j, v in model.objective.items():
        c[j] = v
    ref = scipy_opt.milp(c=c, integrality=np.ones(n),
                         bounds=scipy_opt.Bounds(0, 1),
                         constraints=scipy_opt.LinearConstraint(a, -np.inf, wrow.rhs))
    assert ref.status == 0
    assert res.objective == pytest.approx(ref.fun, abs=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_enumeration_agrees_with_branch_and_bound(seed):
    model = knapsack_model(seed + 100)
    bb = bb_solve(model)
    en = enumerate_solve(model)
    assert bb.status == en.status == "optimal"
    assert bb.objective == pytest.approx(en.objective, abs=1e-9)


def test_relaxation_fixing_rows():
    model = knapsack_model(0)
    lp = relaxation(model, fixed={0: 1.0})
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
