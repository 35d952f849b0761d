"""Benders-style branch and cut for the placement/routing program.

The binary program splits cleanly: routing-side variables (y, f, h, k,
a) carry the whole objective and all latency/flow structure, while the
placement variables (x) and the placement-stay products (b) only appear
in assignment, host-visit, stay-time and capacity rows. The master
problem keeps the routing side; for a candidate routing the restricted
subproblem is a pure feasibility LP in (x, b) whose matrix does not
depend on the candidate, so every infeasibility certificate yields a
feasibility cut that is affine in the master variables and valid at
every node of the search tree.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ilp import IlpModel, Row, build_full_model
from .lpcore import (INT_TOL, LinearProgram, LpError, MipResult, bb_solve,
                     enumerate_solve, relaxation, solve_lp, verify_farkas)
from .model import LatencyParams, ServiceRequest
from .teg import TimeEvolvingGraph

MASTER_SYMBOLS = ("y", "f", "h", "k", "a")
SUB_SYMBOLS = ("x", "b")


@dataclass
class RspRow:
    coeffs: dict[int, float]        # over subproblem columns
    sense: str
    rhs_const: float
    rhs_lin: dict[int, float]       # over master columns
    label: str

    def rhs_at(self, y_hat) -> float:
        return self.rhs_const + sum(c * y_hat[j] for j, c in self.rhs_lin.items())


@dataclass
class Decomposition:
    master: IlpModel
    sub_names: list[str]
    sub_integer: list[bool]
    rsp_rows: list[RspRow]
    master_of_full: dict[int, int]  # full-model column -> master column
    sub_of_full: dict[int, int]


@dataclass
class BendersCut:
    coeffs: dict[int, float]        # over master columns
    rhs: float                      # cut: sum coeffs * y <= rhs
    kind: str                       # "farkas" | "noGood"
    ray: np.ndarray | None = None
    y_hat: np.ndarray | None = None  # master assignment that generated the cut

    def violated_by(self, y_hat, tol: float = 1e-7) -> bool:
        return sum(c * y_hat[j] for j, c in self.coeffs.items()) > self.rhs + tol


@dataclass
class BdbcResult:
    status: str                     # "optimal" | "infeasible" | "budgetExceeded"
    objective: float | None = None
    assignment: np.ndarray | None = None   # over the full model's columns
    nodes: int = 0
    cuts: list[BendersCut] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)


def _symbol_of(name: str) -> str:
    return name.split("_", 1)[0]


def decompose(full: IlpModel) -> Decomposition:
    """Split the full program into master and restricted subproblem parts."""
    master = IlpModel()
    sub_names: list[str] = []
    sub_integer: list[bool] = []
    master_of: dict[int, int] = {}
    sub_of: dict[int, int] = {}
    for key, col in full.var_index.items():
        if key[0] in MASTER_SYMBOLS:
            master_of[col] = master.add_var(key, full.var_names[col],
                                            full.lower[col], full.upper[col],
                                            full.integer[col])
        else:
            sub_of[col] = len(sub_names)
            sub_names.append(full.var_names[col])
            sub_integer.append(full.integer[col])
    rsp_rows: list[RspRow] = []
    for row in full.rows:
        sub_part = {sub_of[j]: c for j, c in row.coeffs.items() if j in sub_of}
        if not sub_part:
            master.add_row({master_of[j]: c for j, c in row.coeffs.items()},
                           row.sense, row.rhs, row.label)
            continue
        rhs_lin = {master_of[j]: -c for j, c in row.coeffs.items() if j in master_of}
        rsp_rows.append(RspRow(sub_part, row.sense, row.rhs, rhs_lin, row.label))
    # subproblem variable ranges; constants, so certificates stay affine
    for j, name in enumerate(sub_names):
        rsp_rows.append(RspRow({j: 1.0}, "<=", 1.0, {}, f"ub[{name}]"))
    for j, c in full.objective.items():
        if j not in master_of:
            raise LpError("objective must live entirely on master variables")
        master.objective[master_of[j]] = c
    master.obj_offset = full.obj_offset
    return Decomposition(master, sub_names, sub_integer, rsp_rows, master_of, sub_of)


def build_rsp(dec: Decomposition, y_hat) -> LinearProgram:
    """Instantiate the feasibility subproblem for a master assignment."""
    n = len(dec.sub_names)
    rows = [Row(dict(r.coeffs), r.sense, r.rhs_at(y_hat), r.label)
            for r in dec.rsp_rows]
    return LinearProgram(num_vars=n, objective=np.zeros(n), rows=rows)


def generate_cut(dec: Decomposition, y_hat, ray: np.ndarray) -> BendersCut:
    """Turn an infeasibility certificate of the subproblem at `y_hat` into a
    master-space feasibility cut sum_j coef_j y_j <= rhs."""
    coeffs: dict[int, float] = {}
    const = 0.0
    for r, row in zip(ray, dec.rsp_rows):
        if abs(r) < 1e-12:
            continue
        const += r * row.rhs_const
        for j, c in row.rhs_lin.items():
            coeffs[j] = coeffs.get(j, 0.0) + r * c
    cut = BendersCut(coeffs={j: c for j, c in coeffs.items() if abs(c) > 1e-12},
                     rhs=-const, kind="farkas", ray=ray.copy(),
                     y_hat=np.asarray(y_hat, dtype=float).copy())
    return cut


def no_good_cut(master: IlpModel, y_hat) -> BendersCut:
    """Exclude exactly the binary assignment y_hat."""
    coeffs = {}
    rhs = -1.0
    for j in range(master.num_vars):
        if y_hat[j] > 0.5:
            coeffs[j] = 1.0
            rhs += 1.0
        else:
            coeffs[j] = -1.0
    return BendersCut(coeffs=coeffs, rhs=rhs, kind="noGood",
                      y_hat=np.asarray(y_hat, dtype=float).copy())


def _master_lp(dec: Decomposition, cuts: list[BendersCut],
               fixed: dict[int, float]) -> LinearProgram:
    lp = relaxation(dec.master, fixed)
    for i, cut in enumerate(cuts):
        lp.rows.append(Row(dict(cut.coeffs), "<=", cut.rhs, f"cut[{i}]"))
    return lp


def _sub_mip(dec: Decomposition, y_hat) -> IlpModel:
    model = IlpModel()
    for j, name in enumerate(dec.sub_names):
        model.add_var(("v", j), name, 0.0, 1.0, dec.sub_integer[j])
    for r in dec.rsp_rows:
        if len(r.coeffs) == 1 and r.label.startswith("ub["):
            continue
        model.add_row(dict(r.coeffs), r.sense, r.rhs_at(y_hat), r.label)
    return model


def bdbc_solve(teg: TimeEvolvingGraph, services: list[ServiceRequest],
               params: LatencyParams, node_budget: int = 10000,
               cuts_per_node: int = 200, gap_tol: float = 1e-6,
               log_path: str | None = None,
               full: IlpModel | None = None) -> BdbcResult:
    """Branch and cut on the master with feasibility cuts from the
    subproblem. Best-bound node selection; branching on the most
    fractional master variable; incumbents require an integral placement
    certified by solving the subproblem exactly."""
    if full is None:
        full = build_full_model(teg, services, params)
    dec = decompose(full)
    master = dec.master
    cuts: list[BendersCut] = []
    counter = itertools.count()
    log: list[dict] = []
    nodes = 0
    best_obj = math.inf
    best_assignment = None

    root = solve_lp(_master_lp(dec, cuts, {}))
    nodes += 1
    if root.status == "infeasible":
        return BdbcResult(status="infeasible", nodes=nodes, cuts=cuts, log=log)
    heap = [(root.objective, next(counter), {})]
    lower_bound = root.objective

    def record(event, bound):
        log.append({"event": event, "nodes": nodes, "cuts": len(cuts),
                    "lowerBound": round(lower_bound, 12),
                    "upperBound": None if best_obj == math.inf else round(best_obj, 12),
                    "nodeBound": round(bound, 12)})

    status = "optimal"
    while heap:
        bound, _, fixed = heapq.heappop(heap)
        lower_bound = max(lower_bound,
                          min([bound, best_obj] + [h[0] for h in heap]))
        if bound >= best_obj - gap_tol:
            continue
        if nodes >= node_budget:
            status = "budgetExceeded"
            break
        # cut loop at this node
        node_cuts = 0
        while True:
            sol = solve_lp(_master_lp(dec, cuts, fixed))
            nodes += 1
            if sol.status != "optimal" or sol.objective >= best_obj - gap_tol:
                break
            frac_j = _most_fractional_master(master, sol.x)
            if frac_j >= 0:
                for val in (0.0, 1.0):
                    child = dict(fixed)
                    child[frac_j] = val
                    heapq.heappush(heap, (sol.objective, next(counter), child))
                record("branch", sol.objective)
                break
            y_hat = np.round(sol.x)
            rsp = build_rsp(dec, y_hat)
            rsp_sol = solve_lp(rsp)
            if rsp_sol.status == "infeasible":
                if node_cuts >= cuts_per_node:
                    status = "budgetExceeded"
                    heap = []
                    break
                cut = generate_cut(dec, y_hat, rsp_sol.farkas)
                if not cut.violated_by(y_hat):
                    # certificate too weak numerically; fall back
                    cut = no_good_cut(master, y_hat)
                cuts.append(cut)
                node_cuts += 1
                record("cut", sol.objective)
                continue
            sub = bb_solve(_sub_mip(dec, y_hat))
            if sub.status == "optimal":
                if sol.objective < best_obj - gap_tol:
                    best_obj = sol.objective
                    best_assignment = _merge(dec, full, y_hat, sub.x)
                record("incumbent", sol.objective)
            else:
                cuts.append(no_good_cut(master, y_hat))
                node_cuts += 1
                record("cut", sol.objective)
                continue
            break

    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["event", "nodes", "cuts",
                                               "lowerBound", "upperBound",
                                               "nodeBound"])
            w.writeheader()
            w.writerows(log)
    if best_assignment is None:
        return BdbcResult(status="infeasible" if status == "optimal" else status,
                          nodes=nodes, cuts=cuts, log=log)
    return BdbcResult(status=status,
                      objective=float(full.objective_value(best_assignment)),
                      assignment=best_assignment, nodes=nodes, cuts=cuts, log=log)


def _most_fractional_master(master: IlpModel, x) -> int:
    best_j, best_d = -1, INT_TOL
    for j in range(master.num_vars):
        if not master.integer[j]:
            continue
        d = abs(x[j] - round(x[j]))
        if d > best_d:
            best_j, best_d = j, d
    return best_j


def _merge(dec: Decomposition, full: IlpModel, y_hat, x_hat) -> np.ndarray:
    out = np.zeros(full.num_vars)
    for j, mj in dec.master_of_full.items():
        out[j] = y_hat[mj]
    for j, sj in dec.sub_of_full.items():
        out[j] = round(float(x_hat[sj]))
    return out
