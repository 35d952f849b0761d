"""Dense two-phase simplex with dual and infeasibility certificates,
plus exact binary-program solvers built on top of it (best-first
branch and bound, and exhaustive enumeration with pruning).

Scaled for desk-size models: the simplex keeps a full tableau and uses
Bland's rule throughout, trading speed for freedom from cycling.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ilp import IlpModel, Row

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
INT_TOL = 1e-6


class LpError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """min c.x  s.t. rows, x >= 0.  Upper bounds go in as rows by the caller."""
    num_vars: int
    objective: np.ndarray
    rows: list[Row] = field(default_factory=list)


@dataclass
class LpSolution:
    status: str                       # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None   # one per row, signed for the row as given
    farkas: np.ndarray | None = None  # one per row; certificate of infeasibility
    iterations: int = 0


def _standardize(lp: LinearProgram):
    """Rows with nonnegative rhs; returns (A, b, senses, signs)."""
    m = len(lp.rows)
    n = lp.num_vars
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    signs = np.ones(m)
    flip = {"<=": ">=", ">=": "<=", "=": "="}
    for i, row in enumerate(lp.rows):
        for j, c in row.coeffs.items():
            A[i, j] = c
        b[i] = row.rhs
        sense = row.sense
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            signs[i] = -1.0
            sense = flip[sense]
        senses.append(sense)
    return A, b, senses, signs


_DEGENERATE_STREAK = 40


def _pivot_loop(tab, basis, barred, max_iter):
    """Primal simplex pivoting on a tableau whose last row is reduced costs
    and last column the rhs. Prices entering columns by most negative reduced
    cost, switching to Bland's rule after a long run of degenerate pivots so
    termination is still guaranteed. Returns ('optimal'|'unbounded',
    iterations)."""
    m = tab.shape[0] - 1
    n = tab.shape[1] - 1
    mask = np.ones(n, dtype=bool)
    for j in barred:
        mask[j] = False
    it = 0
    degenerate = 0
    while True:
        it += 1
        if it > max_iter:
            raise LpError("simplex iteration limit exceeded")
        obj = tab[-1, :-1]
        if degenerate < _DEGENERATE_STREAK:
            priced = np.where(mask, obj, 0.0)
            enter = int(np.argmin(priced))
            if priced[enter] >= -PIVOT_TOL:
                return "optimal", it
        else:
            candidates = np.nonzero(mask & (obj < -PIVOT_TOL))[0]
            if candidates.size == 0:
                return "optimal", it
            enter = int(candidates[0])
        col = tab[:m, enter]
        positive = col > PIVOT_TOL
        if not positive.any():
            return "unbounded", it
        ratios = np.full(m, math.inf)
        ratios[positive] = tab[:m, -1][positive] / col[positive]
        best_ratio = ratios.min()
        ties = np.nonzero(ratios <= best_ratio + PIVOT_TOL)[0]
        best = int(min(ties, key=lambda i: basis[i]))
        degenerate = degenerate + 1 if best_ratio <= PIVOT_TOL else 0
        piv = tab[best, enter]
        tab[best] /= piv
        colvals = tab[:, enter].copy()
        colvals[best] = 0.0
        tab -= np.outer(colvals, tab[best])
        tab[:, enter] = 0.0
        tab[best, enter] = 1.0
        basis[best] = enter


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Two-phase primal simplex. On optimality, duals satisfy strong duality
    against the rows as given; on infeasibility, `farkas` holds signed row
    multipliers r with sum(r_i * A_i) <= 0 componentwise and
    sum(r_i * rhs_i) > 0 (signs per sense: r >= 0 on >= rows, r <= 0 on <=
    rows, free on equalities)."""
    A, b, senses, signs = _standardize(lp)
    m, n = A.shape
    if max_iter is None:
        max_iter = 20000 + 200 * (m + n)
    # slack/surplus/artificial columns
    n_slack = sum(1 for s in senses if s == "<=")
    n_surp = sum(1 for s in senses if s == ">=")
    n_art = sum(1 for s in senses if s != "<=")
    ncols = n + n_slack + n_surp + n_art
    full = np.zeros((m, ncols))
    full[:, :n] = A
    slack_col = {}
    js, ju, ja = n, n + n_slack, n + n_slack + n_surp
    art_cols = []
    basis = [0] * m
    for i, s in enumerate(senses):
        if s == "<=":
            full[i, js] = 1.0
            slack_col[i] = js
            basis[i] = js
            js += 1
        else:
            if s == ">=":
                full[i, ju] = -1.0
                slack_col[i] = ju
                ju += 1
            full[i, ja] = 1.0
            basis[i] = ja
            art_cols.append(ja)
            ja += 1

    tab = np.zeros((m + 1, ncols + 1))
    tab[:m, :ncols] = full
    tab[:m, -1] = b
    c1 = np.zeros(ncols)
    c1[art_cols] = 1.0
    tab[-1, :-1] = c1
    for i in range(m):
        if c1[basis[i]] != 0:
            tab[-1] -= c1[basis[i]] * tab[i]
    status, it1 = _pivot_loop(tab, basis, set(), max_iter)
    phase1_obj = -tab[-1, -1]
    if phase1_obj > FEAS_TOL:
        # Farkas certificate from the phase-1 duals
        y = _basis_duals(full, basis, c1)
        ray = signs * y
        return LpSolution(status="infeasible", farkas=ray, iterations=it1)

    # drive any residual artificial out of the basis where possible
    art_set = set(art_cols)
    for i in range(m):
        if basis[i] in art_set and tab[i, -1] <= FEAS_TOL:
            for j in range(ncols):
                if j not in art_set and abs(tab[i, j]) > PIVOT_TOL:
                    piv = tab[i, j]
                    tab[i] /= piv
                    for r in range(tab.shape[0]):
                        if r != i and abs(tab[r, j]) > 0:
                            tab[r] -= tab[r, j] * tab[i]
                    basis[i] = j
                    break

    c2 = np.zeros(ncols)
    c2[:n] = lp.objective
    tab[-1, :-1] = c2
    tab[-1, -1] = 0.0
    for i in range(m):
        if c2[basis[i]] != 0:
            tab[-1] -= c2[basis[i]] * tab[i]
    status, it2 = _pivot_loop(tab, basis, art_set, max_iter)
    if status == "unbounded":
        return LpSolution(status="unbounded", iterations=it1 + it2)
    x = np.zeros(ncols)
    for i in range(m):
        x[basis[i]] = tab[i, -1]
    y = _basis_duals(full, basis, c2)
    duals = signs * y
    sol_x = x[:n].copy()
    return LpSolution(status="optimal", x=sol_x,
                      objective=float(lp.objective @ sol_x),
                      duals=duals, iterations=it1 + it2)


def _basis_duals(full, basis, costs):
    B = full[:, basis]
    cb = costs[list(basis)]
    try:
        return np.linalg.solve(B.T, cb)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(B.T, cb, rcond=None)[0]


def verify_farkas(lp: LinearProgram, ray: np.ndarray, tol: float = 1e-7) -> bool:
    """Mechanically check an infeasibility certificate: sign conditions,
    combined coefficients <= 0 on every column, combined rhs > 0."""
    combo = np.zeros(lp.num_vars)
    rhs = 0.0
    for i, row in enumerate(lp.rows):
        r = ray[i]
        if row.sense == ">=" and r < -tol:
            return False
        if row.sense == "<=" and r > tol:
            return False
        for j, c in row.coeffs.items():
            combo[j] += r * c
        rhs += r * row.rhs
    return bool(np.all(combo <= tol) and rhs > tol)


def relaxation(model: IlpModel, fixed: dict[int, float] | None = None) -> LinearProgram:
    """LP relaxation of a binary model with optional variable fixings; upper
    bounds are encoded as explicit rows so dual/Farkas certificates cover
    them uniformly."""
    n = model.num_vars
    obj = np.zeros(n)
    for j, c in model.objective.items():
        obj[j] = c
    rows = [Row(dict(r.coeffs), r.sense, r.rhs, r.label) for r in model.rows]
    fixed = fixed or {}
    for j in range(n):
        if j in fixed:
            rows.append(Row({j: 1.0}, "=", fixed[j], f"fix[{j}]"))
        else:
            if model.upper[j] != math.inf:
                rows.append(Row({j: 1.0}, "<=", model.upper[j], f"ub[{j}]"))
            if model.lower[j] > 0:
                rows.append(Row({j: 1.0}, ">=", model.lower[j], f"lb[{j}]"))
    return LinearProgram(num_vars=n, objective=obj, rows=rows)


@dataclass
class MipResult:
    status: str            # "optimal" | "infeasible" | "budgetExceeded"
    x: np.ndarray | None = None
    objective: float | None = None
    nodes: int = 0
    best_bound: float = -math.inf


def bb_solve(model: IlpModel, node_budget: int = 200000,
             gap_tol: float = 1e-6) -> MipResult:
    """Best-first branch and bound over the LP relaxation, branching on the
    most fractional binary variable."""
    counter = itertools.count()
    root = solve_lp(relaxation(model))
    if root.status == "infeasible":
        return MipResult(status="infeasible", nodes=1)
    if root.status == "unbounded":
        raise LpError("relaxation unbounded; binary models must be bounded")
    heap = [(root.objective, next(counter), {}, root)]
    best_x = None
    best_obj = math.inf
    nodes = 1
    best_bound = root.objective
    while heap:
        bound, _, fixed, sol = heapq.heappop(heap)
        best_bound = max(best_bound, min(bound, best_obj))
        if bound >= best_obj - gap_tol:
            continue
        j = _most_fractional(model, sol.x)
        if j < 0:
            if sol.objective < best_obj - gap_tol:
                best_obj = sol.objective
                best_x = np.round(sol.x)
            continue
        for val in (0.0, 1.0):
            if nodes >= node_budget:
                return MipResult(status="budgetExceeded", x=best_x,
                                 objective=None if best_x is None else best_obj,
                                 nodes=nodes, best_bound=best_bound)
            child_fixed = dict(fixed)
            child_fixed[j] = val
            child = solve_lp(relaxation(model, child_fixed))
            nodes += 1
            if child.status != "optimal":
                continue
            if child.objective >= best_obj - gap_tol:
                continue
            heapq.heappush(heap, (child.objective, next(counter), child_fixed, child))
    if best_x is None:
        return MipResult(status="infeasible", nodes=nodes)
    return MipResult(status="optimal", x=best_x,
                     objective=float(model.objective_value(best_x)),
                     nodes=nodes, best_bound=best_obj)


def _most_fractional(model: IlpModel, x) -> int:
    best_j, best_d = -1, INT_TOL
    for j in range(model.num_vars):
        if not model.integer[j]:
            continue
        d = abs(x[j] - round(x[j]))
        if d > best_d:
            best_j, best_d = j, d
    return best_j


_SYMBOL_ORDER = {"h": 0, "y": 1, "f": 2, "k": 3, "a": 4, "x": 5, "b": 6}


def enumerate_solve(model: IlpModel, limit: int = 1 << 24) -> MipResult:
    """Exhaustive depth-first search over binary assignments with row-activity
    pruning. Independent of the simplex path; used as an oracle."""
    n = model.num_vars
    order = sorted(range(n),
                   key=lambda j: (_SYMBOL_ORDER.get(_symbol(model, j), 9), j))
    pos = [0.0] * model.num_rows   # max remaining positive contribution
    neg = [0.0] * model.num_rows   # min remaining (negative) contribution
    cur = [0.0] * model.num_rows
    touch: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for ri, row in enumerate(model.rows):
        for j, c in row.coeffs.items():
            touch[j].append((ri, c))
            if c > 0:
                pos[ri] += c
            else:
                neg[ri] += c
    obj = [0.0] * n
    for j, c in model.objective.items():
        obj[j] = c
    # lower bound on the objective still attainable from depth d onward
    remaining = [0.0] * (n + 1)
    for d in range(n - 1, -1, -1):
        remaining[d] = remaining[d + 1] + min(0.0, obj[order[d]])
    assign = [0.0] * n
    best = {"obj": math.inf, "x": None}
    nodes = [0]

    def row_ok(ri: int) -> bool:
        row = model.rows[ri]
        lo = cur[ri] + neg[ri]
        hi = cur[ri] + pos[ri]
        if row.sense == "<=":
            return lo <= row.rhs + FEAS_TOL
        if row.sense == ">=":
            return hi >= row.rhs - FEAS_TOL
        return lo <= row.rhs + FEAS_TOL and hi >= row.rhs - FEAS_TOL

    def dfs(depth: int, cur_obj: float) -> None:
        nodes[0] += 1
        if nodes[0] > limit:
            raise LpError("enumeration limit exceeded")
        if cur_obj + remaining[depth] >= best["obj"] - 1e-9:
            return
        if depth == n:
            best["obj"] = cur_obj
            best["x"] = assign.copy()
            return
        j = order[depth]
        for val in (0.0, 1.0):
            assign[j] = val
            ok = True
            for ri, c in touch[j]:
                if c > 0:
                    pos[ri] -= c
                else:
                    neg[ri] -= c
                cur[ri] += c * val
            for ri, _ in touch[j]:
                if not row_ok(ri):
                    ok = False
                    break
            if ok:
                dfs(depth + 1, cur_obj + obj[j] * val)
            for ri, c in touch[j]:
                if c > 0:
                    pos[ri] += c
                else:
                    neg[ri] += c
                cur[ri] -= c * val
        assign[j] = 0.0

    dfs(0, model.obj_offset)
    if best["x"] is None:
        return MipResult(status="infeasible", nodes=nodes[0])
    return MipResult(status="optimal", x=np.array(best["x"]),
                     objective=best["obj"], nodes=nodes[0],
                     best_bound=best["obj"])


def _symbol(model: IlpModel, j: int) -> str:
    return model.var_names[j].split("_", 1)[0]
