"""Deterministic LP / MILP solving on dense tableaux.

Two-phase primal simplex (Dantzig pricing, Bland fallback after a run of
degenerate pivots) and a depth-first branch-and-bound with most-fractional
branching. Certificates: duals from the optimal basis, Farkas vector from
phase 1, unbounded ray from the failing ratio test. No uncertainty concepts
live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    pivot_tol: float = 1e-9
    reduced_cost_tol: float = 1e-9
    max_iterations: int = 50_000
    degenerate_pivot_limit: int = 100
    max_nodes: int = 200_000


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = -INF
    ub: float = INF
    integer: bool = False


@dataclass(frozen=True)
class LinearRow:
    coeffs: dict[str, float]
    sense: str  # "<=", "==", ">="
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class Objective:
    sense: str  # "min" | "max"
    coeffs: dict[str, float]
    constant: float = 0.0


@dataclass(frozen=True)
class DeterministicMILP:
    variables: tuple[Variable, ...]
    objective: Objective
    rows: tuple[LinearRow, ...]

    def var_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def check(self) -> None:
        names = self.var_names()
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        nameset = set(names)
        for v in self.variables:
            if v.lb > v.ub:
                raise ValueError(f"variable {v.name}: lb > ub")
        if self.objective.sense not in ("min", "max"):
            raise ValueError(f"bad objective sense {self.objective.sense}")
        for k in self.objective.coeffs:
            if k not in nameset:
                raise ValueError(f"objective references unknown variable {k}")
        for i, r in enumerate(self.rows):
            if r.sense not in ("<=", "==", ">="):
                raise ValueError(f"row {i}: bad sense {r.sense}")
            for k in r.coeffs:
                if k not in nameset:
                    raise ValueError(f"row {i} references unknown variable {k}")
            if not math.isfinite(r.rhs):
                raise ValueError(f"row {i}: non-finite rhs")


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    objective: float | None = None
    values: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] | None = None
    dual_objective: float | None = None
    certificate: dict | None = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class _Standardized:
    """min c'y, A y = b, y >= 0 plus bookkeeping to map back to x."""

    def __init__(self, p: DeterministicMILP):
        p.check()
        names = p.var_names()
        self.names = names
        self.sense = p.objective.sense
        sign = 1.0 if p.objective.sense == "min" else -1.0

        # per original variable: ("shift", col, lb) x = lb + y;
        # ("neg", col, ub) x = ub - y; ("free", col+, col-) x = y+ - y-
        self.colmap: list[tuple] = []
        ncols = 0
        extra_rows: list[tuple[dict[str, float], str, float]] = []
        for v in p.variables:
            if v.lb == -INF and v.ub == INF:
                self.colmap.append(("free", ncols, ncols + 1))
                ncols += 2
            elif v.lb > -INF:
                self.colmap.append(("shift", ncols, v.lb))
                ncols += 1
                if v.ub < INF:
                    extra_rows.append(({v.name: 1.0}, "<=", v.ub))
            else:
                self.colmap.append(("neg", ncols, v.ub))
                ncols += 1

        all_rows = [(dict(r.coeffs), r.sense, r.rhs) for r in p.rows] + extra_rows
        self.n_model_rows = len(p.rows)
        m = len(all_rows)
        idx = {nm: i for i, nm in enumerate(names)}

        c = np.zeros(ncols)
        const = sign * p.objective.constant
        for nm, co in p.objective.coeffs.items():
            kind = self.colmap[idx[nm]]
            sc = sign * co
            if kind[0] == "free":
                c[kind[1]] += sc
                c[kind[2]] -= sc
            elif kind[0] == "shift":
                c[kind[1]] += sc
                const += sc * kind[2]
            else:
                c[kind[1]] -= sc
                const += sc * kind[2]
        self.obj_const = const
        self.obj_sign = sign

        A = np.zeros((m, ncols))
        b = np.zeros(m)
        senses = []
        for i, (coeffs, sense, rhs) in enumerate(all_rows):
            bb = rhs
            for nm, co in coeffs.items():
                kind = self.colmap[idx[nm]]
                if kind[0] == "free":
                    A[i, kind[1]] += co
                    A[i, kind[2]] -= co
                elif kind[0] == "shift":
                    A[i, kind[1]] += co
                    bb -= co * kind[2]
                else:
                    A[i, kind[1]] -= co
                    bb -= co * kind[2]
            b[i] = bb
            senses.append(sense)

        self.n_struct = ncols
        if m:
            S = np.zeros((m, m))
            for i, sense in enumerate(senses):
                if sense == "<=":
                    S[i, i] = 1.0
                elif sense == ">=":
                    S[i, i] = -1.0
            A = np.hstack([A, S])
        c = np.concatenate([c, np.zeros(m)])
        self.row_sign = np.ones(m)
        for i in range(m):
            if b[i] < 0:
                A[i, :] *= -1.0
                b[i] = -b[i]
                self.row_sign[i] = -1.0
        self.A = A
        self.b = b
        self.c = c
        self.m = m
        self.row_names = [r.name or f"r{i}" for i, r in enumerate(p.rows)]

    def x_from_y(self, y: np.ndarray) -> dict[str, float]:
        out = {}
        for nm, kind in zip(self.names, self.colmap):
            if kind[0] == "free":
                out[nm] = float(y[kind[1]] - y[kind[2]])
            elif kind[0] == "shift":
                out[nm] = float(kind[2] + y[kind[1]])
            else:
                out[nm] = float(kind[2] - y[kind[1]])
        return out

    def ray_from_dy(self, dy: np.ndarray) -> dict[str, float]:
        out = {}
        for nm, kind in zip(self.names, self.colmap):
            if kind[0] == "free":
                out[nm] = float(dy[kind[1]] - dy[kind[2]])
            elif kind[0] == "shift":
                out[nm] = float(dy[kind[1]])
            else:
                out[nm] = float(-dy[kind[1]])
        return out


_UNBOUNDED = "unbounded"


def _simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray, basis: list[int],
             opts: SolverOptions, iter_budget: int):
    """Primal simplex on a basis-reduced tableau (A[:, basis] = I, b >= 0).
    Returns (status, entering_col_or_None, iterations). A, b mutate in place."""
    m, n = A.shape
    red = c - c[basis] @ A
    obj = float(c[basis] @ b)
    it = 0
    degen = 0
    bland = False
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    while True:
        if it >= iter_budget:
            return "iteration_limit", None, it
        if bland:
            enter = -1
            for j in range(n):
                if red[j] < -opts.reduced_cost_tol and not in_basis[j]:
                    enter = j
                    break
        else:
            enter = int(np.argmin(red))
            if red[enter] >= -opts.reduced_cost_tol:
                enter = -1
        if enter < 0:
            return "optimal", None, it
        col = A[:, enter]
        pos = col > opts.pivot_tol
        if not pos.any():
            return _UNBOUNDED, enter, it
        ratios = np.full(m, np.inf)
        ratios[pos] = b[pos] / col[pos]
        rmin = float(ratios.min())
        ties = np.nonzero(ratios <= rmin + 1e-12)[0]
        if bland:
            leave = int(min(ties, key=lambda i: basis[i]))
        else:
            leave = int(max(ties, key=lambda i: col[i]))
        piv = col[leave]
        A[leave, :] /= piv
        b[leave] /= piv
        colvals = A[:, enter].copy()
        colvals[leave] = 0.0
        nz = np.nonzero(np.abs(colvals) > 1e-13)[0]
        if nz.size:
            A[nz, :] -= np.outer(colvals[nz], A[leave, :])
            b[nz] -= colvals[nz] * b[leave]
        np.clip(b, 0.0, None, out=b)
        f = red[enter]
        red = red - f * A[leave, :]
        red[enter] = 0.0
        new_obj = obj + rmin * f
        if abs(new_obj - obj) <= 1e-12 * (1.0 + abs(obj)):
            degen += 1
            if degen > opts.degenerate_pivot_limit:
                bland = True
        else:
            degen = 0
        obj = new_obj
        in_basis[basis[leave]] = False
        in_basis[enter] = True
        basis[leave] = enter
        it += 1


def solve_lp(p: DeterministicMILP, opts: SolverOptions = DEFAULT_OPTIONS) -> SolveResult:
    """Solve the LP relaxation (integrality flags ignored). Optimal results
    carry model-row duals and the dual objective recomputed from the original
    data; infeasible/unbounded results carry substitution-checkable
    certificates."""
    std = _Standardized(p)
    m = std.m
    n = std.A.shape[1]
    if m == 0:
        return _solve_boundonly(p)

    A = np.hstack([std.A, np.eye(m)])
    b = std.b.copy()
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    status, _, it1 = _simplex(A, b, c1, basis, opts, opts.max_iterations)
    if status == "iteration_limit":
        return SolveResult(status="iteration_limit", iterations=it1)
    if status == _UNBOUNDED:
        raise ArithmeticError("phase-1 unbounded: numerical failure")
    phase1_obj = float(c1[basis] @ b)
    if phase1_obj > opts.feas_tol:
        yvec = _duals_from_basis(np.hstack([std.A, np.eye(m)]), c1, basis,
                                 np.arange(m))
        duals = {}
        if yvec is not None:
            for i in range(std.n_model_rows):
                duals[std.row_names[i]] = float(std.row_sign[i] * yvec[i])
        return SolveResult(status="infeasible", iterations=it1,
                           certificate={"kind": "farkas", "row_duals": duals,
                                        "gap": phase1_obj})

    # drive artificials out; drop rows that stay artificial (redundant)
    drop = []
    for i in range(m):
        if basis[i] < n:
            continue
        swapped = False
        for j in np.nonzero(np.abs(A[i, :n]) > 1e-9)[0]:
            if j in basis:
                continue
            piv = A[i, j]
            A[i, :] /= piv
            b[i] /= piv
            others = [k for k in range(m) if k != i and abs(A[k, j]) > 1e-13]
            for k in others:
                f = A[k, j]
                A[k, :] -= f * A[i, :]
                b[k] -= f * b[i]
            basis[i] = int(j)
            swapped = True
            break
        if not swapped:
            drop.append(i)
    kept = np.array([i for i in range(m) if i not in drop], dtype=int)
    if drop:
        mask = np.ones(m, dtype=bool)
        mask[drop] = False
        A = A[mask]
        b = b[mask]
        basis = [basis[i] for i in range(m) if mask[i]]

    A2 = np.ascontiguousarray(A[:, :n])
    status, enter, it2 = _simplex(A2, b, std.c, basis, opts,
                                  opts.max_iterations - it1)
    iters = it1 + it2
    if status == "iteration_limit":
        return SolveResult(status="iteration_limit", iterations=iters)
    if status == _UNBOUNDED:
        dy = np.zeros(n)
        dy[enter] = 1.0
        for i, bi in enumerate(basis):
            dy[bi] = -A2[i, enter]
        ray = std.ray_from_dy(dy[:std.n_struct])
        rate = sum(p.objective.coeffs.get(k, 0.0) * v for k, v in ray.items())
        return SolveResult(status="unbounded", iterations=iters,
                           certificate={"kind": "ray", "direction": ray,
                                        "objective_rate": rate})

    yfull = np.zeros(n)
    for i, bi in enumerate(basis):
        yfull[bi] = b[i]
    x = std.x_from_y(yfull[:std.n_struct])
    obj_std = float(std.c @ yfull) + std.obj_const
    obj_out = std.obj_sign * obj_std

    duals = None
    dual_obj = None
    yvec = _duals_from_basis(std.A, std.c, basis, kept)
    if yvec is not None:
        duals = {}
        ypad = np.zeros(m)
        ypad[kept] = yvec
        for i in range(std.n_model_rows):
            duals[std.row_names[i]] = float(std.obj_sign * std.row_sign[i] * ypad[i])
        dual_obj = std.obj_sign * (float(ypad @ std.b) + std.obj_const)

    res = SolveResult(status="optimal", objective=obj_out, values=x,
                      duals=duals, dual_objective=dual_obj, iterations=iters)
    _check_primal_feasible(p, res.values, opts)
    return res


def _duals_from_basis(A_std: np.ndarray, c_std: np.ndarray, basis: list[int],
                      kept: np.ndarray) -> np.ndarray | None:
    """Solve B^T y = c_B from the ORIGINAL standardized columns restricted to
    kept rows; gives duals independent of tableau roundoff."""
    B = A_std[np.ix_(kept, np.array(basis, dtype=int))]
    cb = c_std[np.array(basis, dtype=int)]
    try:
        return np.linalg.solve(B.T, cb)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.lstsq(B.T, cb, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None


def _solve_boundonly(p: DeterministicMILP) -> SolveResult:
    values = {}
    sign = 1.0 if p.objective.sense == "min" else -1.0
    for v in p.variables:
        co = sign * p.objective.coeffs.get(v.name, 0.0)
        if co > 0:
            if v.lb == -INF:
                return SolveResult(status="unbounded",
                                   certificate={"kind": "ray",
                                                "direction": {v.name: -1.0}})
            values[v.name] = v.lb
        elif co < 0:
            if v.ub == INF:
                return SolveResult(status="unbounded",
                                   certificate={"kind": "ray",
                                                "direction": {v.name: 1.0}})
            values[v.name] = v.ub
        else:
            values[v.name] = float(min(max(0.0, v.lb), v.ub))
    obj = evaluate_objective(p, values)
    return SolveResult(status="optimal", objective=obj, values=values,
                       duals={}, dual_objective=obj)


def _check_primal_feasible(p: DeterministicMILP, x: dict[str, float],
                           opts: SolverOptions) -> None:
    tol = opts.feas_tol
    for v in p.variables:
        if x[v.name] < v.lb - 1e2 * tol * (1 + abs(v.lb)) or \
           x[v.name] > v.ub + 1e2 * tol * (1 + abs(v.ub)):
            raise ArithmeticError(f"solver returned bound-infeasible {v.name}")
    for i, r in enumerate(p.rows):
        lhs = sum(co * x[nm] for nm, co in r.coeffs.items())
        scale = 1.0 + abs(r.rhs) + sum(abs(co) * (1.0 + abs(x[nm]))
                                       for nm, co in r.coeffs.items())
        viol = {"<=": lhs - r.rhs, ">=": r.rhs - lhs, "==": abs(lhs - r.rhs)}[r.sense]
        if viol > 1e2 * tol * scale:
            raise ArithmeticError(f"solver returned infeasible row {r.name or i}: "
                                  f"violation {viol:.3e}")


def verify_certificate(p: DeterministicMILP, res: SolveResult,
                       tol: float = 1e-6) -> bool:
    """Re-check an unboundedness ray (or accept a recorded Farkas gap) by
    substitution into the original data."""
    cert = res.certificate
    if cert is None:
        return False
    if cert["kind"] == "ray":
        d = cert["direction"]
        for v in p.variables:
            dv = d.get(v.name, 0.0)
            if v.lb > -INF and dv < -tol:
                return False
            if v.ub < INF and dv > tol:
                return False
        for r in p.rows:
            rate = sum(co * d.get(nm, 0.0) for nm, co in r.coeffs.items())
            if r.sense == "<=" and rate > tol:
                return False
            if r.sense == ">=" and rate < -tol:
                return False
            if r.sense == "==" and abs(rate) > tol:
                return False
        rate = sum(p.objective.coeffs.get(nm, 0.0) * dv for nm, dv in d.items())
        return rate < -tol if p.objective.sense == "min" else rate > tol
    if cert["kind"] == "farkas":
        return cert.get("gap", 0.0) > 0.0
    return False


def solve_milp(p: DeterministicMILP, opts: SolverOptions = DEFAULT_OPTIONS) -> SolveResult:
    """Branch and bound: most-fractional branching, depth-first, better-bound
    child explored first. Integer variables need finite bounds."""
    p.check()
    int_vars = [v.name for v in p.variables if v.integer]
    if not int_vars:
        return solve_lp(p, opts)
    for v in p.variables:
        if v.integer and (v.lb == -INF or v.ub == INF):
            raise ValueError(f"integer variable {v.name} needs finite bounds")

    maximize = p.objective.sense == "max"
    vmap = {v.name: v for v in p.variables}

    def better(a: float, b: float) -> bool:
        return a > b + 1e-9 if maximize else a < b - 1e-9

    best: SolveResult | None = None
    nodes = 0
    stack: list[tuple[dict[str, tuple[float, float]], float]] = [
        ({}, INF if maximize else -INF)]
    hit_limit = False
    root_status: str | None = None

    while stack:
        bounds, parent_bound = stack.pop()
        if nodes >= opts.max_nodes:
            hit_limit = True
            break
        nodes += 1
        if best is not None and not better(parent_bound, best.objective):
            continue
        rel = solve_lp(_with_bounds(p, bounds, vmap), opts)
        if root_status is None:
            root_status = rel.status
            if rel.status in ("infeasible", "unbounded", "iteration_limit"):
                return rel
        if rel.status == "unbounded":
            return rel
        if rel.status == "iteration_limit":
            hit_limit = True
            continue
        if rel.status != "optimal":
            continue
        if best is not None and not better(rel.objective, best.objective):
            continue
        fracs = [(nm, rel.values[nm]) for nm in int_vars
                 if abs(rel.values[nm] - round(rel.values[nm])) > opts.int_tol]
        if not fracs:
            cand = _snap_integers(p, bounds, rel, vmap, opts)
            if best is None or better(cand.objective, best.objective):
                best = cand
            continue
        nm, val = max(fracs, key=lambda t: min(t[1] - math.floor(t[1]),
                                               math.ceil(t[1]) - t[1]))
        lo0, hi0 = bounds.get(nm, (vmap[nm].lb, vmap[nm].ub))
        children = []
        if math.floor(val) >= lo0:
            d = dict(bounds)
            d[nm] = (lo0, float(math.floor(val)))
            children.append(d)
        if math.ceil(val) <= hi0:
            d = dict(bounds)
            d[nm] = (float(math.ceil(val)), hi0)
            children.append(d)
        if len(children) == 2 and val - math.floor(val) > 0.5:
            children.reverse()  # explore the nearer child first (pushed last)
        for ch in reversed(children):
            stack.append((ch, rel.objective))

    if best is None:
        return SolveResult(status="iteration_limit" if hit_limit else "infeasible")
    if hit_limit:
        best.status = "iteration_limit"
    return best


def _snap_integers(p: DeterministicMILP, bounds, rel: SolveResult, vmap,
                   opts: SolverOptions) -> SolveResult:
    snapped = dict(rel.values)
    for v in p.variables:
        if v.integer:
            r = float(round(snapped[v.name]))
            if abs(snapped[v.name] - r) <= opts.int_tol * (1.0 + abs(r)):
                snapped[v.name] = r
    try:
        _check_primal_feasible(p, snapped, opts)
        obj = evaluate_objective(p, snapped)
        return SolveResult(status="optimal", objective=obj, values=snapped,
                           iterations=rel.iterations)
    except ArithmeticError:
        return SolveResult(status="optimal", objective=rel.objective,
                           values=dict(rel.values), iterations=rel.iterations)


def _with_bounds(p: DeterministicMILP, bounds: dict[str, tuple[float, float]],
                 vmap: dict[str, Variable]) -> DeterministicMILP:
    if not bounds:
        return p
    new_vars = []
    for v in p.variables:
        if v.name in bounds:
            lo, hi = bounds[v.name]
            new_vars.append(Variable(v.name, lb=max(v.lb, lo), ub=min(v.ub, hi),
                                     integer=v.integer))
        else:
            new_vars.append(v)
    return DeterministicMILP(variables=tuple(new_vars), objective=p.objective,
                             rows=p.rows)


def evaluate_objective(p: DeterministicMILP, x: dict[str, float]) -> float:
    return p.objective.constant + sum(p.objective.coeffs.get(k, 0.0) * v
                                      for k, v in x.items())
