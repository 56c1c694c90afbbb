"""Split-based adjustable integer recourse: partition the uncertainty set into
axis-aligned cells, give every cell its own copy of the integer wait-and-see
variables, and solve the replicated robust program. Includes the average-
improving re-optimization (worst case held fixed) and the finite-scenario
optimality bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import sets as usets
from .adversarial import pessimize
from .model import (
    ModelObjective,
    ModelVariable,
    UncertainConstraint,
    UncertainLP,
)
from .robust_solve import RobustSolveReport, solve_robust
from .solver import DEFAULT_OPTIONS, INF, SolverOptions

MAX_REPLICATED_INTEGERS = 10_000
DEFAULT_RECOURSE_BOUND = 1e6


@dataclass(frozen=True)
class SplitScheme:
    """Axis-aligned cells over the split coordinates; all other coordinates
    inherit the full set. Cells must tile the split coordinates' range:
    equal total volume, pairwise disjoint interiors."""
    coords: tuple[int, ...]
    cells: tuple[dict[int, tuple[float, float]], ...]

    @property
    def m(self) -> int:
        return len(self.cells)

    def cell_of(self, zeta: np.ndarray) -> int:
        """Deterministic lookup for evaluation: boundary points go to the
        lowest-index cell containing them."""
        for i, cell in enumerate(self.cells):
            if all(lo - 1e-9 <= zeta[c] <= hi + 1e-9
                   for c, (lo, hi) in cell.items()):
                return i
        raise ValueError(f"zeta {zeta} is outside every cell")

    def to_json(self) -> dict:
        return {"coords": list(self.coords),
                "cells": [{str(c): [lo, hi] for c, (lo, hi) in cell.items()}
                          for cell in self.cells]}

    @staticmethod
    def from_json(d: dict) -> "SplitScheme":
        return SplitScheme(
            coords=tuple(int(c) for c in d["coords"]),
            cells=tuple({int(c): (float(v[0]), float(v[1]))
                         for c, v in cell.items()} for cell in d["cells"]),
        )


class SplitError(ValueError):
    pass


def equal_width_split(s: usets.UncertaintySet, coord: int, m: int) -> SplitScheme:
    """Split one coordinate's range into m equal-width intervals."""
    if m < 1:
        raise SplitError("need at least one cell")
    lo, hi = s.coordinate_range(coord)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise SplitError(f"coordinate {coord} has unbounded range")
    cuts = np.linspace(lo, hi, m + 1)
    cells = tuple({coord: (float(cuts[i]), float(cuts[i + 1]))} for i in range(m))
    return SplitScheme(coords=(coord,), cells=cells)


def check_scheme(s: usets.UncertaintySet, scheme: SplitScheme) -> None:
    """Cells must cover the split coordinates' ranges with disjoint interiors
    (volume match + pairwise separation is exact for axis-aligned boxes)."""
    ranges = {}
    for c in scheme.coords:
        lo, hi = s.coordinate_range(c)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise SplitError(f"coordinate {c} has unbounded range")
        ranges[c] = (lo, hi)
    total = math.prod(hi - lo for lo, hi in ranges.values())
    vol = 0.0
    for cell in scheme.cells:
        if set(cell) != set(scheme.coords):
            raise SplitError("every cell must bound every split coordinate")
        v = 1.0
        for c, (lo, hi) in cell.items():
            rlo, rhi = ranges[c]
            if lo < rlo - 1e-9 or hi > rhi + 1e-9 or lo > hi:
                raise SplitError(f"cell interval {c}: [{lo}, {hi}] leaves the "
                                 f"range [{rlo}, {rhi}]")
            v *= hi - lo
        vol += v
    if abs(vol - total) > 1e-7 * max(1.0, total):
        raise SplitError(f"cells cover volume {vol:.6g} of {total:.6g}; the "
                         f"scheme does not partition the set")
    for i in range(len(scheme.cells)):
        for j in range(i + 1, len(scheme.cells)):
            if not _interiors_disjoint(scheme.cells[i], scheme.cells[j]):
                raise SplitError(f"cells {i} and {j} overlap")


def _interiors_disjoint(a, b) -> bool:
    for c in a:
        alo, ahi = a[c]
        blo, bhi = b[c]
        if ahi <= blo + 1e-12 or bhi <= alo + 1e-12:
            return True
    return False


def subset_set(s: usets.UncertaintySet,
               cell: dict[int, tuple[float, float]]) -> usets.UncertaintySet:
    """The set intersected with the cell's intervals. Boxes stay boxes;
    budgeted / polyhedral / CLT become polyhedral; ball kinds are refused
    (their cells are not polyhedral and have no exact linear counterpart)."""
    if isinstance(s, usets.Box):
        lo = list(s.lo)
        hi = list(s.hi)
        for c, (clo, chi) in cell.items():
            lo[c] = max(lo[c], clo)
            hi[c] = min(hi[c], chi)
        return usets.box(0.0, lo=lo, hi=hi)
    if isinstance(s, (usets.Budgeted, usets.Polyhedral, usets.CLTSet)):
        if isinstance(s, usets.Budgeted) and s.dim > 8:
            raise SplitError("budgeted splits limited to dimension 8")
        D, q = s.to_polyhedral_rows()
        L = s.dim
        extra_D, extra_q = [], []
        for c, (clo, chi) in cell.items():
            e = np.zeros(L)
            e[c] = 1.0
            extra_D.append(e.copy())
            extra_q.append(-clo)
            extra_D.append(-e)
            extra_q.append(chi)
        return usets.polyhedral(np.vstack([D, extra_D]),
                                np.concatenate([q, extra_q]))
    raise SplitError(f"splitting a {s.kind} set is not supported")


@dataclass
class ArcSolution:
    here_and_now: dict[str, float]
    recourse: list[dict[str, float]]  # per cell, keyed by original names
    tstar: float
    per_cell: list[float]
    report: RobustSolveReport


def _partition_variables(m: UncertainLP):
    recourse = [v for v in m.variables if v.adjustable is not None]
    for v in recourse:
        if not v.integer:
            raise SplitError(
                f"{v.name} is continuous; split recourse is for integer "
                f"wait-and-see variables (use affine rules instead)")
    static = [v for v in m.variables if v.adjustable is None]
    return static, recourse


def _bounded(v: ModelVariable) -> ModelVariable:
    lb = v.lb if v.lb != -INF else -DEFAULT_RECOURSE_BOUND
    ub = v.ub if v.ub != INF else DEFAULT_RECOURSE_BOUND
    return replace(v, lb=lb, ub=ub, adjustable=None)


def build_arc1(m: UncertainLP, scheme: SplitScheme,
               check: bool = True) -> UncertainLP:
    """Replicate the integer wait-and-see variables and every constraint that
    touches them, once per cell, each replica robust over its cell; shared
    epigraph variable t turns the per-cell objectives into max t (min
    mirrored)."""
    set_name = m.single_set_name()
    s = m.sets[set_name]
    if check:
        check_scheme(s, scheme)
    static, recourse = _partition_variables(m)
    rec_names = {v.name for v in recourse}
    if scheme.m * len(recourse) > MAX_REPLICATED_INTEGERS:
        raise SplitError(
            f"{scheme.m} cells x {len(recourse)} integers exceeds the "
            f"replication cap {MAX_REPLICATED_INTEGERS}")
    maximize = m.objective.sense == "max"

    new_vars: list[ModelVariable] = [replace(v, adjustable=None) for v in static]
    new_vars.append(ModelVariable("__t", -INF, INF))
    new_sets = dict(m.sets)
    new_cons: list[UncertainConstraint] = []

    def cellvar(name: str, i: int) -> str:
        return f"{name}__cell{i}"

    for i, cell in enumerate(scheme.cells):
        cell_set_name = f"{set_name}__cell{i}"
        new_sets[cell_set_name] = subset_set(s, cell)
        for v in recourse:
            new_vars.append(replace(_bounded(v), name=cellvar(v.name, i)))
        # objective replica: c(x, z_i) >= t (max) / <= t (min)
        obj_row = {k: v for k, v in m.objective.coeffs.items()
                   if k not in rec_names}
        for v in recourse:
            co = m.objective.coeffs.get(v.name, 0.0)
            if co != 0.0:
                obj_row[cellvar(v.name, i)] = co
        obj_row["__t"] = -1.0
        new_cons.append(UncertainConstraint(
            obj_row, {}, ">=" if maximize else "<=",
            -m.objective.constant, set_name=cell_set_name,
            name=f"__objective__cell{i}"))
        for ci, c in enumerate(m.constraints):
            touches = any(nm in rec_names for nm in
                          list(c.a) + list(c.P))
            if not touches:
                continue
            a = {}
            P = {}
            for k, v in c.a.items():
                a[cellvar(k, i) if k in rec_names else k] = v
            for k, col in c.P.items():
                P[cellvar(k, i) if k in rec_names else k] = dict(col)
            new_cons.append(replace(
                c, a=a, P=P, set_name=cell_set_name if not c.is_certain()
                else c.set_name,
                name=f"{c.name or f'c{ci}'}__cell{i}"))
    for ci, c in enumerate(m.constraints):
        touches = any(nm in rec_names for nm in list(c.a) + list(c.P))
        if not touches:
            new_cons.append(c)

    return UncertainLP(
        variables=tuple(new_vars),
        objective=ModelObjective(m.objective.sense, {"__t": 1.0}),
        constraints=tuple(new_cons),
        sets=new_sets,
        stages=m.stages,
    )


def solve_arc(m: UncertainLP, scheme: SplitScheme,
              opts: SolverOptions = DEFAULT_OPTIONS) -> ArcSolution:
    """Solve the replicated program and report the per-cell objectives (the
    objective is certain, so each cell's worst case is just its own value)."""
    arc = build_arc1(m, scheme)
    rep = solve_robust(arc, opts=opts)
    if rep.status != "optimal":
        raise SplitError(f"replicated solve returned {rep.status}")
    return _extract(m, scheme, rep)


def _extract(m: UncertainLP, scheme: SplitScheme,
             rep: RobustSolveReport) -> ArcSolution:
    static, recourse = _partition_variables(m)
    vals = rep.result.values
    here = {v.name: vals[v.name] for v in static}
    per_cell = []
    rec = []
    for i in range(scheme.m):
        cellvals = {v.name: vals[f"{v.name}__cell{i}"] for v in recourse}
        rec.append(cellvals)
        obj = m.objective.constant
        for k, co in m.objective.coeffs.items():
            obj += co * (cellvals[k] if k in cellvals else here.get(k, 0.0))
        per_cell.append(obj)
    tstar = min(per_cell) if m.objective.sense == "max" else max(per_cell)
    return ArcSolution(here_and_now=here, recourse=rec, tstar=tstar,
                       per_cell=per_cell, report=rep)


def reoptimize_average(m: UncertainLP, scheme: SplitScheme, tstar: float,
                       opts: SolverOptions = DEFAULT_OPTIONS) -> ArcSolution:
    """Maximize the sum of per-cell objectives subject to every cell staying
    at least as good as tstar (the worst case is unchanged, the average is
    not)."""
    arc = build_arc1(m, scheme)
    maximize = m.objective.sense == "max"
    # swap the single epigraph for per-cell t_i
    tvars = tuple(ModelVariable(f"__t{i}", -INF, INF)
                  for i in range(scheme.m))
    new_vars = tuple(v for v in arc.variables if v.name != "__t") + tvars
    new_cons = []
    for c in arc.constraints:
        if c.name and c.name.startswith("__objective__cell"):
            i = int(c.name.rsplit("cell", 1)[1])
            a = {k: v for k, v in c.a.items() if k != "__t"}
            a[f"__t{i}"] = -1.0
            new_cons.append(replace(c, a=a))
        else:
            new_cons.append(c)
    for i in range(scheme.m):
        new_cons.append(UncertainConstraint(
            {f"__t{i}": 1.0}, {}, ">=" if maximize else "<=", tstar,
            set_name=next(iter(arc.sets)), name=f"__floor{i}"))
    prog = UncertainLP(
        variables=new_vars,
        objective=ModelObjective(m.objective.sense,
                                 {f"__t{i}": 1.0 for i in range(scheme.m)}),
        constraints=tuple(new_cons),
        sets=arc.sets,
        stages=arc.stages,
    )
    rep = solve_robust(prog, opts=opts)
    if rep.status != "optimal":
        raise SplitError(f"re-optimization returned {rep.status}")
    out = _extract(m, scheme, rep)
    out.tstar = tstar
    return out


def collect_scenarios(m: UncertainLP, scheme: SplitScheme, sol: ArcSolution,
                      tol: float = 1e-7) -> list[np.ndarray]:
    """Per cell and constraint, the parameter value that maximizes the
    left-hand side at the incumbent decisions (deduplicated); feeding these to
    bound_via_scenarios tightens the optimality bound."""
    set_name = m.single_set_name()
    s = m.sets[set_name]
    static, recourse = _partition_variables(m)
    out: list[np.ndarray] = []
    for i, cell in enumerate(scheme.cells):
        cs = subset_set(s, cell)
        x = dict(sol.here_and_now)
        x.update(sol.recourse[i])
        for c in m.constraints:
            if c.is_certain():
                continue
            pr = pessimize(c, cs, x)
            if not any(np.allclose(pr.zeta, z, atol=1e-9) for z in out):
                out.append(pr.zeta)
    return out


def bound_via_scenarios(m: UncertainLP, scenarios,
                        opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    """Optimality bound from a finite scenario set with a separate integer
    recourse per scenario: an upper bound on the best achievable worst case
    for maximization (lower bound for minimization), since any admissible
    policy is feasible for the relaxation."""
    set_name = m.single_set_name()
    s = m.sets[set_name]
    pts = [np.asarray(z, dtype=float) for z in scenarios]
    if not pts:
        raise SplitError("need at least one scenario")
    for z in pts:
        if not usets.contains(s, z, tol=1e-7):
            raise SplitError(f"scenario {z} lies outside the set")
    static, recourse = _partition_variables(m)
    rec_names = {v.name for v in recourse}
    maximize = m.objective.sense == "max"

    new_vars: list[ModelVariable] = [replace(v, adjustable=None) for v in static]
    new_vars.append(ModelVariable("__t", -INF, INF))
    cons: list[UncertainConstraint] = []
    certain = set_name

    def scvar(name, si):
        return f"{name}__scen{si}"

    for si, z in enumerate(pts):
        for v in recourse:
            new_vars.append(replace(_bounded(v), name=scvar(v.name, si)))
        obj_row = {k: v for k, v in m.objective.coeffs.items()
                   if k not in rec_names}
        for v in recourse:
            co = m.objective.coeffs.get(v.name, 0.0)
            if co != 0.0:
                obj_row[scvar(v.name, si)] = co
        obj_row["__t"] = -1.0
        cons.append(UncertainConstraint(
            obj_row, {}, ">=" if maximize else "<=", -m.objective.constant,
            set_name=certain, name=f"__objective__scen{si}"))
        for ci, c in enumerate(m.constraints):
            coeffs = {}
            for k, v in c.a.items():
                coeffs[scvar(k, si) if k in rec_names else k] = v
            for var, col in c.P.items():
                add = sum(v * z[zi] for zi, v in col.items())
                if add != 0.0:
                    key = scvar(var, si) if var in rec_names else var
                    coeffs[key] = coeffs.get(key, 0.0) + add
            cons.append(UncertainConstraint(
                coeffs, {}, c.sense, c.rhs, set_name=certain,
                name=f"{c.name or f'c{ci}'}__scen{si}"))
    prog = UncertainLP(
        variables=tuple(new_vars),
        objective=ModelObjective(m.objective.sense, {"__t": 1.0}),
        constraints=tuple(cons),
        sets=m.sets,
    )
    rep = solve_robust(prog, opts=opts)
    if rep.status != "optimal":
        raise SplitError(f"scenario bound solve returned {rep.status}")
    return rep.objective
