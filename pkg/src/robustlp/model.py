"""Uncertain-program data model in factor form, structural lints, and the
reformulation-safety transforms (max expansion, product linearization,
equality elimination, objective epigraph).

Constraints are (a + P z)'x <= d with certain rhs; additive uncertainty goes
through a variable pinned to 1 (see `ensure_unit_variable`). Models are
treated as immutable: every transform returns a new value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import sets as usets
from .solver import INF


@dataclass(frozen=True)
class Adjustability:
    """Declares a wait-and-see variable: which zeta coordinates it may react to
    (by index), optionally through an explicit information-base matrix whose
    rows span the observable linear images of zeta."""
    indices: tuple[int, ...] = ()
    info_base: tuple[tuple[float, ...], ...] | None = None
    set_name: str | None = None


@dataclass(frozen=True)
class ModelVariable:
    name: str
    lb: float = -INF
    ub: float = INF
    integer: bool = False
    adjustable: Adjustability | None = None


@dataclass(frozen=True)
class UncertainConstraint:
    a: dict[str, float]
    P: dict[str, dict[int, float]]  # var -> zeta index -> coefficient
    sense: str  # "<=", "==", ">="
    rhs: float
    set_name: str
    name: str = ""

    def used_zeta_indices(self) -> set[int]:
        out: set[int] = set()
        for col in self.P.values():
            out.update(k for k, v in col.items() if v != 0.0)
        return out

    def is_certain(self) -> bool:
        return not self.used_zeta_indices()

    def coefficient_is_certain(self, var: str) -> bool:
        col = self.P.get(var, {})
        return all(v == 0.0 for v in col.values())


@dataclass(frozen=True)
class ModelObjective:
    sense: str  # "min" | "max"
    coeffs: dict[str, float]
    constant: float = 0.0


@dataclass(frozen=True)
class Stage:
    decisions: tuple[str, ...]
    observes: tuple[int, ...]  # zeta indices revealed before these decisions


@dataclass(frozen=True)
class UncertainLP:
    variables: tuple[ModelVariable, ...]
    objective: ModelObjective
    constraints: tuple[UncertainConstraint, ...]
    sets: dict[str, usets.UncertaintySet] = field(default_factory=dict)
    stages: tuple[Stage, ...] = ()

    def var(self, name: str) -> ModelVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def var_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def constraint(self, name: str) -> UncertainConstraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def adjustable_names(self) -> list[str]:
        return [v.name for v in self.variables if v.adjustable is not None]

    def single_set_name(self) -> str:
        names = {c.set_name for c in self.constraints if not c.is_certain()}
        if len(names) != 1:
            raise ValueError(f"expected one uncertainty set in use, got {sorted(names)}")
        return names.pop()


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "note"
    code: str
    message: str
    constraint: str | None = None


UNIT_VAR = "__one"


def ensure_unit_variable(m: UncertainLP) -> UncertainLP:
    """Additive uncertainty (an uncertain right-hand side) is modelled by a
    variable pinned to 1 whose coefficient carries the factor row."""
    if UNIT_VAR in m.var_names():
        return m
    v = ModelVariable(UNIT_VAR, lb=1.0, ub=1.0)
    return replace(m, variables=m.variables + (v,))


# ----------------------------------------------------------------- validate

def validate(m: UncertainLP) -> list[Diagnostic]:
    """Structural errors plus the pitfall lints; empty list means valid."""
    out: list[Diagnostic] = []
    names = m.var_names()
    if len(set(names)) != len(names):
        out.append(Diagnostic("error", "dup-var", "duplicate variable names"))
    nameset = set(names)
    seen_cnames = set()
    for v in m.variables:
        if v.lb > v.ub:
            out.append(Diagnostic("error", "bounds", f"{v.name}: lb > ub"))
        if v.adjustable is not None:
            adj = v.adjustable
            sname = adj.set_name
            if sname is not None and sname not in m.sets:
                out.append(Diagnostic("error", "dangling-set",
                                      f"{v.name}: unknown set {sname}"))
    if m.objective.sense not in ("min", "max"):
        out.append(Diagnostic("error", "obj-sense",
                              f"bad objective sense {m.objective.sense}"))
    for k in m.objective.coeffs:
        if k not in nameset:
            out.append(Diagnostic("error", "dangling-var",
                                  f"objective references unknown variable {k}"))
    for i, c in enumerate(m.constraints):
        label = c.name or f"c{i}"
        if c.name:
            if c.name in seen_cnames:
                out.append(Diagnostic("error", "dup-constraint",
                                      f"duplicate constraint name {c.name}"))
            seen_cnames.add(c.name)
        if c.sense not in ("<=", "==", ">="):
            out.append(Diagnostic("error", "sense", f"{label}: bad sense",
                                  constraint=label))
        if not math.isfinite(c.rhs):
            out.append(Diagnostic("error", "rhs", f"{label}: non-finite rhs",
                                  constraint=label))
        for k in itertools.chain(c.a, c.P):
            if k not in nameset:
                out.append(Diagnostic("error", "dangling-var",
                                      f"{label}: unknown variable {k}",
                                      constraint=label))
        if c.set_name not in m.sets:
            if not c.is_certain():
                out.append(Diagnostic("error", "dangling-set",
                                      f"{label}: unknown set {c.set_name}",
                                      constraint=label))
        else:
            L = m.sets[c.set_name].dim
            bad = [z for z in c.used_zeta_indices() if z < 0 or z >= L]
            if bad:
                out.append(Diagnostic(
                    "error", "zeta-dim",
                    f"{label}: references zeta indices {sorted(bad)} outside "
                    f"the {L}-dimensional set {c.set_name}", constraint=label))
    out.extend(lint(m, _structural_ok=not any(d.severity == "error" for d in out)))
    return out


def lint(m: UncertainLP, _structural_ok: bool = True) -> list[Diagnostic]:
    """Pitfall warnings: uncertain equalities, uncertainty shared across
    constraints (worst cases are computed constraint-wise), non-adjustable
    slack variables inside uncertain equalities."""
    out: list[Diagnostic] = []
    if not _structural_ok:
        return out
    for i, c in enumerate(m.constraints):
        label = c.name or f"c{i}"
        if c.sense == "==" and not c.is_certain():
            out.append(Diagnostic(
                "warning", "uncertain-equality",
                f"{label}: equality with uncertain coefficients restricts the "
                f"feasible set to points satisfying it for every parameter "
                f"value; eliminate a variable or make one adjustable",
                constraint=label))
    # shared zeta across constraints of the same set
    by_set: dict[str, list[tuple[str, set[int]]]] = {}
    for i, c in enumerate(m.constraints):
        used = c.used_zeta_indices()
        if used:
            by_set.setdefault(c.set_name, []).append((c.name or f"c{i}", used))
    for sname, items in by_set.items():
        if len(items) < 2:
            continue
        counts: dict[int, list[str]] = {}
        for label, used in items:
            for z in used:
                counts.setdefault(z, []).append(label)
        shared = sorted({lab for z, labs in counts.items() if len(labs) > 1
                         for lab in labs})
        if shared:
            out.append(Diagnostic(
                "note", "shared-zeta",
                f"constraints {shared} share zeta indices of set {sname}; "
                f"worst cases are taken per constraint (each sees the "
                f"projection of the set), so a value split across them is "
                f"more conservative than the single-row original"))
    # non-adjustable slack pattern
    for v in m.variables:
        if v.adjustable is not None:
            continue
        hits = [c for c in m.constraints
                if v.name in c.a or v.name in c.P]
        if len(hits) != 1:
            continue
        c = hits[0]
        if c.sense != "==" or c.is_certain():
            continue
        coef = c.a.get(v.name, 0.0)
        sign_bound = (v.lb == 0.0 and v.ub > 0.0) or (v.ub == 0.0 and v.lb < 0.0)
        if abs(coef) == 1.0 and c.coefficient_is_certain(v.name) and sign_bound:
            out.append(Diagnostic(
                "warning", "rigid-slack",
                f"variable {v.name} looks like a slack inside the uncertain "
                f"equality {c.name or '?'}; a static slack forces the equality "
                f"for every parameter value — declare it adjustable or keep "
                f"the inequality", constraint=c.name))
    return out


# ------------------------------------------------------------ max expansion

@dataclass(frozen=True)
class AffineRow:
    """x-coefficients that are affine in zeta: coeffs + factors' zeta."""
    coeffs: dict[str, float] = field(default_factory=dict)
    factors: dict[str, dict[int, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class SumOfMax:
    """base(z)'x + sum_i max_k branch[i][k](z)'x <= rhs0 + rhs_factor'z."""
    base: AffineRow
    terms: tuple[tuple[AffineRow, ...], ...]
    rhs: float
    rhs_factor: dict[int, float] = field(default_factory=dict)
    set_name: str = ""
    name: str = ""


MAX_EXPANSION_CAP = 4096


def expand_max(m: UncertainLP, som: SumOfMax) -> UncertainLP:
    """Exact expansion of a sum-of-max constraint: one row per combination of
    branch choices, each carrying the full uncertainty. Exponential in the
    number of max terms; capped. The conservative alternative (an epigraph
    variable per max) splits the uncertainty and is deliberately not done."""
    n_rows = 1
    for t in som.terms:
        if not t:
            raise ValueError("each max term needs at least one branch")
        n_rows *= len(t)
    if n_rows > MAX_EXPANSION_CAP:
        raise ValueError(
            f"exact expansion needs {n_rows} rows (cap {MAX_EXPANSION_CAP}); "
            f"introduce epigraph variables per max term instead, accepting "
            f"the conservative split")
    mm = m
    rhs0 = som.rhs
    rhs_fac = {k: v for k, v in som.rhs_factor.items() if v != 0.0}
    uses_unit = rhs_fac or UNIT_VAR in som.base.factors or any(
        UNIT_VAR in br.factors or UNIT_VAR in br.coeffs
        for t in som.terms for br in t)
    if uses_unit and UNIT_VAR not in m.var_names():
        mm = ensure_unit_variable(mm)
    new_rows = []
    for combo_idx, combo in enumerate(itertools.product(*som.terms) if som.terms
                                      else [()]):
        a = dict(som.base.coeffs)
        P: dict[str, dict[int, float]] = {k: dict(v)
                                          for k, v in som.base.factors.items()}
        for br in combo:
            for k, v in br.coeffs.items():
                a[k] = a.get(k, 0.0) + v
            for k, col in br.factors.items():
                dst = P.setdefault(k, {})
                for z, v in col.items():
                    dst[z] = dst.get(z, 0.0) + v
        if rhs_fac:
            col = P.setdefault(UNIT_VAR, {})
            for z, v in rhs_fac.items():
                col[z] = col.get(z, 0.0) - v
        nm = som.name or "max"
        new_rows.append(UncertainConstraint(
            a=a, P=P, sense="<=", rhs=rhs0, set_name=som.set_name,
            name=f"{nm}[{combo_idx}]" if n_rows > 1 else nm))
    return replace(mm, constraints=mm.constraints + tuple(new_rows))


# --------------------------------------------------------------- products

def linearize_binary_product(m: UncertainLP, x: str, y: str,
                             z_name: str) -> UncertainLP:
    """Replace the product of two binaries by a fresh binary z with the
    four certain rows {z<=x, z<=y, z>=x+y-1, z>=0}. If one factor is pinned
    to 1 the product is the other variable and the model is returned as is."""
    vx, vy = m.var(x), m.var(y)
    for v in (vx, vy):
        if v.lb == 1.0 and v.ub == 1.0:
            return m
        if not (v.integer and v.lb == 0.0 and v.ub == 1.0):
            raise ValueError(f"{v.name} is not binary")
    z = ModelVariable(z_name, lb=0.0, ub=1.0, integer=True)
    certain = _certain_set_name(m)
    rows = (
        UncertainConstraint({z_name: 1.0, x: -1.0}, {}, "<=", 0.0, certain,
                            name=f"{z_name}_le_{x}"),
        UncertainConstraint({z_name: 1.0, y: -1.0}, {}, "<=", 0.0, certain,
                            name=f"{z_name}_le_{y}"),
        UncertainConstraint({z_name: 1.0, x: -1.0, y: -1.0}, {}, ">=", -1.0,
                            certain, name=f"{z_name}_ge_sum"),
    )
    return replace(m, variables=m.variables + (z,),
                   constraints=m.constraints + rows)


def linearize_binary_scaling(m: UncertainLP, base: AffineRow, scaled: AffineRow,
                             z: str, rhs: float, set_name: str, big_m: float,
                             name: str = "switch") -> UncertainLP:
    """Binary-times-row inside an uncertain constraint,
    base(z)'x + z*scaled(z)'x <= rhs: the big-M pair that keeps each row's
    uncertainty whole (splitting the scaled part into its own row would make
    the result conservative):
        base'x + scaled'x <= rhs + M(1-z)
        base'x           <= rhs + M z
    """
    if big_m is None or not math.isfinite(big_m):
        raise ValueError("big-M constant required")
    v = m.var(z)
    if not (v.integer and v.lb == 0.0 and v.ub == 1.0):
        raise ValueError(f"{z} is not binary")
    a_on = dict(base.coeffs)
    for k, val in scaled.coeffs.items():
        a_on[k] = a_on.get(k, 0.0) + val
    P_on = {k: dict(col) for k, col in base.factors.items()}
    for k, col in scaled.factors.items():
        dst = P_on.setdefault(k, {})
        for zi, val in col.items():
            dst[zi] = dst.get(zi, 0.0) + val
    a_on[z] = a_on.get(z, 0.0) + big_m
    row_on = UncertainConstraint(a_on, P_on, "<=", rhs + big_m, set_name,
                                 name=f"{name}_on")
    a_off = dict(base.coeffs)
    a_off[z] = a_off.get(z, 0.0) - big_m
    row_off = UncertainConstraint(a_off,
                                  {k: dict(c) for k, c in base.factors.items()},
                                  "<=", rhs, set_name, name=f"{name}_off")
    return replace(m, constraints=m.constraints + (row_on, row_off))


def enforce_k_out_of_n(m: UncertainLP, constraint_names: list[str], k: int,
                       big_m: float, prefix: str = "pick") -> UncertainLP:
    """At least k of the named uncertain rows must hold, via indicator
    binaries and big-M. This is the constraint-wise version: each selected row
    holds for every parameter value. Requiring 'for every parameter value, at
    least k rows hold' jointly is a different, stronger statement with no
    known exact reformulation here."""
    if big_m is None or not math.isfinite(big_m):
        raise ValueError("big-M constant required")
    if not 0 < k <= len(constraint_names):
        raise ValueError("need 0 < k <= number of constraints")
    indicators = []
    new_cons = list(m.constraints)
    for cname in constraint_names:
        ci = next(i for i, c in enumerate(new_cons) if c.name == cname)
        c = new_cons[ci]
        if c.sense != "<=":
            raise ValueError(f"{cname}: only <= rows supported")
        zname = f"{prefix}_{cname}"
        indicators.append(ModelVariable(zname, 0.0, 1.0, integer=True))
        a = dict(c.a)
        a[zname] = a.get(zname, 0.0) + big_m
        new_cons[ci] = replace(c, a=a, rhs=c.rhs + big_m)
    count_row = UncertainConstraint(
        {v.name: 1.0 for v in indicators}, {}, ">=", float(k),
        _certain_set_name(m), name=f"{prefix}_count")
    return replace(m, variables=m.variables + tuple(indicators),
                   constraints=tuple(new_cons) + (count_row,))


# ----------------------------------------------------- equality elimination

class EliminationError(ValueError):
    pass


def eliminate_equality(m: UncertainLP, constraint_name: str,
                       var: str) -> UncertainLP:
    """Substitute `var` out using the named equality. Allowed when the
    variable's coefficient in the equality is certain and nonzero; the result
    stays affine in zeta unless the substitution multiplies two uncertain
    things, which is reported rather than produced."""
    eq = m.constraint(constraint_name)
    if eq.sense != "==":
        raise EliminationError(f"{constraint_name} is not an equality")
    if not eq.coefficient_is_certain(var):
        raise EliminationError(
            f"eliminating {var} divides by its uncertain coefficient in "
            f"{constraint_name}: the substituted expression is rational in the "
            f"uncertain parameters (1/zeta), not affine")
    pivot = eq.a.get(var, 0.0)
    if pivot == 0.0:
        raise EliminationError(f"{var} has zero coefficient in {constraint_name}")
    if var in m.objective.coeffs and m.objective.coeffs[var] != 0.0 and \
            not eq.is_certain():
        raise EliminationError(
            f"eliminating {var} would make the objective uncertain; apply the "
            f"objective epigraph first")

    # substitution: var = (rhs - sum_{j != var} (a_j + P_j z) x_j) / pivot
    sub_a = {j: -eq.a[j] / pivot for j in eq.a if j != var and eq.a[j] != 0.0}
    sub_P = {j: {zi: -v / pivot for zi, v in col.items() if v != 0.0}
             for j, col in eq.P.items() if j != var}
    sub_P = {j: col for j, col in sub_P.items() if col}
    sub_const = eq.rhs / pivot
    sub_certain = not sub_P

    need_unit = UNIT_VAR in m.var_names()
    new_cons = []
    for c in m.constraints:
        if c.name == constraint_name:
            continue
        coef0 = c.a.get(var, 0.0)
        coefP = {zi: v for zi, v in c.P.get(var, {}).items() if v != 0.0}
        if coef0 == 0.0 and not coefP:
            new_cons.append(c)
            continue
        if coefP and not sub_certain:
            raise EliminationError(
                f"substituting {var} into {c.name or 'a constraint'} multiplies "
                f"its uncertain coefficient by an uncertain expression; the "
                f"result is bilinear in the uncertain parameters")
        a = {k: v for k, v in c.a.items() if k != var}
        P = {k: dict(col) for k, col in c.P.items() if k != var}
        rhs = c.rhs
        # certain part of the target coefficient times the substitution
        for j, v in sub_a.items():
            a[j] = a.get(j, 0.0) + coef0 * v
        for j, col in sub_P.items():
            dst = P.setdefault(j, {})
            for zi, v in col.items():
                dst[zi] = dst.get(zi, 0.0) + coef0 * v
        rhs -= coef0 * sub_const
        # uncertain part of the target coefficient times the (certain)
        # substitution: the x-terms stay affine; the constant term becomes an
        # uncertain additive term carried by the unit variable
        for zi, vP in coefP.items():
            for j, v in sub_a.items():
                dst = P.setdefault(j, {})
                dst[zi] = dst.get(zi, 0.0) + vP * v
            if sub_const != 0.0:
                need_unit = True
                dst = P.setdefault(UNIT_VAR, {})
                dst[zi] = dst.get(zi, 0.0) + vP * sub_const
        P = {k: {zi: v for zi, v in col.items() if v != 0.0}
             for k, col in P.items()}
        P = {k: col for k, col in P.items() if col}
        new_cons.append(replace(c, a=a, P=P, rhs=rhs))

    new_vars = tuple(v for v in m.variables if v.name != var)
    if need_unit and UNIT_VAR not in (v.name for v in new_vars):
        new_vars = new_vars + (ModelVariable(UNIT_VAR, lb=1.0, ub=1.0),)
    obj = m.objective
    if var in obj.coeffs:
        co = obj.coeffs[var]
        coeffs = {k: v for k, v in obj.coeffs.items() if k != var}
        for j, v in sub_a.items():
            coeffs[j] = coeffs.get(j, 0.0) + co * v
        obj = ModelObjective(obj.sense, coeffs, obj.constant + co * sub_const)
    out = replace(m, variables=new_vars, objective=obj,
                  constraints=tuple(new_cons))
    bounds = m.var(var)
    if bounds.lb != -INF or bounds.ub != INF:
        out = _bound_rows_for_eliminated(out, var, bounds, sub_a, sub_P,
                                         sub_const, eq.set_name)
    return out


def _bound_rows_for_eliminated(m, var, bounds, sub_a, sub_P, sub_const,
                               set_name):
    """lb <= substituted expression <= ub, as uncertain rows."""
    rows = []
    if bounds.lb != -INF:
        rows.append(UncertainConstraint(
            {k: -v for k, v in sub_a.items()},
            {k: {zi: -v for zi, v in col.items()} for k, col in sub_P.items()},
            "<=", sub_const - bounds.lb, set_name, name=f"{var}_lb"))
    if bounds.ub != INF:
        rows.append(UncertainConstraint(
            dict(sub_a),
            {k: dict(col) for k, col in sub_P.items()},
            "<=", bounds.ub - sub_const, set_name, name=f"{var}_ub"))
    return replace(m, constraints=m.constraints + tuple(rows))


# -------------------------------------------------------- objective epigraph

def epigraph_objective(m: UncertainLP, factors: dict[str, dict[int, float]],
                       set_name: str, t_name: str = "__t") -> UncertainLP:
    """Move an uncertain objective (nominal coefficients from the model, factor
    part given here) into a constraint: min t with c(z)'x - t <= 0 bound to
    `set_name` (max mirrored)."""
    if set_name not in m.sets:
        raise KeyError(set_name)
    if t_name in m.var_names():
        raise ValueError(f"{t_name} already exists")
    t = ModelVariable(t_name, lb=-INF, ub=INF)
    minimize = m.objective.sense == "min"
    a = dict(m.objective.coeffs)
    a[t_name] = -1.0
    P = {k: dict(col) for k, col in factors.items() if col}
    row = UncertainConstraint(
        a=a if minimize else {k: -v for k, v in a.items()},
        P=P if minimize else {k: {zi: -v for zi, v in col.items()}
                              for k, col in P.items()},
        sense="<=", rhs=-m.objective.constant if minimize else m.objective.constant,
        set_name=set_name, name=f"{t_name}_epigraph")
    obj = ModelObjective(m.objective.sense, {t_name: 1.0})
    return replace(m, variables=m.variables + (t,), objective=obj,
                   constraints=m.constraints + (row,))


# ----------------------------------------------------------------- helpers

def _certain_set_name(m: UncertainLP) -> str:
    """Any set name works for a certain row; reuse the first or synthesize."""
    if m.sets:
        return next(iter(m.sets))
    return ""


def nominal_instance(m: UncertainLP, scenario: dict[str, np.ndarray] | None = None):
    """Fix zeta per set (default: each set's nominal point) and return the
    certain instantiation as solver inputs."""
    from .solver import DeterministicMILP, LinearRow, Objective, Variable

    zvals: dict[str, np.ndarray] = {}
    for nm, s in m.sets.items():
        if scenario and nm in scenario:
            zvals[nm] = np.asarray(scenario[nm], dtype=float)
        else:
            zvals[nm] = s.nominal()
    rows = []
    for i, c in enumerate(m.constraints):
        coeffs = dict(c.a)
        if not c.is_certain():
            z = zvals[c.set_name]
            for var, col in c.P.items():
                coeffs[var] = coeffs.get(var, 0.0) + sum(
                    v * z[zi] for zi, v in col.items())
        coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
        rows.append(LinearRow(coeffs, c.sense, c.rhs, name=c.name or f"c{i}"))
    p = DeterministicMILP(
        variables=tuple(Variable(v.name, v.lb, v.ub, v.integer)
                        for v in m.variables),
        objective=Objective(m.objective.sense, dict(m.objective.coeffs),
                            m.objective.constant),
        rows=tuple(rows),
    )
    return p
