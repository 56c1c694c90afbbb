"""Duality-based robust counterparts, affine decision-rule expansion, Pareto
re-optimization and robust fractional programs.

Box and budgeted sets get their closed-form polyhedral lifts, polyhedral and
CLT sets the LP-duality rows {a'x + q'w <= d, D'w = -P'x, w >= 0}, scenario
hulls one row per point. Ball kinds are refused here: their counterpart is
conic, and this toolkit solves them exactly through the adversarial loop
instead (the closed-form worst case a'x + omega||P'x||_2 stays available as a
verification oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import sets as usets
from .model import (
    Adjustability,
    ModelObjective,
    ModelVariable,
    UncertainConstraint,
    UncertainLP,
    validate,
)
from .solver import (
    INF,
    DEFAULT_OPTIONS,
    DeterministicMILP,
    LinearRow,
    Objective,
    SolverOptions,
    Variable,
    solve_lp,
    solve_milp,
)


class ReformulationError(ValueError):
    pass


class BallNotReformulable(ReformulationError):
    """Ball / ball-box worst cases are l2 norms; solve those models with
    robustlp.adversarial.solve_adversarial."""


@dataclass(frozen=True)
class Provenance:
    row: str
    source: str | None
    set_kind: str | None
    role: str

    def to_json(self) -> dict:
        return {"row": self.row, "source": self.source,
                "set_kind": self.set_kind, "role": self.role}


@dataclass
class ReformulationArtifact:
    milp: DeterministicMILP
    provenance: list[Provenance] = field(default_factory=list)
    generated_vars: dict[str, str] = field(default_factory=dict)  # var -> role

    def provenance_json(self) -> list[dict]:
        return [p.to_json() for p in self.provenance]


def _pcolumns(c: UncertainConstraint, L: int) -> dict[int, dict[str, float]]:
    """zeta index -> {var: coefficient}, i.e. the rows of P'x."""
    cols: dict[int, dict[str, float]] = {}
    for var, col in c.P.items():
        for zi, v in col.items():
            if v != 0.0:
                cols.setdefault(zi, {})[var] = cols.setdefault(zi, {}).get(var, 0.0) + v
    return cols


def _negate_constraint(c: UncertainConstraint) -> UncertainConstraint:
    return replace(c,
                   a={k: -v for k, v in c.a.items()},
                   P={k: {zi: -v for zi, v in col.items()}
                      for k, col in c.P.items()},
                   rhs=-c.rhs, sense="<=")


def reformulate_rc(m: UncertainLP, *, allow_uncertain_equality: bool = False
                   ) -> ReformulationArtifact:
    """Build the certain counterpart of every constraint. Uncertain equalities
    are refused unless explicitly overridden, in which case the equality is
    enforced for every parameter value (scenario rows for hulls; coefficient
    pinning for full-dimensional sets), which is exactly as restrictive as it
    sounds."""
    diags = [d for d in validate(m) if d.severity == "error"]
    if diags:
        raise ReformulationError("; ".join(d.message for d in diags))
    if m.adjustable_names():
        raise ReformulationError(
            f"unresolved adjustable variables {m.adjustable_names()}; run "
            f"expand_aarc (continuous) or the split-recourse builder (integer) first")

    rows: list[LinearRow] = []
    new_vars: list[Variable] = [Variable(v.name, v.lb, v.ub, v.integer)
                                for v in m.variables]
    prov: list[Provenance] = []
    gen_vars: dict[str, str] = {}

    for ci, c in enumerate(m.constraints):
        label = c.name or f"c{ci}"
        if c.is_certain():
            rows.append(LinearRow(dict(c.a), c.sense, c.rhs, name=label))
            prov.append(Provenance(label, label, None, "certain"))
            continue
        s = m.sets[c.set_name]
        if c.sense == "==":
            if not allow_uncertain_equality:
                raise ReformulationError(
                    f"{label}: uncertain equality; eliminate a variable, make "
                    f"one adjustable, or pass allow_uncertain_equality=True to "
                    f"accept the pinned interpretation")
            _equality_rows(m, c, label, s, rows, prov)
            continue
        work = c if c.sense == "<=" else _negate_constraint(c)
        if isinstance(s, usets.Box):
            _box_rows(work, label, s, rows, new_vars, prov, gen_vars)
        elif isinstance(s, usets.Budgeted):
            _budgeted_rows(work, label, s, rows, new_vars, prov, gen_vars)
        elif isinstance(s, (usets.Polyhedral, usets.CLTSet)):
            if isinstance(s, usets.Polyhedral) and not s.bounded:
                raise ReformulationError(
                    f"{label}: set {c.set_name} is unbounded; the inner worst "
                    f"case may be infinite")
            _polyhedral_rows(work, label, s, rows, new_vars, prov, gen_vars)
        elif isinstance(s, usets.ScenarioHull):
            _scenario_rows(work, label, s, rows, prov)
        elif isinstance(s, (usets.Ball, usets.BallBox)):
            raise BallNotReformulable(
                f"{label}: {s.kind} sets have a conic counterpart; use "
                f"solve_adversarial, which handles them exactly")
        else:
            raise ReformulationError(f"{label}: unsupported set kind {s!r}")

    milp = DeterministicMILP(
        variables=tuple(new_vars),
        objective=Objective(m.objective.sense, dict(m.objective.coeffs),
                            m.objective.constant),
        rows=tuple(rows),
    )
    return ReformulationArtifact(milp=milp, provenance=prov,
                                 generated_vars=gen_vars)


def _box_rows(c, label, s: usets.Box, rows, new_vars, prov, gen_vars):
    # worst case adds sum_l max(lo_l * v_l(x), hi_l * v_l(x)); u_l majorizes both
    cols = _pcolumns(c, s.dim)
    main = dict(c.a)
    for zi, v in sorted(cols.items()):
        u = f"__rc_u_{label}_{zi}"
        new_vars.append(Variable(u, -INF, INF))
        gen_vars[u] = "box_abs"
        main[u] = 1.0
        lo, hi = s.lo[zi], s.hi[zi]
        r1 = {k: lo * co for k, co in v.items()}
        r1[u] = -1.0
        rows.append(LinearRow(r1, "<=", 0.0, name=f"{label}__lo{zi}"))
        prov.append(Provenance(f"{label}__lo{zi}", label, "box", "abs_lower"))
        r2 = {k: hi * co for k, co in v.items()}
        r2[u] = -1.0
        rows.append(LinearRow(r2, "<=", 0.0, name=f"{label}__hi{zi}"))
        prov.append(Provenance(f"{label}__hi{zi}", label, "box", "abs_upper"))
    rows.append(LinearRow(main, "<=", c.rhs, name=label))
    prov.append(Provenance(label, label, "box", "main"))


def _budgeted_rows(c, label, s: usets.Budgeted, rows, new_vars, prov, gen_vars):
    # a'x + Gamma*z + sum_l p_l <= d ; z + p_l >= +-v_l(x) ; z, p >= 0
    cols = _pcolumns(c, s.dim)
    zname = f"__rc_z_{label}"
    new_vars.append(Variable(zname, 0.0, INF))
    gen_vars[zname] = "budget_dual"
    main = dict(c.a)
    main[zname] = s.gamma
    for zi, v in sorted(cols.items()):
        pname = f"__rc_p_{label}_{zi}"
        new_vars.append(Variable(pname, 0.0, INF))
        gen_vars[pname] = "budget_dual"
        main[pname] = 1.0
        r1 = {k: co for k, co in v.items()}
        r1[zname] = r1.get(zname, 0.0) - 1.0
        r1[pname] = r1.get(pname, 0.0) - 1.0
        rows.append(LinearRow(r1, "<=", 0.0, name=f"{label}__bp{zi}"))
        prov.append(Provenance(f"{label}__bp{zi}", label, "budgeted", "abs_upper"))
        r2 = {k: -co for k, co in v.items()}
        r2[zname] = r2.get(zname, 0.0) - 1.0
        r2[pname] = r2.get(pname, 0.0) - 1.0
        rows.append(LinearRow(r2, "<=", 0.0, name=f"{label}__bn{zi}"))
        prov.append(Provenance(f"{label}__bn{zi}", label, "budgeted", "abs_lower"))
    rows.append(LinearRow(main, "<=", c.rhs, name=label))
    prov.append(Provenance(label, label, "budgeted", "main"))


def _polyhedral_rows(c, label, s, rows, new_vars, prov, gen_vars):
    D, q = s.to_polyhedral_rows()
    mrows, L = D.shape
    cols = _pcolumns(c, L)
    wnames = []
    for r in range(mrows):
        w = f"__rc_w_{label}_{r}"
        new_vars.append(Variable(w, 0.0, INF))
        gen_vars[w] = "poly_dual"
        wnames.append(w)
    main = dict(c.a)
    for r, w in enumerate(wnames):
        if q[r] != 0.0:
            main[w] = main.get(w, 0.0) + float(q[r])
    rows.append(LinearRow(main, "<=", c.rhs, name=label))
    prov.append(Provenance(label, label, s.kind, "main"))
    for zi in range(L):
        link = {w: float(D[r, zi]) for r, w in enumerate(wnames)
                if D[r, zi] != 0.0}
        for k, co in cols.get(zi, {}).items():
            link[k] = link.get(k, 0.0) + co
        if not link:
            continue
        rows.append(LinearRow(link, "==", 0.0, name=f"{label}__dual{zi}"))
        prov.append(Provenance(f"{label}__dual{zi}", label, s.kind, "dual_link"))


def _scenario_rows(c, label, s: usets.ScenarioHull, rows, prov):
    for si, pt in enumerate(s.pts()):
        coeffs = dict(c.a)
        for var, col in c.P.items():
            add = sum(v * pt[zi] for zi, v in col.items())
            if add != 0.0:
                coeffs[var] = coeffs.get(var, 0.0) + add
        rows.append(LinearRow(coeffs, "<=", c.rhs, name=f"{label}__s{si}"))
        prov.append(Provenance(f"{label}__s{si}", label, "scenario_hull",
                               "scenario"))


def _equality_rows(m, c, label, s, rows, prov):
    if isinstance(s, usets.ScenarioHull):
        for si, pt in enumerate(s.pts()):
            coeffs = dict(c.a)
            for var, col in c.P.items():
                add = sum(v * pt[zi] for zi, v in col.items())
                if add != 0.0:
                    coeffs[var] = coeffs.get(var, 0.0) + add
            rows.append(LinearRow(coeffs, "==", c.rhs, name=f"{label}__s{si}"))
            prov.append(Provenance(f"{label}__s{si}", label, "scenario_hull",
                                   "scenario_eq"))
        return
    # full-dimensional direction: coefficient must vanish; zero-width
    # direction: the pinned value folds into the certain part
    cols = _pcolumns(c, s.dim)
    base = dict(c.a)
    rhs = c.rhs
    for zi, v in sorted(cols.items()):
        lo, hi = s.coordinate_range(zi)
        if hi - lo <= 1e-12:
            for k, co in v.items():
                base[k] = base.get(k, 0.0) + co * lo
            continue
        rows.append(LinearRow(dict(v), "==", 0.0, name=f"{label}__pin{zi}"))
        prov.append(Provenance(f"{label}__pin{zi}", label, s.kind, "pin"))
    rows.append(LinearRow(base, "==", rhs, name=label))
    prov.append(Provenance(label, label, s.kind, "main_eq"))


# ------------------------------------------------------------ decision rules

@dataclass(frozen=True)
class DecisionRule:
    variable: str
    intercept: str
    slopes: tuple[str, ...]
    info_base: tuple[tuple[float, ...], ...]  # rows over zeta


@dataclass(frozen=True)
class DecisionRuleSpec:
    rules: tuple[DecisionRule, ...]


def decision_rules(m: UncertainLP, variant: str = "aarc1",
                   image_constraint: str | None = None) -> DecisionRuleSpec:
    """Build the affine-rule spec from the model's adjustability declarations.

    aarc1: rules are affine in the observed zeta coordinates themselves (or in
    the rows of a declared information-base matrix). aarc2: rules are affine
    in the observed model coefficients a + P zeta of `image_constraint`, i.e.
    the info base is that constraint's factor rows — at least as conservative
    as aarc1, equal when the map is injective on the set.
    """
    rules = []
    for v in m.variables:
        if v.adjustable is None:
            continue
        adj = v.adjustable
        set_name = adj.set_name or m.single_set_name()
        L = m.sets[set_name].dim
        if variant == "aarc1":
            if adj.info_base is not None:
                base = tuple(tuple(float(x) for x in row)
                             for row in adj.info_base)
            else:
                base = tuple(tuple(1.0 if j == zi else 0.0 for j in range(L))
                             for zi in adj.indices)
        elif variant == "aarc2":
            cname = image_constraint
            if cname is None:
                raise ValueError("aarc2 needs the constraint whose coefficient "
                                 "image is observed")
            c = m.constraint(cname)
            base_rows = []
            for var in sorted(c.P):
                row = [0.0] * L
                for zi, co in c.P[var].items():
                    row[zi] = co
                if any(row):
                    base_rows.append(tuple(row))
            base = tuple(base_rows)
        else:
            raise ValueError(f"unknown variant {variant}")
        rules.append(DecisionRule(
            variable=v.name,
            intercept=f"{v.name}__0",
            slopes=tuple(f"{v.name}__q{r}" for r in range(len(base))),
            info_base=base,
        ))
    return DecisionRuleSpec(tuple(rules))


class FixedRecourseError(ValueError):
    pass


def expand_aarc(m: UncertainLP, spec: DecisionRuleSpec | None = None,
                variant: str = "aarc1",
                image_constraint: str | None = None) -> UncertainLP:
    """Substitute each adjustable continuous variable by an affine decision
    rule. Requires fixed recourse (certain coefficients on adjustable
    variables everywhere) and a certain objective that does not touch the
    adjustable variables. Bounds on an adjustable variable become uncertain
    rows constraining its rule."""
    if spec is None:
        spec = decision_rules(m, variant, image_constraint)
    rule_map = {r.variable: r for r in spec.rules}
    for name in rule_map:
        v = m.var(name)
        if v.integer:
            raise FixedRecourseError(
                f"{name} is integer; affine rules cannot stay integer across "
                f"the set — use the split-recourse builder")
        if m.objective.coeffs.get(name, 0.0) != 0.0:
            raise FixedRecourseError(
                f"{name} appears in the objective; apply epigraph_objective "
                f"first so the objective stays certain")

    new_vars = [v for v in m.variables if v.name not in rule_map]
    for r in rule_map.values():
        new_vars.append(ModelVariable(r.intercept, -INF, INF))
        for snm in r.slopes:
            new_vars.append(ModelVariable(snm, -INF, INF))

    def substitute(c: UncertainConstraint) -> UncertainConstraint:
        a = {k: v for k, v in c.a.items() if k not in rule_map}
        P = {k: dict(col) for k, col in c.P.items() if k not in rule_map}
        for name, rule in rule_map.items():
            coef = c.a.get(name, 0.0)
            if not c.coefficient_is_certain(name):
                raise FixedRecourseError(
                    f"{c.name or 'constraint'}: adjustable {name} has an "
                    f"uncertain coefficient (fixed recourse violated)")
            if coef == 0.0:
                continue
            a[rule.intercept] = a.get(rule.intercept, 0.0) + coef
            for snm, base_row in zip(rule.slopes, rule.info_base):
                col = P.setdefault(snm, {})
                for zi, b in enumerate(base_row):
                    if b != 0.0:
                        col[zi] = col.get(zi, 0.0) + coef * b
        P = {k: {zi: v for zi, v in col.items() if v != 0.0}
             for k, col in P.items()}
        P = {k: col for k, col in P.items() if col}
        return replace(c, a=a, P=P)

    new_cons = [substitute(c) for c in m.constraints]
    # bounds on the rule image
    for name, rule in rule_map.items():
        v = m.var(name)
        set_name = (v.adjustable.set_name if v.adjustable and
                    v.adjustable.set_name else m.single_set_name())
        if v.lb != -INF:
            a = {rule.intercept: -1.0}
            P = {snm: {zi: -b for zi, b in enumerate(base_row) if b != 0.0}
                 for snm, base_row in zip(rule.slopes, rule.info_base)}
            new_cons.append(UncertainConstraint(
                a, {k: c for k, c in P.items() if c}, "<=", -v.lb, set_name,
                name=f"{name}__rule_lb"))
        if v.ub != INF:
            a = {rule.intercept: 1.0}
            P = {snm: {zi: b for zi, b in enumerate(base_row) if b != 0.0}
                 for snm, base_row in zip(rule.slopes, rule.info_base)}
            new_cons.append(UncertainConstraint(
                a, {k: c for k, c in P.items() if c}, "<=", v.ub, set_name,
                name=f"{name}__rule_ub"))
    return replace(m, variables=tuple(new_vars), constraints=tuple(new_cons))


def rule_values(spec: DecisionRuleSpec, solution: dict[str, float],
                zeta: np.ndarray) -> dict[str, float]:
    """Evaluate the fitted rules at a realization."""
    out = {}
    for r in spec.rules:
        val = solution[r.intercept]
        for snm, base_row in zip(r.slopes, r.info_base):
            val += solution[snm] * float(np.dot(base_row, zeta))
        out[r.variable] = val
    return out


# ------------------------------------------------------ pareto re-optimize

def _detect_epigraph(m: UncertainLP):
    """If the objective is `min t` (or `max t`) for an epigraph variable t
    defined by a single row c(z)'x - t <= 0, recover (coeffs, factors) of the
    underlying cost so its nominal-scenario value can be optimized."""
    coeffs = {k: v for k, v in m.objective.coeffs.items() if v != 0.0}
    if len(coeffs) != 1:
        return None
    (t, co), = coeffs.items()
    if co != 1.0:
        return None
    rows = [c for c in m.constraints
            if c.a.get(t, 0.0) != 0.0 or t in c.P]
    if len(rows) != 1:
        return None
    row = rows[0]
    if not row.coefficient_is_certain(t) or row.sense == "==":
        return None
    sgn = -1.0 / row.a[t]
    base = {k: sgn * v for k, v in row.a.items() if k != t and v != 0.0}
    fac = {k: {zi: sgn * v for zi, v in col.items() if v != 0.0}
           for k, col in row.P.items() if k != t}
    fac = {k: col for k, col in fac.items() if col}
    return base, fac, row.set_name


def pareto_reoptimize(m: UncertainLP, tstar: float, *,
                      nominal: np.ndarray | None = None,
                      opts: SolverOptions = DEFAULT_OPTIONS):
    """Optimize the nominal-scenario objective subject to the worst-case
    objective staying at the robust optimum tstar. Epigraph objectives
    (min t with a single defining row) are recognized and re-targeted to the
    underlying cost at the nominal scenario (default: the factor center 0);
    a plain certain objective re-certifies tstar as is."""
    from .robust_solve import solve_robust

    sense = m.objective.sense
    guard = UncertainConstraint(
        a=dict(m.objective.coeffs), P={},
        sense="<=" if sense == "min" else ">=",
        rhs=tstar - m.objective.constant,
        set_name=next(iter(m.sets)) if m.sets else "",
        name="__worst_case_guard")
    nom_coeffs = dict(m.objective.coeffs)
    nom_const = m.objective.constant
    detected = _detect_epigraph(m)
    if detected is not None:
        base, fac, set_name = detected
        L = m.sets[set_name].dim if set_name in m.sets else 0
        zbar = np.zeros(L) if nominal is None else np.asarray(nominal, float)
        nom_coeffs = dict(base)
        for var, col in fac.items():
            nom_coeffs[var] = nom_coeffs.get(var, 0.0) + sum(
                v * zbar[zi] for zi, v in col.items())
        nom_const = 0.0
    m2 = replace(m, objective=ModelObjective(sense, nom_coeffs, nom_const),
                 constraints=m.constraints + (guard,))
    return solve_robust(m2, opts=opts)


# --------------------------------------------------- robust fractional

@dataclass(frozen=True)
class FractionalTerm:
    """const + const_factor'zeta + sum_j (coeffs_j + factors_j'zeta) x_j."""
    const: float = 0.0
    const_factor: dict[int, float] = field(default_factory=dict)
    coeffs: dict[str, float] = field(default_factory=dict)
    factors: dict[str, dict[int, float]] = field(default_factory=dict)

    def value(self, x: dict[str, float], zeta: np.ndarray) -> float:
        out = self.const + sum(v * zeta[zi]
                               for zi, v in self.const_factor.items())
        for j, co in self.coeffs.items():
            out += co * x.get(j, 0.0)
        for j, col in self.factors.items():
            out += x.get(j, 0.0) * sum(v * zeta[zi] for zi, v in col.items())
        return out


def _set_vertices(s: usets.UncertaintySet) -> list[np.ndarray]:
    from . import polytope
    if isinstance(s, usets.ScenarioHull):
        return [p for p in s.pts()]
    if isinstance(s, (usets.Ball, usets.BallBox)):
        raise ReformulationError(
            f"{s.kind} sets are not polytopes; the fractional solver needs "
            f"vertex enumeration for its positivity check")
    if isinstance(s, usets.Box):
        D, q = s.to_polyhedral_rows()
    elif isinstance(s, usets.Budgeted):
        if s.dim > 8:
            raise ReformulationError("budgeted vertex enumeration limited to dim 8")
        D, q = s.to_polyhedral_rows()
    else:
        if isinstance(s, usets.Polyhedral) and not s.bounded:
            raise ReformulationError("unbounded set")
        D, q = s.to_polyhedral_rows()
    return polytope.enumerate_vertices(D, q)


def solve_robust_fractional(base: UncertainLP, num: FractionalTerm,
                            den: FractionalTerm, set_name: str,
                            tol: float = 1e-6,
                            opts: SolverOptions = DEFAULT_OPTIONS):
    """min over x of the worst-case ratio num/den via bisection on lambda:
    g(lambda) = min_x max_z [num - lambda*den] is nonincreasing; return the
    smallest lambda with g <= 0 and the witnessing x. `base` holds the certain
    constraints and bounds; den must be positive over them and the set."""
    s = base.sets[set_name]
    verts = _set_vertices(s)
    if not verts:
        raise ReformulationError("vertex enumeration found nothing")
    for c in base.constraints:
        if not c.is_certain():
            raise ReformulationError("base constraints must be certain")

    # positivity of the denominator: min over vertices of min over x
    den_min, den_max = INF, -INF
    num_min, num_max = INF, -INF
    for v in verts:
        for term, lo_hi in ((den, "den"), (num, "num")):
            for sense in ("min", "max"):
                val = _optimize_term(base, term, v, sense, opts)
                if val is None:
                    raise ReformulationError("term optimization failed "
                                             "(certain part unbounded?)")
                if lo_hi == "den":
                    den_min, den_max = min(den_min, val), max(den_max, val)
                else:
                    num_min, num_max = min(num_min, val), max(num_max, val)
    if den_min <= tol:
        raise ReformulationError(
            f"denominator is not certified positive (min {den_min:.3g})")

    # interval-arithmetic bracket for the ratio
    lo = min(num_min / den_min, num_min / den_max)
    hi = max(num_max / den_min, num_max / den_max)

    def g(lam: float):
        res = _parametric_value(base, num, den, lam, verts, opts)
        return res

    glo, _ = g(lo)
    ghi, _ = g(hi)
    expand = 0
    while glo <= 0.0 and expand < 60:
        lo = lo - max(1.0, abs(lo))
        glo, _ = g(lo)
        expand += 1
    while ghi > 0.0 and expand < 120:
        hi = hi + max(1.0, abs(hi))
        ghi, _ = g(hi)
        expand += 1
    if glo <= 0.0 or ghi > 0.0:
        raise ArithmeticError("bisection bracket failed the sign test")
    witness = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        val, x = g(mid)
        if val <= 0.0:
            hi = mid
            witness = x
        else:
            lo = mid
    if witness is None:
        _, witness = g(hi)
    return hi, witness


def _parametric_value(base, num, den, lam, verts, opts):
    """min_x max over vertices of [num - lam*den], as an LP with one epigraph
    row per vertex (exact: the max of an affine-in-zeta function over a
    polytope sits at a vertex)."""
    names = base.var_names()
    rows = [LinearRow(dict(c.a), c.sense, c.rhs, name=c.name or f"b{i}")
            for i, c in enumerate(base.constraints)]
    for vi, z in enumerate(verts):
        coeffs: dict[str, float] = {"__s": -1.0}
        const = 0.0
        for term, sign in ((num, 1.0), (den, -lam)):
            const += sign * (term.const + sum(v * z[zi] for zi, v in
                                              term.const_factor.items()))
            for j, co in term.coeffs.items():
                coeffs[j] = coeffs.get(j, 0.0) + sign * co
            for j, col in term.factors.items():
                coeffs[j] = coeffs.get(j, 0.0) + sign * sum(
                    v * z[zi] for zi, v in col.items())
        rows.append(LinearRow(coeffs, "<=", -const, name=f"__epi{vi}"))
    p = DeterministicMILP(
        variables=tuple([Variable(v.name, v.lb, v.ub, v.integer)
                         for v in base.variables] + [Variable("__s", -INF, INF)]),
        objective=Objective("min", {"__s": 1.0}),
        rows=tuple(rows),
    )
    res = solve_milp(p, opts) if any(v.integer for v in base.variables) \
        else solve_lp(p, opts)
    if not res.is_optimal:
        raise ArithmeticError(f"parametric solve returned {res.status}")
    x = {nm: res.values[nm] for nm in names}
    return res.objective, x


def _optimize_term(base, term: FractionalTerm, z: np.ndarray, sense: str,
                   opts) -> float | None:
    coeffs: dict[str, float] = {}
    const = term.const + sum(v * z[zi] for zi, v in term.const_factor.items())
    for j, co in term.coeffs.items():
        coeffs[j] = coeffs.get(j, 0.0) + co
    for j, col in term.factors.items():
        coeffs[j] = coeffs.get(j, 0.0) + sum(v * z[zi] for zi, v in col.items())
    rows = [LinearRow(dict(c.a), c.sense, c.rhs, name=c.name or f"b{i}")
            for i, c in enumerate(base.constraints)]
    p = DeterministicMILP(
        variables=tuple(Variable(v.name, v.lb, v.ub, False)
                        for v in base.variables),
        objective=Objective(sense, coeffs, const),
        rows=tuple(rows),
    )
    res = solve_lp(p, opts)
    return res.objective if res.is_optimal else None
