"""Cutting-plane (scenario generation) solving of robust programs.

The master holds finitely many scenarios per uncertain constraint; each round
pessimizes every constraint at the incumbent and adds any scenario whose
violation exceeds the tolerance. Ball and ball-box worst cases have closed
forms, budgeted / polyhedral / CLT ones are inner LPs, hulls enumerate their
points. Works for any supported set, including the ellipsoids the
reformulation refuses, and preserves the problem class (MILP stays MILP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import sets as usets
from .model import UncertainConstraint, UncertainLP, validate
from .solver import (
    DEFAULT_OPTIONS,
    DeterministicMILP,
    LinearRow,
    Objective,
    SolveResult,
    SolverOptions,
    Variable,
    solve_lp,
    solve_milp,
)


@dataclass(frozen=True)
class PessimizationResult:
    zeta: np.ndarray
    violation: float  # (a + P zeta)' x - d, sense-normalized


@dataclass
class ScenarioPool:
    scenarios: dict[str, list[np.ndarray]] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)

    def add(self, cname: str, zeta: np.ndarray) -> None:
        self.scenarios.setdefault(cname, []).append(np.asarray(zeta, float))

    def log_lines(self) -> list[str]:
        import json
        return [json.dumps(rec, sort_keys=True) for rec in self.log]


class AdversarialError(ValueError):
    pass


def _row_value_parts(c: UncertainConstraint, x: dict[str, float], L: int):
    """Constant part a'x and gradient v = P'x for a <=-normalized row."""
    base = sum(co * x.get(k, 0.0) for k, co in c.a.items())
    v = np.zeros(L)
    for var, col in c.P.items():
        xv = x.get(var, 0.0)
        if xv == 0.0:
            continue
        for zi, co in col.items():
            v[zi] += co * xv
    return base, v


def pessimize(c: UncertainConstraint, s: usets.UncertaintySet,
              x: dict[str, float],
              opts: SolverOptions = DEFAULT_OPTIONS) -> PessimizationResult:
    """Worst-case scenario of one constraint at a fixed decision: maximizes
    the left-hand side over the set (for equalities, the larger of the two
    one-sided violations)."""
    if c.sense == "==":
        up = pessimize(replace(c, sense="<="), s, x, opts)
        cneg = replace(c, sense="<=",
                       a={k: -v for k, v in c.a.items()},
                       P={k: {zi: -v for zi, v in col.items()}
                          for k, col in c.P.items()},
                       rhs=-c.rhs)
        dn = pessimize(cneg, s, x, opts)
        return up if up.violation >= dn.violation else dn
    work = c
    if c.sense == ">=":
        work = replace(c, sense="<=",
                       a={k: -v for k, v in c.a.items()},
                       P={k: {zi: -v for zi, v in col.items()}
                          for k, col in c.P.items()},
                       rhs=-c.rhs)
    base, v = _row_value_parts(work, x, s.dim)
    val, zeta = usets.support(s, v)
    return PessimizationResult(zeta=zeta, violation=base + val - work.rhs)


def _master(m: UncertainLP, pool: ScenarioPool) -> DeterministicMILP:
    rows = []
    for i, c in enumerate(m.constraints):
        label = c.name or f"c{i}"
        if c.is_certain():
            rows.append(LinearRow(dict(c.a), c.sense, c.rhs, name=label))
            continue
        for si, z in enumerate(pool.scenarios.get(label, [])):
            coeffs = dict(c.a)
            for var, col in c.P.items():
                add = sum(v * z[zi] for zi, v in col.items())
                if add != 0.0:
                    coeffs[var] = coeffs.get(var, 0.0) + add
            rows.append(LinearRow(coeffs, c.sense, c.rhs, name=f"{label}__s{si}"))
    return DeterministicMILP(
        variables=tuple(Variable(v.name, v.lb, v.ub, v.integer)
                        for v in m.variables),
        objective=Objective(m.objective.sense, dict(m.objective.coeffs),
                            m.objective.constant),
        rows=tuple(rows),
    )


def solve_adversarial(m: UncertainLP, tol: float = 1e-6, max_rounds: int = 200,
                      opts: SolverOptions = DEFAULT_OPTIONS,
                      allow_uncertain_equality: bool = False
                      ) -> tuple[SolveResult, ScenarioPool]:
    """Scenario-generation loop. Terminates when no constraint can be violated
    by more than `tol`; on round exhaustion the incumbent is returned with
    status "nonconverged"."""
    diags = [d for d in validate(m) if d.severity == "error"]
    if diags:
        raise AdversarialError("; ".join(d.message for d in diags))
    if m.adjustable_names():
        raise AdversarialError(
            f"unresolved adjustable variables {m.adjustable_names()}")
    if not allow_uncertain_equality:
        for c in m.constraints:
            if c.sense == "==" and not c.is_certain():
                raise AdversarialError(
                    f"{c.name or 'constraint'}: uncertain equality (pass "
                    f"allow_uncertain_equality=True to enforce it per scenario)")

    pool = ScenarioPool()
    labels = {}
    for i, c in enumerate(m.constraints):
        label = c.name or f"c{i}"
        labels[label] = c
        if not c.is_certain():
            pool.add(label, m.sets[c.set_name].nominal())

    has_int = any(v.integer for v in m.variables)
    solve = solve_milp if has_int else solve_lp
    incumbent: SolveResult | None = None

    for rnd in range(1, max_rounds + 1):
        master = _master(m, pool)
        res = solve(master, opts)
        if res.status == "infeasible":
            # a relaxation is infeasible, so the robust problem is too
            return res, pool
        if res.status == "unbounded":
            cut = _cut_ray(m, pool, res, tol)
            pool.log.append({"round": rnd, "objective": None,
                             "event": "unbounded_master", "cuts": cut})
            if cut == 0:
                return res, pool
            continue
        if res.status != "optimal":
            return res, pool
        worst = 0.0
        cuts = 0
        for i, c in enumerate(m.constraints):
            if c.is_certain():
                continue
            label = c.name or f"c{i}"
            s = m.sets[c.set_name]
            pr = pessimize(c, s, res.values, opts)
            scale = 1.0 + abs(c.rhs)
            if pr.violation > tol * scale:
                pool.add(label, pr.zeta)
                cuts += 1
            worst = max(worst, pr.violation / scale)
            pool.log.append({"round": rnd, "constraint": label,
                             "violation": pr.violation,
                             "objective": res.objective})
        if cuts == 0:
            incumbent = res
            break
        incumbent = res
    else:
        incumbent = incumbent or res
        incumbent.status = "nonconverged"
        return incumbent, pool
    return incumbent, pool


def _cut_ray(m: UncertainLP, pool: ScenarioPool, res: SolveResult,
             tol: float) -> int:
    """An unbounded master means the pooled rows fail to cap some improving
    ray; add the scenario that grows fastest along it for any constraint. If
    no scenario cuts the ray the robust problem itself is unbounded."""
    cert = res.certificate or {}
    if cert.get("kind") != "ray":
        raise AdversarialError("master unbounded without a usable ray")
    d = cert["direction"]
    cuts = 0
    for i, c in enumerate(m.constraints):
        if c.is_certain():
            continue
        label = c.name or f"c{i}"
        neg = replace(c, sense="<=",
                      a={k: -v for k, v in c.a.items()},
                      P={k: {zi: -v for zi, v in col.items()}
                         for k, col in c.P.items()},
                      rhs=-c.rhs)
        sides = {"<=": [c], ">=": [neg], "==": [c, neg]}[c.sense]
        s = m.sets[c.set_name]
        for side in sides:
            base, v = _row_value_parts(side, d, s.dim)
            val, zeta = usets.support(s, v)
            if base + val > tol:
                pool.add(label, zeta)
                cuts += 1
    return cuts


def worst_case_lhs(c: UncertainConstraint, s: usets.UncertaintySet,
                   x: dict[str, float]) -> float:
    """max over the set of the <=-normalized left-hand side; the analytic
    cross-check for ball sets is a'x + radius * ||P'x||_2."""
    work = c
    if c.sense == ">=":
        work = replace(c, sense="<=",
                       a={k: -v for k, v in c.a.items()},
                       P={k: {zi: -v for zi, v in col.items()}
                          for k, col in c.P.items()},
                       rhs=-c.rhs)
    base, v = _row_value_parts(work, x, s.dim)
    val, _ = usets.support(s, v)
    return base + val
