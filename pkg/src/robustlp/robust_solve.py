"""Front door for solving a robust model: reformulate when every set has a
polyhedral counterpart, otherwise (or on request) run the adversarial loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sets as usets
from .adversarial import ScenarioPool, solve_adversarial
from .model import UncertainLP
from .reformulate import (
    BallNotReformulable,
    ReformulationArtifact,
    reformulate_rc,
)
from .solver import DEFAULT_OPTIONS, SolveResult, SolverOptions, solve_lp, solve_milp


@dataclass
class RobustSolveReport:
    result: SolveResult
    method: str  # "reformulation" | "adversarial"
    artifact: ReformulationArtifact | None = None
    pool: ScenarioPool | None = None

    @property
    def status(self) -> str:
        return self.result.status

    @property
    def objective(self):
        return self.result.objective

    def model_values(self, m: UncertainLP) -> dict[str, float]:
        names = set(m.var_names())
        return {k: v for k, v in self.result.values.items() if k in names}


def _reformulable(m: UncertainLP) -> bool:
    for c in m.constraints:
        if c.is_certain():
            continue
        s = m.sets[c.set_name]
        if isinstance(s, (usets.Ball, usets.BallBox)):
            return False
    return True


def solve_robust(m: UncertainLP, method: str = "auto",
                 opts: SolverOptions = DEFAULT_OPTIONS,
                 tol: float = 1e-6, max_rounds: int = 200,
                 allow_uncertain_equality: bool = False) -> RobustSolveReport:
    if method == "auto":
        method = "reformulation" if _reformulable(m) else "adversarial"
    if method == "reformulation":
        art = reformulate_rc(m, allow_uncertain_equality=allow_uncertain_equality)
        has_int = any(v.integer for v in art.milp.variables)
        res = solve_milp(art.milp, opts) if has_int else solve_lp(art.milp, opts)
        return RobustSolveReport(result=res, method="reformulation", artifact=art)
    if method == "adversarial":
        res, pool = solve_adversarial(
            m, tol=tol, max_rounds=max_rounds, opts=opts,
            allow_uncertain_equality=allow_uncertain_equality)
        return RobustSolveReport(result=res, method="adversarial", pool=pool)
    raise ValueError(f"unknown method {method}")
