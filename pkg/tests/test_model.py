import math

import numpy as np
import pytest

from robustlp import sets
from robustlp.model import (
    Adjustability,
    AffineRow,
    EliminationError,
    ModelObjective,
    ModelVariable,
    Stage,
    SumOfMax,
    UncertainConstraint,
    UncertainLP,
    eliminate_equality,
    enforce_k_out_of_n,
    ensure_unit_variable,
    epigraph_objective,
    expand_max,
    lint,
    linearize_binary_product,
    linearize_binary_scaling,
    nominal_instance,
    validate,
)
from robustlp.robust_solve import solve_robust
from robustlp.solver import INF, solve_lp, solve_milp


def certain_lp():
    return UncertainLP(
        variables=(ModelVariable("x", 0.0, 10.0), ModelVariable("y", 0.0, 10.0)),
        objective=ModelObjective("max", {"x": 1.0, "y": 2.0}),
        constraints=(
            UncertainConstraint({"x": 1.0, "y": 1.0}, {}, "<=", 4.0, "", "cap"),
        ),
        sets={},
    )


def test_validate_certain_model_clean():
    assert validate(certain_lp()) == []


def test_validate_dangling_zeta_index():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 1.0),),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(
            UncertainConstraint({"x": 1.0}, {"x": {5: 1.0}}, "<=", 1.0, "u"),
        ),
        sets={"u": sets.box(1.0, dim=3)},
    )
    diags = validate(m)
    assert any(d.code == "zeta-dim" and d.severity == "error" for d in diags)


def slack_equality_model():
    # (2 + zeta) x1 + s = 1 with the interval set, s >= 0
    return UncertainLP(
        variables=(ModelVariable("x1", -INF, INF),
                   ModelVariable("s", 0.0, INF)),
        objective=ModelObjective("max", {"x1": 1.0}),
        constraints=(
            UncertainConstraint({"x1": 2.0, "s": 1.0}, {"x1": {0: 1.0}},
                                "==", 1.0, "u", "balance"),
        ),
        sets={"u": sets.box(1.0, dim=1)},
    )


def test_uncertain_equality_flagged():
    diags = validate(slack_equality_model())
    assert any(d.code == "uncertain-equality" for d in diags)
    assert all(d.severity != "error" for d in diags)


def test_slack_pattern_flagged():
    warns = lint(slack_equality_model())
    assert any(d.code == "rigid-slack" for d in warns)


def split_abs_model():
    # the five-row split of |x1 - z| + |x2 - z| <= 2: y1 + y2 <= 2 certain,
    # four uncertain rows sharing the single zeta
    u = {"u": sets.box(1.0, dim=1)}
    cons = (
        UncertainConstraint({"y1": 1.0, "y2": 1.0}, {}, "<=", 2.0, "u", "sum"),
        UncertainConstraint({"x1": 1.0, "y1": -1.0}, {"__one": {0: -1.0}},
                            "<=", 0.0, "u", "p1"),
        UncertainConstraint({"x1": -1.0, "y1": -1.0}, {"__one": {0: 1.0}},
                            "<=", 0.0, "u", "n1"),
        UncertainConstraint({"x2": 1.0, "y2": -1.0}, {"__one": {0: -1.0}},
                            "<=", 0.0, "u", "p2"),
        UncertainConstraint({"x2": -1.0, "y2": -1.0}, {"__one": {0: 1.0}},
                            "<=", 0.0, "u", "n2"),
    )
    return UncertainLP(
        variables=(ModelVariable("x1", -INF, INF), ModelVariable("x2", -INF, INF),
                   ModelVariable("y1", -INF, INF), ModelVariable("y2", -INF, INF),
                   ModelVariable("__one", 1.0, 1.0)),
        objective=ModelObjective("max", {}),
        constraints=cons,
        sets=u,
    )


def test_shared_zeta_note_lists_the_four_split_rows():
    notes = [d for d in lint(split_abs_model()) if d.code == "shared-zeta"]
    assert len(notes) == 1
    for nm in ("p1", "n1", "p2", "n2"):
        assert nm in notes[0].message
    assert "sum" not in notes[0].message.split("constraints ")[1].split(";")[0]


def test_fully_certain_model_no_warnings():
    assert lint(certain_lp()) == []


def test_expand_max_two_branches():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 5.0),),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(),
        sets={"u": sets.box(1.0, dim=1)},
    )
    som = SumOfMax(
        base=AffineRow({"x": 1.0}),
        terms=((AffineRow({"x": 1.0}), AffineRow({"x": 2.0})),),
        rhs=6.0, set_name="u", name="pick",
    )
    out = expand_max(m, som)
    assert len(out.constraints) == 2
    assert out.constraints[0].a == {"x": 2.0}
    assert out.constraints[1].a == {"x": 3.0}


def test_expand_max_single_branch_identity():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 5.0),),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(),
        sets={"u": sets.box(1.0, dim=1)},
    )
    som = SumOfMax(base=AffineRow({"x": 1.0}),
                   terms=((AffineRow({"x": 0.5}),),),
                   rhs=3.0, set_name="u", name="only")
    out = expand_max(m, som)
    assert len(out.constraints) == 1
    assert out.constraints[0].a == {"x": 1.5}


def test_expand_max_abs_pair_gives_four_rows():
    # |x1 - z| + |x2 - z| <= 2 as two max pairs over branches +-(xi - z)
    m = UncertainLP(
        variables=(ModelVariable("x1", -INF, INF),
                   ModelVariable("x2", -INF, INF)),
        objective=ModelObjective("max", {"x1": 1.0}),
        constraints=(),
        sets={"u": sets.box(1.0, dim=1)},
    )
    b1 = (AffineRow({"x1": 1.0}, {"__one": {0: -1.0}}),
          AffineRow({"x1": -1.0}, {"__one": {0: 1.0}}))
    b2 = (AffineRow({"x2": 1.0}, {"__one": {0: -1.0}}),
          AffineRow({"x2": -1.0}, {"__one": {0: 1.0}}))
    out = expand_max(m, SumOfMax(base=AffineRow(), terms=(b1, b2), rhs=2.0,
                                 set_name="u", name="absum"))
    assert len(out.constraints) == 4
    assert "__one" in out.var_names()
    # solve the RC: feasible x are (t, -t) for |t| <= 1 -> max x1 = 1
    rep = solve_robust(out)
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(1.0, abs=1e-8)
    vals = rep.model_values(out)
    assert vals["x1"] == pytest.approx(1.0, abs=1e-7)
    assert vals["x2"] == pytest.approx(-1.0, abs=1e-7)


def test_expand_max_cap():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 1.0),),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(), sets={"u": sets.box(1.0, dim=1)},
    )
    branches = tuple(AffineRow({"x": float(k)}) for k in range(9))
    som = SumOfMax(base=AffineRow(), terms=(branches,) * 5, rhs=1.0,
                   set_name="u")  # 9^5 = 59049 rows
    with pytest.raises(ValueError, match="cap"):
        expand_max(m, som)


def test_linearize_binary_product_gadget():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 1.0, integer=True),
                   ModelVariable("y", 0.0, 1.0, integer=True)),
        objective=ModelObjective("max", {}),
        constraints=(), sets={},
    )
    out = linearize_binary_product(m, "x", "y", "z")
    names = {c.name for c in out.constraints}
    assert names == {"z_le_x", "z_le_y", "z_ge_sum"}
    zvar = out.var("z")
    assert zvar.integer and zvar.lb == 0.0 and zvar.ub == 1.0
    # enumerate: z must equal x*y at integer points
    for xv in (0, 1):
        for yv in (0, 1):
            inst = nominal_instance(out)
            from robustlp.solver import LinearRow
            rows = inst.rows + (
                LinearRow({"x": 1.0}, "==", float(xv)),
                LinearRow({"y": 1.0}, "==", float(yv)),
            )
            from dataclasses import replace as drep
            from robustlp.solver import Objective
            inst2 = drep(inst, rows=rows,
                         objective=Objective("max", {"z": 1.0}))
            res = solve_milp(inst2)
            assert res.values["z"] == pytest.approx(xv * yv, abs=1e-7)


def test_linearize_product_with_pinned_one_is_identity():
    m = ensure_unit_variable(UncertainLP(
        variables=(ModelVariable("x", 0.0, 1.0, integer=True),),
        objective=ModelObjective("max", {}), constraints=(), sets={},
    ))
    out = linearize_binary_product(m, "x", "__one", "z")
    assert out is m


def test_linearize_binary_scaling_big_m_rows():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 10.0),
                   ModelVariable("z", 0.0, 1.0, integer=True)),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(), sets={"u": sets.box(1.0, dim=1)},
    )
    out = linearize_binary_scaling(
        m, base=AffineRow({"x": 1.0}, {"x": {0: 1.0}}),
        scaled=AffineRow({"x": 1.0}), z="z", rhs=4.0, set_name="u",
        big_m=100.0, name="sw")
    on = out.constraint("sw_on")
    off = out.constraint("sw_off")
    assert on.a == {"x": 2.0, "z": 100.0} and on.rhs == 104.0
    assert off.a == {"x": 1.0, "z": -100.0} and off.rhs == 4.0
    assert on.P == {"x": {0: 1.0}} and off.P == {"x": {0: 1.0}}
    # z = 0: base row binds, worst case (1+zeta)x <= 4 -> x <= 2
    rep = solve_robust(out)
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(2.0, abs=1e-6)
    # z forced on: (1+zeta)x + x <= 4 -> x <= 4/3
    forced = tuple(
        c for c in out.constraints) + (UncertainConstraint(
            {"z": 1.0}, {}, ">=", 1.0, "u", "force"),)
    from dataclasses import replace as drep
    rep2 = solve_robust(drep(out, constraints=forced))
    assert rep2.objective == pytest.approx(4.0 / 3.0, abs=1e-6)


def test_missing_big_m_rejected():
    m = UncertainLP(
        variables=(ModelVariable("z", 0.0, 1.0, integer=True),),
        objective=ModelObjective("max", {}), constraints=(),
        sets={"u": sets.box(1.0, dim=1)},
    )
    with pytest.raises(ValueError, match="big-M"):
        linearize_binary_scaling(m, AffineRow(), AffineRow(), "z", 0.0, "u",
                                 big_m=math.inf)


def test_k_out_of_n_gadget():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 10.0),),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(
            UncertainConstraint({"x": 1.0}, {"x": {0: 1.0}}, "<=", 2.0, "u", "a"),
            UncertainConstraint({"x": 1.0}, {"x": {0: 0.5}}, "<=", 3.0, "u", "b"),
        ),
        sets={"u": sets.box(1.0, dim=1)},
    )
    out = enforce_k_out_of_n(m, ["a", "b"], k=1, big_m=50.0)
    rep = solve_robust(out)
    # only row b needs to hold: (1 + 0.5 z) x <= 3 -> x <= 2
    assert rep.objective == pytest.approx(2.0, abs=1e-6)


def test_eliminate_equality_paper_example():
    # {z1 x1 + x2 + x3 = 1 ; x1 + x2 + z2 x3 <= 5}: removing x2 keeps the
    # inequality affine: (1 - z1) x1 + (z2 - 1) x3 <= 4
    m = UncertainLP(
        variables=(ModelVariable("x1", -INF, INF),
                   ModelVariable("x2", -INF, INF,
                                 adjustable=Adjustability(indices=(0, 1))),
                   ModelVariable("x3", -INF, INF)),
        objective=ModelObjective("min", {}),
        constraints=(
            UncertainConstraint({"x2": 1.0, "x3": 1.0}, {"x1": {0: 1.0}},
                                "==", 1.0, "u", "bal"),
            UncertainConstraint({"x1": 1.0, "x2": 1.0}, {"x3": {1: 1.0}},
                                "<=", 5.0, "u", "cap"),
        ),
        sets={"u": sets.box(1.0, dim=2)},
    )
    out = eliminate_equality(m, "bal", "x2")
    assert "x2" not in out.var_names()
    cap = out.constraint("cap")
    assert cap.a == {"x1": 1.0, "x3": -1.0}
    assert cap.P == {"x1": {0: -1.0}, "x3": {1: 1.0}}
    assert cap.rhs == pytest.approx(4.0)


def test_eliminate_rational_dependence_rejected():
    m = UncertainLP(
        variables=(ModelVariable("x1", -INF, INF),
                   ModelVariable("x2", -INF, INF),
                   ModelVariable("x3", -INF, INF)),
        objective=ModelObjective("min", {}),
        constraints=(
            UncertainConstraint({"x2": 1.0, "x3": 1.0}, {"x1": {0: 1.0}},
                                "==", 1.0, "u", "bal"),
        ),
        sets={"u": sets.box(1.0, dim=2)},
    )
    with pytest.raises(EliminationError, match="rational"):
        eliminate_equality(m, "bal", "x1")


def test_eliminate_bilinear_rejected():
    # substituting x3 = 1 - z1 x1 - x2 into a row where x3 carries z2 gives
    # a z1 z2 product
    m = UncertainLP(
        variables=(ModelVariable("x1", -INF, INF),
                   ModelVariable("x2", -INF, INF),
                   ModelVariable("x3", -INF, INF)),
        objective=ModelObjective("min", {}),
        constraints=(
            UncertainConstraint({"x2": 1.0, "x3": 1.0}, {"x1": {0: 1.0}},
                                "==", 1.0, "u", "bal"),
            UncertainConstraint({"x1": 1.0, "x2": 1.0}, {"x3": {1: 1.0}},
                                "<=", 5.0, "u", "cap"),
        ),
        sets={"u": sets.box(1.0, dim=2)},
    )
    with pytest.raises(EliminationError, match="bilinear"):
        eliminate_equality(m, "bal", "x3")


def test_eliminate_unused_variable_drops_row():
    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 2.0),
                   ModelVariable("y", -INF, INF,
                                 adjustable=Adjustability(indices=(0,)))),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(
            UncertainConstraint({"y": 1.0}, {"x": {0: 1.0}}, "==", 3.0, "u",
                                "def_y"),
            UncertainConstraint({"x": 1.0}, {}, "<=", 1.5, "u", "cap"),
        ),
        sets={"u": sets.box(1.0, dim=1)},
    )
    out = eliminate_equality(m, "def_y", "y")
    assert "y" not in out.var_names()
    assert [c.name for c in out.constraints] == ["cap"]
    assert out.constraint("cap") == m.constraint("cap")


def test_elimination_preserves_rc_optimum_with_adjustable_var():
    # y is adjustable on the full zeta and appears in one equality; the RC of
    # the reduced model must match the RC where y got an affine rule
    from robustlp.reformulate import expand_aarc

    m = UncertainLP(
        variables=(ModelVariable("x", 0.0, 4.0),
                   ModelVariable("y", -INF, INF,
                                 adjustable=Adjustability(indices=(0, 1))),
                   ModelVariable("__one", 1.0, 1.0)),
        objective=ModelObjective("max", {"x": 1.0}),
        constraints=(
            UncertainConstraint({"y": 1.0, "x": -0.5}, {"__one": {0: 1.0}},
                                "==", 0.5, "u", "def_y"),
            UncertainConstraint({"x": 1.0, "y": 1.0}, {"x": {1: 0.25}},
                                "<=", 3.0, "u", "cap"),
        ),
        sets={"u": sets.box(1.0, dim=2)},
    )
    reduced = eliminate_equality(m, "def_y", "y")
    rep1 = solve_robust(reduced)
    ruled = expand_aarc(m)
    # after the rule substitution, pinning the equality's zeta coefficients is
    # exact: the slopes absorb them
    rep2 = solve_robust(ruled, allow_uncertain_equality=True)
    assert rep1.status == rep2.status == "optimal"
    assert rep1.objective == pytest.approx(rep2.objective, abs=1e-7)


def test_epigraph_certain_objective_pins_t():
    m = UncertainLP(
        variables=(ModelVariable("x", 1.0, 1.0),),
        objective=ModelObjective("min", {"x": 3.0}),
        constraints=(), sets={"u": sets.box(1.0, dim=1)},
    )
    out = epigraph_objective(m, factors={}, set_name="u")
    rep = solve_robust(out)
    assert rep.objective == pytest.approx(3.0, abs=1e-8)


def test_epigraph_worst_case_of_fixed_point():
    # min zeta*x with zeta in [1, 2] (= 1.5 + 0.5 z, z in [-1,1]), x pinned at 1
    m = UncertainLP(
        variables=(ModelVariable("x", 1.0, 1.0),),
        objective=ModelObjective("min", {"x": 1.5}),
        constraints=(), sets={"u": sets.box(1.0, dim=1)},
    )
    out = epigraph_objective(m, factors={"x": {0: 0.5}}, set_name="u")
    rep = solve_robust(out)
    assert rep.objective == pytest.approx(2.0, abs=1e-8)


def test_epigraph_matches_grid_oracle():
    rng = np.random.default_rng(31)
    for _ in range(10):
        c0 = rng.normal(size=3)
        C = rng.normal(size=(3, 2)) * 0.3
        names = ["a", "b", "c"]
        m = UncertainLP(
            variables=tuple(ModelVariable(nm, 0.0, 2.0) for nm in names),
            objective=ModelObjective("min", dict(zip(names, c0))),
            constraints=(
                UncertainConstraint(dict(zip(names, [1.0, 1.0, 1.0])), {},
                                    ">=", 1.0, "u", "covers"),
            ),
            sets={"u": sets.box(1.0, dim=2)},
        )
        out = epigraph_objective(
            m, factors={nm: {0: float(C[i, 0]), 1: float(C[i, 1])}
                        for i, nm in enumerate(names)},
            set_name="u")
        rep = solve_robust(out)
        # oracle: dense grids over x (feasible simplex face) and zeta corners
        gx = np.linspace(0, 2, 21)
        best = math.inf
        corners = [np.array([s1, s2]) for s1 in (-1, 1) for s2 in (-1, 1)]
        for xa in gx:
            for xb in gx:
                for xc in gx:
                    if xa + xb + xc < 1.0 - 1e-12:
                        continue
                    x = np.array([xa, xb, xc])
                    wc = max(float((c0 + C @ z) @ x) for z in corners)
                    best = min(best, wc)
        assert rep.objective <= best + 1e-8
        assert rep.objective >= best - 0.35  # grid resolution slack


def test_validate_idempotent_and_pure():
    m = slack_equality_model()
    d1 = validate(m)
    d2 = validate(m)
    assert d1 == d2
    assert m == slack_equality_model()


def test_transforms_preserve_certain_optimum():
    rng = np.random.default_rng(77)
    for _ in range(15):
        A = rng.normal(size=(3, 2))
        b = A @ np.array([1.0, 1.0]) + rng.uniform(0.2, 1.0, size=3)
        c = rng.uniform(0.1, 1.0, size=2)
        m = UncertainLP(
            variables=(ModelVariable("x", 0.0, 5.0), ModelVariable("y", 0.0, 5.0)),
            objective=ModelObjective("max", {"x": float(c[0]), "y": float(c[1])}),
            constraints=tuple(
                UncertainConstraint({"x": float(A[i, 0]), "y": float(A[i, 1])},
                                    {}, "<=", float(b[i]), "u", f"r{i}")
                for i in range(3)),
            sets={"u": sets.box(1.0, dim=1)},
        )
        before = solve_lp(nominal_instance(m)).objective
        som = SumOfMax(base=AffineRow({"x": 1.0}),
                       terms=((AffineRow({"y": 0.3}), AffineRow({"y": 0.6})),),
                       rhs=8.0, set_name="u", name="extra")
        m2 = expand_max(m, som)
        after = solve_lp(nominal_instance(m2)).objective
        # the added rows are slack at the old optimum scale (rhs 8 >> b)
        assert after == pytest.approx(min(before, after), abs=1e-8)
        m3 = UncertainLP(
            variables=m.variables + (ModelVariable("u1", 0.0, 1.0, integer=True),
                                     ModelVariable("u2", 0.0, 1.0, integer=True)),
            objective=m.objective, constraints=m.constraints, sets=m.sets,
        )
        m4 = linearize_binary_product(m3, "u1", "u2", "w")
        assert solve_milp(nominal_instance(m4)).objective == \
            pytest.approx(before, abs=1e-8)
