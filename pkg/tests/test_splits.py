import numpy as np
import pytest

from robustlp import sets
from robustlp.model import (
    Adjustability,
    ModelObjective,
    ModelVariable,
    UncertainConstraint,
    UncertainLP,
)
from robustlp.robust_solve import solve_robust
from robustlp.splits import (
    SplitError,
    SplitScheme,
    bound_via_scenarios,
    build_arc1,
    check_scheme,
    collect_scenarios,
    equal_width_split,
    reoptimize_average,
    solve_arc,
    subset_set,
)


def integer_recourse_toy(split_indices=(0,)):
    """max 5w + 3z1 + 4z2 over nonnegative integers with two uncertain rows
    on the unit box; z1, z2 decide after the first coordinate is observed."""
    adj = Adjustability(indices=split_indices)
    return UncertainLP(
        variables=(
            ModelVariable("w", 0.0, 1000.0, integer=True),
            ModelVariable("z1", 0.0, 1000.0, integer=True, adjustable=adj),
            ModelVariable("z2", 0.0, 1000.0, integer=True, adjustable=adj),
        ),
        objective=ModelObjective("max", {"w": 5.0, "z1": 3.0, "z2": 4.0}),
        constraints=(
            UncertainConstraint(
                {"w": 1.0, "z1": 1.0, "z2": 2.0},
                {"w": {0: 1.0, 1: 2.0}, "z1": {0: -2.0, 1: 1.0},
                 "z2": {0: 2.0}},
                "<=", 18.0, "box", "r1"),
            UncertainConstraint(
                {"z1": 1.0, "z2": 2.0},
                {"w": {0: 1.0, 1: 1.0}, "z1": {0: -2.0}, "z2": {0: 2.0}},
                "<=", 16.0, "box", "r2"),
        ),
        sets={"box": sets.box(1.0, dim=2)},
    )


def as_static(m: UncertainLP) -> UncertainLP:
    from dataclasses import replace
    return replace(m, variables=tuple(
        ModelVariable(v.name, v.lb, v.ub, v.integer) for v in m.variables))


def test_static_rc_matches_reference():
    rep = solve_robust(as_static(integer_recourse_toy()))
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(29.0, abs=1e-9)
    vals = rep.result.values
    assert (round(vals["w"]), round(vals["z1"]), round(vals["z2"])) == (1, 4, 3)


def test_single_cell_equals_static_rc():
    m = integer_recourse_toy()
    sol = solve_arc(m, equal_width_split(m.sets["box"], 0, 1))
    assert sol.tstar == pytest.approx(29.0, abs=1e-9)


def test_two_cell_split_first_coordinate():
    m = integer_recourse_toy()
    sol = solve_arc(m, equal_width_split(m.sets["box"], 0, 2))
    assert sol.tstar == pytest.approx(31.0, abs=1e-9)
    assert round(sol.here_and_now["w"]) == 0


def test_two_cell_split_second_coordinate_gains_nothing():
    m = integer_recourse_toy(split_indices=(1,))
    sol = solve_arc(m, equal_width_split(m.sets["box"], 1, 2))
    assert sol.tstar == pytest.approx(29.0, abs=1e-9)


WORST_CASE_BY_CELLS = {1: 29.0, 2: 31.0, 3: 30.0, 4: 31.0, 5: 30.0,
                       8: 31.0, 10: 31.0}
# true optima of the re-optimization (sum of per-cell objectives)
REOPT_SUM_BY_CELLS = {1: 29.0, 2: 65.0, 3: 117.0, 4: 183.0, 5: 249.0,
                      8: 495.0, 10: 676.0}


@pytest.mark.parametrize("cells", [1, 2, 3, 4, 5])
def test_worst_case_column_small(cells):
    m = integer_recourse_toy()
    scheme = equal_width_split(m.sets["box"], 0, cells)
    sol = solve_arc(m, scheme)
    assert sol.tstar == pytest.approx(WORST_CASE_BY_CELLS[cells], abs=1e-9)
    re = reoptimize_average(m, scheme, sol.tstar)
    assert sum(re.per_cell) == pytest.approx(REOPT_SUM_BY_CELLS[cells], abs=1e-7)
    assert min(re.per_cell) >= sol.tstar - 1e-9
    assert sum(re.per_cell) >= sum(sol.per_cell) - 1e-9


@pytest.mark.parametrize("cells", [8, 10])
def test_worst_case_column_large(cells):
    m = integer_recourse_toy()
    scheme = equal_width_split(m.sets["box"], 0, cells)
    sol = solve_arc(m, scheme)
    assert sol.tstar == pytest.approx(WORST_CASE_BY_CELLS[cells], abs=1e-9)
    re = reoptimize_average(m, scheme, sol.tstar)
    assert sum(re.per_cell) == pytest.approx(REOPT_SUM_BY_CELLS[cells], abs=1e-7)


def test_reopt_two_cells_exact_values():
    m = integer_recourse_toy()
    scheme = equal_width_split(m.sets["box"], 0, 2)
    re = reoptimize_average(m, scheme, 31.0)
    assert sorted(re.per_cell) == pytest.approx([31.0, 34.0])
    assert np.mean(re.per_cell) == pytest.approx(32.5)


def test_scenario_bound_reference_pair():
    # the two worst-case scenarios of the two-cell solution
    m = integer_recourse_toy()
    bound = bound_via_scenarios(m, [np.array([0.0, 1.0]), np.array([0.0, -1.0])])
    assert bound == pytest.approx(34.0, abs=1e-9)


def test_scenario_bound_nominal_only():
    m = integer_recourse_toy()
    bound = bound_via_scenarios(m, [np.zeros(2)])
    nominal = solve_robust(as_static(m), method="adversarial", max_rounds=1)
    # one scenario at the center: the bound equals the nominal optimum
    from robustlp.model import nominal_instance
    from robustlp.solver import solve_milp
    nom = solve_milp(nominal_instance(as_static(m)))
    assert bound == pytest.approx(nom.objective, abs=1e-9)


def test_bound_dominates_every_scheme():
    m = integer_recourse_toy()
    bound = bound_via_scenarios(m, [np.array([0.0, 1.0]), np.array([0.0, -1.0])])
    for cells in (1, 2, 3):
        sol = solve_arc(m, equal_width_split(m.sets["box"], 0, cells))
        assert sol.tstar <= bound + 1e-9


def test_collected_scenarios_tighten_or_match():
    m = integer_recourse_toy()
    scheme = equal_width_split(m.sets["box"], 0, 2)
    sol = solve_arc(m, scheme)
    pts = collect_scenarios(m, scheme, sol)
    assert pts
    bound = bound_via_scenarios(m, pts)
    assert bound >= sol.tstar - 1e-9


def test_bound_rejects_outside_scenario():
    m = integer_recourse_toy()
    with pytest.raises(SplitError, match="outside"):
        bound_via_scenarios(m, [np.array([2.0, 0.0])])


def test_scheme_validation_gaps_and_overlaps():
    s = sets.box(1.0, dim=2)
    with pytest.raises(SplitError, match="partition"):
        check_scheme(s, SplitScheme((0,), ({0: (-1.0, 0.0)},
                                           {0: (0.5, 1.0)})))
    with pytest.raises(SplitError, match="overlap"):
        check_scheme(s, SplitScheme((0,), ({0: (-1.0, 0.5)},
                                           {0: (0.0, 1.0)})))
    check_scheme(s, SplitScheme((0,), ({0: (-1.0, 0.0)}, {0: (0.0, 1.0)})))


def test_subset_set_box_stays_box():
    s = sets.box(1.0, dim=2)
    sub = subset_set(s, {0: (-1.0, 0.0)})
    assert isinstance(sub, sets.Box)
    assert sub.lo == (-1.0, -1.0) and sub.hi == (0.0, 1.0)


def test_subset_set_budgeted_becomes_polyhedral():
    s = sets.budgeted(1.5, 2)
    sub = subset_set(s, {0: (0.0, 1.0)})
    assert isinstance(sub, sets.Polyhedral)
    assert sets.contains(sub, [0.5, 0.5])
    assert not sets.contains(sub, [-0.5, 0.5])


def test_ball_split_refused():
    s = sets.ball([0.0, 0.0], 1.0)
    with pytest.raises(SplitError, match="not supported"):
        subset_set(s, {0: (0.0, 1.0)})


def test_continuous_recourse_refused():
    m = integer_recourse_toy()
    from dataclasses import replace
    bad = replace(m, variables=tuple(
        replace(v, integer=False) if v.name == "z1" else v
        for v in m.variables))
    with pytest.raises(SplitError, match="continuous"):
        build_arc1(bad, equal_width_split(m.sets["box"], 0, 2))


def test_certain_model_any_scheme_nominal():
    m = UncertainLP(
        variables=(
            ModelVariable("x", 0.0, 10.0, integer=True),
            ModelVariable("z", 0.0, 10.0, integer=True,
                          adjustable=Adjustability(indices=(0,))),
        ),
        objective=ModelObjective("max", {"x": 1.0, "z": 2.0}),
        constraints=(
            UncertainConstraint({"x": 1.0, "z": 1.0}, {}, "<=", 7.0, "u", "cap"),
        ),
        sets={"u": sets.box(1.0, dim=1)},
    )
    sol = solve_arc(m, equal_width_split(m.sets["u"], 0, 3))
    assert sol.tstar == pytest.approx(14.0)
    assert max(sol.per_cell) == pytest.approx(min(sol.per_cell))
