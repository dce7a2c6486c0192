import numpy as np
import pytest

from drre import milp
from drre.formulation import (build_first_level, compact_matrices,
                              extract_plan, plan_w_values, recourse_lp)

from conftest import forest_with_roots


def all_on(compact):
    return np.ones(len(compact.u_index))


def closed_tree_w(case, compact):
    w = {}
    for kind, key in compact.w_index:
        w[("" + kind, key)] = 1.0 if kind == "s" else 0.0
    return w


def test_shed_objective_coefficients(small_case):
    """The recourse objective prices the shed fraction of node i at
    weight_i times the period demand."""
    compact = compact_matrices(small_case)
    pos = {name: c for c, name in enumerate(compact.z_names)}
    for n in small_case.nodes:
        for t in range(1, small_case.periods + 1):
            c = pos[f"sigma[{n.id},{t}]"]
            expected = n.weight * n.p_load[t - 1]
            assert compact.h[c] == pytest.approx(expected)


def test_no_contingency_zero_shed(small_case):
    compact = compact_matrices(small_case)
    w = closed_tree_w(small_case, compact)
    val, out = recourse_lp(compact, w, all_on(compact))
    assert val == pytest.approx(0.0, abs=1e-7)


def test_total_outage_sheds_everything(small_case):
    compact = compact_matrices(small_case)
    w = closed_tree_w(small_case, compact)
    val, out = recourse_lp(compact, w, np.zeros(len(compact.u_index)))
    expected = sum(n.weight * n.p_load[t - 1]
                   for n in small_case.nodes
                   for t in range(1, small_case.periods + 1))
    assert val == pytest.approx(expected, rel=1e-9)


def test_recourse_duals_are_nonpositive(small_case):
    compact = compact_matrices(small_case)
    w = closed_tree_w(small_case, compact)
    u = all_on(compact)
    u[0] = 0.0
    val, out, pi = recourse_lp(compact, w, u, with_duals=True)
    assert np.all(pi <= 1e-9)


def test_recourse_monotone_in_outages(small_case):
    compact = compact_matrices(small_case)
    w = closed_tree_w(small_case, compact)
    base = recourse_lp(compact, w, all_on(compact))[0]
    for r in range(len(compact.u_index)):
        u = all_on(compact)
        u[r] = 0.0
        assert recourse_lp(compact, w, u)[0] >= base - 1e-9


def test_first_level_plans_are_radial(small_case):
    model = milp.ModelHandle("fl", minimize=True)
    fl = build_first_level(model, small_case)
    model.set_objective({})
    out = milp.get_backend().solve_mip(model)
    assert out.status == "optimal"
    plan = extract_plan(small_case, fl, out)
    assert forest_with_roots(small_case, plan)


def test_budget_constraint_enforced(small_case):
    model = milp.ModelHandle("fl", minimize=False)
    fl = build_first_level(model, small_case)
    # maximize hardening spend; it must stay within the line budget
    obj = {}
    for (key, m), idx in fl.y.items():
        obj[idx] = small_case.line(key).cost(m)
    model.set_objective(obj, minimize=False)
    out = milp.get_backend().solve_mip(model, gap_tolerance=1e-9)
    assert out.status == "optimal"
    assert out.objective <= small_case.budgets["line"] + 1e-6
    plan = extract_plan(small_case, fl, out)
    assert plan.hardening_cost(small_case) <= small_case.budgets["line"] + 1e-6


def test_at_most_one_measure_per_line(small_case):
    model = milp.ModelHandle("fl", minimize=False)
    fl = build_first_level(model, small_case)
    model.set_objective({idx: 1.0 for idx in fl.y.values()}, minimize=False)
    out = milp.get_backend().solve_mip(model, gap_tolerance=1e-9)
    plan = extract_plan(small_case, fl, out)
    for ln in small_case.lines:
        states = [round(out.value(fl.y[(ln.key, m)]))
                  for m in ("I", "II", "III")]
        assert sum(states) <= 1


def test_plan_w_values_shape(small_case):
    model = milp.ModelHandle("fl", minimize=True)
    fl = build_first_level(model, small_case)
    model.set_objective({})
    out = milp.get_backend().solve_mip(model)
    plan = extract_plan(small_case, fl, out)
    w = plan_w_values(plan)
    compact = compact_matrices(small_case)
    assert set(w) == set(compact.w_index)
