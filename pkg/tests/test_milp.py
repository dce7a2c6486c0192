import os

import numpy as np
import pytest

from drre import milp


def knapsack_model():
    m = milp.ModelHandle("knap", minimize=False)
    xs = [m.add_var(f"x[{i}]", milp.BINARY) for i in range(4)]
    weights = [3.0, 5.0, 4.0, 2.0]
    values = [8.0, 11.0, 9.0, 3.0]
    m.add_constr("cap", {x: w for x, w in zip(xs, weights)}, "<=", 9.0)
    m.set_objective({x: v for x, v in zip(xs, values)}, minimize=False)
    return m, xs


def test_mip_solves_knapsack():
    m, xs = knapsack_model()
    out = milp.get_backend().solve_mip(m, gap_tolerance=1e-9)
    assert out.status == "optimal"
    assert out.objective == pytest.approx(20.0)
    picked = [i for i, x in enumerate(xs) if round(out.value(x))]
    assert picked == [1, 2]


def test_mip_dual_bound_is_valid():
    m, _ = knapsack_model()
    out = milp.get_backend().solve_mip(m, gap_tolerance=1e-9)
    assert out.dual_bound >= out.objective - 1e-6


def test_lp_duals_match_shadow_prices():
    m = milp.ModelHandle("lp", minimize=True)
    x = m.add_var("x", lb=0.0)
    y = m.add_var("y", lb=0.0)
    m.add_constr("r1", {x: 1.0, y: 1.0}, ">=", 4.0)
    m.add_constr("r2", {x: 1.0}, "<=", 3.0)
    m.set_objective({x: 1.0, y: 2.0})
    out = milp.get_backend().solve_lp_duals(m)
    assert out.status == "optimal"
    assert out.objective == pytest.approx(5.0)
    # marginal value of relaxing r1 by one unit is the cost of extra y ... or
    # x while it has slack; LP duality gives y's price on r1 shifted by r2
    assert out.duals["r1"] == pytest.approx(2.0)
    assert out.duals["r2"] == pytest.approx(-1.0)


def test_fix_variable():
    m, xs = knapsack_model()
    m.fix(xs[2], 0.0)
    out = milp.get_backend().solve_mip(m, gap_tolerance=1e-9)
    assert out.objective == pytest.approx(19.0)


def test_infeasible_status():
    m = milp.ModelHandle("inf", minimize=True)
    x = m.add_var("x", lb=0.0, ub=1.0)
    m.add_constr("r", {x: 1.0}, ">=", 2.0)
    m.set_objective({x: 1.0})
    out = milp.get_backend().solve_mip(m)
    assert out.status == "infeasible"


def test_model_dump(tmp_path):
    m, _ = knapsack_model()
    path = m.dump(str(tmp_path), tag="knap-test")
    assert os.path.exists(path)
    assert os.path.getsize(path) > 0


def test_unknown_backend_raises(monkeypatch):
    monkeypatch.setenv("DRRE_SOLVER_BACKEND", "no-such-solver")
    with pytest.raises(milp.ModelError):
        milp.get_backend()


def test_env_backend_override(monkeypatch):
    monkeypatch.setenv("DRRE_SOLVER_BACKEND", "highs")
    assert milp.get_backend("anything-ignored").name == "highs"
