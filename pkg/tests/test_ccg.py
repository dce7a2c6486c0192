import numpy as np
import pytest

from drre import milp
from drre.baselines import enumerate_oracle
from drre.ccg import (CCGOptions, build_all_ambiguity, dual_bound,
                      initial_multiplier_box, run_ccg, solve_subproblem,
                      _build_master, _worst_mixture, seed_cut_atoms,
                      seed_cut_values)
from drre.formulation import compact_matrices, plan_w_values, recourse_lp

from conftest import forest_with_roots

TIGHT = CCGOptions(max_iterations=80, tolerance=1e-9, sub_gap=1e-9,
                   master_gap=1e-9)


@pytest.fixture(scope="module")
def solved(small_case, small_ambs):
    return run_ccg(small_case, small_ambs, TIGHT)


def test_matches_oracle(small_case, small_ambs, solved):
    orc = enumerate_oracle(small_case, small_ambs)
    rel = abs(solved.objective - orc.objective) / max(1.0, abs(orc.objective))
    assert rel <= 1e-6


def test_bounds_monotone(solved):
    lows = [it.lower for it in solved.iterations]
    ups = [it.upper for it in solved.iterations]
    assert all(b >= a - 1e-9 for a, b in zip(lows, lows[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(ups, ups[1:]))
    assert solved.gap <= 1e-4


def test_finite_convergence(small_case, small_ambs, solved):
    support = small_ambs[small_case.tracks[0].id].support
    assert len(solved.iterations) <= len(support.enumerate()) + 1


def test_plan_is_radial(small_case, solved):
    assert forest_with_roots(small_case, solved.plan)


def test_worst_distribution_is_valid(small_case, small_ambs, solved):
    """Recovered mixtures are proper distributions on the support whose
    decision-dependent moment rows hold, and they reproduce the bound."""
    y_state = {k: m for k, m in solved.plan.y.items() if m}
    total = 0.0
    for tr in small_case.tracks:
        wcd = solved.worst[tr.id]
        amb = small_ambs[tr.id]
        w = np.array(wcd.weights)
        assert np.all(w >= -1e-12)
        assert w.sum() == pytest.approx(1.0, abs=1e-9)
        lo, hi = amb.bounds_at(y_state)
        fail = np.zeros(amb.support.n)
        for wk, atom in zip(w, wcd.atoms):
            assert amb.support.admits(atom)
            fail += wk * (1.0 - np.array(atom, dtype=float))
        assert np.all(fail <= hi + 1e-6)
        assert np.all(fail >= lo - 1e-6)
        total += tr.probability * float(np.dot(w, wcd.shed_values))
    assert total == pytest.approx(solved.objective, rel=1e-6)


def test_worst_shed_values_match_recourse(small_case, solved):
    compact = compact_matrices(small_case)
    wv = plan_w_values(solved.plan)
    for tr in small_case.tracks:
        wcd = solved.worst[tr.id]
        for atom, val in zip(wcd.atoms, wcd.shed_values):
            exact = recourse_lp(compact, wv, np.array(atom, dtype=float))[0]
            assert val == pytest.approx(exact, rel=1e-7, abs=1e-7)


def test_proposition1_subproblem_equals_enumeration(small_case, small_ambs,
                                                    solved):
    """The dualized MILP subproblem equals the brute-force maximum of
    recourse value plus multiplier reward over the support."""
    compact = compact_matrices(small_case)
    wv = plan_w_values(solved.plan)
    rng = np.random.default_rng(7)
    big_m = dual_bound(small_case)
    for tr in small_case.tracks:
        amb = small_ambs[tr.id]
        n = amb.support.n
        alpha = rng.uniform(0.0, 5.0, size=n)
        beta = rng.uniform(0.0, 5.0, size=n)
        u, val, ok = solve_subproblem(compact, amb, alpha, beta, wv,
                                      big_m, TIGHT)
        assert ok
        best = max(recourse_lp(compact, wv, np.array(a, dtype=float))[0]
                   + float(np.dot(alpha - beta, a))
                   for a in amb.support.enumerate())
        assert val == pytest.approx(best, rel=1e-7, abs=1e-7)


def test_product_formulation_exact_at_binaries(small_case, small_ambs,
                                               solved):
    """At a binary incumbent each row's multiplier lives entirely on the
    copy matching the chosen hardening state; inactive copies are zero."""
    compact = compact_matrices(small_case)
    seeds = seed_cut_atoms(small_case, small_ambs)
    seed_vals = seed_cut_values(compact, seeds)
    bound = initial_multiplier_box(small_case, compact)
    pools = {tr.id: [a for a in solved.worst[tr.id].atoms]
             for tr in small_case.tracks}
    model, mv = _build_master(small_case, compact, small_ambs, pools,
                              seeds, seed_vals, TIGHT, bound, None)
    out = milp.get_backend().solve_mip(model, gap_tolerance=1e-9)
    assert out.status == "optimal"
    for tr in small_case.tracks:
        amb = small_ambs[tr.id]
        for r in range(amb.support.n):
            line_key = amb.support.u_index[r][0]
            measure = None
            for (lk, m) in amb.y_cols:
                if lk == line_key and round(out.value(
                        mv.fl.y[(lk, m)])) == 1:
                    measure = m
            for copies in (mv.alpha[tr.id][r], mv.beta[tr.id][r]):
                state_cols = [None] + [j for j in sorted(
                    {j for (rr, j) in list(amb.K_hi) + list(amb.K_lo)
                     if rr == r})]
                for v, col in zip(copies, state_cols):
                    active = (col is None and measure is None) or \
                        (col is not None and amb.y_cols[col][1] == measure
                         and amb.y_cols[col][0] == line_key)
                    if not active:
                        assert abs(out.value(v)) <= 1e-8 * max(
                            1.0, float(bound[r]))


def test_no_bound_escalation_at_termination(solved):
    assert solved.bound_escalations == 0


def test_fixed_plan_reevaluation_identity(small_case, small_ambs, solved):
    again = run_ccg(small_case, small_ambs, TIGHT, fixed_plan=solved.plan)
    assert again.converged
    assert again.objective == pytest.approx(solved.objective, rel=1e-6)


def test_mixture_duals_satisfy_strong_duality(small_case, small_ambs,
                                              solved):
    """The worst-mixture LP value equals its dual-form expression, pinning
    the sign conventions of the extracted moment multipliers."""
    compact = compact_matrices(small_case)
    wv = plan_w_values(solved.plan)
    y_state = {k: m for k, m in solved.plan.y.items() if m}
    for tr in small_case.tracks:
        amb = small_ambs[tr.id]
        atoms = amb.support.enumerate()
        res = _worst_mixture(compact, amb, atoms, wv, y_state, False)
        assert res is not None
        dist, alpha, beta = res
        primal = sum(w * v for w, v in zip(dist.weights, dist.shed_values))
        vpool = max(recourse_lp(compact, wv, np.array(a, dtype=float))[0]
                    + float(np.dot(alpha - beta, a)) for a in atoms)
        lo, hi = amb.bounds_at(y_state)
        dual = vpool - float(np.sum(alpha - beta)) \
            + float(np.dot(alpha, hi)) - float(np.dot(beta, lo))
        assert primal == pytest.approx(dual, rel=1e-6, abs=1e-6)


def test_robust_mode_upper_bounds_dro(small_case, small_ambs, solved):
    ro = run_ccg(small_case, small_ambs,
                 CCGOptions(max_iterations=80, tolerance=1e-9, sub_gap=1e-9,
                            master_gap=1e-9, robust_mode=True))
    assert ro.converged
    assert ro.objective >= solved.objective - 1e-6
