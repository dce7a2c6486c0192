import numpy as np
import pytest

from drre.fragility import (build_ambiguity_data, build_support_set,
                            line_empirical_fragility, pole_failure_prob,
                            probability_bounds, robustness_level)
from drre.hazard import compute_wind_intervals


def test_pole_fragility_is_lognormal_cdf():
    assert pole_failure_prob(0.0, 60.0, 0.3) == 0.0
    assert pole_failure_prob(60.0, 60.0, 0.3) == pytest.approx(0.5)
    assert pole_failure_prob(1e6, 60.0, 0.3) == pytest.approx(1.0, abs=1e-9)


def test_pole_fragility_monotone_in_wind():
    vs = np.linspace(1.0, 150.0, 100)
    ps = [pole_failure_prob(v, 60.0, 0.3) for v in vs]
    assert all(b >= a for a, b in zip(ps, ps[1:]))


@pytest.mark.parametrize("measure", ["I", "II", "III"])
def test_hardening_never_increases_fragility(small_case, measure):
    """Measure choice shifts the lognormal median up, so the empirical
    failure probability cannot increase at any wind speed."""
    for ln in small_case.lines:
        for v in np.linspace(5.0, 140.0, 28):
            base = line_empirical_fragility(v, ln.fragility, ln.poles,
                                            ln.conductors, None)
            hard = line_empirical_fragility(v, ln.fragility, ln.poles,
                                            ln.conductors, measure)
            assert hard <= base + 1e-12


def test_probability_bounds_ordered_and_clamped(small_case):
    for ln in small_case.lines:
        lo, hi = probability_bounds(ln, 30.0, 80.0)
        assert 0.0 <= lo <= hi <= 1.0


def test_robustness_level_scales_with_epsilon(small_case):
    ln = small_case.lines[0]
    r1 = robustness_level(60.0, ln.fragility, ln.poles, ln.conductors, None,
                          eps_multiplier=1.0)
    r2 = robustness_level(60.0, ln.fragility, ln.poles, ln.conductors, None,
                          eps_multiplier=2.0)
    assert r2 == pytest.approx(2.0 * r1)


def test_support_set_counts_and_admission(small_case):
    sup = build_support_set(small_case)
    assert sup.n == len(small_case.lines) * small_case.periods
    assert sup.admits(tuple([1] * sup.n))
    atoms = sup.enumerate()
    assert all(sup.admits(u) for u in atoms)
    assert len(set(atoms)) == len(atoms)


def test_support_zone_caps_respected():
    from drre.generator import make_ieee33_case
    case = make_ieee33_case()
    sup = build_support_set(case)
    pos = {k: j for j, k in enumerate(sup.u_index)}
    for zn in case.zones:
        members = [ln for ln in case.lines if ln.zone == zn.id]
        for t in range(1, case.periods + 1):
            u = [1] * sup.n
            for ln in members[:zn.outage_cap(t) + 1]:
                u[pos[(ln.key, t)]] = 0
            assert not sup.admits(tuple(u))


def test_ambiguity_bounds_shrink_under_hardening(small_case):
    tr = small_case.tracks[0]
    intervals = compute_wind_intervals(small_case, tr, seed=1, samples=2000)
    amb = build_ambiguity_data(small_case, tr, intervals,
                               support=build_support_set(small_case))
    lo0, hi0 = amb.bounds_at({})
    assert np.all(lo0 >= -1e-12) and np.all(hi0 <= 1.0 + 1e-12)
    assert np.all(lo0 <= hi0 + 1e-12)
    plan_y = {small_case.lines[0].key: "III"}
    lo1, hi1 = amb.bounds_at(plan_y)
    r0 = [r for r, (k, _t) in enumerate(amb.support.u_index)
          if k == small_case.lines[0].key]
    for r in r0:
        assert hi1[r] <= hi0[r] + 1e-12
    others = [r for r in range(amb.support.n) if r not in r0]
    for r in others:
        assert hi1[r] == pytest.approx(hi0[r])
        assert lo1[r] == pytest.approx(lo0[r])


def test_eps_multiplier_widens_moment_box(small_case):
    tr = small_case.tracks[0]
    sup = build_support_set(small_case)
    intervals = compute_wind_intervals(small_case, tr, seed=1, samples=2000)
    tight = build_ambiguity_data(small_case, tr, intervals,
                                 eps_multiplier=0.5, support=sup)
    wide = build_ambiguity_data(small_case, tr, intervals,
                                eps_multiplier=1.5, support=sup)
    assert np.all(wide.eta_hi >= tight.eta_hi - 1e-12)
    assert np.all(wide.eta_lo <= tight.eta_lo + 1e-12)
