import numpy as np
import pytest

from drre.hazard import (HazardError, compute_wind_intervals,
                         gradient_wind_speed, mean_wind_intervals,
                         wind_speed_interval)

PARAMS = dict(vmax=50.0, rmax=25.0, rband=140.0,
              k_translation=1.5, k_boundary=9.0)


def test_zero_at_eye():
    assert gradient_wind_speed(d=0.0, **PARAMS) == pytest.approx(0.0)


def test_peak_at_eyewall():
    assert gradient_wind_speed(d=PARAMS["rmax"], **PARAMS) == \
        pytest.approx(PARAMS["vmax"], abs=1e-9)


def test_continuity_at_eyewall_radius():
    eps = 1e-9
    inner = gradient_wind_speed(d=PARAMS["rmax"] - eps, **PARAMS)
    outer = gradient_wind_speed(d=PARAMS["rmax"] + eps, **PARAMS)
    assert abs(inner - outer) <= 1e-6


def test_boundary_value_and_calm_beyond():
    vb = gradient_wind_speed(d=PARAMS["rband"], **PARAMS)
    assert vb == pytest.approx(PARAMS["vmax"] / PARAMS["k_boundary"], rel=1e-9)
    assert gradient_wind_speed(d=PARAMS["rband"] + 1e-9, **PARAMS) == 0.0


def test_monotone_decay_outside_eyewall():
    ds = np.linspace(PARAMS["rmax"], PARAMS["rband"], 200)
    vs = gradient_wind_speed(d=ds, **PARAMS)
    assert np.all(np.diff(vs) <= 1e-12)


def test_invalid_parameters_raise():
    bad = dict(PARAMS)
    bad["rband"] = bad["rmax"]
    with pytest.raises(HazardError):
        gradient_wind_speed(d=1.0, **bad)
    with pytest.raises(HazardError):
        gradient_wind_speed(d=-1.0, **PARAMS)


def test_interval_deterministic_and_ordered(small_case):
    tr = small_case.tracks[0]
    a = wind_speed_interval(tr, 1, (0.0, 0.0), seed=7, samples=500)
    b = wind_speed_interval(tr, 1, (0.0, 0.0), seed=7, samples=500)
    assert a == b
    lo, hi = a
    assert 0.0 <= lo <= hi


def test_interval_widens_with_confidence(small_case):
    tr = small_case.tracks[0]
    narrow = wind_speed_interval(tr, 1, (0.0, 0.0), seed=7, samples=2000,
                                 confidence=0.5)
    wide = wind_speed_interval(tr, 1, (0.0, 0.0), seed=7, samples=2000,
                               confidence=0.99)
    assert wide[0] <= narrow[0] + 1e-12
    assert wide[1] >= narrow[1] - 1e-12


def test_mean_intervals_degenerate(small_case):
    tr = small_case.tracks[0]
    for (zone, t), (lo, hi) in mean_wind_intervals(small_case, tr).items():
        assert lo == pytest.approx(hi)


def test_zone_period_coverage(small_case):
    tr = small_case.tracks[0]
    out = compute_wind_intervals(small_case, tr, seed=0, samples=300)
    assert set(out) == {(z.id, t) for z in small_case.zones
                        for t in range(1, small_case.periods + 1)}
