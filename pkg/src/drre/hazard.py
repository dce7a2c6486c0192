"""Hurricane gradient wind field and zonal wind-speed uncertainty intervals.

The wind field is an eyewall/decay profile: speed rises from zero at the eye
to the maximum at the eyewall radius, then decays exponentially out to the
storm boundary, beyond which it is zero.  Zonal intervals are Monte Carlo
quantiles of the speed at the zone's distance from the eye, driven by the
track's per-period parameter distributions.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .cases import NetworkCase, TrackScenario


class HazardError(ValueError):
    pass


def gradient_wind_speed(vmax, rmax, rband, k_translation, k_boundary, d):
    """Wind speed at distance ``d`` km from the eye (vectorized over d).

    Inside the eyewall radius the speed climbs from 0 at the eye to ``vmax``
    at ``rmax``; outside it decays so the boundary radius ``rband`` sees
    ``vmax / k_boundary``; beyond the boundary the field is calm.
    """
    if vmax < 0:
        raise HazardError("vmax must be >= 0")
    if rmax <= 0 or rband <= rmax:
        raise HazardError("radii must satisfy 0 < rmax < rband")
    if k_translation <= 1 or k_boundary <= 1:
        raise HazardError("shape constants must exceed 1")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise HazardError("distance must be >= 0")
    kc = k_translation
    kb = k_boundary
    inner = kc * vmax * (1.0 - np.exp((d / rmax) * math.log((kc - 1.0) / kc)))
    rate = math.log(kb) / (rband - rmax)
    outer = vmax * np.exp(-rate * (d - rmax))
    v = np.where(d <= rmax, inner, np.where(d <= rband, outer, 0.0))
    return float(v) if v.ndim == 0 else v


def _substream(seed: int, *tags) -> np.random.Generator:
    """Deterministic independent stream keyed by (seed, tags)."""
    h = hashlib.sha256(repr((seed,) + tags).encode()).digest()
    return np.random.default_rng(int.from_bytes(h[:8], "big"))


def wind_speed_interval(track: TrackScenario, t: int, coord,
                        seed: int = 0, samples: int = 10_000,
                        confidence: float | None = None):
    """Equal-tail confidence interval for the wind speed at ``coord``.

    Parameters are sampled from the track's period-``t`` distributions;
    draws violating rmax < rband are resampled (bounded retries).  Returns
    (v_lo, v_hi).
    """
    conf = track.confidence if confidence is None else confidence
    if not (0.0 < conf < 1.0):
        raise HazardError("confidence must lie in (0, 1)")
    ex, ey = track.eye_path[t - 1]
    d = math.hypot(coord[0] - ex, coord[1] - ey)
    rng = _substream(seed, track.id, t, round(coord[0], 9), round(coord[1], 9))
    vmax = np.abs(track.param(t, "vmax").sample(rng, samples))
    rmax = np.abs(track.param(t, "rmax").sample(rng, samples))
    rband = np.abs(track.param(t, "rband").sample(rng, samples))
    bad = rband <= rmax
    for _ in range(50):
        k = int(bad.sum())
        if k == 0:
            break
        rmax[bad] = np.abs(track.param(t, "rmax").sample(rng, k))
        rband[bad] = np.abs(track.param(t, "rband").sample(rng, k))
        bad = rband <= rmax
    if bad.any():
        raise HazardError(
            f"track {track.id}, period {t}: cannot draw rmax < rband; "
            "check the radius distributions")
    rmax = np.maximum(rmax, 1e-9)
    kc, kb = track.k_translation, track.k_boundary
    inner = kc * vmax * (1.0 - np.exp((d / rmax) * math.log((kc - 1.0) / kc)))
    outer = vmax * np.exp(-(math.log(kb) / (rband - rmax)) * (d - rmax))
    speeds = np.where(d <= rmax, inner, np.where(d <= rband, outer, 0.0))
    alpha = (1.0 - conf) / 2.0
    v_lo, v_hi = np.quantile(speeds, [alpha, 1.0 - alpha])
    return float(v_lo), float(v_hi)


def compute_wind_intervals(case: NetworkCase, track: TrackScenario,
                           seed: int = 0, samples: int = 10_000,
                           confidence: float | None = None) -> dict:
    """Wind interval per (zone id, period) for one track."""
    out = {}
    for zn in case.zones:
        for t in range(1, case.periods + 1):
            out[(zn.id, t)] = wind_speed_interval(
                track, t, zn.coord, seed=seed, samples=samples,
                confidence=confidence)
    return out


def mean_wind_intervals(case: NetworkCase, track: TrackScenario) -> dict:
    """Degenerate intervals at parameter-mean wind speeds.

    Used by the fixed-interval baseline: every zonal interval collapses to
    the single speed computed from the mean storm parameters.
    """
    out = {}
    for zn in case.zones:
        for t in range(1, case.periods + 1):
            ex, ey = track.eye_path[t - 1]
            d = math.hypot(zn.coord[0] - ex, zn.coord[1] - ey)
            vmax = track.param(t, "vmax").mean
            rmax = max(track.param(t, "rmax").mean, 1e-9)
            rband = track.param(t, "rband").mean
            if rband <= rmax:
                raise HazardError(
                    f"track {track.id}, period {t}: mean radii violate rmax < rband")
            v = gradient_wind_speed(vmax, rmax, rband,
                                    track.k_translation, track.k_boundary, d)
            out[(zn.id, t)] = (float(v), float(v))
    return out
