"""Decision-dependent line fragility: component curves, failure-probability
bounds, and per-track ambiguity data (marginal bound coefficients plus the
supporting-set rows).

Hardening measures: "I" manages vegetation (tree-induced conductor failures
go to zero), "II" replaces poles (reshaped lognormal parameters), "III" does
both.  At most one measure per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import ndtr

if TYPE_CHECKING:  # pragma: no cover
    from .cases import Line, NetworkCase, TrackScenario, WindInterval

MEASURES = ("I", "II", "III")
#: measure -> (uses hardened poles, vegetation managed)
_MEASURE_EFFECT = {None: (False, False), "I": (False, True),
                   "II": (True, False), "III": (True, True)}


class FragilityError(ValueError):
    """Invalid fragility data or evaluation outside a curve's domain."""


# -- probability curves ------------------------------------------------------

class Curve:
    """Probability-vs-wind-speed curve; maps into [0, 1]."""

    def __call__(self, v: float) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    @staticmethod
    def from_dict(spec: dict, where: str = "curve") -> "Curve":
        kind = spec.get("type")
        if kind == "logistic":
            return LogisticCurve(spec.get("pmax", 1.0), spec["v50"], spec["slope"])
        if kind == "table":
            return TableCurve(spec["v"], spec["p"])
        if kind == "constant":
            return ConstantCurve(spec["p"])
        raise FragilityError(f"{where}: unknown curve type {kind!r}")

    def to_dict(self) -> dict:  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass(frozen=True)
class LogisticCurve(Curve):
    pmax: float
    v50: float
    slope: float

    def __post_init__(self):
        if not (0.0 <= self.pmax <= 1.0) or self.slope <= 0:
            raise FragilityError("logistic curve needs 0 <= pmax <= 1 and slope > 0")

    def __call__(self, v: float) -> float:
        z = (v - self.v50) / self.slope
        return self.pmax / (1.0 + math.exp(-min(max(z, -60.0), 60.0)))

    def to_dict(self) -> dict:
        return {"type": "logistic", "pmax": self.pmax, "v50": self.v50,
                "slope": self.slope}


@dataclass(frozen=True)
class TableCurve(Curve):
    """Monotone tabulated curve with linear interpolation, clamped at the ends."""

    v: tuple[float, ...]
    p: tuple[float, ...]

    def __init__(self, v, p):
        object.__setattr__(self, "v", tuple(float(x) for x in v))
        object.__setattr__(self, "p", tuple(float(x) for x in p))
        if len(self.v) != len(self.p) or len(self.v) < 2:
            raise FragilityError("table curve needs matching v/p arrays, length >= 2")
        if any(b <= a for a, b in zip(self.v, self.v[1:])):
            raise FragilityError("table curve abscissae must be strictly increasing")
        if any(b < a for a, b in zip(self.p, self.p[1:])):
            raise FragilityError("table curve must be monotone non-decreasing")
        if not all(0.0 <= x <= 1.0 for x in self.p):
            raise FragilityError("table curve values must lie in [0, 1]")

    def __call__(self, v: float) -> float:
        return float(np.interp(v, self.v, self.p))

    def to_dict(self) -> dict:
        return {"type": "table", "v": list(self.v), "p": list(self.p)}


@dataclass(frozen=True)
class ConstantCurve(Curve):
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise FragilityError("constant curve value must lie in [0, 1]")

    def __call__(self, v: float) -> float:
        return self.p

    def to_dict(self) -> dict:
        return {"type": "constant", "p": self.p}


# -- per-line fragility block -------------------------------------------------

@dataclass(frozen=True)
class LineFragility:
    """Fragility parameters of one line: pole lognormals (unhardened and
    pole-replaced), conductor curves, and robustness-level scales."""

    pole_m0: float
    pole_sigma0: float
    pole_m_hard: float
    pole_sigma_hard: float
    wind: Curve
    tree_coupling: Curve
    vegetation: Curve
    eps_base_scale: float = 0.3
    eps_measure_scale: dict = field(default_factory=dict)

    def __post_init__(self):
        for nm in ("pole_m0", "pole_sigma0", "pole_m_hard", "pole_sigma_hard"):
            if getattr(self, nm) <= 0:
                raise FragilityError(f"{nm} must be positive")
        if self.eps_base_scale < 0:
            raise FragilityError("epsilon scale must be >= 0")

    def eps_scale(self, measure: str | None) -> float:
        if measure is None:
            return self.eps_base_scale
        return float(self.eps_measure_scale.get(measure, self.eps_base_scale))

    @staticmethod
    def from_dict(spec: dict, where: str = "fragility") -> "LineFragility":
        try:
            poles = spec["poles"]
            cond = spec["conductors"]
        except KeyError as exc:
            raise FragilityError(f"{where}: missing key {exc.args[0]!r}") from None
        eps = spec.get("epsilon", {})
        return LineFragility(
            pole_m0=poles["m0"], pole_sigma0=poles["sigma0"],
            pole_m_hard=poles.get("m_hard", poles["m0"]),
            pole_sigma_hard=poles.get("sigma_hard", poles["sigma0"]),
            wind=Curve.from_dict(cond["wind"], f"{where}.wind"),
            tree_coupling=Curve.from_dict(cond["tree_coupling"], f"{where}.tree_coupling"),
            vegetation=Curve.from_dict(cond["vegetation"], f"{where}.vegetation"),
            eps_base_scale=eps.get("base_scale", 0.3),
            eps_measure_scale=dict(eps.get("per_measure_scale", {})),
        )

    def to_dict(self) -> dict:
        return {
            "poles": {"m0": self.pole_m0, "sigma0": self.pole_sigma0,
                      "m_hard": self.pole_m_hard, "sigma_hard": self.pole_sigma_hard},
            "conductors": {"wind": self.wind.to_dict(),
                           "tree_coupling": self.tree_coupling.to_dict(),
                           "vegetation": self.vegetation.to_dict()},
            "epsilon": {"base_scale": self.eps_base_scale,
                        "per_measure_scale": dict(self.eps_measure_scale)},
        }


# -- elementary failure probabilities -----------------------------------------

def pole_failure_prob(v: float, m: float, sigma: float) -> float:
    """Lognormal-CDF pole fragility: Phi(ln(v/m)/sigma)."""
    if m <= 0 or sigma <= 0:
        raise FragilityError("pole parameters m and sigma must be positive")
    if v <= 0:
        if v < 0:
            raise FragilityError("wind speed must be non-negative")
        return 0.0
    if v < 1e-12:
        return 0.0
    return float(ndtr(math.log(v / m) / sigma))


def conductor_failure_prob(v: float, frag: LineFragility,
                           veg_managed: bool = False) -> float:
    """Per-conductor failure: max of direct wind and coupled tree strike."""
    direct = frag.wind(v)
    tree = 0.0 if veg_managed else frag.tree_coupling(v) * frag.vegetation(v)
    return max(direct, tree)


def line_empirical_fragility(v: float, frag: LineFragility,
                             n_poles: int, n_conductors: int,
                             measure: str | None = None) -> float:
    """Whole-line empirical failure probability under one hardening state.

    1 - prod_k (1 - pole_k) * prod_l (1 - conductor_l), with parameters
    reshaped by the measure.  Raises on an unknown measure.
    """
    if measure not in _MEASURE_EFFECT:
        raise FragilityError(f"unknown hardening measure {measure!r} "
                             "(at most one of I/II/III)")
    hard_poles, veg = _MEASURE_EFFECT[measure]
    m = frag.pole_m_hard if hard_poles else frag.pole_m0
    s = frag.pole_sigma_hard if hard_poles else frag.pole_sigma0
    mu_p = pole_failure_prob(v, m, s)
    mu_c = conductor_failure_prob(v, frag, veg_managed=veg)
    survive = (1.0 - mu_p) ** n_poles * (1.0 - mu_c) ** n_conductors
    return 1.0 - survive


def robustness_level(v: float, frag: LineFragility, n_poles: int,
                     n_conductors: int, measure: str | None = None,
                     eps_multiplier: float = 1.0) -> float:
    """Estimation-error band: scale times the (post-hardening) empirical value."""
    mu = line_empirical_fragility(v, frag, n_poles, n_conductors, measure)
    return eps_multiplier * frag.eps_scale(measure) * mu


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def probability_bounds(line: "Line", v_lo: float, v_hi: float,
                       measure: str | None = None,
                       eps_multiplier: float = 1.0) -> tuple[float, float]:
    """Ambiguous failure-probability interval for one line under one measure.

    Lower bound: empirical at the low wind speed minus the robustness level;
    upper bound: empirical at the high wind speed plus it; both clamped to
    [0, 1] so the interval stays a valid moment range.
    """
    frag, np_, nc = line.fragility, line.poles, line.conductors
    f_lo = line_empirical_fragility(v_lo, frag, np_, nc, measure) \
        - robustness_level(v_lo, frag, np_, nc, measure, eps_multiplier)
    f_hi = line_empirical_fragility(v_hi, frag, np_, nc, measure) \
        + robustness_level(v_hi, frag, np_, nc, measure, eps_multiplier)
    return _clamp01(f_lo), _clamp01(f_hi)


# -- supporting set ------------------------------------------------------------

@dataclass(frozen=True)
class SupportSet:
    """Linear encoding G u <= e of the plausible outage trajectories.

    u is indexed by (line key, period), ordered as ``u_index``; u = 1 means
    the line is up.
    """

    u_index: tuple
    G_rows: tuple            # tuple of (name, {u_pos: coeff}, rhs)

    @property
    def n(self) -> int:
        return len(self.u_index)

    def admits(self, u, tol: float = 1e-9) -> bool:
        for _, coeffs, rhs in self.G_rows:
            if sum(c * u[j] for j, c in coeffs.items()) > rhs + tol:
                return False
        return True

    def enumerate(self, cap: int = 1 << 22) -> list[tuple[int, ...]]:
        """All admissible binary trajectories (small instances only)."""
        if 2 ** self.n > cap:
            raise FragilityError(f"support set too large to enumerate (2^{self.n})")
        out = []
        for code in range(2 ** self.n):
            u = tuple((code >> j) & 1 for j in range(self.n))
            if self.admits(u):
                out.append(u)
        return out


def build_support_set(case: "NetworkCase") -> SupportSet:
    """Concurrent-outage caps per zone/period plus minimum-restoration rows."""
    u_index = tuple((ln.key, t) for ln in case.lines for t in range(1, case.periods + 1))
    pos = {k: j for j, k in enumerate(u_index)}
    rows = []
    for zn in case.zones:
        members = [ln for ln in case.lines if ln.zone == zn.id]
        for t in range(1, case.periods + 1):
            cap = zn.outage_cap(t)
            # sum (1 - u) <= cap  ==>  -sum u <= cap - |members|
            coeffs = {pos[(ln.key, t)]: -1.0 for ln in members}
            rows.append((f"cap[{zn.id},{t}]", coeffs, float(cap - len(members))))
    for ln in case.lines:
        lam = ln.restore_periods
        for t in range(1, case.periods):
            end = min(t + lam, case.periods)
            n = end - t
            if n <= 0:
                continue
            # n*(u_t - u_{t+1}) <= sum_{s=t+1..end} (1 - u_s)
            coeffs: dict[int, float] = {pos[(ln.key, t)]: float(n)}
            coeffs[pos[(ln.key, t + 1)]] = -float(n)
            for s in range(t + 1, end + 1):
                j = pos[(ln.key, s)]
                coeffs[j] = coeffs.get(j, 0.0) + 1.0
            rows.append((f"restore[{ln.key},{t}]", coeffs, float(n)))
    return SupportSet(u_index=u_index, G_rows=tuple(rows))


# -- ambiguity data -------------------------------------------------------------

@dataclass(frozen=True)
class AmbiguityData:
    """Per-track moment-bound coefficients and the supporting set.

    Row r indexes (line, period) in ``support.u_index`` order.  The marginal
    failure-probability interval of row r under hardening y is
    ``[eta_lo[r] + sum_h K_lo[r, col(h)] y, eta_hi[r] + sum_h K_hi[...] y]``,
    with at most one measure active per line.
    """

    track_id: str
    support: SupportSet
    eta_lo: np.ndarray
    eta_hi: np.ndarray
    y_cols: tuple                  # (line key, measure) column order
    K_lo: dict                     # (row, ycol_pos) -> delta
    K_hi: dict

    def bounds_at(self, y_state: dict) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate the moment interval at a concrete plan (line key -> measure)."""
        lo = self.eta_lo.copy()
        hi = self.eta_hi.copy()
        colpos = {c: j for j, c in enumerate(self.y_cols)}
        for r, (line_key, _t) in enumerate(self.support.u_index):
            m = y_state.get(line_key)
            if m is not None:
                j = colpos[(line_key, m)]
                lo[r] += self.K_lo.get((r, j), 0.0)
                hi[r] += self.K_hi.get((r, j), 0.0)
        return lo, hi


def build_ambiguity_data(case: "NetworkCase", track: "TrackScenario",
                         intervals: dict, eps_multiplier: float = 1.0,
                         support: SupportSet | None = None) -> AmbiguityData:
    """Assemble the SWDD-AS coefficients for one track.

    ``intervals`` maps (zone id, period) to a (v_lo, v_hi) wind interval.
    Intercepts are the unhardened bounds; each measure column holds the
    clamped bound delta when that measure alone is applied.
    """
    support = support or build_support_set(case)
    lines = {ln.key: ln for ln in case.lines}
    y_cols = tuple((ln.key, h) for ln in case.lines for h in MEASURES)
    colpos = {c: j for j, c in enumerate(y_cols)}
    n = support.n
    eta_lo = np.zeros(n)
    eta_hi = np.zeros(n)
    K_lo: dict = {}
    K_hi: dict = {}
    for r, (line_key, t) in enumerate(support.u_index):
        ln = lines[line_key]
        try:
            v_lo, v_hi = intervals[(ln.zone, t)]
        except KeyError:
            raise FragilityError(
                f"missing wind interval for zone {ln.zone!r}, period {t}") from None
        f_lo0, f_hi0 = probability_bounds(ln, v_lo, v_hi, None, eps_multiplier)
        eta_lo[r], eta_hi[r] = f_lo0, f_hi0
        for h in MEASURES:
            f_lo_h, f_hi_h = probability_bounds(ln, v_lo, v_hi, h, eps_multiplier)
            j = colpos[(line_key, h)]
            if abs(f_lo_h - f_lo0) > 0:
                K_lo[(r, j)] = f_lo_h - f_lo0
            if abs(f_hi_h - f_hi0) > 0:
                K_hi[(r, j)] = f_hi_h - f_hi0
            if f_lo_h > f_hi_h + 1e-12:
                raise FragilityError(
                    f"empty moment interval for line {line_key}, period {t}, "
                    f"measure {h}")
    return AmbiguityData(track_id=track.id, support=support,
                         eta_lo=eta_lo, eta_hi=eta_hi,
                         y_cols=y_cols, K_lo=K_lo, K_hi=K_hi)
