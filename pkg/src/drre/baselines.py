"""Comparison models, fixed-plan evaluation, value metrics, and Monte Carlo tests.

Strategies compared against the distributionally robust planner:

* DD-SRE: two-stage stochastic program over outage scenarios whose
  probabilities are the midpoints of the decision-dependent fragility
  intervals (no robustness margin);
* RRE: classical robust planning against the worst support atom, with all
  distributional information discarded;
* FHI: the distributionally robust model with the wind-speed intervals
  collapsed to the mean-parameter wind (fixed hurricane intensity).

Also here: the exhaustive small-instance oracle, the value-of-information
metrics, and the out-of-sample scenario machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import milp
from .cases import MEASURES, NetworkCase
from .ccg import (CCGOptions, SolveReport, WorstCaseDistribution,
                  build_all_ambiguity, run_ccg)
from .formulation import (PlanDecision, add_recourse_block, build_first_level,
                          compact_matrices, extract_plan, plan_w_values,
                          recourse_lp)
from .fragility import build_support_set, line_empirical_fragility
from .hazard import compute_wind_intervals, mean_wind_intervals


class OracleSizeError(RuntimeError):
    """Instance exceeds the exhaustive-enumeration budget."""


class SamplingError(RuntimeError):
    """Scenario sampling could not produce an admissible trajectory."""


@dataclass(frozen=True)
class EvaluationConfig:
    """Knobs of the evaluation harness."""

    eps_multiplier: float = 1.0
    budget_multiplier: float = 1.0
    sample_count: int = 10_000
    seed: int = 0
    kind: str = "WCD"        # or "RGD"

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample count must be >= 1")
        if self.eps_multiplier <= 0 or self.budget_multiplier <= 0:
            raise ValueError("multipliers must be > 0")


@dataclass
class MetricsRecord:
    strategy: str
    objective: float
    wcd_mean: float | None = None
    rgd_mean: float | None = None
    shed_samples: list = field(default_factory=list)
    voda: float | None = None
    vomi: float | None = None


# -- robust and fixed-intensity baselines ---------------------------------------------

def solve_rre(case: NetworkCase, seed: int = 0, samples: int = 10_000,
              options: CCGOptions | None = None) -> SolveReport:
    """Plan against the worst admissible outage atom (no distributions)."""
    opts = options or CCGOptions()
    opts.robust_mode = True
    ambs = build_all_ambiguity(case, seed=seed, samples=samples)
    return run_ccg(case, ambs, options=opts)


def solve_fhi(case: NetworkCase, eps_multiplier: float = 1.0,
              options: CCGOptions | None = None) -> SolveReport:
    """Distributionally robust solve at mean-parameter wind (degenerate
    wind intervals)."""
    from .fragility import build_ambiguity_data
    support = build_support_set(case)
    ambs = {}
    for tr in case.tracks:
        intervals = mean_wind_intervals(case, tr)
        ambs[tr.id] = build_ambiguity_data(case, tr, intervals,
                                           eps_multiplier=eps_multiplier,
                                           support=support)
    return run_ccg(case, ambs, options=options)


def evaluate_fixed_plan(case: NetworkCase, plan: PlanDecision, ambs: dict,
                        options: CCGOptions | None = None) -> float:
    """Worst-case expected weighted shed of a given plan under the
    decision-dependent ambiguity sets."""
    report = run_ccg(case, ambs, options=options, fixed_plan=plan)
    if not report.converged:
        raise RuntimeError(f"fixed-plan evaluation did not converge: {report.status}")
    return float(report.objective)


def voda_vomi(case: NetworkCase, ambs: dict, dro_plan: PlanDecision,
              sp_plan: PlanDecision, ro_plan: PlanDecision,
              options: CCGOptions | None = None) -> dict:
    """Relative regret of the stochastic and robust plans under the
    distributionally robust criterion.

    Both metrics are nonnegative by optimality of the robust plan; when the
    robust plan sheds nothing the ratios are undefined and flagged.
    """
    f_dro = evaluate_fixed_plan(case, dro_plan, ambs, options)
    f_sp = evaluate_fixed_plan(case, sp_plan, ambs, options)
    f_ro = evaluate_fixed_plan(case, ro_plan, ambs, options)
    defined = f_dro > 1e-12
    return {
        "f_dro": f_dro, "f_sp": f_sp, "f_ro": f_ro,
        "voda": (f_sp - f_dro) / f_dro if defined else None,
        "vomi": (f_ro - f_dro) / f_dro if defined else None,
        "defined": defined,
    }


# -- stochastic baseline -----------------------------------------------------------

@dataclass
class StochasticReport:
    status: str
    objective: float | None
    plan: PlanDecision | None
    mode: str                 # "exact" or "sampled"
    scenario_count: int


def _midpoint_probs(case: NetworkCase, track, intervals) -> dict:
    """Decision-dependent empirical failure probabilities, one per
    (line key, period, measure-or-None): midpoint of the fragility values at
    the interval ends, with no robustness margin."""
    probs = {}
    for ln in case.lines:
        for t in range(1, case.periods + 1):
            v_lo, v_hi = intervals[(ln.zone, t)]
            for h in (None,) + MEASURES:
                lo = line_empirical_fragility(v_lo, ln.fragility, ln.poles,
                                              ln.conductors, h)
                hi = line_empirical_fragility(v_hi, ln.fragility, ln.poles,
                                              ln.conductors, h)
                probs[(ln.key, t, h)] = 0.5 * (lo + hi)
    return probs


def _scenario_weight(case: NetworkCase, probs: dict, u: tuple, u_index: tuple,
                     y_state: dict) -> float:
    w = 1.0
    for p, (line_key, t) in enumerate(u_index):
        prob = probs[(line_key, t, y_state.get(line_key))]
        w *= (1.0 - prob) if u[p] else prob
    return w


def solve_ddsre(case: NetworkCase, seed: int = 0, wind_samples: int = 10_000,
                scenario_count: int = 64, exact_bits: int = 12,
                mip_gap: float = 1e-6,
                time_limit: float | None = None) -> StochasticReport:
    """Two-stage stochastic plan under midpoint failure probabilities.

    Hardening changes a scenario's probability affinely: the weight is
    expanded to first order around the unhardened plan, which is exact when
    at most one line is hardened and an importance approximation otherwise.
    Small instances enumerate the full outage cube; larger ones use a fixed
    scenario sample drawn at the unhardened probabilities with importance
    reweighting.  The weight-times-shed products are linearized exactly over
    the binary hardening variables.
    """
    compact = compact_matrices(case)
    n_u = len(compact.u_index)
    rng = np.random.default_rng(seed)

    # per track: scenarios, base weights, and per-(line, measure) weight deltas
    track_scen: dict = {}
    mode = "exact" if n_u <= exact_bits else "sampled"
    for tr in case.tracks:
        intervals = compute_wind_intervals(case, tr, seed=seed,
                                           samples=wind_samples)
        probs = _midpoint_probs(case, tr, intervals)
        if mode == "exact":
            scen = [tuple((code >> j) & 1 for j in range(n_u))
                    for code in range(2 ** n_u)]
            base = [_scenario_weight(case, probs, u, compact.u_index, {})
                    for u in scen]
        else:
            scen = []
            for _ in range(scenario_count):
                u = tuple(int(rng.random() >= probs[(lk, t, None)])
                          for (lk, t) in compact.u_index)
                scen.append(u)
            base = [1.0 / scenario_count] * len(scen)
        deltas = []
        for k, u in enumerate(scen):
            dk = {}
            for ln in case.lines:
                for h in MEASURES:
                    w_h = _scenario_weight(case, probs, u, compact.u_index,
                                           {ln.key: h})
                    w_0 = _scenario_weight(case, probs, u, compact.u_index, {})
                    if mode == "exact":
                        d = w_h - w_0
                    else:
                        d = base[k] * (w_h / w_0 - 1.0) if w_0 > 0 else 0.0
                    if d:
                        dk[(ln.key, h)] = d
            deltas.append(dk)
        track_scen[tr.id] = (scen, base, deltas)

    model = milp.ModelHandle("stochastic", minimize=True)
    fl = build_first_level(model, case)
    w_ref = {}
    for wk in compact.w_index:
        kind, key = wk
        w_ref[wk] = ("var", fl.s[key] if kind == "s" else fl.xg[key])
    smax = case.total_weighted_demand
    obj: dict[int, float] = {}
    for tr in case.tracks:
        scen, base, deltas = track_scen[tr.id]
        th = tr.probability
        for k, u in enumerate(scen):
            if base[k] == 0.0 and not deltas[k]:
                continue
            zidx = add_recourse_block(model, compact, w_ref,
                                      np.array(u, dtype=float),
                                      tag=f"sp[{tr.id},{k}]")
            shed = model.add_var(f"shed[{tr.id},{k}]", lb=0.0, ub=smax)
            coeffs = {shed: -1.0}
            for c, hv in enumerate(compact.h):
                if hv:
                    coeffs[zidx[c]] = hv
            model.add_constr(f"shed_def[{tr.id},{k}]", coeffs, "=", 0.0)
            obj[shed] = obj.get(shed, 0.0) + th * base[k]
            for (line_key, h), d in deltas[k].items():
                yj = fl.y[(line_key, h)]
                q = model.add_var(f"q[{tr.id},{k},{line_key},{h}]",
                                  lb=0.0, ub=smax)
                model.add_constr(f"qa[{tr.id},{k},{line_key},{h}]",
                                 {q: 1.0, yj: -smax}, "<=", 0.0)
                model.add_constr(f"qb[{tr.id},{k},{line_key},{h}]",
                                 {q: 1.0, shed: -1.0}, "<=", 0.0)
                model.add_constr(f"qc[{tr.id},{k},{line_key},{h}]",
                                 {shed: 1.0, q: -1.0, yj: smax}, "<=", smax)
                obj[q] = obj.get(q, 0.0) + th * d
    model.set_objective(obj, minimize=True)
    out = milp.get_backend().solve_mip(model, gap_tolerance=mip_gap,
                                       time_limit=time_limit)
    if out.status not in ("optimal", "gap-limit"):
        return StochasticReport(status=out.status, objective=None, plan=None,
                                mode=mode, scenario_count=len(scen))
    return StochasticReport(status="optimal", objective=float(out.objective),
                            plan=extract_plan(case, fl, out), mode=mode,
                            scenario_count=len(scen))


# -- out-of-sample scenario machinery -----------------------------------------------

@dataclass(frozen=True)
class ScenarioSet:
    kind: str
    by_track: dict            # track id -> list of availability tuples


def sample_outage_scenarios(case: NetworkCase, kind: str, n: int, seed: int,
                            worst: dict | None = None,
                            ambs: dict | None = None,
                            plan: PlanDecision | None = None,
                            reject_cap: int = 1000) -> ScenarioSet:
    """Draw per-track outage trajectories for out-of-sample testing.

    ``WCD`` resamples the recovered worst-case atoms by their mixture
    weights.  ``RGD`` draws a random marginal vector inside the plan's
    failure-probability box, samples independent failures from it, and
    rejects trajectories outside the support set.
    """
    rng = np.random.default_rng(seed)
    by_track = {}
    if kind == "WCD":
        if worst is None:
            raise SamplingError("WCD sampling needs a recovered worst-case "
                                "distribution per track")
        for tr in case.tracks:
            wcd: WorstCaseDistribution = worst[tr.id]
            idx = rng.choice(len(wcd.atoms), size=n, p=np.array(wcd.weights))
            by_track[tr.id] = [wcd.atoms[i] for i in idx]
        return ScenarioSet(kind=kind, by_track=by_track)
    if kind != "RGD":
        raise SamplingError(f"unknown scenario kind {kind!r}")
    if ambs is None or plan is None:
        raise SamplingError("RGD sampling needs ambiguity data and a plan")
    y_state = {k: m for k, m in plan.y.items() if m}
    for tr in case.tracks:
        amb = ambs[tr.id]
        lo, hi = amb.bounds_at(y_state)
        support = amb.support
        draws = []
        for _ in range(n):
            for attempt in range(reject_cap):
                marg = rng.uniform(lo, hi)
                u = tuple(int(rng.random() >= marg[r])
                          for r in range(support.n))
                if support.admits(u):
                    draws.append(u)
                    break
            else:
                name = _first_violated_row(support, u)
                raise SamplingError(
                    f"track {tr.id}: no admissible trajectory in {reject_cap} "
                    f"tries (last violated: {name})")
        by_track[tr.id] = draws
    return ScenarioSet(kind=kind, by_track=by_track)


def _first_violated_row(support, u) -> str:
    for name, coeffs, rhs in support.G_rows:
        if sum(c * u[j] for j, c in coeffs.items()) > rhs + 1e-9:
            return name
    return "none"


@dataclass
class EwlsStats:
    mean: float
    quartiles: tuple          # (q1, median, q3)
    whiskers: tuple           # (low, high) at 1.5 IQR
    outliers: list
    samples: list             # (track id, shed value) per scenario
    by_track_mean: dict


def out_of_sample_ewls(case: NetworkCase, plan: PlanDecision,
                       scenarios: ScenarioSet, compact=None) -> EwlsStats:
    """Recourse value of the plan on every sampled trajectory.

    The headline number is the track-probability-weighted mean of the
    per-track sample means; quartile data pools all samples for boxplots.
    """
    compact = compact or compact_matrices(case)
    w_values = plan_w_values(plan)
    cache: dict = {}
    samples = []
    by_track_mean = {}
    for tr in case.tracks:
        vals = []
        for u in scenarios.by_track[tr.id]:
            key = tuple(u)
            if key not in cache:
                cache[key] = recourse_lp(compact, w_values,
                                         np.array(u, dtype=float))[0]
            vals.append(cache[key])
            samples.append((tr.id, cache[key]))
        by_track_mean[tr.id] = float(np.mean(vals)) if vals else 0.0
    mean = float(sum(tr.probability * by_track_mean[tr.id] for tr in case.tracks))
    pooled = np.array([v for _, v in samples]) if samples else np.zeros(1)
    q1, med, q3 = (float(x) for x in np.percentile(pooled, [25, 50, 75]))
    iqr = q3 - q1
    w_lo, w_hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = pooled[(pooled >= w_lo) & (pooled <= w_hi)]
    lo = float(inside.min()) if inside.size else q1
    hi = float(inside.max()) if inside.size else q3
    outliers = [float(v) for v in pooled if v < w_lo or v > w_hi]
    return EwlsStats(mean=mean, quartiles=(q1, med, q3), whiskers=(lo, hi),
                     outliers=outliers, samples=samples,
                     by_track_mean=by_track_mean)


# -- exhaustive oracle ---------------------------------------------------------------

@dataclass
class OracleResult:
    objective: float
    plan: PlanDecision
    plan_count: int
    atom_count: int


def _feasible_plans(case: NetworkCase):
    """Yield every budget- and radiality-feasible plan.

    Radiality is checked on the switched-on graph: it must be a forest in
    which every component holds at most one substation, and components
    without a substation hold at least one placed DG (the root).
    """
    hardenable = list(case.lines)
    switchable = [ln for ln in case.lines if ln.switch]
    free_nodes = [n for n in case.nodes if not n.substation]

    y_options = []

    def gen_y(i, current, cost):
        if i == len(hardenable):
            y_options.append(dict(current))
            return
        ln = hardenable[i]
        gen_y(i + 1, current, cost)
        for h in MEASURES:
            c = cost + ln.cost(h)
            if c <= case.budget_line + 1e-9:
                current[ln.key] = h
                gen_y(i + 1, current, c)
                del current[ln.key]

    gen_y(0, {}, 0.0)

    xg_options = []
    for code in range(2 ** len(free_nodes)):
        chosen = [free_nodes[i].id for i in range(len(free_nodes))
                  if (code >> i) & 1]
        if len(chosen) > case.dg.count:
            continue
        if case.dg.cost * len(chosen) > case.budget_dg + 1e-9:
            continue
        xg_options.append(chosen)

    s_options = []
    for code in range(2 ** len(switchable)):
        s = {ln.key: 1 for ln in case.lines}
        for i, ln in enumerate(switchable):
            s[ln.key] = (code >> i) & 1
        s_options.append(s)

    for s in s_options:
        comp, acyclic = _components(case, s)
        if not acyclic:
            continue
        for chosen in xg_options:
            chosen_set = set(chosen)
            ok = True
            roots = {}
            for cid, members in comp.items():
                subs = [n for n in members if case.node(n).substation]
                if len(subs) > 1:
                    ok = False
                    break
                if subs:
                    roots[cid] = subs[0]
                else:
                    dgs = sorted((n for n in members if n in chosen_set), key=str)
                    if not dgs:
                        ok = False
                        break
                    roots[cid] = dgs[0]
            if not ok:
                continue
            root_nodes = set(roots.values())
            kappa = {n.id: int(n.id in root_nodes) for n in case.nodes}
            for y in y_options:
                yield PlanDecision(
                    y={ln.key: y.get(ln.key) for ln in case.lines},
                    xg={n.id: int(n.id in chosen_set) for n in free_nodes},
                    s=dict(s), kappa=kappa)


def _components(case: NetworkCase, s: dict):
    """Connected components of the switched-on graph; flags cycles."""
    parent = {n.id: n.id for n in case.nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    acyclic = True
    for ln in case.lines:
        if not s[ln.key]:
            continue
        ra, rb = find(ln.from_node), find(ln.to_node)
        if ra == rb:
            acyclic = False
        else:
            parent[ra] = rb
    comp: dict = {}
    for n in case.nodes:
        comp.setdefault(find(n.id), []).append(n.id)
    return comp, acyclic


def enumerate_oracle(case: NetworkCase, ambs: dict,
                     cap: int = 1_000_000,
                     robust_mode: bool = False) -> OracleResult:
    """Exact optimum by brute force, for verifying the decomposition solver.

    Enumerates every feasible plan and every admissible outage atom, solves
    each recourse LP once (hardening does not enter the recourse, so values
    are cached on the operational decisions and the atom), and finds each
    plan's worst admissible mixture by a small LP.
    """
    compact = compact_matrices(case)
    support = next(iter(ambs.values())).support
    atoms = support.enumerate(cap=cap)
    plans = list(_feasible_plans(case))
    if len(plans) * len(atoms) > cap:
        raise OracleSizeError(
            f"{len(plans)} plans x {len(atoms)} atoms exceeds the budget {cap}")

    cache: dict = {}

    def shed(plan, u):
        key = (tuple(sorted(plan.s.items())),
               tuple(sorted(plan.xg.items(), key=lambda kv: str(kv[0]))), u)
        if key not in cache:
            cache[key] = recourse_lp(compact, plan_w_values(plan),
                                     np.array(u, dtype=float))[0]
        return cache[key]

    best_val, best_plan = math.inf, None
    for plan in plans:
        y_state = {k: m for k, m in plan.y.items() if m}
        total = 0.0
        for tr in case.tracks:
            amb = ambs[tr.id]
            values = [shed(plan, u) for u in atoms]
            model = milp.ModelHandle("oracle-mixture", minimize=False)
            dvar = [model.add_var(f"d[{k}]", lb=0.0) for k in range(len(atoms))]
            model.add_constr("mass", {j: 1.0 for j in dvar}, "=", 1.0)
            if not robust_mode:
                lo, hi = amb.bounds_at(y_state)
                for r in range(support.n):
                    fail = {dvar[k]: 1.0 - atoms[k][r] for k in range(len(atoms))}
                    model.add_constr(f"mom_hi[{r}]", fail, "<=", float(hi[r]))
                    model.add_constr(f"mom_lo[{r}]", fail, ">=", float(lo[r]))
            model.set_objective({j: values[k] for k, j in enumerate(dvar)},
                                minimize=False)
            res = milp.get_backend().solve_lp_duals(model)
            if res.status != "optimal":
                raise OracleSizeError(
                    f"oracle mixture LP infeasible for track {tr.id}; "
                    "the ambiguity set admits no distribution at this plan")
            total += tr.probability * float(res.objective)
        if total < best_val - 1e-12:
            best_val, best_plan = total, plan
    return OracleResult(objective=best_val, plan=best_plan,
                        plan_count=len(plans), atom_count=len(atoms))
