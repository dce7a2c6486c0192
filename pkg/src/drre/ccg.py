"""Column-and-constraint-generation solver for the robust planning problem.

The trilevel problem (plan, then adversarial distribution over line outages,
then optimal recourse) is solved by alternating between:

* a master problem over the plan, the moment-set dual multipliers, and
  recourse copies for every outage atom found so far; its value is a lower
  bound; and
* one adversarial subproblem per hurricane track that, at the incumbent
  plan and multipliers, searches the outage support for the atom of maximum
  dualized recourse value; the resulting plan cost is an upper bound.

Both big-M constants (the multiplier box in the master, the bilinear
linearization in the subproblem) are validated after every solve and doubled
if binding, a bounded number of times.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import milp
from .cases import NetworkCase
from .formulation import (VAR, CompactForm, PlanDecision,
                          add_recourse_block, build_first_level,
                          compact_matrices, extract_plan, plan_w_values,
                          recourse_lp)
from .fragility import AmbiguityData, build_ambiguity_data, build_support_set
from .hazard import compute_wind_intervals

MAX_ESCALATIONS = 40
_BIND_TOL = 1e-6


class ConvergenceError(RuntimeError):
    pass


@dataclass
class CCGOptions:
    tolerance: float = 1e-4
    max_iterations: int = 200
    master_gap: float = 1e-8
    sub_gap: float = 1e-8
    time_limit: float | None = None       # per MILP solve, seconds
    master_time_limit: float | None = None  # per master solve, seconds
    robust_mode: bool = False             # drop moment information entirely
    dump_dir: str | None = None
    verbose: bool = False                 # per-iteration progress on stderr


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lower: float
    upper: float
    master_seconds: float
    sub_seconds: float


@dataclass(frozen=True)
class WorstCaseDistribution:
    """Discrete worst-case outage distribution for one track."""

    track_id: str
    atoms: tuple                # each a tuple of 0/1 availability bits
    weights: tuple
    shed_values: tuple          # recourse value per atom at the final plan

    @property
    def expected_shed(self) -> float:
        return float(sum(w * v for w, v in zip(self.weights, self.shed_values)))


@dataclass
class SolveReport:
    status: str
    objective: float | None
    lower_bound: float
    upper_bound: float
    gap: float
    plan: PlanDecision | None
    iterations: list = field(default_factory=list)
    worst: dict = field(default_factory=dict)     # track id -> WorstCaseDistribution
    wall_time: float = 0.0
    bound_escalations: int = 0
    options: CCGOptions | None = None

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


def dual_bound(case: NetworkCase) -> float:
    """Valid box for the moment multipliers: the largest possible objective
    swing per unit of outage probability."""
    return max(n.weight for n in case.nodes) * case.total_demand


def initial_multiplier_box(case: NetworkCase,
                           compact: CompactForm) -> np.ndarray:
    """Starting per-row box for the moment multipliers.

    Each multiplier prices a unit shift of one moment bound, and a unit of
    extra failure mass on any row can change the expected weighted shedding
    by at most the total weighted demand at stake.  That Lipschitz constant
    is therefore a valid box for every plan, which is what makes the
    master's optimum a true lower bound.  The per-iteration audit still
    widens any row the master pushes against, as a belt-and-braces check."""
    n = len(compact.u_index)
    return np.full(n, dual_bound(case))


def seed_cut_atoms(case: NetworkCase, ambs: dict, samples: int = 160,
                   seed: int = 0) -> dict:
    """Deterministic support atoms used as zero-value master cuts.

    The master needs, for each track, enough epigraph rows to keep the
    moment multipliers bounded, which holds exactly when some mixture of the
    cut atoms satisfies the moment box of the incumbent plan.  The kit holds
    the no-outage atom, every admissible single failure, and level-randomized
    Bernoulli draws at the bound midpoints of each hardening measure,
    repaired onto the support by undoing the least likely failures first.
    Every atom lies in the support, so the cuts stay valid lower-bounding
    rows with the recourse value replaced by its trivial lower bound zero.
    """
    out = {}
    for tr in case.tracks:
        amb: AmbiguityData = ambs[tr.id]
        support = amb.support
        n = support.n
        rng = np.random.default_rng(seed)
        mids = []
        for m in (None, "I", "II", "III"):
            y_state = {} if m is None else {ln.key: m for ln in case.lines}
            lo, hi = amb.bounds_at(y_state)
            mids.append(0.5 * (lo + hi))
        atoms = {tuple([1] * n)}
        for r in range(n):
            a = [1] * n
            a[r] = 0
            if support.admits(a):
                atoms.add(tuple(a))
        for _ in range(samples):
            p = np.array([mids[rng.integers(4)][r] for r in range(n)])
            u = [int(x) for x in (rng.random(n) >= p)]
            order = sorted((r for r in range(n) if not u[r]), key=lambda r: p[r])
            k = 0
            while not support.admits(u) and k < len(order):
                u[order[k]] = 1
                k += 1
            if support.admits(u):
                atoms.add(tuple(u))
        out[tr.id] = tuple(sorted(atoms))
    return out


def seed_cut_values(compact: CompactForm, seeds: dict) -> dict:
    """Plan-independent recourse lower bound of every seed atom.

    The recourse value is non-increasing in every first-level coupling
    (closing a switch or placing a generator only relaxes rows), so the value
    at the all-on infrastructure bounds the value under any feasible plan.
    """
    w_all_on = {wk: 1.0 for wk in compact.w_index}
    out = {}
    for tid, atoms in seeds.items():
        vals = []
        for u in atoms:
            vals.append(recourse_lp(compact, w_all_on,
                                    np.array(u, dtype=float))[0])
        out[tid] = tuple(vals)
    return out


def _relative_gap(lower: float, upper: float) -> float:
    if abs(upper) < 1e-12:
        return abs(upper - lower)
    return abs(upper - lower) / abs(upper)


# -- master ---------------------------------------------------------------------

@dataclass
class _MasterVars:
    fl: object
    lam: dict = field(default_factory=dict)     # track id -> epigraph var idx
    alpha: dict = field(default_factory=dict)   # track id -> list of var idx
    beta: dict = field(default_factory=dict)


def _build_master(case: NetworkCase, compact: CompactForm, ambs: dict,
                  pools: dict, seeds: dict, seed_vals: dict,
                  opts: CCGOptions, bound: float,
                  fixed_plan: PlanDecision | None, cold: bool = False):
    model = milp.ModelHandle("master", minimize=True)
    fl = build_first_level(model, case)
    if fixed_plan is not None:
        for ln in case.lines:
            for h in ("I", "II", "III"):
                model.fix(fl.y[(ln.key, h)], 1.0 if fixed_plan.y[ln.key] == h else 0.0)
            model.fix(fl.s[ln.key], float(fixed_plan.s[ln.key]))
        for n, j in fl.xg.items():
            model.fix(j, float(fixed_plan.xg[n]))

    obj: dict[int, float] = {}
    mv = _MasterVars(fl=fl)

    for tr in case.tracks:
        amb: AmbiguityData = ambs[tr.id]
        th = tr.probability
        lam = model.add_var(f"lam[{tr.id}]", lb=-np.inf)
        obj[lam] = th
        mv.lam[tr.id] = lam
        if cold:
            model.fix(lam, 0.0)
        # one multiplier copy per hardening state of the row's line, each
        # allowed only when its state is chosen; because a line takes at
        # most one measure, the sum of copies is the multiplier and the
        # decision-dependent moment coefficient applies exactly, with no
        # relaxation slack from the product
        rows_j: dict[int, list] = {r: [] for r in range(amb.support.n)}
        for (r, j) in list(amb.K_hi) + list(amb.K_lo):
            if j not in rows_j[r]:
                rows_j[r].append(j)
        als, bes = [], []
        for r in range(amb.support.n):
            br = float(bound[r])
            avs, bvs = [], []
            a0 = model.add_var(f"al0[{tr.id},{r}]", lb=0.0, ub=br)
            b0 = model.add_var(f"be0[{tr.id},{r}]", lb=0.0, ub=br)
            obj[a0] = th * (amb.eta_hi[r] - 1.0)
            obj[b0] = -th * (amb.eta_lo[r] - 1.0)
            avs.append(a0)
            bvs.append(b0)
            ys: dict[int, float] = {}
            for j in sorted(rows_j[r]):
                a = model.add_var(f"al[{tr.id},{r},{j}]", lb=0.0, ub=br)
                b = model.add_var(f"be[{tr.id},{r},{j}]", lb=0.0, ub=br)
                yidx = fl.y[amb.y_cols[j]]
                model.add_constr(f"avub[{tr.id},{r},{j}]",
                                 {a: 1.0, yidx: -br}, "<=", 0.0)
                model.add_constr(f"bvub[{tr.id},{r},{j}]",
                                 {b: 1.0, yidx: -br}, "<=", 0.0)
                ys[yidx] = ys.get(yidx, 0.0) + br
                obj[a] = th * (amb.eta_hi[r] + amb.K_hi.get((r, j), 0.0) - 1.0)
                obj[b] = -th * (amb.eta_lo[r] + amb.K_lo.get((r, j), 0.0) - 1.0)
                avs.append(a)
                bvs.append(b)
            if rows_j[r]:
                # the unhardened copies vanish once any measure is chosen
                model.add_constr(f"avub0[{tr.id},{r}]",
                                 {a0: 1.0, **ys}, "<=", br)
                model.add_constr(f"bvub0[{tr.id},{r}]",
                                 {b0: 1.0, **ys}, "<=", br)
            if cold or opts.robust_mode:
                for v in avs + bvs:
                    model.fix(v, 0.0)
            als.append(avs)
            bes.append(bvs)
        mv.alpha[tr.id] = als
        mv.beta[tr.id] = bes
        if cold or opts.robust_mode:
            continue
        # cheap cuts: every seed atom bounds the multipliers through the
        # epigraph with its recourse value relaxed to a plan-independent
        # lower bound, at no cost in variables
        vals = seed_vals.get(tr.id, ())
        for k, u in enumerate(seeds.get(tr.id, ())):
            row: dict[int, float] = {lam: -1.0}
            for r, uval in enumerate(u):
                if uval:
                    for v in als[r]:
                        row[v] = 1.0
                    for v in bes[r]:
                        row[v] = -1.0
            val = vals[k] if k < len(vals) else 0.0
            model.add_constr(f"seed[{tr.id},{k}]", row, "<=", -val)
        # shedding is nonnegative, so the track's dual expression (which
        # under-approximates the worst-case expectation) can be floored at
        # zero; this keeps the relaxation from diving negative without
        # cutting off any true plan value
        nonneg: dict[int, float] = {lam: 1.0}
        for avs, bvs in zip(als, bes):
            for v in avs + bvs:
                nonneg[v] = obj.get(v, 0.0) / th
        model.add_constr(f"tracknn[{tr.id}]", nonneg, ">=", 0.0)

    w_ref = {}
    for wk in compact.w_index:
        kind, key = wk
        w_ref[wk] = (VAR, fl.s[key] if kind == "s" else fl.xg[key])
    for tr in case.tracks:
        for k, u in enumerate(pools.get(tr.id, ())):
            epi: dict[int, float] = {mv.lam[tr.id]: -1.0}
            zidx = add_recourse_block(model, compact, w_ref, u,
                                      tag=f"sc[{tr.id},{k}]")
            for c, hv in enumerate(compact.h):
                if hv:
                    epi[zidx[c]] = epi.get(zidx[c], 0.0) + hv
            for r, uval in enumerate(u):
                if uval:
                    for a in mv.alpha[tr.id][r]:
                        epi[a] = epi.get(a, 0.0) + 1.0
                    for b in mv.beta[tr.id][r]:
                        epi[b] = epi.get(b, 0.0) - 1.0
            model.add_constr(f"epi[{tr.id},{k}]", epi, "<=", 0.0)
    model.set_objective(obj, minimize=True)
    return model, mv


def _multiplier_binding(case, ambs, mv, out, bound) -> list:
    """Rows whose multiplier sits on its artificial box in the master's
    incumbent, meaning the box truncated the master there."""
    rows = set()
    for tr in case.tracks:
        amb = ambs[tr.id]
        for r in range(amb.support.n):
            cap = bound[r] * (1 - _BIND_TOL)
            aval = sum(out.value(v) for v in mv.alpha[tr.id][r])
            bval = sum(out.value(v) for v in mv.beta[tr.id][r])
            if abs(amb.eta_hi[r] - 1.0) > 1e-12 and aval >= cap:
                rows.add(r)
            elif abs(amb.eta_lo[r] - 1.0) > 1e-12 and bval >= cap:
                rows.add(r)
    return sorted(rows)


# -- subproblem -------------------------------------------------------------------

def solve_subproblem(compact: CompactForm, amb: AmbiguityData,
                     alpha: np.ndarray, beta: np.ndarray, w_values: dict,
                     big_m: float, opts: CCGOptions):
    """Worst outage atom for one track at fixed plan and multipliers.

    Maximizes the dualized recourse value plus the multiplier reward over
    the outage support.  The returned value is recomputed exactly from the
    recourse LP at the chosen atom, so it is immune to the linearization
    constant.  Returns (u*, value, ok) where ok=False signals that the
    constant truncated the model (products inexact, or the model undervalued
    its own atom) and must be enlarged.

    The dual vector of a pair of opposing rows has a gauge freedom that can
    push individual multipliers to any magnitude without changing the
    objective, so a multiplier sitting at the constant is not by itself
    evidence of truncation; only the two audits above are.
    """
    n_u = len(compact.u_index)
    model = milp.ModelHandle("sub", minimize=False)
    uvar = [model.add_var(f"u[{p}]", milp.BINARY) for p in range(n_u)]
    for name, coeffs, rhs in amb.support.G_rows:
        model.add_constr(name, {uvar[p]: v for p, v in coeffs.items()}, "<=", rhs)

    pivar = [model.add_var(f"pi[{i}]", lb=-np.inf, ub=0.0)
             for i in range(len(compact.rows))]
    # dual feasibility H'pi = h, column by column
    cols: list[dict[int, float]] = [{} for _ in range(compact.n_z)]
    for i, crow in enumerate(compact.rows):
        for c, v in crow.z.items():
            cols[c][i] = v
    for c, col in enumerate(cols):
        model.add_constr(f"dual[{compact.z_names[c]}]",
                         {pivar[i]: v for i, v in col.items()}, "=",
                         float(compact.h[c]))

    # bilinear u_p * (R'pi)_p via big-M rows
    rcols: list[list] = [[] for _ in range(n_u)]
    for i, crow in enumerate(compact.rows):
        for p, v in crow.r.items():
            rcols[p].append((i, v))
    tau = [model.add_var(f"tau[{p}]", lb=-np.inf) for p in range(n_u)]
    for p in range(n_u):
        model.add_constr(f"tau_ub[{p}]", {tau[p]: 1.0, uvar[p]: -big_m}, "<=", 0.0)
        model.add_constr(f"tau_lb[{p}]", {tau[p]: -1.0, uvar[p]: -big_m}, "<=", 0.0)
        hi = {tau[p]: 1.0, uvar[p]: big_m}
        lo = {tau[p]: -1.0, uvar[p]: big_m}
        for i, v in rcols[p]:
            hi[pivar[i]] = hi.get(pivar[i], 0.0) - v
            lo[pivar[i]] = lo.get(pivar[i], 0.0) + v
        model.add_constr(f"tau_on_hi[{p}]", hi, "<=", big_m)
        model.add_constr(f"tau_on_lo[{p}]", lo, "<=", big_m)

    rhs0 = compact.rhs(w_values, np.zeros(n_u))   # l - J w, u part excluded
    obj: dict[int, float] = {}
    for p in range(n_u):
        d = float(alpha[p] - beta[p])
        if d:
            obj[uvar[p]] = d
        obj[tau[p]] = -1.0
    for i, v in enumerate(rhs0):
        if v:
            obj[pivar[i]] = obj.get(pivar[i], 0.0) + v
    model.set_objective(obj, minimize=False)
    if opts.dump_dir:
        model.dump(opts.dump_dir, tag=f"sub-{amb.track_id}")
    out = milp.get_backend().solve_mip(model, gap_tolerance=opts.sub_gap,
                                       time_limit=opts.time_limit)
    if out.status not in ("optimal", "gap-limit"):
        raise ConvergenceError(f"subproblem for track {amb.track_id}: {out.status} "
                               f"{out.message}")
    u_star = np.array([round(out.value(j)) for j in uvar], dtype=float)
    reward = float(np.dot(alpha - beta, u_star))
    exact_value = recourse_lp(compact, w_values, u_star)[0] + reward
    # with untruncated products the model's value equals the exact one
    tol = max(1e-6, 10.0 * opts.sub_gap) * max(1.0, abs(exact_value))
    ok = abs(out.objective - exact_value) <= tol
    for p in range(n_u):
        rp = sum(v * out.value(pivar[i]) for i, v in rcols[p])
        if abs(out.value(tau[p]) - u_star[p] * rp) > 1e-5 * max(1.0, abs(rp)):
            ok = False
            break
    return u_star, exact_value, ok


# -- worst-case distribution recovery ------------------------------------------------

def recover_worst_distribution(case: NetworkCase, compact: CompactForm,
                               ambs: dict, pools: dict, plan: PlanDecision,
                               robust_mode: bool = False,
                               seeds: dict | None = None) -> dict:
    """Turn the final atom pool into an explicit distribution per track.

    For each track, the recourse value of every pooled atom is recomputed at
    the final plan and the worst mixture consistent with the moment bounds
    is found by a small LP.  The probability-weighted total equals the
    converged upper bound.
    """
    w_values = plan_w_values(plan)
    y_state = {k: m for k, m in plan.y.items() if m}
    out = {}
    for tr in case.tracks:
        amb: AmbiguityData = ambs[tr.id]
        atoms = [tuple(int(v) for v in a) for a in pools[tr.id]]
        for a in (seeds or {}).get(tr.id, ()):
            key = tuple(int(v) for v in a)
            if key not in atoms:
                atoms.append(key)
        worst = _worst_mixture(compact, amb, atoms, w_values, y_state,
                               robust_mode)
        if worst is None:
            raise ConvergenceError(f"worst-mixture LP for track {tr.id} "
                                   "is infeasible over the final atoms")
        out[tr.id] = worst[0]
    return out


def _worst_mixture(compact: CompactForm, amb: AmbiguityData, atoms: list,
                   w_values: dict, y_state: dict, robust_mode: bool):
    """Worst moment-consistent mixture over the given atoms at a fixed plan.

    Returns (distribution, alpha, beta) with the moment-row duals, or None
    when no mixture of the atoms satisfies the moment box.
    """
    values = [recourse_lp(compact, w_values, np.array(a, dtype=float))[0]
              for a in atoms]
    model = milp.ModelHandle(f"mixture[{amb.track_id}]", minimize=False)
    dvar = [model.add_var(f"d[{k}]", lb=0.0) for k in range(len(atoms))]
    model.add_constr("mass", {j: 1.0 for j in dvar}, "=", 1.0)
    if not robust_mode:
        lo, hi = amb.bounds_at(y_state)
        for r in range(amb.support.n):
            fail = {dvar[k]: 1.0 - atoms[k][r] for k in range(len(atoms))}
            model.add_constr(f"mom_hi[{r}]", fail, "<=", float(hi[r]))
            model.add_constr(f"mom_lo[{r}]", fail, ">=", float(lo[r]))
    model.set_objective({j: values[k] for k, j in enumerate(dvar)},
                        minimize=False)
    res = milp.get_backend().solve_lp_duals(model)
    if res.status != "optimal":
        return None
    n = amb.support.n
    alpha = np.zeros(n)
    beta = np.zeros(n)
    if not robust_mode:
        for r in range(n):
            alpha[r] = max(0.0, float(res.duals[f"mom_hi[{r}]"]))
            beta[r] = max(0.0, -float(res.duals[f"mom_lo[{r}]"]))
    dist = WorstCaseDistribution(
        track_id=amb.track_id, atoms=tuple(atoms),
        weights=tuple(float(res.value(j)) for j in dvar),
        shed_values=tuple(values))
    return dist, alpha, beta


# -- main loop --------------------------------------------------------------------

def run_ccg(case: NetworkCase, ambs: dict, options: CCGOptions | None = None,
            fixed_plan: PlanDecision | None = None,
            compact: CompactForm | None = None) -> SolveReport:
    """Solve the planning problem to the requested relative gap.

    ``ambs`` maps track id to its ambiguity data, all sharing one support
    set.  With ``robust_mode`` the moment information
    is dropped and the model protects against the worst support atom.  With
    ``fixed_plan`` the first level is pinned, which evaluates a given plan
    under the same worst-case machinery.
    """
    opts = options or CCGOptions()
    compact = compact or compact_matrices(case)
    bound = initial_multiplier_box(case, compact)
    big_m = dual_bound(case)
    t_start = time.perf_counter()

    # the pools hold the deduplicated atoms returned by the subproblems; the
    # seed kit additionally bounds the multipliers from the first master on
    pools: dict[str, list[tuple]] = {tr.id: [] for tr in case.tracks}
    seeds = seed_cut_atoms(case, ambs)
    seed_vals = seed_cut_values(compact, seeds)
    lower, upper = -np.inf, np.inf
    best_plan: PlanDecision | None = None
    report = SolveReport(status="iteration-limit", objective=None,
                         lower_bound=lower, upper_bound=upper, gap=np.inf,
                         plan=None, options=opts)
    for it in range(1, opts.max_iterations + 1):
        t0 = time.perf_counter()
        model, mv = _build_master(case, compact, ambs, pools, seeds,
                                  seed_vals, opts, bound, fixed_plan,
                                  cold=not any(pools.values()))
        if opts.dump_dir:
            model.dump(opts.dump_dir, tag=f"master-{it}")
        # early masters only steer the search, so they may stop at a loose
        # gap; the terminal gap still comes from the master's dual bound
        eff_gap = opts.master_gap
        if not np.isfinite(upper) or not np.isfinite(lower):
            eff_gap = max(eff_gap, 1e-2)
        elif report.gap > 0:
            eff_gap = max(eff_gap, min(1e-2, report.gap / 8.0))
        mout = milp.get_backend().solve_mip(
            model, gap_tolerance=eff_gap,
            time_limit=opts.master_time_limit or opts.time_limit)
        if mout.status == "infeasible":
            report.status = "infeasible"
            report.wall_time = time.perf_counter() - t_start
            return report
        if mout.status not in ("optimal", "gap-limit"):
            raise ConvergenceError(f"master: {mout.status} {mout.message}")
        master_secs = time.perf_counter() - t0
        if opts.verbose:
            print(f"[ccg] it {it}: master {mout.status} {mout.objective:.4g} "
                  f"dual {mout.dual_bound} ({master_secs:.1f}s)",
                  file=sys.stderr, flush=True)

        # a master whose multipliers sit on the artificial box is truncated
        # and its value can exceed the true optimum, so it proves nothing;
        # otherwise a gap-limited master proves optimality down to its own
        # dual bound
        binding = []
        if not opts.robust_mode and any(pools.values()):
            binding = _multiplier_binding(case, ambs, mv, mout, bound)
        if binding:
            for r in binding:
                bound[r] *= 2.0
            report.bound_escalations += 1
            if report.bound_escalations > MAX_ESCALATIONS:
                raise ConvergenceError("multiplier box kept binding after "
                                       "repeated escalation")
            if opts.verbose:
                print(f"[ccg] it {it}: box binding on rows {binding}",
                      file=sys.stderr, flush=True)
        else:
            if mout.dual_bound is not None and np.isfinite(mout.dual_bound):
                master_lb = float(mout.dual_bound)
            else:
                master_lb = float(mout.objective)
                if mout.mip_gap:
                    master_lb -= mout.mip_gap * abs(master_lb)
            lower = max(lower, master_lb)
        plan = extract_plan(case, mv.fl, mout)
        w_values = plan_w_values(plan)
        y_state = {k: m for k, m in plan.y.items() if m}

        # evaluate this plan exactly: for each track, the duals of the worst
        # atom mixture give near-optimal moment multipliers, and the
        # subproblem completes them into a valid bound over the full support
        t1 = time.perf_counter()
        new_atoms = 0
        plan_value = 0.0
        for tr in case.tracks:
            amb = ambs[tr.id]
            cands = list(pools[tr.id])
            for a in seeds.get(tr.id, ()):
                if a not in cands:
                    cands.append(a)
            mix = None
            if not opts.robust_mode:
                mix = _worst_mixture(compact, amb, cands, w_values, y_state,
                                     robust_mode=False)
            if mix is not None:
                dist, alpha, beta = mix
            else:
                alpha = np.array([sum(mout.value(v) for v in vs)
                                  for vs in mv.alpha[tr.id]])
                beta = np.array([sum(mout.value(v) for v in vs)
                                 for vs in mv.beta[tr.id]])
            for _ in range(MAX_ESCALATIONS + 1):
                u_star, value, ok = solve_subproblem(
                    compact, amb, alpha, beta, w_values, big_m, opts)
                if ok:
                    break
                big_m *= 2.0
                report.bound_escalations += 1
            else:
                raise ConvergenceError("subproblem linearization constant kept "
                                       "binding after repeated escalation")
            atom = tuple(int(v) for v in u_star)
            if atom not in pools[tr.id]:
                pools[tr.id].append(atom)
                new_atoms += 1
            # dual bound on this track's worst expectation at the plan; the
            # pooled atoms guard the inner maximum from below
            if opts.robust_mode:
                track_ub = value
            else:
                vmax = value
                if mix is not None:
                    vmax = max(vmax, max(
                        sv + float(np.dot(alpha - beta, np.array(a)))
                        for sv, a in zip(dist.shed_values, dist.atoms)))
                lo, hi = amb.bounds_at(y_state)
                track_ub = (vmax - float(np.sum(alpha - beta))
                            + float(np.dot(alpha, hi) - np.dot(beta, lo)))
            plan_value += tr.probability * track_ub
            if opts.verbose:
                print(f"[ccg] it {it}: sub {tr.id} atom value {value:.4g} "
                      f"track bound {track_ub:.4g}",
                      file=sys.stderr, flush=True)
            if mix is not None:
                # every mass-carrying mixture atom enters the pool, so the
                # next master prices that entire distribution exactly; a
                # basic mixture has at most one atom per moment row, which
                # caps the growth per iteration
                for wgt, a in sorted(zip(dist.weights, dist.atoms),
                                     reverse=True):
                    if wgt <= 1e-9:
                        break
                    if a not in pools[tr.id]:
                        pools[tr.id].append(a)
                        new_atoms += 1
        sub_secs = time.perf_counter() - t1

        if plan_value < upper:
            upper = plan_value
            best_plan = plan
        report.iterations.append(IterationRecord(it, lower, upper,
                                                 master_secs, sub_secs))
        report.plan = best_plan
        report.lower_bound = lower
        report.upper_bound = upper
        report.gap = _relative_gap(lower, upper)
        if report.gap <= opts.tolerance:
            report.status = "optimal"
            break
        if not new_atoms and not binding:
            # no new atom means the next master would be identical; the only
            # way the bounds can still move is a larger multiplier box
            bound *= 2.0
            report.bound_escalations += 1
            if report.bound_escalations > MAX_ESCALATIONS:
                raise ConvergenceError("bounds stalled with a repeated atom "
                                       "pool after repeated box escalation")

    report.objective = upper if np.isfinite(upper) else None
    if report.plan is not None:
        report.worst = recover_worst_distribution(
            case, compact, ambs, pools, report.plan,
            robust_mode=opts.robust_mode, seeds=seeds)
    report.wall_time = time.perf_counter() - t_start
    return report


def build_all_ambiguity(case: NetworkCase, seed: int = 0, samples: int = 10_000,
                        eps_multiplier: float = 1.0,
                        confidence: float | None = None) -> dict:
    """Wind intervals plus moment coefficients for every track."""
    support = build_support_set(case)
    ambs = {}
    for tr in case.tracks:
        intervals = compute_wind_intervals(case, tr, seed=seed, samples=samples,
                                           confidence=confidence)
        ambs[tr.id] = build_ambiguity_data(case, tr, intervals,
                                           eps_multiplier=eps_multiplier,
                                           support=support)
    return ambs


def solve_drre(case: NetworkCase, seed: int = 0, samples: int = 10_000,
               eps_multiplier: float = 1.0, options: CCGOptions | None = None,
               fixed_plan: PlanDecision | None = None) -> SolveReport:
    """End-to-end distributionally robust solve from a parsed case."""
    ambs = build_all_ambiguity(case, seed=seed, samples=samples,
                               eps_multiplier=eps_multiplier)
    return run_ccg(case, ambs, options=options, fixed_plan=fixed_plan)
