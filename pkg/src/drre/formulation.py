"""Optimization formulation pieces shared by the solver and the baselines.

Two layers live here:

* the first-level (pre-event) planning constraints: hardening measure choice,
  DG siting, sectionalizing switch states, radiality of the energized
  network, and the budget rows;
* the recourse (post-event) program in compact form ``H z <= l - J w - R u``
  with objective ``min h' z``, where ``w`` stacks the switch states and DG
  placements, and ``u`` is the line-availability vector (1 = operational).

Every recourse constraint, including variable boxes, is a row of ``H`` and
the recourse variables are free; this makes the dual vector one plain
nonpositive multiplier per row, which the cutting-plane machinery relies on.
The hardening decisions never enter the recourse rows: they act only through
the ambiguity set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import milp
from .cases import MEASURES, NetworkCase

FIXED = "fixed"
VAR = "var"


# -- first level -----------------------------------------------------------------

@dataclass
class FirstLevel:
    """Variable indices of the planning decisions inside one ModelHandle."""

    y: dict = field(default_factory=dict)        # (line key, measure) -> var idx
    xg: dict = field(default_factory=dict)       # node id -> var idx
    s: dict = field(default_factory=dict)        # line key -> var idx
    kappa: dict = field(default_factory=dict)    # node id -> var idx
    flow: dict = field(default_factory=dict)     # line key -> var idx


@dataclass(frozen=True)
class PlanDecision:
    """A concrete first-level plan."""

    y: dict            # line key -> measure or None
    xg: dict           # node id -> 0/1
    s: dict            # line key -> 0/1
    kappa: dict        # node id -> 0/1

    def hardening_cost(self, case: NetworkCase) -> float:
        return sum(case.line(k).cost(m) for k, m in self.y.items() if m)

    def dg_cost(self, case: NetworkCase) -> float:
        return case.dg.cost * sum(self.xg.values())

    def to_dict(self) -> dict:
        return {"hardening": {k: m for k, m in self.y.items() if m},
                "dg_nodes": sorted((str(n) for n, v in self.xg.items() if v),
                                   key=str),
                "switch_states": dict(self.s),
                "roots": sorted((str(n) for n, v in self.kappa.items() if v),
                                key=str)}


def build_first_level(model: milp.ModelHandle, case: NetworkCase) -> FirstLevel:
    """Add planning variables and constraints; returns their indices.

    Radiality uses a single-commodity flow argument: every node demands one
    unit, only designated roots may absorb, flow moves only on switched-on
    lines, and the on-line count pins the energized graph to a forest with
    exactly one root per tree.
    """
    fl = FirstLevel()
    m1 = float(len(case.nodes))

    for ln in case.lines:
        for h in MEASURES:
            fl.y[(ln.key, h)] = model.add_var(f"y[{ln.key},{h}]", milp.BINARY)
        model.add_constr(f"one_measure[{ln.key}]",
                         {fl.y[(ln.key, h)]: 1.0 for h in MEASURES}, "<=", 1.0)
        fl.s[ln.key] = model.add_var(f"s[{ln.key}]", milp.BINARY)
        if not ln.switch:
            model.fix(fl.s[ln.key], 1.0)
        fl.flow[ln.key] = model.add_var(f"cf[{ln.key}]", lb=-m1, ub=m1)
        model.add_constr(f"cf_on_pos[{ln.key}]",
                         {fl.flow[ln.key]: 1.0, fl.s[ln.key]: -m1}, "<=", 0.0)
        model.add_constr(f"cf_on_neg[{ln.key}]",
                         {fl.flow[ln.key]: -1.0, fl.s[ln.key]: -m1}, "<=", 0.0)

    model.add_constr(
        "line_budget",
        {fl.y[(ln.key, h)]: ln.cost(h) for ln in case.lines for h in MEASURES},
        "<=", case.budget_line)

    for n in case.nodes:
        fl.kappa[n.id] = model.add_var(f"kap[{n.id}]", milp.BINARY)
        if n.substation:
            model.fix(fl.kappa[n.id], 1.0)
        else:
            fl.xg[n.id] = model.add_var(f"xg[{n.id}]", milp.BINARY)
            model.add_constr(f"root_needs_source[{n.id}]",
                             {fl.kappa[n.id]: 1.0, fl.xg[n.id]: -1.0}, "<=", 0.0)

    model.add_constr("dg_budget",
                     {j: case.dg.cost for j in fl.xg.values()}, "<=", case.budget_dg)
    model.add_constr("dg_count",
                     {j: 1.0 for j in fl.xg.values()}, "<=", float(case.dg.count))

    for n in case.nodes:
        coeffs: dict[int, float] = {}
        for ln in case.lines:
            if ln.to_node == n.id:
                coeffs[fl.flow[ln.key]] = coeffs.get(fl.flow[ln.key], 0.0) + 1.0
            if ln.from_node == n.id:
                coeffs[fl.flow[ln.key]] = coeffs.get(fl.flow[ln.key], 0.0) - 1.0
        up = dict(coeffs)
        up[fl.kappa[n.id]] = -m1
        model.add_constr(f"cf_bal_hi[{n.id}]", up, "<=", 1.0)
        lo = {j: -v for j, v in coeffs.items()}
        lo[fl.kappa[n.id]] = -m1
        model.add_constr(f"cf_bal_lo[{n.id}]", lo, "<=", -1.0)

    span = {fl.s[ln.key]: 1.0 for ln in case.lines}
    for n in case.nodes:
        span[fl.kappa[n.id]] = 1.0
    model.add_constr("forest_count", span, "=", float(len(case.nodes)))
    return fl


def extract_plan(case: NetworkCase, fl: FirstLevel,
                 outcome: milp.SolveOutcome) -> PlanDecision:
    y = {}
    for ln in case.lines:
        chosen = None
        for h in MEASURES:
            if outcome.value(fl.y[(ln.key, h)]) > 0.5:
                chosen = h
        y[ln.key] = chosen
    return PlanDecision(
        y=y,
        xg={n: int(outcome.value(j) > 0.5) for n, j in fl.xg.items()},
        s={k: int(outcome.value(j) > 0.5) for k, j in fl.s.items()},
        kappa={n: int(outcome.value(j) > 0.5) for n, j in fl.kappa.items()})


# -- compact recourse form ---------------------------------------------------------

@dataclass(frozen=True)
class CompactRow:
    name: str
    z: dict                 # z column -> coefficient
    l: float                # constant rhs part
    j: dict                 # w key -> coefficient (rhs contribution is -coef*w)
    r: dict                 # u position -> coefficient (rhs contribution -coef*u)


@dataclass(frozen=True)
class CompactForm:
    """``min h'z  s.t.  H z <= l - J w - R u`` with free z."""

    z_names: tuple
    w_index: tuple          # ("s", line key) and ("xg", node id), in this order
    u_index: tuple          # (line key, period), matching the support set
    rows: tuple             # CompactRow
    h: np.ndarray

    @property
    def n_z(self) -> int:
        return len(self.z_names)

    def rhs(self, w_values: dict, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.empty(len(self.rows))
        for i, row in enumerate(self.rows):
            v = row.l
            for wk, c in row.j.items():
                v -= c * w_values[wk]
            for p, c in row.r.items():
                v -= c * u[p]
            out[i] = v
        return out


def voltage_big_m(case: NetworkCase, line) -> float:
    """Slack large enough to free the voltage-drop row of an open/failed line."""
    span = max(n.v_sqr_max for n in case.nodes) - min(n.v_sqr_min for n in case.nodes)
    scale = 2.0 / (case.voltage_base_kv ** 2 * 1000.0)
    return span + scale * (line.r * line.p_cap + line.x * line.q_cap)


def substation_caps(case: NetworkCase, node) -> tuple:
    """Explicit injection caps, defaulting to twice the system peak load."""
    p = node.sub_p_cap
    q = node.sub_q_cap
    if p is None:
        p = 2.0 * max(sum(n.p_load[t] for n in case.nodes)
                      for t in range(case.periods))
    if q is None:
        q = 2.0 * max(max(sum(n.q_load[t] for n in case.nodes)
                          for t in range(case.periods)), 1.0)
    return float(p), float(q)


def compact_matrices(case: NetworkCase) -> CompactForm:
    """Assemble the recourse program for one track-independent template.

    Rows, in order of emission: power balance (two directions per equality),
    voltage drop with switch/outage slack, line flow caps gated by both the
    switch state and the availability bit, DG output caps gated by placement,
    DG ramping from cold standby, substation injection caps, and all boxes.
    """
    T = case.periods
    zn: list[str] = []
    zpos: dict[str, int] = {}

    def zvar(name: str) -> int:
        zpos[name] = len(zn)
        zn.append(name)
        return zpos[name]

    sigma = {(n.id, t): zvar(f"sigma[{n.id},{t}]")
             for n in case.nodes for t in range(1, T + 1)}
    volt = {(n.id, t): zvar(f"volt[{n.id},{t}]")
            for n in case.nodes for t in range(1, T + 1)}
    pg = {(n.id, t): zvar(f"pg[{n.id},{t}]")
          for n in case.nodes if not n.substation for t in range(1, T + 1)}
    qg = {(n.id, t): zvar(f"qg[{n.id},{t}]")
          for n in case.nodes if not n.substation for t in range(1, T + 1)}
    psub = {(n.id, t): zvar(f"psub[{n.id},{t}]")
            for n in case.substations for t in range(1, T + 1)}
    qsub = {(n.id, t): zvar(f"qsub[{n.id},{t}]")
            for n in case.substations for t in range(1, T + 1)}
    pf = {(ln.key, t): zvar(f"pf[{ln.key},{t}]")
          for ln in case.lines for t in range(1, T + 1)}
    qf = {(ln.key, t): zvar(f"qf[{ln.key},{t}]")
          for ln in case.lines for t in range(1, T + 1)}

    w_index = tuple([("s", ln.key) for ln in case.lines] +
                    [("xg", n.id) for n in case.nodes if not n.substation])
    u_index = tuple((ln.key, t) for ln in case.lines for t in range(1, T + 1))
    upos = {k: p for p, k in enumerate(u_index)}

    rows: list[CompactRow] = []

    def row(name, z, l, j=None, r=None):
        rows.append(CompactRow(name, {k: float(v) for k, v in z.items() if v != 0.0},
                               float(l), dict(j or {}), dict(r or {})))

    vscale = 2.0 / (case.voltage_base_kv ** 2 * 1000.0)

    for t in range(1, T + 1):
        for n in case.nodes:
            bal_p: dict[int, float] = {sigma[(n.id, t)]: n.p_load[t - 1]}
            bal_q: dict[int, float] = {sigma[(n.id, t)]: n.q_load[t - 1]}
            for ln in case.lines:
                sign = 1.0 if ln.to_node == n.id else (-1.0 if ln.from_node == n.id else 0.0)
                if sign:
                    bal_p[pf[(ln.key, t)]] = bal_p.get(pf[(ln.key, t)], 0.0) + sign
                    bal_q[qf[(ln.key, t)]] = bal_q.get(qf[(ln.key, t)], 0.0) + sign
            if n.substation:
                bal_p[psub[(n.id, t)]] = 1.0
                bal_q[qsub[(n.id, t)]] = 1.0
            else:
                bal_p[pg[(n.id, t)]] = 1.0
                bal_q[qg[(n.id, t)]] = 1.0
            row(f"pbal_hi[{n.id},{t}]", bal_p, n.p_load[t - 1])
            row(f"pbal_lo[{n.id},{t}]", {k: -v for k, v in bal_p.items()},
                -n.p_load[t - 1])
            row(f"qbal_hi[{n.id},{t}]", bal_q, n.q_load[t - 1])
            row(f"qbal_lo[{n.id},{t}]", {k: -v for k, v in bal_q.items()},
                -n.q_load[t - 1])

        for ln in case.lines:
            m2 = voltage_big_m(case, ln)
            up = upos[(ln.key, t)]
            drop = {volt[(ln.from_node, t)]: 1.0, volt[(ln.to_node, t)]: -1.0,
                    pf[(ln.key, t)]: -vscale * ln.r, qf[(ln.key, t)]: -vscale * ln.x}
            row(f"vdrop_hi[{ln.key},{t}]", drop, 2.0 * m2,
                j={("s", ln.key): m2}, r={up: m2})
            row(f"vdrop_lo[{ln.key},{t}]", {k: -v for k, v in drop.items()},
                2.0 * m2, j={("s", ln.key): m2}, r={up: m2})

            row(f"pf_s_hi[{ln.key},{t}]", {pf[(ln.key, t)]: 1.0}, 0.0,
                j={("s", ln.key): -ln.p_cap})
            row(f"pf_s_lo[{ln.key},{t}]", {pf[(ln.key, t)]: -1.0}, 0.0,
                j={("s", ln.key): -ln.p_cap})
            row(f"qf_s_hi[{ln.key},{t}]", {qf[(ln.key, t)]: 1.0}, 0.0,
                j={("s", ln.key): -ln.q_cap})
            row(f"qf_s_lo[{ln.key},{t}]", {qf[(ln.key, t)]: -1.0}, 0.0,
                j={("s", ln.key): -ln.q_cap})
            row(f"pf_u_hi[{ln.key},{t}]", {pf[(ln.key, t)]: 1.0}, 0.0,
                r={up: -ln.p_cap})
            row(f"pf_u_lo[{ln.key},{t}]", {pf[(ln.key, t)]: -1.0}, 0.0,
                r={up: -ln.p_cap})
            row(f"qf_u_hi[{ln.key},{t}]", {qf[(ln.key, t)]: 1.0}, 0.0,
                r={up: -ln.q_cap})
            row(f"qf_u_lo[{ln.key},{t}]", {qf[(ln.key, t)]: -1.0}, 0.0,
                r={up: -ln.q_cap})

        for n in case.nodes:
            if n.substation:
                pcap, qcap = substation_caps(case, n)
                row(f"psub_cap[{n.id},{t}]", {psub[(n.id, t)]: 1.0}, pcap)
                row(f"psub_min[{n.id},{t}]", {psub[(n.id, t)]: -1.0}, 0.0)
                row(f"qsub_cap[{n.id},{t}]", {qsub[(n.id, t)]: 1.0}, qcap)
                row(f"qsub_min[{n.id},{t}]", {qsub[(n.id, t)]: -1.0}, 0.0)
                row(f"volt_ref_hi[{n.id},{t}]", {volt[(n.id, t)]: 1.0}, 1.0)
                row(f"volt_ref_lo[{n.id},{t}]", {volt[(n.id, t)]: -1.0}, -1.0)
            else:
                row(f"pg_cap[{n.id},{t}]", {pg[(n.id, t)]: 1.0}, 0.0,
                    j={("xg", n.id): -case.dg.pmax_kw})
                row(f"pg_min[{n.id},{t}]", {pg[(n.id, t)]: -1.0}, 0.0)
                row(f"qg_cap[{n.id},{t}]", {qg[(n.id, t)]: 1.0}, 0.0,
                    j={("xg", n.id): -case.dg.qmax_kvar})
                row(f"qg_min[{n.id},{t}]", {qg[(n.id, t)]: -1.0}, 0.0)
                if t == 1:
                    row(f"ramp_up[{n.id},{t}]", {pg[(n.id, t)]: 1.0},
                        case.dg.ramp_up)
                else:
                    row(f"ramp_up[{n.id},{t}]",
                        {pg[(n.id, t)]: 1.0, pg[(n.id, t - 1)]: -1.0},
                        case.dg.ramp_up)
                    row(f"ramp_dn[{n.id},{t}]",
                        {pg[(n.id, t)]: -1.0, pg[(n.id, t - 1)]: 1.0},
                        case.dg.ramp_down)
                row(f"volt_max[{n.id},{t}]", {volt[(n.id, t)]: 1.0}, n.v_sqr_max)
                row(f"volt_min[{n.id},{t}]", {volt[(n.id, t)]: -1.0}, -n.v_sqr_min)
            row(f"shed_max[{n.id},{t}]", {sigma[(n.id, t)]: 1.0}, 1.0)
            row(f"shed_min[{n.id},{t}]", {sigma[(n.id, t)]: -1.0}, 0.0)

    h = np.zeros(len(zn))
    for n in case.nodes:
        for t in range(1, T + 1):
            h[sigma[(n.id, t)]] = n.weight * n.p_load[t - 1]
    return CompactForm(z_names=tuple(zn), w_index=w_index, u_index=u_index,
                       rows=tuple(rows), h=h)


# -- recourse block loading --------------------------------------------------------

def plan_w_values(plan: PlanDecision) -> dict:
    """Stack a plan's switch and placement decisions into the w key space."""
    vals = {("s", k): float(v) for k, v in plan.s.items()}
    vals.update({("xg", n): float(v) for n, v in plan.xg.items()})
    return vals


def add_recourse_block(model: milp.ModelHandle, compact: CompactForm,
                       w_ref: dict, u, tag: str) -> list:
    """Load one scenario's recourse rows into ``model``.

    ``w_ref`` maps each w key to ("fixed", value) or ("var", index); fixed
    parts fold into the rhs, variable parts become row coefficients.  This
    is the single place recourse rows are materialized, so the master
    blocks and the standalone recourse LP are row-identical by construction.
    Returns the new z variable indices in ``compact.z_names`` order.
    """
    u = np.asarray(u, dtype=float)
    zidx = [model.add_var(f"{tag}.{name}", lb=-np.inf) for name in compact.z_names]
    for crow in compact.rows:
        coeffs = {zidx[c]: v for c, v in crow.z.items()}
        rhs = crow.l
        for wk, c in crow.j.items():
            mode, ref = w_ref[wk]
            if mode == FIXED:
                rhs -= c * ref
            else:
                coeffs[ref] = coeffs.get(ref, 0.0) + c
        for p, c in crow.r.items():
            rhs -= c * u[p]
        model.add_constr(f"{tag}.{crow.name}", coeffs, "<=", rhs)
    return zidx


def recourse_lp(compact: CompactForm, w_values: dict, u,
                with_duals: bool = False):
    """Solve the recourse LP at a fixed plan and outage state.

    Returns (objective, outcome) and, when requested, the nonpositive dual
    vector aligned with ``compact.rows``.
    """
    model = milp.ModelHandle("recourse", minimize=True)
    w_ref = {k: (FIXED, v) for k, v in w_values.items()}
    zidx = add_recourse_block(model, compact, w_ref, u, tag="rc")
    model.set_objective({zidx[c]: v for c, v in enumerate(compact.h) if v != 0.0})
    out = milp.get_backend().solve_lp_duals(model)
    if out.status != "optimal":
        raise milp.ModelError(f"recourse LP did not solve: {out.status} {out.message}")
    if not with_duals:
        return float(out.objective), out
    pi = np.array([out.duals[f"rc.{r.name}"] for r in compact.rows])
    return float(out.objective), out, pi
