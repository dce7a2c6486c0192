"""Grid planning instance: domain types, JSON parsing, validation.

A NetworkCase is immutable after construction and safe to share across
concurrent readers.  All units are as declared in the schema: loads in kW /
kVar, wind speeds in m/s, distances in km, voltages in p.u. squared,
costs in currency units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .fragility import FragilityError, LineFragility, line_empirical_fragility

MEASURES = ("I", "II", "III")


class CaseError(ValueError):
    """Base for case-file problems."""


class SchemaError(CaseError):
    """Missing/ill-typed field; message names the offending field."""


class DanglingReferenceError(CaseError):
    """A referenced identifier does not exist; message names the id."""


class DuplicateIdError(CaseError):
    """An identifier is declared twice."""


# -- parameter distributions for hurricane intensity ---------------------------

@dataclass(frozen=True)
class ParamDist:
    """Named parametric family for one hurricane parameter."""

    family: str                      # "normal" | "uniform" | "point" | "lognormal"
    params: tuple

    @staticmethod
    def from_dict(spec: dict, where: str) -> "ParamDist":
        fam = spec.get("family")
        if fam == "normal":
            return ParamDist("normal", (float(spec["mean"]), float(spec["std"])))
        if fam == "lognormal":
            return ParamDist("lognormal", (float(spec["mu"]), float(spec["sigma"])))
        if fam == "uniform":
            return ParamDist("uniform", (float(spec["low"]), float(spec["high"])))
        if fam == "point":
            return ParamDist("point", (float(spec["value"]),))
        raise SchemaError(f"{where}.family: unknown distribution family {fam!r}")

    def to_dict(self) -> dict:
        if self.family == "normal":
            return {"family": "normal", "mean": self.params[0], "std": self.params[1]}
        if self.family == "lognormal":
            return {"family": "lognormal", "mu": self.params[0], "sigma": self.params[1]}
        if self.family == "uniform":
            return {"family": "uniform", "low": self.params[0], "high": self.params[1]}
        return {"family": "point", "value": self.params[0]}

    @property
    def mean(self) -> float:
        if self.family == "normal":
            return self.params[0]
        if self.family == "lognormal":
            mu, sg = self.params
            return math.exp(mu + sg * sg / 2.0)
        if self.family == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        return self.params[0]

    def sample(self, rng, size: int):
        import numpy as np
        if self.family == "normal":
            return rng.normal(self.params[0], self.params[1], size)
        if self.family == "lognormal":
            return rng.lognormal(self.params[0], self.params[1], size)
        if self.family == "uniform":
            return rng.uniform(self.params[0], self.params[1], size)
        return np.full(size, self.params[0])


@dataclass(frozen=True)
class TrackScenario:
    """One hurricane propagation track with per-period intensity distributions."""

    id: str
    probability: float
    eye_path: tuple                      # per period (x, y) km
    k_translation: float                 # K^C, > 1
    k_boundary: float                    # K^B, > 1
    confidence: float                    # e.g. 0.997
    params: tuple                        # per period dict {vmax, rmax, rband} -> ParamDist

    def param(self, t: int, name: str) -> ParamDist:
        return self.params[t - 1][name]


@dataclass(frozen=True)
class Zone:
    id: str
    coord: tuple                         # representative (x, y) km
    outage_caps: tuple                   # per period cap on concurrently outaged lines

    def outage_cap(self, t: int) -> int:
        return self.outage_caps[t - 1]


@dataclass(frozen=True)
class Node:
    id: object
    zone: str
    p_load: tuple                        # kW per period
    q_load: tuple                        # kVar per period
    weight: float                        # priority gamma_i
    v_sqr_min: float
    v_sqr_max: float
    substation: bool = False
    sub_p_cap: float | None = None
    sub_q_cap: float | None = None


@dataclass(frozen=True)
class Line:
    from_node: object
    to_node: object
    zone: str
    r: float
    x: float
    p_cap: float
    q_cap: float
    length_km: float
    poles: int
    conductors: int
    switch: bool
    restore_periods: int
    fragility: LineFragility
    harden_cost: dict = field(default_factory=dict)   # measure -> currency

    @property
    def key(self) -> str:
        return f"{self.from_node}-{self.to_node}"

    def cost(self, measure: str) -> float:
        return self.harden_cost[measure]


@dataclass(frozen=True)
class DGCatalog:
    count: int
    pmax_kw: float
    qmax_kvar: float
    ramp_up: float
    ramp_down: float
    cost: float


@dataclass(frozen=True)
class NetworkCase:
    name: str
    periods: int
    nodes: tuple
    lines: tuple
    zones: tuple
    tracks: tuple
    budget_line: float
    budget_dg: float
    dg: DGCatalog
    pole_cost: float
    vegetation_cost_per_km: float
    voltage_base_kv: float = 1.0

    def node(self, nid) -> Node:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise DanglingReferenceError(f"unknown node id {nid!r}")

    def line(self, key: str) -> Line:
        for ln in self.lines:
            if ln.key == key:
                return ln
        raise DanglingReferenceError(f"unknown line {key!r}")

    def zone(self, zid) -> Zone:
        for z in self.zones:
            if z.id == zid:
                return z
        raise DanglingReferenceError(f"unknown zone id {zid!r}")

    @property
    def substations(self) -> tuple:
        return tuple(n for n in self.nodes if n.substation)

    @property
    def total_weighted_demand(self) -> float:
        return sum(n.weight * p for n in self.nodes for p in n.p_load)

    @property
    def total_demand(self) -> float:
        return sum(p for n in self.nodes for p in n.p_load)


# -- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    def add(self, subject: str, message: str) -> None:
        self.violations.append(Violation(subject, message))

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


def validate_case(case: NetworkCase) -> ValidationReport:
    """Check every structural invariant; violations are report entries."""
    rep = ValidationReport()
    if case.periods < 1:
        rep.add("meta.periods", "horizon must have at least one period")
    if case.budget_line < 0:
        rep.add("budgets.line", "budget must be >= 0")
    if case.budget_dg < 0:
        rep.add("budgets.dg", "budget must be >= 0")

    node_ids = [n.id for n in case.nodes]
    if len(set(node_ids)) != len(node_ids):
        rep.add("nodes", "duplicate node identifiers")
    zone_ids = {z.id for z in case.zones}

    for n in case.nodes:
        if n.weight <= 0:
            rep.add(f"node {n.id}", "priority weight must be > 0")
        if n.v_sqr_min >= n.v_sqr_max:
            rep.add(f"node {n.id}", "voltage bounds must satisfy min < max")
        if any(p < 0 for p in n.p_load) or any(q < 0 for q in n.q_load):
            rep.add(f"node {n.id}", "loads must be >= 0")
        if len(n.p_load) != case.periods or len(n.q_load) != case.periods:
            rep.add(f"node {n.id}", "load series length must equal the horizon")
        if n.zone not in zone_ids:
            rep.add(f"node {n.id}", f"references unknown zone {n.zone!r}")

    known = set(node_ids)
    for ln in case.lines:
        if ln.from_node not in known:
            rep.add(f"line {ln.key}", f"endpoint {ln.from_node!r} not a known node")
        if ln.to_node not in known:
            rep.add(f"line {ln.key}", f"endpoint {ln.to_node!r} not a known node")
        if ln.zone not in zone_ids:
            rep.add(f"line {ln.key}", f"references unknown zone {ln.zone!r}")
        if ln.r <= 0 or ln.x <= 0:
            rep.add(f"line {ln.key}", "impedance R, X must be > 0")
        if ln.p_cap <= 0 or ln.q_cap <= 0:
            rep.add(f"line {ln.key}", "flow caps must be > 0")
        if ln.poles < 1 or ln.conductors < 1:
            rep.add(f"line {ln.key}", "pole and conductor counts must be >= 1")
        if ln.restore_periods < 1:
            rep.add(f"line {ln.key}", "restoration time must be >= 1 period")
        for h in MEASURES:
            if ln.harden_cost.get(h, 0.0) < 0:
                rep.add(f"line {ln.key}", f"hardening cost for measure {h} must be >= 0")
        # hardening never increases empirical fragility
        for v in (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 75.0, 90.0, 110.0):
            mu0 = line_empirical_fragility(v, ln.fragility, ln.poles, ln.conductors, None)
            for h in MEASURES:
                if line_empirical_fragility(v, ln.fragility, ln.poles,
                                            ln.conductors, h) > mu0 + 1e-9:
                    rep.add(f"line {ln.key}",
                            f"measure {h} increases fragility at v={v} m/s")
                    break
            else:
                continue
            break

    for z in case.zones:
        members = [ln for ln in case.lines if ln.zone == z.id]
        if len(z.outage_caps) != case.periods:
            rep.add(f"zone {z.id}", "outage cap series length must equal the horizon")
        for t, cap in enumerate(z.outage_caps, start=1):
            if cap < 0 or cap > len(members):
                rep.add(f"zone {z.id}", f"outage cap out of range in period {t}")

    if not case.substations:
        rep.add("nodes", "no substation node flagged")

    theta = sum(tr.probability for tr in case.tracks)
    if case.tracks and abs(theta - 1.0) > 1e-9:
        rep.add("tracks", f"track probabilities sum to {theta:.6g}, expected 1")
    for tr in case.tracks:
        if tr.probability <= 0:
            rep.add(f"track {tr.id}", "probability must be > 0")
        if tr.k_translation <= 1 or tr.k_boundary <= 1:
            rep.add(f"track {tr.id}", "shape constants K^C, K^B must exceed 1")
        if len(tr.eye_path) != case.periods or len(tr.params) != case.periods:
            rep.add(f"track {tr.id}", "eye path / parameter series must cover the horizon")
        if not (0.0 < tr.confidence < 1.0):
            rep.add(f"track {tr.id}", "confidence level must lie in (0, 1)")

    # connectivity of the all-switched-on base graph
    if case.nodes and case.lines:
        adj: dict = {n.id: set() for n in case.nodes}
        for ln in case.lines:
            if ln.from_node in adj and ln.to_node in adj:
                adj[ln.from_node].add(ln.to_node)
                adj[ln.to_node].add(ln.from_node)
        seen = {case.nodes[0].id}
        stack = [case.nodes[0].id]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(case.nodes):
            rep.add("lines", "switched-on base graph is not connected")
    return rep


# -- parsing ---------------------------------------------------------------------

def _req(d: dict, key: str, where: str):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise SchemaError(f"missing required field {where}.{key}") from None


def _per_period(value, periods: int, where: str) -> tuple:
    if isinstance(value, (int, float)):
        return tuple(float(value) for _ in range(periods))
    vals = tuple(float(v) for v in value)
    if len(vals) != periods:
        raise SchemaError(f"{where}: expected {periods} per-period values, got {len(vals)}")
    return vals


def case_from_dict(doc: dict) -> NetworkCase:
    meta = _req(doc, "meta", "$")
    periods = int(_req(meta, "periods", "meta"))
    zones = []
    seen_z = set()
    for i, zd in enumerate(_req(doc, "zones", "$")):
        zid = _req(zd, "id", f"zones[{i}]")
        if zid in seen_z:
            raise DuplicateIdError(f"duplicate zone id {zid!r}")
        seen_z.add(zid)
        caps = _per_period(_req(zd, "outage_cap", f"zones[{i}]"), periods,
                           f"zones[{i}].outage_cap")
        zones.append(Zone(id=zid, coord=tuple(_req(zd, "coord", f"zones[{i}]")),
                          outage_caps=tuple(int(c) for c in caps)))

    nodes = []
    seen_n = set()
    for i, nd in enumerate(_req(doc, "nodes", "$")):
        nid = _req(nd, "id", f"nodes[{i}]")
        if nid in seen_n:
            raise DuplicateIdError(f"duplicate node id {nid!r}")
        seen_n.add(nid)
        zid = _req(nd, "zone", f"nodes[{i}]")
        if zid not in seen_z:
            raise DanglingReferenceError(f"node {nid!r} references unknown zone {zid!r}")
        nodes.append(Node(
            id=nid, zone=zid,
            p_load=_per_period(_req(nd, "p_load", f"nodes[{i}]"), periods,
                               f"nodes[{i}].p_load"),
            q_load=_per_period(_req(nd, "q_load", f"nodes[{i}]"), periods,
                               f"nodes[{i}].q_load"),
            weight=float(nd.get("weight", 1.0)),
            v_sqr_min=float(nd.get("v_sqr_min", 0.81)),
            v_sqr_max=float(nd.get("v_sqr_max", 1.21)),
            substation=bool(nd.get("substation", False)),
            sub_p_cap=nd.get("sub_p_cap"), sub_q_cap=nd.get("sub_q_cap")))

    costs = doc.get("costs", {})
    pole_cost = float(costs.get("pole", 0.0))
    veg_cost = float(costs.get("vegetation_per_km", 0.0))

    lines = []
    seen_l = set()
    for i, ld in enumerate(_req(doc, "lines", "$")):
        fr = _req(ld, "from", f"lines[{i}]")
        to = _req(ld, "to", f"lines[{i}]")
        for end in (fr, to):
            if end not in seen_n:
                raise DanglingReferenceError(
                    f"line {fr}-{to} references unknown node {end!r}")
        key = f"{fr}-{to}"
        if key in seen_l:
            raise DuplicateIdError(f"duplicate line {key}")
        seen_l.add(key)
        zid = _req(ld, "zone", f"lines[{i}]")
        if zid not in seen_z:
            raise DanglingReferenceError(f"line {key} references unknown zone {zid!r}")
        length = float(_req(ld, "length_km", f"lines[{i}]"))
        poles = int(ld.get("poles", max(1, round(length / 0.05))))
        try:
            frag = LineFragility.from_dict(_req(ld, "fragility", f"lines[{i}]"),
                                           where=f"lines[{i}].fragility")
        except FragilityError as exc:
            raise SchemaError(f"lines[{i}].fragility: {exc}") from None
        # explicit costs override the length-based derivation
        given = ld.get("harden_cost", {})
        c_veg = veg_cost * length
        c_pole = pole_cost * poles
        cost = {"I": float(given.get("I", c_veg)),
                "II": float(given.get("II", c_pole)),
                "III": float(given.get("III", c_veg + c_pole))}
        lines.append(Line(
            from_node=fr, to_node=to, zone=zid,
            r=float(_req(ld, "r", f"lines[{i}]")),
            x=float(_req(ld, "x", f"lines[{i}]")),
            p_cap=float(_req(ld, "p_cap", f"lines[{i}]")),
            q_cap=float(_req(ld, "q_cap", f"lines[{i}]")),
            length_km=length, poles=poles,
            conductors=int(ld.get("conductors", 3)),
            switch=bool(ld.get("switch", False)),
            restore_periods=int(ld.get("restore_periods", 1)),
            fragility=frag, harden_cost=cost))

    tracks = []
    seen_t = set()
    for i, td in enumerate(doc.get("tracks", [])):
        tid = _req(td, "id", f"tracks[{i}]")
        if tid in seen_t:
            raise DuplicateIdError(f"duplicate track id {tid!r}")
        seen_t.add(tid)
        pspecs = _req(td, "params", f"tracks[{i}]")
        if len(pspecs) != periods:
            raise SchemaError(f"tracks[{i}].params: expected {periods} entries")
        params = tuple(
            {"vmax": ParamDist.from_dict(_req(ps, "vmax", f"tracks[{i}].params[{t}]"),
                                         f"tracks[{i}].params[{t}].vmax"),
             "rmax": ParamDist.from_dict(_req(ps, "rmax", f"tracks[{i}].params[{t}]"),
                                         f"tracks[{i}].params[{t}].rmax"),
             "rband": ParamDist.from_dict(_req(ps, "rband", f"tracks[{i}].params[{t}]"),
                                          f"tracks[{i}].params[{t}].rband")}
            for t, ps in enumerate(pspecs))
        tracks.append(TrackScenario(
            id=tid, probability=float(_req(td, "probability", f"tracks[{i}]")),
            eye_path=tuple(tuple(p) for p in _req(td, "eye_path", f"tracks[{i}]")),
            k_translation=float(_req(td, "k_translation", f"tracks[{i}]")),
            k_boundary=float(_req(td, "k_boundary", f"tracks[{i}]")),
            confidence=float(td.get("confidence", 0.997)),
            params=params))

    budgets = _req(doc, "budgets", "$")
    dgd = _req(doc, "dg", "$")
    dg = DGCatalog(count=int(_req(dgd, "count", "dg")),
                   pmax_kw=float(_req(dgd, "pmax_kw", "dg")),
                   qmax_kvar=float(_req(dgd, "qmax_kvar", "dg")),
                   ramp_up=float(dgd.get("ramp_up", dgd["pmax_kw"])),
                   ramp_down=float(dgd.get("ramp_down", dgd["pmax_kw"])),
                   cost=float(_req(dgd, "cost", "dg")))
    return NetworkCase(
        name=str(meta.get("name", "unnamed")),
        periods=periods,
        nodes=tuple(nodes), lines=tuple(lines), zones=tuple(zones),
        tracks=tuple(tracks),
        budget_line=float(_req(budgets, "line", "budgets")),
        budget_dg=float(_req(budgets, "dg", "budgets")),
        dg=dg, pole_cost=pole_cost, vegetation_cost_per_km=veg_cost,
        voltage_base_kv=float(meta.get("voltage_base_kv", 1.0)))


def parse_case(path: str) -> NetworkCase:
    """Load and resolve a case file; raises CaseError subclasses on bad input."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
    return case_from_dict(doc)


def case_to_dict(case: NetworkCase) -> dict:
    """Serialize back to the case schema (round-trip identity with parsing)."""
    return {
        "meta": {"name": case.name, "voltage_base_kv": case.voltage_base_kv,
                 "periods": case.periods},
        "zones": [{"id": z.id, "coord": list(z.coord),
                   "outage_cap": list(z.outage_caps)} for z in case.zones],
        "nodes": [{k: v for k, v in {
            "id": n.id, "zone": n.zone, "p_load": list(n.p_load),
            "q_load": list(n.q_load), "weight": n.weight,
            "v_sqr_min": n.v_sqr_min, "v_sqr_max": n.v_sqr_max,
            "substation": n.substation,
            "sub_p_cap": n.sub_p_cap, "sub_q_cap": n.sub_q_cap}.items()
            if v is not None} for n in case.nodes],
        "lines": [{
            "from": ln.from_node, "to": ln.to_node, "zone": ln.zone,
            "r": ln.r, "x": ln.x, "p_cap": ln.p_cap, "q_cap": ln.q_cap,
            "length_km": ln.length_km, "poles": ln.poles,
            "conductors": ln.conductors, "switch": ln.switch,
            "restore_periods": ln.restore_periods,
            "harden_cost": dict(ln.harden_cost),
            "fragility": ln.fragility.to_dict()} for ln in case.lines],
        "tracks": [{
            "id": tr.id, "probability": tr.probability,
            "eye_path": [list(p) for p in tr.eye_path],
            "k_translation": tr.k_translation, "k_boundary": tr.k_boundary,
            "confidence": tr.confidence,
            "params": [{k: d.to_dict() for k, d in ps.items()} for ps in tr.params],
        } for tr in case.tracks],
        "budgets": {"line": case.budget_line, "dg": case.budget_dg},
        "dg": {"count": case.dg.count, "pmax_kw": case.dg.pmax_kw,
               "qmax_kvar": case.dg.qmax_kvar, "ramp_up": case.dg.ramp_up,
               "ramp_down": case.dg.ramp_down, "cost": case.dg.cost},
        "costs": {"pole": case.pole_cost,
                  "vegetation_per_km": case.vegetation_cost_per_km},
    }


def write_case(case: NetworkCase, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=1, sort_keys=False)
        fh.write("\n")
