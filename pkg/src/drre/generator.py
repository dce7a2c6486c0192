"""Instance generators: small random fixtures and the bundled 33-node case."""

from __future__ import annotations

import numpy as np

from .cases import NetworkCase, case_from_dict, validate_case


def _fragility_spec(rng, hard_factor: float = 1.35, eps_scale: float = 0.3) -> dict:
    m0 = float(rng.uniform(55.0, 70.0))
    return {
        "poles": {"m0": m0, "sigma0": float(rng.uniform(0.2, 0.35)),
                  "m_hard": m0 * hard_factor,
                  "sigma_hard": float(rng.uniform(0.18, 0.25))},
        "conductors": {
            "wind": {"type": "logistic", "pmax": float(rng.uniform(0.25, 0.45)),
                     "v50": float(rng.uniform(55.0, 70.0)),
                     "slope": float(rng.uniform(6.0, 10.0))},
            "tree_coupling": {"type": "logistic",
                              "pmax": float(rng.uniform(0.5, 0.8)),
                              "v50": float(rng.uniform(40.0, 52.0)),
                              "slope": float(rng.uniform(8.0, 12.0))},
            "vegetation": {"type": "constant", "p": float(rng.uniform(0.3, 0.7))},
        },
        "epsilon": {"base_scale": eps_scale},
    }


def random_small_case(seed: int, periods: int | None = None,
                      tracks: int | None = None) -> NetworkCase:
    """A small random instance (3-6 nodes, 2-5 lines) for oracle comparisons.

    The supporting set is left unconstrained (caps equal to zone sizes,
    single-period restoration), which keeps every ambiguity set nonempty for
    every hardening plan.
    """
    rng = np.random.default_rng(seed)
    n_nodes = int(rng.integers(3, 7))
    periods = periods if periods is not None else int(rng.integers(1, 4))
    n_tracks = tracks if tracks is not None else int(rng.integers(1, 3))

    nodes = [{"id": 1, "zone": "z1", "p_load": [0.0] * periods,
              "q_load": [0.0] * periods, "substation": True,
              "v_sqr_min": 0.81, "v_sqr_max": 1.21}]
    for i in range(2, n_nodes + 1):
        nodes.append({
            "id": i, "zone": "z1",
            "p_load": [float(rng.uniform(40.0, 150.0)) for _ in range(periods)],
            "q_load": [float(rng.uniform(15.0, 60.0)) for _ in range(periods)],
            "weight": float(rng.uniform(1.0, 5.0)),
            "v_sqr_min": 0.81, "v_sqr_max": 1.21})

    # random spanning tree plus possibly one switchable tie
    lines = []
    for i in range(2, n_nodes + 1):
        parent = int(rng.integers(1, i))
        lines.append({
            "from": parent, "to": i, "zone": "z1",
            "r": float(rng.uniform(0.05, 0.4)), "x": float(rng.uniform(0.05, 0.3)),
            "p_cap": 800.0, "q_cap": 500.0,
            "length_km": float(rng.uniform(0.3, 1.5)), "poles": int(rng.integers(3, 9)),
            "conductors": 3, "switch": bool(rng.random() < 0.4),
            "restore_periods": 1, "fragility": _fragility_spec(rng)})
    pairs = {(ln["from"], ln["to"]) for ln in lines}
    if len(lines) < 5 and n_nodes >= 3 and rng.random() < 0.5:
        a, b = 1, n_nodes
        if (a, b) not in pairs and a != b:
            lines.append({
                "from": a, "to": b, "zone": "z1",
                "r": float(rng.uniform(0.05, 0.4)),
                "x": float(rng.uniform(0.05, 0.3)),
                "p_cap": 800.0, "q_cap": 500.0,
                "length_km": float(rng.uniform(0.3, 1.5)),
                "poles": int(rng.integers(3, 9)), "conductors": 3,
                "switch": True, "restore_periods": 1,
                "fragility": _fragility_spec(rng)})

    track_list = []
    probs = rng.dirichlet(np.ones(n_tracks) * 5.0)
    for k in range(n_tracks):
        track_list.append({
            "id": f"t{k+1}", "probability": float(probs[k]),
            "eye_path": [[float(rng.uniform(-20, 20)),
                          float(rng.uniform(-20, 20))] for _ in range(periods)],
            "k_translation": float(rng.uniform(1.3, 1.8)),
            "k_boundary": float(rng.uniform(6.0, 12.0)),
            "confidence": 0.954,
            "params": [{
                "vmax": {"family": "normal", "mean": float(rng.uniform(42, 58)),
                         "std": float(rng.uniform(3, 7))},
                "rmax": {"family": "point", "value": float(rng.uniform(18, 30))},
                "rband": {"family": "point", "value": float(rng.uniform(90, 160))},
            } for _ in range(periods)]})

    doc = {
        "meta": {"name": f"fixture-{seed}", "periods": periods,
                 "voltage_base_kv": 12.66},
        "zones": [{"id": "z1", "coord": [0.0, 0.0],
                   "outage_cap": [len(lines)] * periods}],
        "nodes": nodes, "lines": lines, "tracks": track_list,
        "budgets": {"line": float(rng.uniform(30_000, 120_000)),
                    "dg": float(rng.uniform(50_000, 150_000))},
        "dg": {"count": int(rng.integers(0, 3)), "pmax_kw": 120.0,
               "qmax_kvar": 70.0, "cost": 50_000.0},
        "costs": {"pole": 6000.0, "vegetation_per_km": 12_500.0},
    }
    case = case_from_dict(doc)
    report = validate_case(case)
    if not report.ok:
        raise AssertionError(f"generated fixture invalid: {list(map(str, report))}")
    return case


# topology of the classic 33-node feeder: 32 tree branches plus 5 tie lines
_TREE = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9),
         (9, 10), (10, 11), (11, 12), (12, 13), (13, 14), (14, 15), (15, 16),
         (16, 17), (17, 18), (2, 19), (19, 20), (20, 21), (21, 22), (3, 23),
         (23, 24), (24, 25), (6, 26), (26, 27), (27, 28), (28, 29), (29, 30),
         (30, 31), (31, 32), (32, 33)]
_TIES = [(8, 21), (9, 15), (12, 22), (18, 33), (25, 29)]
_CRITICAL = {8, 14, 20, 25, 29, 31}


def make_ieee33_case(seed: int = 33, eps_scale: float = 0.3,
                     budget_line: float = 2.0e5,
                     budget_dg: float = 2.2e5) -> NetworkCase:
    """The bundled 33-node analogue used by the evaluation harness.

    Loads, priorities, and line fragility data are randomly generated from
    a fixed seed; six critical nodes carry a large priority weight.  The
    supporting set is unconstrained so that every midpoint empirical
    distribution lies inside the corresponding ambiguity set.
    """
    rng = np.random.default_rng(seed)
    periods = 1

    # feeder geometry on a rough 3 x 3 km footprint, three hazard zones
    coords = {1: (0.0, 0.0)}
    for a, b in _TREE:
        xa, ya = coords[a]
        coords[b] = (xa + float(rng.uniform(0.15, 0.45)),
                     ya + float(rng.uniform(-0.3, 0.3)))

    def zone_of(nid: int) -> str:
        if nid <= 11:
            return "z1"
        if nid <= 22:
            return "z2"
        return "z3"

    nodes = [{"id": 1, "zone": "z1", "p_load": [0.0], "q_load": [0.0],
              "substation": True, "v_sqr_min": 0.81, "v_sqr_max": 1.21}]
    for i in range(2, 34):
        nodes.append({
            "id": i, "zone": zone_of(i),
            "p_load": [float(rng.uniform(60.0, 420.0))],
            "q_load": [float(rng.uniform(20.0, 200.0))],
            "weight": 8.0 if i in _CRITICAL else float(rng.uniform(1.0, 3.0)),
            "v_sqr_min": 0.81, "v_sqr_max": 1.21})

    lines = []
    for (a, b) in _TREE + _TIES:
        xa, ya = coords[a]
        xb, yb = coords[b]
        length = max(0.2, float(np.hypot(xa - xb, ya - yb)))
        lines.append({
            "from": a, "to": b, "zone": zone_of(b),
            "r": 0.5 * length, "x": 0.35 * length,
            "p_cap": 5000.0, "q_cap": 3000.0,
            "length_km": round(length, 4),
            "poles": max(3, round(length / 0.05)),
            "conductors": 3, "switch": (a, b) in _TIES, "restore_periods": 1,
            "fragility": _fragility_spec(rng, eps_scale=eps_scale)})

    # at most two concurrent outages per zone; the per-zone sums of the
    # lower moment bounds stay well under the cap, so the moment box always
    # intersects the marginals achievable on the support
    zones = [{"id": z, "coord": c, "outage_cap": [2] * periods}
             for z, c in (("z1", [0.8, 0.0]), ("z2", [2.2, 0.6]),
                          ("z3", [2.2, -0.8]))]

    tracks = [
        {"id": "north", "probability": 0.6,
         "eye_path": [[1.0, 52.0]],
         "k_translation": 1.45, "k_boundary": 8.0, "confidence": 0.954,
         "params": [
             {"vmax": {"family": "normal", "mean": 52.0, "std": 6.0},
              "rmax": {"family": "point", "value": 24.0},
              "rband": {"family": "point", "value": 140.0}}]},
        {"id": "south", "probability": 0.4,
         "eye_path": [[2.0, -62.0]],
         "k_translation": 1.5, "k_boundary": 9.0, "confidence": 0.954,
         "params": [
             {"vmax": {"family": "normal", "mean": 48.0, "std": 5.0},
              "rmax": {"family": "point", "value": 22.0},
              "rband": {"family": "point", "value": 130.0}}]},
    ]

    doc = {
        "meta": {"name": "feeder33", "periods": periods,
                 "voltage_base_kv": 12.66},
        "zones": zones, "nodes": nodes, "lines": lines, "tracks": tracks,
        "budgets": {"line": budget_line, "dg": budget_dg},
        "dg": {"count": 2, "pmax_kw": 300.0, "qmax_kvar": 175.0,
               "ramp_up": 300.0, "ramp_down": 300.0, "cost": 110_000.0},
        "costs": {"pole": 6000.0, "vegetation_per_km": 12_500.0},
    }
    case = case_from_dict(doc)
    report = validate_case(case)
    if not report.ok:
        raise AssertionError(f"bundled case invalid: {list(map(str, report))}")
    return case
