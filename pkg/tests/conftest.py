import pytest

from drre.ccg import build_all_ambiguity
from drre.generator import random_small_case

WIND_SAMPLES = 2000


@pytest.fixture(scope="session")
def small_case():
    return random_small_case(1)


@pytest.fixture(scope="session")
def small_ambs(small_case):
    return build_all_ambiguity(small_case, seed=1, samples=WIND_SAMPLES)


def forest_with_roots(case, plan) -> bool:
    """The energized graph must be a forest whose every component holds
    exactly one admissible root: a substation, or a node carrying a DG."""
    on = [ln for ln in case.lines if plan.s.get(ln.key)]
    parent = {n.id: n.id for n in case.nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for ln in on:
        ra, rb = find(ln.from_node), find(ln.to_node)
        if ra == rb:
            return False            # cycle
        parent[ra] = rb
    comps = {}
    subs = {n.id for n in case.nodes if n.substation}
    for n in case.nodes:
        comps.setdefault(find(n.id), []).append(n.id)
    for members in comps.values():
        n_sub = sum(1 for m in members if m in subs)
        n_dg = sum(plan.xg.get(m, 0) for m in members)
        if n_sub > 1:
            return False
        if n_sub == 0 and len(members) > 1 and n_dg == 0:
            return False
    return True
