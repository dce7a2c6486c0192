"""Solver-agnostic construction and solution of linear and mixed-integer programs.

This is the single seam to the MIP backend.  The default (and currently only)
backend is HiGHS, reached through :mod:`scipy.optimize`.  Backend selection is
kept behind :func:`get_backend` so an alternative adapter can be registered
without touching any formulation code.

Conventions
-----------
* Constraint senses are ``"<="``, ``"="``, ``">="``.
* Duals are reported for continuous solves only, keyed by constraint name,
  in the sensitivity convention: the dual is d(objective)/d(rhs).  For a
  minimisation problem a binding ``>=`` row therefore has a nonnegative dual
  (``min x s.t. x >= 3`` gives dual +1).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

CONTINUOUS = "continuous"
BINARY = "binary"

_SENSES = ("<=", "=", ">=")

# scipy/HiGHS status codes -> our vocabulary
_MILP_STATUS = {0: "optimal", 1: "gap-limit", 2: "infeasible", 3: "unbounded", 4: "error"}


class ModelError(ValueError):
    """Ill-formed model: bad variable reference, duplicate name, bad sense."""


@dataclass
class _Var:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass
class _Row:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float


@dataclass
class SolveOutcome:
    """Result of one solve: status, objective, primal/dual values."""

    status: str
    objective: float | None
    x: np.ndarray | None
    duals: dict[str, float] | None
    mip_gap: float | None
    wall_time: float
    message: str = ""
    dual_bound: float | None = None    # best provable bound on the objective

    def value(self, idx: int) -> float:
        if self.x is None:
            raise ModelError("no primal solution available")
        return float(self.x[idx])


class ModelHandle:
    """A mutable LP/MILP under construction.

    Confined to one logical owner; independent handles may be built and
    solved concurrently (the scipy backend is stateless per call).
    """

    def __init__(self, name: str = "model", minimize: bool = True):
        self.name = name
        self.minimize = minimize
        self._vars: list[_Var] = []
        self._rows: list[_Row] = []
        self._var_names: set[str] = set()
        self._row_names: set[str] = set()
        self._obj: dict[int, float] = {}
        self.obj_offset: float = 0.0

    # -- construction -------------------------------------------------

    def add_var(self, name: str, kind: str = CONTINUOUS,
                lb: float = 0.0, ub: float | None = None) -> int:
        if name in self._var_names:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        elif kind != CONTINUOUS:
            raise ModelError(f"unknown variable kind {kind!r}")
        self._var_names.add(name)
        self._vars.append(_Var(name, kind, float(lb),
                               np.inf if ub is None else float(ub)))
        return len(self._vars) - 1

    def add_constr(self, name: str, coeffs: dict[int, float],
                   sense: str, rhs: float) -> int:
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        if sense not in _SENSES:
            raise ModelError(f"bad sense {sense!r}")
        n = len(self._vars)
        for j in coeffs:
            if not (0 <= j < n):
                raise ModelError(f"constraint {name!r} references unknown variable {j}")
        self._row_names.add(name)
        self._rows.append(_Row(name, {j: float(v) for j, v in coeffs.items() if v != 0.0},
                               sense, float(rhs)))
        return len(self._rows) - 1

    def set_objective(self, coeffs: dict[int, float], minimize: bool = True,
                      offset: float = 0.0) -> None:
        n = len(self._vars)
        for j in coeffs:
            if not (0 <= j < n):
                raise ModelError(f"objective references unknown variable {j}")
        self._obj = {j: float(v) for j, v in coeffs.items() if v != 0.0}
        self.minimize = minimize
        self.obj_offset = float(offset)

    # -- mutations used by the C&CG machinery ---------------------------

    def fix(self, idx: int, value: float) -> None:
        """Fix a variable to a value (first-class per the dual-extraction contract)."""
        v = self._vars[idx]
        v.lb = v.ub = float(value)

    def relax_to_continuous(self, idx: int | None = None) -> None:
        """Relax one binary (or, with no argument, every binary) to continuous."""
        targets = self._vars if idx is None else [self._vars[idx]]
        for v in targets:
            v.kind = CONTINUOUS

    # -- introspection --------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self._vars)

    @property
    def num_rows(self) -> int:
        return len(self._rows)

    def var_name(self, idx: int) -> str:
        return self._vars[idx].name

    def all_continuous(self) -> bool:
        return all(v.kind == CONTINUOUS for v in self._vars)

    def to_lp_text(self) -> str:
        """Serialize to LP text format (deterministic; golden-file surface)."""
        out = [f"\\ model {self.name}"]
        out.append("Minimize" if self.minimize else "Maximize")
        terms = " ".join(f"{c:+.12g} {self._vars[j].name}"
                         for j, c in sorted(self._obj.items()))
        out.append(f" obj: {terms or '0 ' + (self._vars[0].name if self._vars else 'x')}")
        out.append("Subject To")
        sense_txt = {"<=": "<=", "=": "=", ">=": ">="}
        for r in self._rows:
            lhs = " ".join(f"{c:+.12g} {self._vars[j].name}"
                           for j, c in sorted(r.coeffs.items()))
            out.append(f" {r.name}: {lhs or '0 ' + self._vars[0].name} {sense_txt[r.sense]} {r.rhs:.12g}")
        out.append("Bounds")
        for v in self._vars:
            lb = "-inf" if v.lb == -np.inf else f"{v.lb:.12g}"
            ub = "+inf" if v.ub == np.inf else f"{v.ub:.12g}"
            out.append(f" {lb} <= {v.name} <= {ub}")
        bins = [v.name for v in self._vars if v.kind == BINARY]
        if bins:
            out.append("Binary")
            out.extend(f" {b}" for b in bins)
        out.append("End")
        return "\n".join(out) + "\n"

    def dump(self, directory: str, tag: str | None = None) -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f"{tag or self.name}.lp")
        with open(path, "w") as fh:
            fh.write(self.to_lp_text())
        return path

    # -- assembly ---------------------------------------------------------

    def _assemble(self):
        n = len(self._vars)
        c = np.zeros(n)
        for j, v in self._obj.items():
            c[j] = v
        sign = 1.0 if self.minimize else -1.0
        lb = np.array([v.lb for v in self._vars])
        ub = np.array([v.ub for v in self._vars])
        integrality = np.array([1 if v.kind == BINARY else 0 for v in self._vars])

        # split rows into <= (with >= negated) and =
        ub_rows, eq_rows = [], []
        for r in self._rows:
            if r.sense == "=":
                eq_rows.append(r)
            else:
                ub_rows.append(r)

        def build(rows, flip_ge):
            data, ri, ci, rhs = [], [], [], []
            for k, r in enumerate(rows):
                s = -1.0 if (flip_ge and r.sense == ">=") else 1.0
                for j, v in r.coeffs.items():
                    ri.append(k); ci.append(j); data.append(s * v)
                rhs.append(s * r.rhs)
            A = sp.coo_matrix((data, (ri, ci)), shape=(len(rows), n)).tocsr()
            return A, np.array(rhs)

        A_ub, b_ub = build(ub_rows, True)
        A_eq, b_eq = build(eq_rows, False)
        return sign * c, lb, ub, integrality, (A_ub, b_ub, ub_rows), (A_eq, b_eq, eq_rows)


def solve_mip(model: ModelHandle, gap_tolerance: float = 1e-6,
              time_limit: float | None = None) -> SolveOutcome:
    """Solve as a MILP.  Time limit yields status ``gap-limit`` with the incumbent."""
    c, lb, ub, integrality, (A_ub, b_ub, _), (A_eq, b_eq, _) = model._assemble()
    constraints = []
    if A_ub.shape[0]:
        constraints.append(LinearConstraint(A_ub, -np.inf, b_ub))
    if A_eq.shape[0]:
        constraints.append(LinearConstraint(A_eq, b_eq, b_eq))
    options = {"mip_rel_gap": gap_tolerance, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    t0 = time.perf_counter()
    res = milp(c=c, constraints=constraints, integrality=integrality,
               bounds=Bounds(lb, ub), options=options)
    wall = time.perf_counter() - t0
    status = _MILP_STATUS.get(res.status, "error")
    if status == "gap-limit" and res.x is None:
        status = "error"
    obj = None
    if res.x is not None:
        obj = float(np.dot(c, res.x)) * (1.0 if model.minimize else -1.0) + model.obj_offset
    gap = float(res.mip_gap) if getattr(res, "mip_gap", None) is not None else None
    bound = None
    if getattr(res, "mip_dual_bound", None) is not None:
        bound = (float(res.mip_dual_bound) * (1.0 if model.minimize else -1.0)
                 + model.obj_offset)
    return SolveOutcome(status=status, objective=obj,
                        x=np.asarray(res.x) if res.x is not None else None,
                        duals=None, mip_gap=gap, wall_time=wall,
                        message=str(res.message), dual_bound=bound)


def solve_lp_duals(model: ModelHandle) -> SolveOutcome:
    """Solve a continuous model, returning duals keyed by constraint name.

    Binaries must have been fixed or relaxed by the caller.  Duals satisfy
    strong duality and complementary slackness within backend tolerance.
    """
    if not model.all_continuous():
        raise ModelError("solve_lp_duals requires an all-continuous model; "
                         "fix or relax binaries first")
    c, lb, ub, _, (A_ub, b_ub, ub_rows), (A_eq, b_eq, eq_rows) = model._assemble()
    bounds = list(zip([x if x > -np.inf else None for x in lb],
                      [x if x < np.inf else None for x in ub]))
    t0 = time.perf_counter()
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None,
                  b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None,
                  b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=bounds, method="highs")
    wall = time.perf_counter() - t0
    status = {0: "optimal", 1: "gap-limit", 2: "infeasible", 3: "unbounded",
              4: "error"}.get(res.status, "error")
    duals = None
    obj = None
    if res.status == 0:
        sgn = 1.0 if model.minimize else -1.0
        obj = sgn * float(res.fun) + model.obj_offset
        duals = {}
        if A_ub.shape[0]:
            marg = res.ineqlin.marginals
            for k, r in enumerate(ub_rows):
                d = float(marg[k])
                if r.sense == ">=":
                    d = -d  # undo the row negation
                duals[r.name] = sgn * d
        if A_eq.shape[0]:
            marg = res.eqlin.marginals
            for k, r in enumerate(eq_rows):
                duals[r.name] = sgn * float(marg[k])
    return SolveOutcome(status=status, objective=obj,
                        x=np.asarray(res.x) if res.x is not None else None,
                        duals=duals, mip_gap=None, wall_time=wall,
                        message=str(res.message))


# -- backend registry ------------------------------------------------------

@dataclass(frozen=True)
class Backend:
    name: str
    solve_mip: object
    solve_lp_duals: object


_BACKENDS = {"highs": Backend("highs", solve_mip, solve_lp_duals)}


def get_backend(key: str | None = None) -> Backend:
    """Resolve a backend by key; env DRRE_SOLVER_BACKEND overrides."""
    key = os.environ.get("DRRE_SOLVER_BACKEND", key or "highs")
    try:
        return _BACKENDS[key]
    except KeyError:
        raise ModelError(f"unknown solver backend {key!r}; known: {sorted(_BACKENDS)}")
