"""Command-line entry point.

Commands cover case validation, the distributionally robust solve, the
three baselines, out-of-sample evaluation, scenario sampling, budget and
epsilon sweeps, and CSV/plot-script export.  Exit codes: 0 success, 1
validation failure, 2 solver failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from .baselines import (SamplingError, evaluate_fixed_plan, out_of_sample_ewls,
                        sample_outage_scenarios, solve_ddsre, solve_fhi,
                        solve_rre, voda_vomi)
from .cases import (CaseError, NetworkCase, case_from_dict, case_to_dict,
                    parse_case, validate_case)
from .ccg import (CCGOptions, ConvergenceError, SolveReport,
                  build_all_ambiguity, run_ccg, solve_drre)
from .formulation import PlanDecision
from .milp import ModelError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64

_BUNDLED = os.path.join(os.path.dirname(__file__), "data", "ieee33.json")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_id() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=os.path.dirname(__file__))
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return f"drre-{__version__}"


def _resolved_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["backend"] = os.environ.get("DRRE_SOLVER_BACKEND", "highs")
    cfg["build_id"] = _build_id()
    return cfg


def _load_case(path: str | None) -> NetworkCase:
    return parse_case(path or _BUNDLED)


def _options(args: argparse.Namespace) -> CCGOptions:
    return CCGOptions(
        tolerance=getattr(args, "tolerance", 1e-4),
        time_limit=getattr(args, "time_limit", None),
        master_time_limit=getattr(args, "master_time_limit", None),
        dump_dir=getattr(args, "dump_models", None),
        verbose=getattr(args, "verbose", False),
    )


def _plan_to_json(plan: PlanDecision) -> dict:
    return {"y": {k: m for k, m in plan.y.items()},
            "xg": {str(n): int(v) for n, v in plan.xg.items()},
            "s": {k: int(v) for k, v in plan.s.items()},
            "kappa": {str(n): int(v) for n, v in plan.kappa.items()}}


def _plan_from_json(doc: dict) -> PlanDecision:
    return PlanDecision(y={k: m for k, m in doc["y"].items()},
                        xg={int(n): int(v) for n, v in doc["xg"].items()},
                        s={k: int(v) for k, v in doc["s"].items()},
                        kappa={int(n): int(v)
                               for n, v in doc["kappa"].items()})


def _report_to_json(report: SolveReport, cfg: dict) -> dict:
    return {
        "config": cfg,
        "status": report.status,
        "objective_kw": report.objective,
        "lower_bound_kw": report.lower_bound,
        "upper_bound_kw": report.upper_bound,
        "gap": report.gap,
        "wall_time_s": report.wall_time,
        "bound_escalations": report.bound_escalations,
        "plan": _plan_to_json(report.plan) if report.plan else None,
        "plan_summary": report.plan.to_dict() if report.plan else None,
        "bounds_trace": [
            {"iteration": it.iteration, "lower_kw": it.lower,
             "upper_kw": it.upper, "master_s": it.master_seconds,
             "sub_s": it.sub_seconds} for it in report.iterations],
        "worst_distributions": {
            tid: {"atoms": [list(a) for a in w.atoms],
                  "weights": list(w.weights),
                  "shed_values_kw": list(w.shed_values)}
            for tid, w in report.worst.items()},
    }


def _write_json(path: str | None, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _grid(spec: str) -> list:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise SystemExit(EXIT_USAGE)
    if step <= 0 or stop < start:
        raise SystemExit(EXIT_USAGE)
    vals = []
    v = start
    while v <= stop + 1e-9:
        vals.append(round(v, 10))
        v += step
    return vals


def _scaled_budget_case(case: NetworkCase, mult: float) -> NetworkCase:
    doc = case_to_dict(case)
    doc["budgets"] = {k: v * mult for k, v in doc["budgets"].items()}
    return case_from_dict(doc)


# -- commands ------------------------------------------------------------------------

def cmd_validate(args) -> int:
    case = _load_case(args.case)
    report = validate_case(case)
    if report.ok:
        print(f"{args.case or _BUNDLED}: OK "
              f"({len(case.nodes)} nodes, {len(case.lines)} lines, "
              f"{len(case.tracks)} tracks)")
        return EXIT_OK
    for v in report.violations:
        print(str(v), file=sys.stderr)
    return EXIT_VALIDATION


def cmd_solve_drre(args) -> int:
    case = _load_case(args.case)
    report = solve_drre(case, seed=args.seed, samples=args.wind_samples,
                        eps_multiplier=args.eps_multiplier,
                        options=_options(args))
    _write_json(args.out, _report_to_json(report, _resolved_config(args)))
    return EXIT_OK if report.converged else EXIT_SOLVER


def cmd_solve_ro(args) -> int:
    case = _load_case(args.case)
    report = solve_rre(case, seed=args.seed, samples=args.wind_samples,
                       options=_options(args))
    _write_json(args.out, _report_to_json(report, _resolved_config(args)))
    return EXIT_OK if report.converged else EXIT_SOLVER


def cmd_solve_fhi(args) -> int:
    case = _load_case(args.case)
    report = solve_fhi(case, eps_multiplier=args.eps_multiplier,
                       options=_options(args))
    _write_json(args.out, _report_to_json(report, _resolved_config(args)))
    return EXIT_OK if report.converged else EXIT_SOLVER


def cmd_solve_sp(args) -> int:
    case = _load_case(args.case)
    rep = solve_ddsre(case, seed=args.seed, wind_samples=args.wind_samples,
                      time_limit=args.time_limit)
    doc = {"config": _resolved_config(args), "status": rep.status,
           "objective_kw": rep.objective, "mode": rep.mode,
           "scenario_count": rep.scenario_count,
           "plan": _plan_to_json(rep.plan) if rep.plan else None,
           "plan_summary": rep.plan.to_dict() if rep.plan else None}
    _write_json(args.out, doc)
    return EXIT_OK if rep.status == "optimal" else EXIT_SOLVER


def cmd_evaluate(args) -> int:
    case = _load_case(args.case)
    with open(args.plan) as f:
        plan = _plan_from_json(json.load(f))
    ambs = build_all_ambiguity(case, seed=args.seed,
                               samples=args.wind_samples,
                               eps_multiplier=args.eps_multiplier)
    fixed = run_ccg(case, ambs, options=_options(args), fixed_plan=plan)
    if not fixed.converged:
        print(f"fixed-plan evaluation failed: {fixed.status}",
              file=sys.stderr)
        return EXIT_SOLVER
    kind = args.kind.upper()
    scen = sample_outage_scenarios(case, kind, args.n, args.seed,
                                   worst=fixed.worst, ambs=ambs, plan=plan)
    stats = out_of_sample_ewls(case, plan, scen)
    doc = {"config": _resolved_config(args),
           "worst_case_objective_kw": fixed.objective,
           "kind": kind, "samples": args.n,
           "mean_kw": stats.mean,
           "quartiles_kw": list(stats.quartiles),
           "whiskers_kw": list(stats.whiskers),
           "outliers_kw": stats.outliers,
           "by_track_mean_kw": stats.by_track_mean}
    _write_json(args.out, doc)
    if args.boxplot_csv:
        _append_boxplot_row(args.boxplot_csv, args.label or kind, stats)
    return EXIT_OK


def _append_boxplot_row(path: str, label: str, stats) -> None:
    header = ["strategy", "min_kw", "q1_kw", "median_kw", "q3_kw",
              "max_kw", "outliers_kw"]
    rows = []
    if os.path.exists(path):
        with open(path) as f:
            rows = list(csv.reader(f))[1:]
    shed = [v for _, v in stats.samples]
    rows.append([label, f"{min(shed):.6f}", f"{stats.quartiles[0]:.6f}",
                 f"{stats.quartiles[1]:.6f}", f"{stats.quartiles[2]:.6f}",
                 f"{max(shed):.6f}",
                 ";".join(f"{o:.6f}" for o in stats.outliers)])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def cmd_sample_outages(args) -> int:
    case = _load_case(args.case)
    ambs = build_all_ambiguity(case, seed=args.seed,
                               samples=args.wind_samples)
    kind = args.kind.upper()
    if kind == "WCD":
        with open(args.report) as f:
            rep = json.load(f)
        from .ccg import WorstCaseDistribution
        worst = {tid: WorstCaseDistribution(
                     track_id=tid,
                     atoms=[tuple(a) for a in w["atoms"]],
                     weights=tuple(w["weights"]),
                     shed_values=tuple(w["shed_values_kw"]))
                 for tid, w in rep["worst_distributions"].items()}
        plan = _plan_from_json(rep["plan"])
    else:
        with open(args.plan) as f:
            plan = _plan_from_json(json.load(f))
        worst = None
    scen = sample_outage_scenarios(case, kind, args.n, args.seed,
                                   worst=worst, ambs=ambs, plan=plan)
    doc = {"config": _resolved_config(args), "kind": kind,
           "by_track": {tid: [list(u) for u in us]
                        for tid, us in scen.by_track.items()}}
    _write_json(args.out, doc)
    return EXIT_OK


def cmd_sweep(args) -> int:
    case = _load_case(args.case)
    budgets = _grid(args.budget_grid) if args.budget_grid else [1.0]
    epsilons = _grid(args.epsilon_grid) if args.epsilon_grid else [1.0]
    os.makedirs(args.out, exist_ok=True)
    opts = _options(args)
    rows = []
    for bi, b in enumerate(budgets):
        scaled = _scaled_budget_case(case, b)
        sp = solve_ddsre(scaled, seed=args.seed,
                         wind_samples=args.wind_samples)
        ro = solve_rre(scaled, seed=args.seed, samples=args.wind_samples,
                       options=CCGOptions(tolerance=opts.tolerance,
                                          time_limit=opts.time_limit))
        if sp.plan is None or ro.plan is None:
            print(f"budget {b}: baseline solve failed", file=sys.stderr)
            return EXIT_SOLVER
        for ei, e in enumerate(epsilons):
            dro = solve_drre(scaled, seed=args.seed,
                             samples=args.wind_samples, eps_multiplier=e,
                             options=CCGOptions(tolerance=opts.tolerance,
                                                time_limit=opts.time_limit))
            if dro.plan is None:
                print(f"budget {b} eps {e}: DRO solve failed",
                      file=sys.stderr)
                return EXIT_SOLVER
            ambs = build_all_ambiguity(scaled, seed=args.seed,
                                       samples=args.wind_samples,
                                       eps_multiplier=e)
            vv = voda_vomi(scaled, ambs, dro.plan, sp.plan, ro.plan)
            rows.append([f"{b:.4f}", f"{e:.4f}",
                         f"{vv['f_dro']:.6f}", f"{vv['f_sp']:.6f}",
                         f"{vv['f_ro']:.6f}",
                         "" if vv["voda"] is None else f"{vv['voda']:.8f}",
                         "" if vv["vomi"] is None else f"{vv['vomi']:.8f}"])
            if args.verbose:
                print(f"[sweep] budget {b} eps {e}: f_dro {vv['f_dro']:.1f} "
                      f"voda {vv['voda']} vomi {vv['vomi']}",
                      file=sys.stderr)
    path = os.path.join(args.out, "voda_vomi.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["budget_multiplier", "eps_multiplier", "f_dro_kw",
                    "f_sp_kw", "f_ro_kw", "voda_ratio", "vomi_ratio"])
        w.writerows(rows)
    _write_json(os.path.join(args.out, "sweep_config.json"),
                _resolved_config(args))
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


_BOXPLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Boxplot of out-of-sample weighted load shedding per strategy.\"\"\"
import csv
import matplotlib.pyplot as plt

with open("boxplot.csv") as f:
    rows = list(csv.DictReader(f))
stats = [{"label": r["strategy"], "whislo": float(r["min_kw"]),
          "q1": float(r["q1_kw"]), "med": float(r["median_kw"]),
          "q3": float(r["q3_kw"]), "whishi": float(r["max_kw"]),
          "fliers": [float(x) for x in r["outliers_kw"].split(";") if x]}
         for r in rows]
fig, ax = plt.subplots()
ax.bxp(stats, showfliers=True)
ax.set_ylabel("weighted load shedding (kW)")
fig.savefig("boxplot.png", dpi=150)
"""

_SURFACE_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"VoDA / VoMI surfaces over the (budget, epsilon) grid.\"\"\"
import csv
import matplotlib.pyplot as plt

rows = []
with open("voda_vomi.csv") as f:
    rows = list(csv.DictReader(f))
for metric in ("voda_ratio", "vomi_ratio"):
    fig, ax = plt.subplots()
    budgets = sorted({r["budget_multiplier"] for r in rows})
    for b in budgets:
        pts = [(float(r["eps_multiplier"]), float(r[metric]))
               for r in rows if r["budget_multiplier"] == b and r[metric]]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=f"budget x{b}")
    ax.set_xlabel("epsilon multiplier")
    ax.set_ylabel(metric.replace("_ratio", "").upper())
    ax.legend()
    fig.savefig(metric.replace("_ratio", "") + ".png", dpi=150)
"""


def cmd_export_plots(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    wrote = []
    for name, script in (("boxplot.csv", _BOXPLOT_SCRIPT),
                         ("voda_vomi.csv", _SURFACE_SCRIPT)):
        src = os.path.join(args.metrics, name)
        if not os.path.exists(src):
            continue
        if os.path.getsize(src) == 0:
            print(f"empty metrics file: {src}", file=sys.stderr)
            return EXIT_VALIDATION
        dst = os.path.join(args.out, name)
        if os.path.abspath(src) != os.path.abspath(dst):
            with open(src) as f:
                data = f.read()
            with open(dst, "w") as f:
                f.write(data)
        plot = os.path.join(args.out,
                            "plot_" + name.replace(".csv", ".py"))
        with open(plot, "w") as f:
            f.write(script)
        wrote.append(plot)
    if not wrote:
        print(f"no metrics files found under {args.metrics}",
              file=sys.stderr)
        return EXIT_VALIDATION
    print("wrote " + ", ".join(wrote))
    return EXIT_OK


# -- parser wiring -------------------------------------------------------------------

def _add_common(p, tolerance=True):
    p.add_argument("--case", help="case JSON path (default: bundled 33-node)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--wind-samples", type=int, default=10_000)
    p.add_argument("--confidence", type=float, default=None)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--verbose", action="store_true")
    if tolerance:
        p.add_argument("--tolerance", type=float, default=1e-4)
        p.add_argument("--time-limit", type=float, default=None)
        p.add_argument("--master-time-limit", type=float, default=None)
        p.add_argument("--dump-models", default=None,
                       help="directory for LP/MPS model dumps")


def build_parser() -> _Parser:
    ap = _Parser(prog="drre", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="schema and consistency checks")
    p.add_argument("--case")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve-drre", help="distributionally robust solve")
    _add_common(p)
    p.add_argument("--eps-multiplier", type=float, default=1.0)
    p.set_defaults(func=cmd_solve_drre)

    p = sub.add_parser("solve-ro", help="robust (worst-scenario) baseline")
    _add_common(p)
    p.set_defaults(func=cmd_solve_ro)

    p = sub.add_parser("solve-sp", help="stochastic-programming baseline")
    _add_common(p)
    p.set_defaults(func=cmd_solve_sp)

    p = sub.add_parser("solve-fhi", help="fixed-hurricane-intensity solve")
    _add_common(p)
    p.add_argument("--eps-multiplier", type=float, default=1.0)
    p.set_defaults(func=cmd_solve_fhi)

    p = sub.add_parser("evaluate", help="out-of-sample plan evaluation")
    _add_common(p)
    p.add_argument("--plan", required=True, help="plan JSON path")
    p.add_argument("--kind", choices=["wcd", "rgd", "WCD", "RGD"],
                   required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--eps-multiplier", type=float, default=1.0)
    p.add_argument("--boxplot-csv", default=None,
                   help="append a boxplot row to this CSV")
    p.add_argument("--label", default=None, help="strategy label for CSVs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sample-outages", help="draw outage trajectories")
    _add_common(p, tolerance=False)
    p.add_argument("--kind", choices=["wcd", "rgd", "WCD", "RGD"],
                   required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--plan", help="plan JSON (RGD)")
    p.add_argument("--report", help="solve-drre report JSON (WCD)")
    p.set_defaults(func=cmd_sample_outages)

    p = sub.add_parser("sweep", help="budget and epsilon sweep")
    _add_common(p)
    p.add_argument("--budget-grid", help="start:stop:step multipliers")
    p.add_argument("--epsilon-grid", help="start:stop:step multipliers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-plots", help="emit CSVs and plot scripts")
    p.add_argument("--metrics", required=True,
                   help="directory holding metrics CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_plots)

    return ap


def dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0,) else 0
    try:
        return args.func(args)
    except CaseError as e:
        print(f"case error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        print(f"missing input file: {e.filename}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, ModelError, SamplingError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
