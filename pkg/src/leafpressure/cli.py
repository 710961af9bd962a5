"""Config-driven experiment runner.

Subcommands: ``preset <name>``, ``run <config>``, ``oracle <config>``, ``probe <config>``
and ``list-presets``. Outputs are CSV tables plus ``summary.json`` in the output directory.
Exit codes: 0 success, 2 invalid input, 3 contract violation, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import platform
import re
import sys
import time
from importlib import resources

import jsonschema
import numpy as np

from . import __version__, errors
from .cu import contraction_probe, cu_pressure_estimate
from .dynamics import Potential, make_splitting, make_toral_system
from .entropy import BoxPartition, entropy_table, misiurewicz_check
from .kernels import BACKEND
from .measures import (
    INVARIANCE_SLACK,
    build_lambda_n,
    build_mu_n,
    character_test_set,
    invariance_defect,
    systematic_resample,
    weight_deviation,
)
from .oracle import grid_context, oracle_pressure_bracket
from .parallel import set_threads
from .thermo import analytic_reference, leaf_pressure_table, pressure_estimate

EXIT_OK, EXIT_VALIDATION, EXIT_CONTRACT, EXIT_IO = 0, 2, 3, 4
MISIUREWICZ_SLACK = 1e-8

_CAT = [[2, 1], [1, 1]]
_PRODUCT = [[3, 2, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]]

PRESETS = {
    "catmap-entropy": {
        "system": {"matrix": _CAT},
        "potentials": [{"kind": "zero"}],
        "run": {"n_max": 18, "window": 6},
    },
    "catmap-geometric": {
        "system": {"matrix": _CAT},
        "potentials": [{"kind": "geometric", "q": 1}],
        "run": {"n_max": 18, "window": 6},
    },
    "q-sweep": {
        "system": {"matrix": _CAT},
        "potentials": [{"kind": "geometric", "q": q} for q in (0, 0.5, 1, 2)],
        "run": {"n_max": 18, "window": 6},
    },
    "trig-potential-oracle": {
        "system": {"matrix": _CAT},
        "potentials": [{"kind": "trig", "terms": [{"k": [1, 0], "c": 0.3}], "name": "trig"}],
        "leaf": {"resolution": 131073},
        "run": {"n_max": 16, "window": 6},
        "oracle": {"epsilons": [0.05, 0.02], "n": [8], "grid_per_axis": 400},
    },
    "product-counterexample": {
        "system": {"matrix": _PRODUCT},
        "splitting": {"mode": "u", "indices": [0]},
        "potentials": [{"kind": "zero"}],
        "run": {"n_max": 18, "window": 6},
        "oracle": {"epsilons": [0.05], "n": [8], "grid_per_axis": 400,
                   "factors": [[[3, 2], [1, 1]], [[2, 1], [1, 1]]]},
    },
    "cu-counterexample": {
        "system": {"matrix": _PRODUCT},
        "splitting": {"mode": "cu", "indices": [0, 1, 2]},
        "potentials": [{"kind": "zero"}],
        "leaf": {"resolution": 21},
        "run": {"n_max": 12, "window": 6},
    },
    "ugibbs": {
        "system": {"matrix": _CAT},
        "potentials": [{"kind": "geometric", "q": 1, "name": "phi"}],
        "run": {"n_max": 12, "window": 6},
    },
    "mme": {
        "system": {"matrix": _CAT},
        "potentials": [{"kind": "zero"}],
        "run": {"n_max": 12, "window": 6},
    },
    "perturbed-catmap": {
        "system": {"matrix": _CAT, "eps_p": 0.05},
        "potentials": [{"kind": "geometric", "q": 1, "name": "phi"}, {"kind": "zero"}],
        "leaf": {"h_max": 0.2},
        "run": {"n_max": 14, "window": 6},
        "checks": {"measure_n": 10},
    },
}


# -- config --------------------------------------------------------------------

def load_schema():
    return json.loads(resources.files("leafpressure").joinpath("config_schema.json").read_text())


def _fill_defaults(node, schema):
    """Insert schema defaults for absent keys of nested objects."""
    if schema.get("type") != "object" or not isinstance(node, dict):
        return
    for key, sub in schema.get("properties", {}).items():
        if key not in node and "default" in sub:
            node[key] = copy.deepcopy(sub["default"])
        if sub.get("type") == "object":
            if key not in node and key in ("splitting", "leaf", "run", "checks", "probe", "outputs"):
                node[key] = {}
            if key in node:
                _fill_defaults(node[key], sub)
        elif sub.get("type") == "array" and key in node:
            items = sub.get("items", {})
            for item in node[key]:
                _fill_defaults(item, items)


def validate_config(config):
    """Schema plus cross-field checks; returns a copy with defaults filled in."""
    schema = load_schema()
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise errors.ConfigError(exc.message, field=field) from None
    cfg = copy.deepcopy(config)
    _fill_defaults(cfg, schema)

    A = cfg["system"]["matrix"]
    d = len(A)
    if any(len(row) != d for row in A):
        raise errors.ConfigError("matrix must be square", field="system/matrix")
    idx = cfg["splitting"].get("indices")
    if idx is not None and max(idx) >= d:
        raise errors.ConfigError("splitting index out of range", field="splitting/indices")
    base = cfg["leaf"].get("base")
    if base is not None and len(base) != d:
        raise errors.ConfigError("base point has wrong dimension", field="leaf/base")
    for i, pot in enumerate(cfg["potentials"]):
        for t in pot.get("terms", []):
            if len(t["k"]) != d:
                raise errors.ConfigError("trig frequency has wrong dimension",
                                         field=f"potentials/{i}/terms")
    run = cfg["run"]
    if run["n_max"] < run["window"] + 1:
        raise errors.ConfigError("n_max must be at least window + 1", field="run/n_max")
    mn = cfg["checks"].get("measure_n")
    if mn is not None and mn > run["n_max"]:
        raise errors.ConfigError("measure_n exceeds n_max", field="checks/measure_n")
    for i, F in enumerate(cfg.get("oracle", {}).get("factors", [])):
        if not F or any(len(row) != len(F) for row in F):
            raise errors.ConfigError("factor matrix must be square", field=f"oracle/factors/{i}")
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise errors.ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    return validate_config(config)


def preset_config(name):
    if name not in PRESETS:
        raise errors.UnknownPreset(f"unknown preset {name!r}", known=sorted(PRESETS))
    cfg = copy.deepcopy(PRESETS[name])
    cfg["name"] = name
    return validate_config(cfg)


def make_potential(entry):
    kind = entry["kind"]
    if kind == "zero":
        pot = Potential.zero()
    elif kind == "geometric":
        pot = Potential.geometric(entry.get("q", 1.0))
    else:
        pot = Potential.trig({tuple(t["k"]): t["c"] for t in entry.get("terms", [])})
    if entry.get("offset"):
        pot = pot.shifted(entry["offset"])
    label = entry.get("name") or (f"geometric_q{entry.get('q', 1.0):g}" if kind == "geometric" else kind)
    return Potential(pot.kind, pot.q, pot.terms, pot.offset, label)


def _labels(potentials):
    out, seen = [], {}
    for pot in potentials:
        lab = re.sub(r"[^A-Za-z0-9._-]", "_", pot.name)
        seen[lab] = seen.get(lab, 0) + 1
        out.append(lab if seen[lab] == 1 else f"{lab}_{seen[lab]}")
    return out


# -- output --------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    """Plain CSV: header row, '.' decimal, 17 significant digits, LF endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _finite(obj, where="summary"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _finite(v, f"{where}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise errors.ContractViolation("non-finite value in summary", field=where, value=str(obj))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def versions():
    return {"leafpressure": __version__, "numpy": np.__version__,
            "python": platform.python_version(), "backend": BACKEND}


# -- pipeline ------------------------------------------------------------------

class Context:
    """Objects built from a validated config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.system = make_toral_system(cfg["system"]["matrix"], cfg["system"].get("eps_p", 0.0))
        sp = cfg["splitting"]
        self.splitting = make_splitting(self.system, sp.get("indices"), sp.get("mode", "u"))
        self.potentials = [make_potential(p) for p in cfg["potentials"]]
        self.labels = _labels(self.potentials)
        leaf = cfg["leaf"]
        self.base = None if leaf.get("base") is None else np.asarray(leaf["base"], dtype=np.float64)


def _check_measures(ctx, history, out_dir, summary):
    cfg, system = ctx.cfg, ctx.system
    checks = cfg["checks"]
    n_max = cfg["run"]["n_max"]
    n_meas = checks.get("measure_n") or n_max
    part = BoxPartition(checks["partition_m"])
    tests = character_test_set(system.dim, checks["characters"])
    by_time = {c.time: c for c in history}
    budget = cfg["outputs"]["measure_budget"]
    seed = cfg["run"]["seed"]

    defect_max, defect_fail, slacks, devs, misi = 0.0, 0, [], {}, []
    for i, label in enumerate(ctx.labels):
        lam = build_lambda_n(by_time[n_meas], i, leaf_id=ctx.splitting.mode)
        mu = build_mu_n(history, i, n_meas, system, leaf_id=ctx.splitting.mode)
        devs[label] = weight_deviation(lam, by_time[n_meas])
        rep = invariance_defect(mu, system, tests, INVARIANCE_SLACK)
        defect_max = max(defect_max, rep.max_defect)
        defect_fail += rep.failures
        write_csv(os.path.join(out_dir, f"lambda_{label}.csv"),
                  [f"x{j}" for j in range(system.dim)] + ["mass"], lam.rows())
        mu_out = mu if len(mu) <= budget else systematic_resample(mu, budget, seed)
        write_csv(os.path.join(out_dir, f"mu_{label}.csv"),
                  [f"x{j}" for j in range(system.dim)] + ["mass"], mu_out.rows())
        write_csv(os.path.join(out_dir, f"entropy_{label}.csv"), ["q", "H", "H_over_q"],
                  entropy_table(mu, part, system, checks["entropy_q"]))
        for n in checks["misiurewicz_n"]:
            if n > n_max:
                continue
            lam_n = build_lambda_n(by_time[n], i)
            mu_n = build_mu_n(history, i, n, system)
            for q in checks["misiurewicz_q"]:
                if q >= n:
                    continue
                r = misiurewicz_check(lam_n, mu_n, part, q, system)
                slacks.append(r.slack)
                misi.append(dict(r.as_dict(), potential=label))
    summary["measure_n"] = n_meas
    summary["invariance_defect_max"] = defect_max
    summary["invariance_defect_failures"] = defect_fail
    summary["invariance_bound"] = 2.0 / n_meas + INVARIANCE_SLACK
    summary["weight_deviation"] = devs
    summary["misiurewicz_min_slack"] = min(slacks) if slacks else None
    summary["misiurewicz"] = misi
    if defect_fail:
        raise errors.ContractViolation("invariance defect above 2||F||/n + slack",
                                       observed=defect_max, failures=defect_fail,
                                       bound=summary["invariance_bound"])
    if slacks and min(slacks) < -MISIUREWICZ_SLACK:
        raise errors.ContractViolation("Misiurewicz slack negative",
                                       observed=min(slacks), bound=-MISIUREWICZ_SLACK)


def _leaf_part(ctx, out_dir, summary):
    cfg = ctx.cfg
    leaf, run = cfg["leaf"], cfg["run"]
    cu = ctx.splitting.mode == "cu"
    if cu:
        series, history, profiles = [], None, None
        for pot in ctx.potentials:
            res = cu_pressure_estimate(ctx.system, ctx.splitting, pot, ctx.base, leaf["delta"],
                                       leaf["resolution"], run["n_max"], run["window"],
                                       keep_history=True,
                                       probe_pairs=cfg["probe"]["pair_samples"], seed=run["seed"])
            series.append(res.series)
            history = history or res.history
            profiles = res.profile
            summary["warnings"].extend(res.warnings)
        if len(ctx.potentials) > 1:
            # measures need one shared history carrying every potential
            _, history = leaf_pressure_table(ctx.system, ctx.splitting, ctx.potentials, ctx.base,
                                             leaf["delta"], leaf["resolution"], run["n_max"],
                                             leaf.get("h_max"), keep_history=True,
                                             max_points=leaf["max_points"])
        summary["contraction_verdict"] = profiles.verdict
        summary["contraction_profile"] = profiles.as_dict()
        write_csv(os.path.join(out_dir, "profile.csv"), ["n", "r_min", "rate"], profiles.rows())
    else:
        series, history = leaf_pressure_table(ctx.system, ctx.splitting, ctx.potentials, ctx.base,
                                              leaf["delta"], leaf["resolution"], run["n_max"],
                                              leaf.get("h_max"), keep_history=True,
                                             max_points=leaf["max_points"])
    estimates, refs = [], []
    for label, pot, s in zip(ctx.labels, ctx.potentials, series):
        est = pressure_estimate(s, run["window"])
        estimates.append(dict(est.as_dict(), potential=label))
        write_csv(os.path.join(out_dir, f"series_{label}.csv"), ["n", "log_Z", "slope_diff"], s.rows())
        if ctx.system.is_linear and (pot.kind == "geometric" or pot.is_constant):
            ref = analytic_reference(ctx.system, ctx.splitting, pot)
            flagged = abs(ref.gap) >= cfg["checks"]["gap_flag"]
            refs.append({"potential": label, "leaf_growth": ref.leaf_growth,
                         "true_pressure": ref.true_pressure, "gap": ref.gap,
                         "mismatch_flagged": flagged})
            if flagged:
                summary["warnings"].append({
                    "level": "WARNING", "code": "leaf-growth-mismatch", "potential": label,
                    "message": "leaf growth differs from the variational pressure", "gap": ref.gap})
    if any(e["non_convergence"] for e in estimates):
        summary["warnings"].append({"level": "WARNING", "code": "non-convergence",
                                    "message": "tail slopes oscillate above tolerance"})
    summary["pressure_estimate"] = estimates
    if refs:
        summary["analytic_reference"] = refs
    _check_measures(ctx, history, out_dir, summary)
    return series


def _oracle_part(ctx, out_dir, summary, leaf_estimates=None):
    oc = ctx.cfg["oracle"]
    rows, records = [], []
    jobs = []
    if oc.get("factors"):
        for j, F in enumerate(oc["factors"]):
            fsys = make_toral_system(F)
            fsp = make_splitting(fsys)
            ref = analytic_reference(fsys, fsp, Potential.zero()).true_pressure
            jobs.append((f"factor{j}", fsys, fsp, Potential.zero(), ref))
    else:
        ref = None if leaf_estimates is None else leaf_estimates[0]["value"]
        jobs.append(("system", ctx.system, ctx.splitting, ctx.potentials[0], ref))
    for label, sys_, sp, pot, ref in jobs:
        ctx_o = grid_context(sys_, oc["grid_per_axis"], max(oc["n"]), oc["jitter"], ctx.cfg["run"]["seed"])
        for n in oc["n"]:
            for eps in oc["epsilons"]:
                n_ref = n // 2 if n >= 2 else None
                r = oracle_pressure_bracket(ctx_o, pot, n, eps, sp, n_ref)
                rows.append((label,) + r.row())
                rec = dict(r.as_dict(), target=label, reference=ref)
                if ref is not None:
                    rec["midpoint_deviation"] = r.midpoint - ref
                records.append(rec)
    write_csv(os.path.join(out_dir, "oracle.csv"),
              ["target", "n", "epsilon", "set_size", "log_sum", "lower", "upper"], rows)
    summary["oracle_bracket"] = records


def run_pipeline(cfg, out_dir, task="run"):
    """Execute ``task`` (``run``, ``oracle`` or ``probe``) and write outputs; returns the summary."""
    t0 = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    ctx = Context(cfg)
    summary = {"name": cfg.get("name", ""), "task": task, "status": "ok", "warnings": [],
               "system": ctx.system.describe(), "splitting": ctx.splitting.describe()}
    if task == "run":
        _leaf_part(ctx, out_dir, summary)
        if "oracle" in cfg:
            _oracle_part(ctx, out_dir, summary, summary["pressure_estimate"])
    elif task == "oracle":
        if "oracle" not in cfg:
            raise errors.ConfigError("config has no oracle section", field="oracle")
        _oracle_part(ctx, out_dir, summary)
    elif task == "probe":
        if ctx.splitting.mode != "cu":
            raise errors.ConfigError("probe needs splitting mode 'cu'", field="splitting/mode")
        pr = cfg["probe"]
        prof = contraction_probe(ctx.system, ctx.splitting, ctx.base, cfg["leaf"]["delta"],
                                 cfg["run"]["n_max"], pr["pair_samples"], cfg["run"]["seed"],
                                 pr["rate_tol"], cfg["run"]["window"])
        write_csv(os.path.join(out_dir, "profile.csv"), ["n", "r_min", "rate"], prof.rows())
        summary["contraction_verdict"] = prof.verdict
        summary["contraction_profile"] = prof.as_dict()
    else:
        raise ValueError(f"unknown task {task!r}")
    summary["wallclock"] = time.perf_counter() - t0
    summary["versions"] = versions()
    summary["config"] = cfg
    _finite(summary)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


# -- entry point ---------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="leafpressure", description=__doc__.splitlines()[0])
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--seed", type=int, help="override run.seed")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-presets")
    pp = sub.add_parser("preset")
    pp.add_argument("name")
    for name in ("run", "oracle", "probe"):
        sub.add_parser(name).add_argument("config")
    return p


def _exit_code(exc):
    if isinstance(exc, errors.ConfigError):
        return EXIT_VALIDATION
    if isinstance(exc, (errors.InvalidSystem, errors.SplittingError, errors.DimensionUnsupported)):
        return EXIT_VALIDATION
    if isinstance(exc, errors.LeafPressureError):
        return EXIT_CONTRACT
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "list-presets":
        for name in PRESETS:
            print(name)
        return EXIT_OK
    set_threads(args.threads)
    out_dir = args.out
    try:
        if args.command == "preset":
            cfg = preset_config(args.name)
            task = "run"
        else:
            cfg = load_config(args.config)
            task = args.command
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        name = cfg.get("name") or "experiment"
        out_dir = out_dir or cfg["outputs"].get("directory") or os.path.join("out", name)
        summary = run_pipeline(cfg, out_dir, task)
    except (errors.LeafPressureError, OSError) as exc:
        code = _exit_code(exc)
        if isinstance(exc, errors.LeafPressureError):
            record = exc.record()
        else:
            record = {"error": "io-error", "message": str(exc)}
        record["exit_code"] = code
        print(json.dumps(record, sort_keys=True, default=str), file=sys.stderr)
        if out_dir and code != EXIT_IO:
            try:
                os.makedirs(out_dir, exist_ok=True)
                with open(os.path.join(out_dir, "failure.json"), "w", encoding="utf-8") as fh:
                    json.dump(record, fh, indent=2, sort_keys=True, default=str)
                    fh.write("\n")
            except OSError:
                pass
        return code
    print(json.dumps({"name": summary["name"], "status": summary["status"],
                      "out": out_dir, "warnings": len(summary["warnings"])}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
