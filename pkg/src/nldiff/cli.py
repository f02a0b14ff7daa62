"""Command-line front end.

Every run resolves one config (bundled preset or TOML/JSON file, then
subcommand flags, then ``--set section.key=value`` overrides), writes its
tables into a scratch directory and moves them into ``output_dir`` only
when the run finishes. ``manifest.json`` echoes the resolved config with
content hashes, so passing it back through ``--config`` repeats the run.

Exit status: 0 on success, 2 when a diagnostic check fails, 1 on a usage
or config error (no files are written then).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, _backend
from . import analysis, config, evolution, geometry, stochastic, viscous
from .operator import CompatibilityError

EXIT_OK, EXIT_USAGE, EXIT_DIAGNOSTIC = 0, 1, 2

_LAYER_COLUMNS = ("epsilon", "sup_dist", "u_eps_near_left", "u_eps_near_right",
                  "u_limit_left", "u_limit_right")


class _Outputs:
    """Tables and documents collected in memory, then written in one go."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.files: dict[str, bytes] = {}

    def table(self, stem: str, columns, rows) -> None:
        if self.fmt == "json":
            self.document(stem, [{c: r[c] for c in columns} for r in rows])
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
        self.files[stem + ".csv"] = buf.getvalue().encode()

    def document(self, stem: str, obj) -> None:
        self.files[stem + ".json"] = _dumps(obj)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _dumps(obj) -> bytes:
    return (json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


# ---------------------------------------------------------------- commands


def _solve(p: config.Problem, out: _Outputs, res: dict) -> bool:
    run = evolution.solve(p.u0, p.phi, p.kernel, p.solver_config())
    x = p.geometry.closure_nodes
    c0 = run.snapshots[0].closure_values
    rows = [{"t": s.time, "x": xi, "u": ui} for s in run.snapshots
            for xi, ui in zip(x, s.closure_values)]
    out.table("snapshots", ("t", "x", "u"), rows)
    diag = []
    for s, d in zip(run.snapshots, run.diagnostics):
        diag.append(dict(d, drift=float(np.abs(s.closure_values - c0).max())))
    out.document("diagnostics", diag)
    bound = max(float(np.abs(c0).max()), p.phi.bounded_sup(p.geometry))
    sup = max(d["sup"] for d in diag)
    drift = max(d["drift"] for d in diag)
    res.update(max_drift=drift, max_sup=sup, sup_bound=bound, steps=run.info["steps"],
               method=run.info["method"])
    ok = sup <= bound * (1.0 + 1e-12) + 1e-300
    limit = p.cfg["analysis"]["max_drift"]
    if limit is not None:
        res["max_drift_limit"] = float(limit)
        ok = ok and drift <= float(limit)
    return ok


def _viscous(p: config.Problem, out: _Outputs, res: dict) -> bool:
    eps = p.cfg["viscous"]["epsilons"]
    rep = viscous.boundary_layer_study(p.u0, p.kernel, eps, p.viscous_config(eps[0]))
    out.table("layer", _LAYER_COLUMNS, rep.table())
    lim = rep.limit.final.closure_values
    res.update(limit_boundary_value={"left": float(lim[0]), "right": float(lim[-1])},
               strictly_decreasing=rep.decreasing, nonincreasing=rep.nonincreasing,
               boundary_max=max(r.boundary_max for r in rep.rows),
               hypothesis=rep.hypothesis, notes=rep.notes)
    return rep.ok


def _mc_run(p: config.Problem):
    mc = stochastic.simulate(p.u0, p.kernel, p.mc_config())
    ref = None
    if mc.mode == stochastic.DIRICHLET_ABSORBING:
        m = p.cfg["mc"]
        cfg = p.solver_config(dt=float(m["solver_dt"]), T=float(m["t_final"]), store_every=10**9)
        run = evolution.solve(p.u0, p.phi, p.kernel, cfg)
        ref = stochastic.compare_density(mc, run.final)
    return mc, ref


def _mc(p: config.Problem, out: _Outputs, res: dict) -> bool:
    mc, ref = _mc_run(p)
    out.table("mc_density", ("x", "density", "stderr"),
              [{"x": a, "density": b, "stderr": c} for a, b, c in zip(mc.x, mc.density, mc.stderr)])
    summary = dict(mc.summary(), l1_vs_solver=None if ref is None else ref.l1)
    out.document("mc_summary", summary)
    res.update(summary)
    if ref is not None:
        res["aggregated_stderr"] = ref.aggregated_stderr
    return _mc_ok(p, ref)


def _mc_ok(p: config.Problem, ref) -> bool:
    limit = p.cfg["analysis"]["mc_l1_max"]
    return limit is None or ref is None or ref.l1 <= float(limit)


def _lambda_gamma(p: config.Problem, out: _Outputs, res: dict) -> bool:
    verdict = geometry.check_lambda_conditions(p.geometry, p.kernel)
    reps = [geometry.lambda_gamma(p.geometry, p.kernel, float(e)) for e in p.cfg["analysis"]["etas"]]
    out.table("lambda_gamma", ("eta", "lambda", "gamma", "bound"),
              [{"eta": r.eta, "lambda": r.lam, "gamma": r.gamma, "bound": verdict.bound} for r in reps])
    res.update(branch=verdict.kind.value, outside_mass=verdict.outside_mass,
               witness=verdict.witness,
               argmax_lambda=[list(r.argmax_lambda) for r in reps],
               argmax_gamma=[list(r.argmax_gamma) for r in reps])
    ok = all(r.lam <= verdict.bound + 1e-12 for r in reps)
    if verdict.kind is geometry.LambdaCondition.FORCES_LAMBDA_EQ_1:
        ok = ok and all(r.lam == 1.0 for r in reps)
    return ok


def _moduli(p: config.Problem, out: _Outputs, res: dict) -> bool:
    run = evolution.solve(p.u0, p.phi, p.kernel, p.solver_config())
    lg = [geometry.lambda_gamma(p.geometry, p.kernel, float(e)) for e in p.cfg["analysis"]["etas"]]
    rep = analysis.check_bounds(run, lg, p.cfg["analysis"]["tol_quad"])
    out.table("moduli", ("t", "eta", "omega", "bound", "branch"), rep.rows())
    res.update({"lambda": [r.lam for r in lg]})
    res.update(gamma=[r.gamma for r in lg], tol_quad=rep.tol_quad,
               violations=rep.violations, worst_excess=rep.worst_excess,
               theta=None if rep.theta is None else rep.theta.tolist())
    return rep.ok is not False


def _positivity(p: config.Problem, out: _Outputs, res: dict) -> bool:
    run = evolution.solve(p.u0, p.phi, p.kernel, p.solver_config())
    rep = analysis.positivity_study(run, p.kernel, float(p.cfg["analysis"]["tol_pos"]))
    out.table("positivity", ("x", "first_positive_time"), rep.rows())
    res.update(hypothesis=rep.hypothesis, eta_supp=rep.eta_supp, t_required=rep.t_required,
               all_positive_by=rep.all_positive_by, stays_positive=rep.stays_positive,
               never_positive=len(rep.counterexample), notes=rep.notes)
    return rep.ok is not False


def _compare_mc(p: config.Problem, out: _Outputs, res: dict) -> bool:
    mc, ref = _mc_run(p)
    if ref is None:
        raise config.ConfigError("compare mc needs mc.mode = 'dirichlet'")
    doc = {"l1": ref.l1, "aggregated_stderr": ref.aggregated_stderr,
           "max_abs_zscore": float(np.abs(ref.zscores).max()), **mc.summary()}
    out.document("compare", doc)
    res.update(doc)
    return _mc_ok(p, ref)


def _compare_picard(p: config.Problem, out: _Outputs, res: dict) -> bool:
    a = evolution.solve(p.u0, p.phi, p.kernel, p.solver_config(mode=evolution.EXPLICIT))
    b = evolution.solve(p.u0, p.phi, p.kernel, p.solver_config(mode=evolution.PICARD))
    diff = float(np.abs(a.closure_array() - b.closure_array()).max())
    ratios = [evolution.update_ratios(u) for u in b.info["updates"]]
    late = [float(r[2:].max()) for r in ratios if len(r) > 2]
    doc = {"sup_diff": diff, "iterations": b.info["iterations"],
           "max_late_ratio": max(late) if late else None}
    out.document("compare", doc)
    res.update(doc)
    an = p.cfg["analysis"]
    ok = diff <= float(an["picard_sup_diff"])
    if an["picard_ratio"] is not None and late:
        ok = ok and max(late) <= float(an["picard_ratio"])
    return ok


def _compare_viscous(p: config.Problem, out: _Outputs, res: dict) -> bool:
    eps = p.cfg["viscous"]["epsilons"]
    rep = viscous.boundary_layer_study(p.u0, p.kernel, eps, p.viscous_config(eps[0]))
    out.table("layer", _LAYER_COLUMNS, rep.table())
    lim = rep.limit.final.closure_values
    doc = {"epsilon": [r.epsilon for r in rep.rows], "sup_dist": [r.sup_dist for r in rep.rows],
           "strictly_decreasing": rep.decreasing,
           "limit_boundary_value": {"left": float(lim[0]), "right": float(lim[-1])}}
    out.document("compare", doc)
    res.update(doc)
    return rep.ok


RUNNERS = {
    "solve": _solve,
    "viscous": _viscous,
    "mc": _mc,
    "lambda-gamma": _lambda_gamma,
    "moduli": _moduli,
    "positivity": _positivity,
    "compare mc": _compare_mc,
    "compare picard": _compare_picard,
    "compare viscous": _compare_viscous,
}


# ---------------------------------------------------------------- plumbing


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _publish(files: dict, dest: Path) -> None:
    """Write into a scratch directory beside ``dest`` and move the files in."""
    dest.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".nldiff-", dir=dest.parent))
    try:
        for name, data in files.items():
            (scratch / name).write_bytes(data)
        dest.mkdir(exist_ok=True)
        for name in files:
            os.replace(scratch / name, dest / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def execute(cfg: dict, command: str) -> tuple[int, dict]:
    """Run ``command`` on a resolved config; return the exit status and file contents."""
    cfg = dict(cfg, command=command)
    prob = config.Problem(cfg)
    out = _Outputs(cfg["format"])
    res: dict = {}
    ok = RUNNERS[command](prob, out, res)
    manifest = {
        "package": {"name": "nldiff", "version": __version__},
        "command": command,
        "config": cfg,
        "hashes": {"kernel_weights": prob.kernel.digest(), "geometry_tags": prob.geometry.digest()},
        "derived": {"J": prob.kernel.J, "truncated_mass": prob.kernel.truncated_mass,
                    "nodes": prob.geometry.n + 1, "pad": prob.geometry.pad},
        "results": res,
        "status": "ok" if ok else "diagnostic_failure",
        "outputs": {name: _digest(data) for name, data in sorted(out.files.items())},
    }
    files = dict(out.files)
    files["manifest.json"] = _dumps(manifest)
    return (EXIT_OK if ok else EXIT_DIAGNOSTIC), files


def _csv_floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", "-c", help="TOML or JSON config (an emitted manifest.json works too)")
    src.add_argument("--preset", help="start from a bundled preset")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable; values parse as JSON)")
    common.add_argument("--out", "-o", help="output directory (overrides output_dir)")
    common.add_argument("--format", choices=("csv", "json"), help="table format")

    ap = argparse.ArgumentParser(prog="nldiff", description="Nonlocal diffusion with Dirichlet data.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common], help="integrate the nonlocal problem")
    v = sub.add_parser("viscous", parents=[common], help="vanishing-viscosity sweep")
    v.add_argument("--epsilons", type=_csv_floats)
    m = sub.add_parser("mc", parents=[common], help="particle estimate of the density")
    m.add_argument("--particles", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--mode", choices=(stochastic.DIRICHLET_ABSORBING, stochastic.WHOLE_SPACE))
    lg = sub.add_parser("lambda-gamma", parents=[common], help="translation overlap constants")
    lg.add_argument("--eta", type=_csv_floats)
    mo = sub.add_parser("moduli", parents=[common], help="moduli of continuity against their envelopes")
    mo.add_argument("--etas", type=_csv_floats)
    sub.add_parser("positivity", parents=[common], help="first time each node turns positive")
    cp = sub.add_parser("compare", parents=[common], help="cross-method checks")
    cp.add_argument("what", choices=("mc", "picard", "viscous"))
    cp.add_argument("--epsilons", type=_csv_floats)
    cp.add_argument("--particles", type=int)
    cp.add_argument("--seed", type=int)
    sub.add_parser("run", parents=[common], help="run the command recorded in the config")
    sub.add_parser("presets", help="list bundled presets")
    pr = sub.add_parser("preset", parents=[common], help="run a bundled preset")
    pr.add_argument("name", choices=config.PRESETS)
    return ap


def _flag_overrides(args) -> dict:
    patch: dict = {}
    pick = lambda name: getattr(args, name, None)
    if pick("epsilons") is not None:
        patch.setdefault("viscous", {})["epsilons"] = args.epsilons
    for key in ("particles", "seed", "mode"):
        if pick(key) is not None:
            patch.setdefault("mc", {})[key] = getattr(args, key)
    for key in ("eta", "etas"):
        if pick(key) is not None:
            patch.setdefault("analysis", {})["etas"] = getattr(args, key)
    if pick("format") is not None:
        patch["format"] = args.format
    if pick("out") is not None:
        patch["output_dir"] = args.out
    return patch


def _load(args) -> tuple[dict, str]:
    cfg = config.defaults()
    base = None
    if args.command == "preset":
        cfg = config.merge(cfg, config.read_preset(args.name))
    elif args.preset:
        cfg = config.merge(cfg, config.read_preset(args.preset))
    elif args.config:
        data = config.read_file(args.config)
        base = Path(args.config).resolve().parent
        cfg = config.merge(cfg, data)
    cfg = config.merge(cfg, _flag_overrides(args))
    cfg = config.apply_overrides(cfg, args.overrides)
    table = cfg["kernel"]["table_path"]
    if table and base is not None and not Path(table).is_absolute():
        cfg["kernel"]["table_path"] = str(base / table)
    if args.command == "compare":
        command = f"compare {args.what}"
    elif args.command in ("run", "preset"):
        command = cfg["command"]
        if command is None:
            raise config.ConfigError("config does not name a command")
    else:
        command = args.command
    cfg = config.resolve(dict(cfg, command=command))
    return cfg, command


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "presets":
        for name in config.PRESETS:
            print(name)
        return EXIT_OK
    try:
        cfg, command = _load(args)
        status, files = execute(cfg, command)
    except (config.ConfigError, CompatibilityError) as exc:
        print(f"nldiff: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError, evolution.SolverError, np.linalg.LinAlgError) as exc:
        print(f"nldiff: {exc}", file=sys.stderr)
        return EXIT_USAGE
    dest = Path(cfg["output_dir"])
    _publish(files, dest)
    label = "ok" if status == EXIT_OK else "diagnostic check failed"
    print(f"nldiff {command}: {label} ({', '.join(sorted(files))} in {dest}; backend {_backend.NAME})")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
