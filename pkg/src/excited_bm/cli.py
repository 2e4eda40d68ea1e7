"""Command-line front end: ``excited-bm <subcommand> [options]``.

Every run resolves its configuration as documented defaults, then the
``--config`` JSON file (top-level keys, then the section named after the
subcommand), then command-line flags.  The resolved configuration, seed,
library versions and wall time go to ``manifest.json`` in the output
directory next to ``report.csv`` and any data CSVs.  Floats are written with
17 significant digits so re-runs are bit-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import default_jobs, derive_stream
from .criteria import REPORT_COLUMNS, PreconditionError, classify
from .ensemble import (RESULT_COLUMNS, ExperimentInvalid, verify_clt, verify_d_infty, verify_drift_identity,
                       verify_duality, verify_lln)
from .erw_check import speed_trend
from .excitation import ProfileError, load_table_csv, make_profile, truncated
from .rayknight import compare_invariant, simulate_z, terminal_samples, write_samples_csv, write_zpath_csv
from .sde_sim import (ConfigError, SimConfig, occupation_identity_residual, simulate_path, write_field_csv,
                      write_path_csv)

COMMON = {"seed": 0, "x_max": 1e6, "tol": 1e-9, "profile": {"kind": "single_cookie", "delta": 3.0}}

DEFAULTS = {
    "classify": {"mode": "auto", "band": 0.05},
    "simulate": {"dt": 1e-4, "bin_width": None, "t_max": 10.0, "x0": 0.0, "n_paths": 1, "record_stride": 100,
                 "stop_level": None},
    "rayknight": {"a": 50.0, "dx": 1e-3, "n_paths": 5000},
    "verify-lln": {"dt": 1e-4, "bin_width": None, "t_grid": [50.0, 100.0, 200.0], "n_paths": 2000},
    "verify-clt": {"dt": 1e-4, "bin_width": None, "t": 400.0, "n_paths": 2000},
    "drift-identity": {"dt": 1e-4, "bin_width": None, "a": 5.0, "n_paths": 5000, "t_max": 1000.0},
    "d-infty": {"dt": 1e-4, "bin_width": None, "M": 30.0, "n_paths": 5000, "t_max": 1000.0,
                "check_doubling": False},
    "duality": {"dt": 1e-4, "bin_width": None, "a": 20.0, "depths": [1.0, 2.0], "n_paths": 2000, "dx": 1e-3,
                "t_max": 1000.0, "bin_average": False},
    "erw": {"deltas": [0.5, 1.5, 2.5, 4.0], "n_steps": 100000, "n_walks": 200},
    "sweep": {"param": "delta", "start": -6.0, "stop": 6.0, "step": 0.5},
}

# command-line overrides: flag -> (config key, type)
OVERRIDES = {
    "--dt": ("dt", float), "--bin-width": ("bin_width", float), "--t-max": ("t_max", float),
    "--x0": ("x0", float), "--dx": ("dx", float), "--a": ("a", float), "--n-paths": ("n_paths", int),
    "--t": ("t", float), "--M": ("M", float), "--record-stride": ("record_stride", int),
    "--stop-level": ("stop_level", float), "--mode": ("mode", str), "--band": ("band", float),
    "--n-steps": ("n_steps", int), "--n-walks": ("n_walks", int), "--start": ("start", float),
    "--stop": ("stop", float), "--step": ("step", float), "--sweep-param": ("param", str),
}
LIST_OVERRIDES = {"--t-grid": "t_grid", "--depths": "depths", "--deltas": "deltas"}


class ValidationError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return v


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def build_profile(spec: dict, base: Path | None = None):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise ValidationError("profile needs a 'kind'")
    if kind == "custom_table" and "path" in spec:
        path = Path(spec.pop("path"))
        if base is not None and not path.is_absolute():
            path = base / path
        return load_table_csv(path, **spec)
    if kind == "truncated":
        return truncated(build_profile(spec["inner"], base), spec["n"])
    return make_profile(kind, **spec)


def resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    base = None
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None
        base = path.parent
        section = data.pop(command, {})
        for k, v in data.items():
            if k not in DEFAULTS:
                cfg[k] = v
        cfg.update(section)
        cfg["_config_dir"] = str(base)
    if args.profile:
        cfg["profile"] = {"kind": args.profile}
    if args.param:
        cfg["profile"] = dict(cfg["profile"])
        for item in args.param:
            key, _, value = item.partition("=")
            try:
                cfg["profile"][key] = json.loads(value)
            except json.JSONDecodeError:
                cfg["profile"][key] = value
    if args.table:
        cfg["profile"] = {"kind": "custom_table", "path": args.table}
    for flag, (key, typ) in OVERRIDES.items():
        val = getattr(args, flag.lstrip("-").replace("-", "_"), None)
        if val is not None:
            cfg[key] = typ(val)
    for flag, key in LIST_OVERRIDES.items():
        val = getattr(args, flag.lstrip("-").replace("-", "_"), None)
        if val is not None:
            cfg[key] = [float(v) for v in val.split(",")]
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.tol is not None:
        cfg["tol"] = args.tol
    if args.x_max is not None:
        cfg["x_max"] = args.x_max
    if int(cfg["seed"]) < 0:
        raise ValidationError("seed must be a nonnegative integer")
    for key in ("n_paths", "n_walks", "n_steps"):
        if key in cfg and int(cfg[key]) < 0:
            raise ValidationError(f"{key} must be nonnegative")
    return cfg


def _sim_config(cfg: dict, **extra) -> SimConfig:
    kw = {k: cfg[k] for k in ("dt", "bin_width", "t_max", "x0") if k in cfg}
    kw.update(extra)
    return SimConfig(**kw)


# ---------------------------------------------------------------------------
# subcommands; each returns (passed, report columns, report rows, extra info)

def cmd_classify(cfg, prof, out, jobs):
    rep = classify(prof, x_max=cfg["x_max"], tol=cfg["tol"], mode=cfg["mode"], band=cfg["band"])
    rec = rep.to_record()
    return True, REPORT_COLUMNS, [rep.csv_row()], {"report": rec}


def _sweep_values(cfg):
    n = int(round((cfg["stop"] - cfg["start"]) / cfg["step"]))
    return [round(cfg["start"] + i * cfg["step"], 12) for i in range(n + 1)]


def _expected_band(delta):
    a = abs(delta)
    if a <= 1:
        return "RECURRENT", False, False
    return ("TRANSIENT_RIGHT" if delta > 0 else "TRANSIENT_LEFT"), a > 2, a > 4


def cmd_sweep(cfg, prof, out, jobs):
    base = dict(cfg["profile"])
    rows, checks = [], []
    for v in _sweep_values(cfg):
        spec = dict(base)
        spec[cfg["param"]] = v
        p = build_profile(spec, Path(cfg.get("_config_dir", ".")))
        rep = classify(p, x_max=cfg["x_max"], tol=cfg["tol"])
        rows.append(rep.csv_row())
        if base.get("kind") == "single_cookie" and cfg["param"] == "delta" and abs(v) not in (1.0, 2.0, 4.0):
            verdict, ballistic, sig = _expected_band(v)
            got = (rep.verdict.value, rep.speed != 0, rep.sigma.status == "finite")
            checks.append({"delta": v, "ok": got == (verdict, ballistic, sig)})
    ok = all(c["ok"] for c in checks)
    return ok, REPORT_COLUMNS, rows, {"band_checks": checks}


def cmd_simulate(cfg, prof, out, jobs):
    stop = ("horizon",) if cfg["stop_level"] is None else ("hit_level", float(cfg["stop_level"]))
    sc = _sim_config(cfg, stop_rule=stop, record_stride=int(cfg["record_stride"]))
    rows = []
    for i in range(int(cfg["n_paths"])):
        s = simulate_path(prof, sc, derive_stream(int(cfg["seed"]), i))
        write_path_csv(s, out / f"path_{i}.csv")
        write_field_csv(s, out / f"field_{i}.csv")
        rows.append({"path": i, "x_final": s.x_final, "t_end": s.t_end, "stop_time": s.stop_time,
                     "drift_total": s.drift_total, "drift_plus": s.region_drift[(0.0, math.inf)],
                     "drift_minus": s.region_drift[(-math.inf, 0.0)], "residual": occupation_identity_residual(s),
                     "running_min": s.running_min, "running_max": s.running_max})
    cols = ("path", "x_final", "t_end", "stop_time", "drift_total", "drift_plus", "drift_minus", "residual",
            "running_min", "running_max")
    return True, cols, rows, {"sim_config": sc.to_dict()}


def cmd_rayknight(cfg, prof, out, jobs):
    a, dx, n = float(cfg["a"]), float(cfg["dx"]), int(cfg["n_paths"])
    write_zpath_csv(simulate_z(prof, a, dx, derive_stream(int(cfg["seed"]), 2 ** 31)), out / "zpath.csv")
    samples = terminal_samples(prof, a, n, dx, int(cfg["seed"]), jobs)
    write_samples_csv(samples, out / "terminal_samples.csv")
    row = {"a": a, "dx": dx, "n_paths": n, "sample_mean": float(np.mean(samples)) if n else math.nan}
    try:
        ks, m, pm = compare_invariant(samples, prof)
        row.update(ks_statistic=ks, pi_mean=pm, mean_rel_error=abs(m - pm) / pm)
        passed = ks < 0.05 and abs(m - pm) <= 0.05 * pm
    except PreconditionError as exc:
        row.update(ks_statistic=math.nan, pi_mean=math.nan, mean_rel_error=math.nan)
        passed = True
        row["note"] = str(exc)
    cols = ("a", "dx", "n_paths", "sample_mean", "pi_mean", "ks_statistic", "mean_rel_error", "note")
    return passed, cols, [row], {}


def _summary_result(summ):
    return summ.passed, RESULT_COLUMNS, [summ.csv_row()], {"summary": summ.to_record()}


def cmd_verify_lln(cfg, prof, out, jobs):
    s = verify_lln(prof, cfg["t_grid"], int(cfg["n_paths"]), _sim_config(cfg), int(cfg["seed"]), jobs=jobs)
    d = s.details
    _write_csv(out / "lln_series.csv", ("t", "mean", "se", "dispersion"),
               [{"t": t, "mean": m, "se": e, "dispersion": q}
                for t, m, e, q in zip(d["t"], d["means"], d["se"], d["dispersion"])])
    return _summary_result(s)


def cmd_verify_clt(cfg, prof, out, jobs):
    s = verify_clt(prof, float(cfg["t"]), int(cfg["n_paths"]), _sim_config(cfg), int(cfg["seed"]), jobs=jobs)
    return _summary_result(s)


def cmd_drift_identity(cfg, prof, out, jobs):
    s = verify_drift_identity(prof, float(cfg["a"]), int(cfg["n_paths"]), _sim_config(cfg), int(cfg["seed"]),
                              jobs=jobs)
    return _summary_result(s)


def cmd_d_infty(cfg, prof, out, jobs):
    s = verify_d_infty(prof, int(cfg["n_paths"]), _sim_config(cfg), int(cfg["seed"]), M=float(cfg["M"]),
                       jobs=jobs, check_doubling=bool(cfg["check_doubling"]))
    return _summary_result(s)


def cmd_duality(cfg, prof, out, jobs):
    s = verify_duality(prof, float(cfg["a"]), cfg["depths"], int(cfg["n_paths"]), _sim_config(cfg),
                       float(cfg["dx"]), int(cfg["seed"]), jobs=jobs, bin_average=bool(cfg["bin_average"]))
    return _summary_result(s)


def cmd_erw(cfg, prof, out, jobs):
    res = speed_trend(cfg["deltas"], int(cfg["n_steps"]), int(cfg["n_walks"]), int(cfg["seed"]), jobs)
    rows = [{"delta": d, "speed": v, "se": e, "fraction_positive": f, "regime_match": res["regimes_match"][d]}
            for d, v, e, f in zip(res["deltas"], res["speeds"], res["se"], res["fraction_positive"])]
    ok = res["nondecreasing"] and all(res["regimes_match"].values())
    return ok, ("delta", "speed", "se", "fraction_positive", "regime_match"), rows, {}


COMMANDS = {
    "classify": cmd_classify, "sweep": cmd_sweep, "simulate": cmd_simulate, "rayknight": cmd_rayknight,
    "verify-lln": cmd_verify_lln, "verify-clt": cmd_verify_clt, "drift-identity": cmd_drift_identity,
    "d-infty": cmd_d_infty, "duality": cmd_duality, "erw": cmd_erw,
}


def _versions():
    import numba
    import scipy

    return {"excited_bm": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="excited-bm", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog="defaults per subcommand:\n" + json.dumps(
                                     {"common": COMMON, **DEFAULTS}, indent=1))
    ap.add_argument("--write-defaults", metavar="PATH", help="write the default configuration as JSON and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run {name}", description=f"defaults: {json.dumps(DEFAULTS[name])}")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--jobs", type=int, default=None, help="worker threads (default: available CPUs)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--x-max", dest="x_max", type=float)
        sp.add_argument("--profile", help="profile kind")
        sp.add_argument("--param", action="append", help="profile parameter key=value (JSON value)")
        sp.add_argument("--table", help="two-column l,phi CSV for a custom_table profile")
        for flag, (key, typ) in OVERRIDES.items():
            if key in DEFAULTS[name] or key in ("t_max", "x0") and "dt" in DEFAULTS[name]:
                sp.add_argument(flag, dest=flag.lstrip("-").replace("-", "_"), type=typ)
        for flag, key in LIST_OVERRIDES.items():
            if key in DEFAULTS[name]:
                sp.add_argument(flag, dest=flag.lstrip("-").replace("-", "_"), help="comma-separated list")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.write_defaults:
        Path(args.write_defaults).write_text(json.dumps({"common": COMMON, **DEFAULTS}, indent=2) + "\n")
        return 0
    if not args.command:
        ap.print_help()
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    manifest = {"command": args.command, "argv": list(sys.argv[1:] if argv is None else argv),
                "versions": _versions(), "jobs": jobs}
    t0 = time.perf_counter()
    status = 0
    try:
        cfg = resolve(args.command, args)
        manifest["config"] = {k: v for k, v in cfg.items() if not k.startswith("_")}
        manifest["master_seed"] = int(cfg["seed"])
        prof = build_profile(cfg["profile"], Path(cfg.get("_config_dir", ".")))
        manifest["profile_id"] = prof.profile_id
        passed, cols, rows, info = COMMANDS[args.command](cfg, prof, out, jobs)
        cols = tuple(cols) + ("master_seed",) if "master_seed" not in cols else tuple(cols)
        for r in rows:
            r.setdefault("master_seed", int(cfg["seed"]))
        _write_csv(out / "report.csv", cols, rows)
        manifest["result"] = info
        manifest["passed"] = passed
        manifest["partial"] = False
        status = 0 if passed else 1
        if not passed:
            print(f"{args.command}: verification failed", file=sys.stderr)
    except (ValidationError, ProfileError, ConfigError, PreconditionError, ExperimentInvalid, ValueError,
            KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        manifest["partial"] = True
        status = 2
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["exit_status"] = status
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    if status == 0 and args.command in ("classify",):
        print(json.dumps(manifest["result"]["report"], default=_json_default))
    return status


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return str(o)


if __name__ == "__main__":
    raise SystemExit(main())
