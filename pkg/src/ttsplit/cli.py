"""Command line front end.

    ttsplit run CONFIG [--output-dir DIR] [--seed N] [--quiet]
    ttsplit tensor export PATH --dims 5,5,5 --ranks 1,2,2,1 [--complex] [--seed N]
    ttsplit tensor import PATH --out OUT
    ttsplit tensor info PATH

Exit codes: 0 success, 1 a configured check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import tt_io
from .apps.henon_heiles import HenonHeilesSpec, build_henon_heiles, propagate
from .apps.newton_schultz import NewtonSchultzSpec, feasible_ranks, newton_schultz
from .apps.spectrum import spectrum
from .experiments import run_convergence, run_exactness, run_robustness
from .integrator import StepConfig
from .ortho import OrthTT
from .tt_core import random_tt, tt_norm

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema: key -> (kind, default)

COMMON = {
    "experiment": ("str", None),
    "seed": ("int", 0),
    "output_dir": ("str", "results"),
    "save_tensors": ("bool", False),
}

SCHEMAS = {
    "exactness": {
        "dims": ("ints", [5, 5, 5, 5]),
        "ranks": ("ints", [1, 3, 4, 3, 1]),
        "h": ("float", 0.1),
        "orders": ("ints", [1, 2]),
        "tol": ("float", 1e-10),
    },
    "convergence": {
        "dims": ("ints", [4, 4, 4, 4]),
        "ranks": ("ints", [1, 3, 3, 3, 1]),
        "T": ("float", 1.0),
        "steps": ("ints", [8, 16, 32, 64]),
        "ref_steps": ("int", 512),
        "orders": ("ints", [1, 2]),
        "order1_bounds": ("floats", [1.7, 2.3]),
        "order2_bounds": ("floats", [3.4, 4.6]),
        "robustness": ("bool", False),
        "small_sv": ("float", 1e-8),
        "robustness_factor": ("float", 10.0),
    },
    "henon_heiles": {
        "f": ("int", 4),
        "n": ("int", 16),
        "domain": ("floats", [-7.0, 7.0]),
        "lam": ("float", 0.111803),
        "cap": ("bool", False),
        "eta": ("float", -1.0),
        "cap_left": ("float", -6.0),
        "cap_right": ("float", 6.0),
        "b_l": ("int", 3),
        "b_r": ("int", 3),
        "T": ("float", 20.0),
        "h": ("float", 0.01),
        "ranks": ("ints", None),
        "local_tol": ("float", 1e-8),
        "window": ("str", None),
        "max_norm_drift": ("float", 1e-6),
    },
    "newton_schultz": {
        "M": ("int", 2),
        "d": ("int", 5),
        "r": ("int", 10),
        "alpha": ("float", 1e-2),
        "retraction": ("str", "splitting"),
        "max_iters": ("int", 20),
        "compare_tt_svd": ("bool", True),
        "target": ("float", 0.1),
        "min_monotone": ("int", 3),
        "compare_factor": ("float", 2.0),
        "record_time": ("bool", False),
    },
}


def _coerce(key, kind, value):
    if value is None:
        return None
    ok = {
        "str": lambda v: isinstance(v, str),
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "bool": lambda v: isinstance(v, bool),
        "ints": lambda v: isinstance(v, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in v),
        "floats": lambda v: isinstance(v, list)
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v),
    }[kind]
    if not ok(value):
        raise ConfigError(f"{key}: expected {kind}, got {value!r}")
    if kind == "float":
        return float(value)
    if kind == "floats":
        return [float(x) for x in value]
    return value


def load_config(path, seed=None, output_dir=None) -> dict:
    """Parse and validate a YAML config; unknown keys are rejected."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a key-value mapping")
    exp = raw.get("experiment")
    if exp not in SCHEMAS:
        raise ConfigError(f"experiment must be one of {sorted(SCHEMAS)}, got {exp!r}")
    schema = {**COMMON, **SCHEMAS[exp]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {exp}: {unknown}")
    cfg = {}
    for key, (kind, default) in schema.items():
        cfg[key] = _coerce(key, kind, raw[key]) if key in raw else default
    if seed is not None:
        cfg["seed"] = seed
    if output_dir is not None:
        cfg["output_dir"] = output_dir
    _validate(cfg)
    return cfg


def _validate(cfg):
    exp = cfg["experiment"]
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    try:
        if exp in ("exactness", "convergence"):
            dims, ranks = cfg["dims"], cfg["ranks"]
            if len(ranks) != len(dims) + 1 or ranks[0] != 1 or ranks[-1] != 1 or min(dims) < 1 or min(ranks) < 1:
                raise ConfigError(f"ranks {ranks} do not fit dims {dims}")
            if any(o not in (1, 2) for o in cfg["orders"]) or not cfg["orders"]:
                raise ConfigError("orders must be a non-empty list of 1 and 2")
            from .ortho import check_feasible_ranks

            check_feasible_ranks(dims, ranks)
        if exp == "exactness" and cfg["h"] <= 0:
            raise ConfigError("h must be positive")
        if exp == "convergence":
            if len(cfg["steps"]) < 2 or min(cfg["steps"]) < 1 or cfg["ref_steps"] < 1 or cfg["T"] <= 0:
                raise ConfigError("need at least two positive step counts, a positive ref_steps and T > 0")
            for k in ("order1_bounds", "order2_bounds"):
                if len(cfg[k]) != 2:
                    raise ConfigError(f"{k} must be [low, high]")
        if exp == "henon_heiles":
            _hh_spec(cfg)
            if cfg["h"] <= 0 or cfg["T"] <= 0:
                raise ConfigError("T and h must be positive")
            if cfg["window"] not in (None, "cosine"):
                raise ConfigError("window must be null or 'cosine'")
            if cfg["ranks"] is not None:
                r = cfg["ranks"]
                if len(r) != cfg["f"] + 1 or r[0] != 1 or r[-1] != 1:
                    raise ConfigError(f"ranks {r} do not fit f={cfg['f']}")
            StepConfig(order=2, local_solver="krylov_expm", local_tol=cfg["local_tol"])
        if exp == "newton_schultz":
            _ns_spec(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _hh_spec(cfg) -> HenonHeilesSpec:
    if len(cfg["domain"]) != 2:
        raise ConfigError("domain must be [low, high]")
    return HenonHeilesSpec(
        f=cfg["f"], n=cfg["n"], domain=tuple(cfg["domain"]), lam=cfg["lam"], cap=cfg["cap"], eta=cfg["eta"],
        cap_left=cfg["cap_left"], cap_right=cfg["cap_right"], b_l=cfg["b_l"], b_r=cfg["b_r"],
    )


def _ns_spec(cfg, retraction=None) -> NewtonSchultzSpec:
    return NewtonSchultzSpec(
        M=cfg["M"], d=cfg["d"], r=cfg["r"], alpha=cfg["alpha"],
        retraction=retraction or cfg["retraction"], max_iters=cfg["max_iters"],
    )


# ---------------------------------------------------------------------------
# outputs


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


# ---------------------------------------------------------------------------
# experiments; each returns (summary, checks) and writes its CSV files


def _exp_exactness(cfg, out: Path, log):
    errs = run_exactness(cfg["dims"], cfg["ranks"], cfg["h"], cfg["seed"], tuple(cfg["orders"]))
    write_csv(out / "exactness.csv", ["order", "relative_error"], [(o, e) for o, e in errs.items()])
    for o, e in errs.items():
        log(f"order {o}: relative error {e:.3e}")
    checks = {f"exactness_order{o}": e <= cfg["tol"] for o, e in errs.items()}
    return {"relative_errors": {str(o): e for o, e in errs.items()}}, checks


def _exp_convergence(cfg, out: Path, log):
    res = run_convergence(cfg["dims"], cfg["ranks"], cfg["T"], tuple(cfg["steps"]), cfg["ref_steps"],
                          tuple(cfg["orders"]), cfg["seed"])
    rows = []
    checks = {}
    for o, r in res.items():
        for N, e in zip(r["steps"], r["errors"]):
            rows.append((o, N, cfg["T"] / N, e))
        lo, hi = cfg[f"order{o}_bounds"]
        checks[f"convergence_order{o}"] = all(lo <= q <= hi for q in r["ratios"])
        log(f"order {o}: ratios " + ", ".join(f"{q:.3f}" for q in r["ratios"]))
    write_csv(out / "convergence.csv", ["order", "steps", "h", "error"], rows)
    summary = {"ratios": {str(o): r["ratios"] for o, r in res.items()},
               "errors": {str(o): r["errors"] for o, r in res.items()}}
    if cfg["robustness"]:
        rob = run_robustness(cfg["dims"], cfg["ranks"], small_sv=cfg["small_sv"], T=cfg["T"],
                             steps=tuple(cfg["steps"]), orders=tuple(cfg["orders"]), seed=cfg["seed"])
        rows = []
        worst = 1.0
        for label, errs in rob.items():
            for o, es in errs.items():
                for N, e in zip(cfg["steps"], es):
                    rows.append((label, o, N, e))
        for o in cfg["orders"]:
            for a, b in zip(rob["small"][o], rob["reference"][o]):
                worst = max(worst, a / b, b / a)
        write_csv(out / "robustness.csv", ["case", "order", "steps", "error"], rows)
        checks["robustness"] = worst < cfg["robustness_factor"]
        summary["robustness_worst_factor"] = worst
        log(f"robustness: worst error factor {worst:.3f}")
    return summary, checks


def _exp_henon_heiles(cfg, out: Path, log):
    spec = _hh_spec(cfg)
    H, psi0 = build_henon_heiles(spec)
    ranks = cfg["ranks"]
    if ranks is None:
        ranks = list(feasible_ranks([spec.n] * spec.f, 8))
    step_cfg = StepConfig(order=2, local_solver="krylov_expm", local_tol=cfg["local_tol"])
    traj = propagate(H, psi0, cfg["T"], cfg["h"], ranks, step_cfg)
    write_csv(out / "dynamics.csv", ["t", "re_a", "im_a", "norm"],
              [(t, a.real, a.imag, nrm) for t, a, nrm in zip(traj.t, traj.a, traj.norms)])
    sp = spectrum(traj.a, cfg["h"], window=cfg["window"])
    write_csv(out / "spectrum.csv", ["xi", "magnitude"], zip(sp.xi, sp.magnitude))
    drift = float(np.max(np.abs(traj.norms - traj.norms[0])))
    increase = float(np.max(np.diff(traj.norms), initial=0.0))
    checks = {}
    if spec.cap:
        checks["norm_non_increasing"] = increase <= 1e-10
    else:
        checks["norm_drift"] = drift <= cfg["max_norm_drift"]
    log(f"norm drift {drift:.3e}, largest increase {increase:.3e}; top peaks {np.round(sp.peaks[:5], 4).tolist()}")
    if cfg["save_tensors"]:
        tt_io.save(out / "psi_final.tt", traj.psi)
    return {"norm_drift": drift, "max_norm_increase": increase, "peaks": sp.peaks[:10].tolist(),
            "bin_width": sp.bin_width, "ranks": list(ranks)}, checks


def _ns_rows(hist, record_time):
    for r in hist.records:
        row = [r.k, r.residual, r.max_rank]
        if record_time:
            row.append(r.seconds)
        yield row


def _monotone_prefix(res):
    k = 0
    while k + 1 < len(res) and res[k + 1] <= res[k]:
        k += 1
    return k


def _exp_newton_schultz(cfg, out: Path, log):
    header = ["iter", "residual", "max_rank"] + (["seconds"] if cfg["record_time"] else [])
    hist = newton_schultz(_ns_spec(cfg))
    write_csv(out / "inversion.csv", header, _ns_rows(hist, cfg["record_time"]))
    res = hist.residuals
    mono = _monotone_prefix(res)
    best = float(res.min())
    summary = {"retraction": cfg["retraction"], "best_residual": best, "final_residual": float(res[-1]),
               "monotone_iterations": mono, "aborted": hist.aborted}
    checks = {"monotone_prefix": mono >= cfg["min_monotone"], "reaches_target": best <= cfg["target"]}
    log(f"{cfg['retraction']}: best residual {best:.3e}, monotone for {mono} iterations")
    if cfg["compare_tt_svd"] and cfg["retraction"] == "splitting":
        other = newton_schultz(_ns_spec(cfg, "tt_svd"))
        write_csv(out / "inversion_tt_svd.csv", header, _ns_rows(other, cfg["record_time"]))
        ob = float(other.residuals.min())
        summary["tt_svd_best_residual"] = ob
        checks["within_factor_of_tt_svd"] = best <= cfg["compare_factor"] * ob
        log(f"tt_svd: best residual {ob:.3e}")
    if cfg["save_tensors"]:
        tt_io.save(out / "Y_final.tt", hist.Y.as_tt())
    return summary, checks


EXPERIMENTS = {
    "exactness": _exp_exactness,
    "convergence": _exp_convergence,
    "henon_heiles": _exp_henon_heiles,
    "newton_schultz": _exp_newton_schultz,
}


def run(config_path, output_dir=None, seed=None, quiet=False) -> int:
    try:
        cfg = load_config(config_path, seed=seed, output_dir=output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log = (lambda msg: None) if quiet else (lambda msg: print(msg))
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    summary, checks = EXPERIMENTS[cfg["experiment"]](cfg, out, log)
    doc = {"experiment": cfg["experiment"], "seed": cfg["seed"], "results": summary,
           "checks": checks, "passed": all(checks.values())}
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    for name, ok in checks.items():
        if not ok:
            print(f"check failed: {name}", file=sys.stderr)
        else:
            log(f"check passed: {name}")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# tensor files


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def tensor_io(args) -> int:
    try:
        if args.action == "export":
            if args.dims is None or args.ranks is None:
                raise ValueError("export needs --dims and --ranks")
            X = random_tt(args.dims, args.ranks, np.random.default_rng(args.seed or 0), complex=args.complex)
            tt_io.save(args.path, X)
            if not args.quiet:
                print(f"wrote {args.path}")
        elif args.action == "import":
            X = tt_io.load(args.path)
            if args.out is None:
                raise ValueError("import needs --out")
            tt_io.save(args.out, X)
            if not args.quiet:
                print(f"wrote {args.out}")
        else:
            X = tt_io.load(args.path)
            base = X.to_tt() if isinstance(X, OrthTT) else X
            field = "complex" if np.iscomplexobj(base.cores[0]) else "real"
            print(f"dims: {list(X.dims)}")
            print(f"ranks: {list(X.ranks)}")
            print(f"field: {field}")
            if isinstance(X, OrthTT):
                print(f"center: {X.center}")
            print(f"norm: {tt_norm(base):.17g}")
    except (tt_io.TTFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--quiet", action="store_true")
    p = argparse.ArgumentParser(prog="ttsplit", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run an experiment from a YAML config")
    r.add_argument("config")
    t = sub.add_parser("tensor", parents=[common], help="TT file utilities")
    t.add_argument("action", choices=["export", "import", "info"])
    t.add_argument("path")
    t.add_argument("--dims", type=_int_list)
    t.add_argument("--ranks", type=_int_list)
    t.add_argument("--complex", action="store_true")
    t.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "run":
        return run(args.config, args.output_dir, args.seed, args.quiet)
    return tensor_io(args)


if __name__ == "__main__":
    sys.exit(main())
