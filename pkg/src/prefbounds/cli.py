"""Batch command-line interface.

Subcommands map one-to-one onto the library modules:

- ``simulate``  heterogeneous-agent panel generation
- ``estimate``  criterion minimization on a panel
- ``infer``     MCMC confidence sets (with/without the extensive margin)
- ``filter-b``  mixed-frequency extraction of the constrained share
- ``bounds``    analytic toy-model bounds and refinement curve
- ``premium``   asset-pricing distortions and premium prediction
- ``report``    collect run artifacts into a summary

Configuration is an INI file with one section per module and no
defaults for economically meaningful parameters.  Every run writes a
manifest recording the config hash, seeds, package versions, and the
numeric backend; identical manifests imply identical outputs.
"""

import argparse
import configparser
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .backend import active_backend
from .errors import PrefboundsError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _load_config(path: str) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {path}")
    cfg.read(p)
    return cfg


def _section(cfg: configparser.ConfigParser, name: str):
    if not cfg.has_section(name):
        raise ValidationError(f"config is missing required section [{name}]")
    return cfg[name]


def _get(section, key, cast=float):
    """Required config value; economic parameters carry no defaults."""
    if key not in section:
        raise ValidationError(
            f"config key {key!r} missing from section [{section.name}]")
    raw = section[key]
    try:
        if cast is bool:
            return section.getboolean(key)
        return cast(raw)
    except (TypeError, ValueError):
        raise ValidationError(
            f"config key {key!r} has invalid value {raw!r}") from None


def _config_sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config_path: str,
                   seed, extra=None) -> Path:
    import scipy

    manifest = {
        "command": command,
        "config_sha256": _config_sha256(config_path),
        "seed": seed,
        "versions": {"prefbounds": __version__,
                     "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "pandas": pd.__version__},
        "backend": active_backend(),
    }
    if extra:
        manifest.update(extra)
    out = out_dir / f"manifest_{command}.json"
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _theta_from_section(sec):
    from .aggregation import PreferenceTheta

    return PreferenceTheta(omega=_get(sec, "omega"), eta=_get(sec, "eta"),
                           h=_get(sec, "h"), beta=_get(sec, "beta"))


def _moment_config(cfg, with_margin: bool):
    from .moments import MomentSystemConfig

    sec = _section(cfg, "moments")
    instruments = []
    for token in _get(sec, "instruments", str).split(","):
        token = token.strip()
        if not token:
            continue
        name, lag = token.rsplit(":", 1)
        instruments.append((name.strip(), int(lag)))
    return MomentSystemConfig(
        instruments=instruments,
        returns=[c.strip() for c in _get(sec, "returns", str).split(",")],
        use_extensive_margin=with_margin,
        use_intratemporal=_get(sec, "use_intratemporal", bool),
        positivity_transform=_get(sec, "positivity_transform", str))


def _theta_space(cfg):
    from .estimator import THETA_NAMES, ThetaSpace

    sec = _section(cfg, "estimator")
    free = [c.strip() for c in _get(sec, "free", str).split(",")]
    fixed = {}
    for name in THETA_NAMES:
        if name in free:
            continue
        fixed[name] = _get(sec, f"fixed_{name}")
    bounds = {}
    for name in free:
        key = f"bounds_{name}"
        if key in sec:
            lo, hi = (float(v) for v in sec[key].split(","))
            bounds[name] = (lo, hi)
    return ThetaSpace(free=free, fixed=fixed, bounds=bounds)


def cmd_simulate(args, cfg) -> int:
    from .ks import KSParams, simulate_panel, solve_ks

    sec = _section(cfg, "ks")
    params = KSParams(
        beta=_get(sec, "beta"), omega=_get(sec, "omega"),
        alpha=_get(sec, "alpha"), delta=_get(sec, "delta"),
        z_good=_get(sec, "z_good"), z_bad=_get(sec, "z_bad"),
        nu=_get(sec, "nu"), lbar=_get(sec, "lbar"),
        u_good=_get(sec, "u_good"), u_bad=_get(sec, "u_bad"))
    T = _get(sec, "periods", int)
    n_agents = _get(sec, "agents", int)
    burn_in = _get(sec, "burn_in", int)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sol = solve_ks(params, seed=args.seed)
    panel = simulate_panel(sol, T=T, n_agents=n_agents, burn_in=burn_in,
                           seed=args.seed)
    out = out_dir / "panel.csv"
    panel.frame.to_csv(out, index=False)
    write_manifest(out_dir, "simulate", args.config, args.seed,
                   {"alom_r2": list(map(float, sol.r_squared)),
                    "panel_rows": len(panel.frame),
                    "mean_B": float(panel.frame["B"].mean())})
    print(f"wrote {out}")
    return EXIT_OK


def _workspace(cfg, args, with_margin):
    from .moments import MomentWorkspace, attach_capital_return

    sec = _section(cfg, "moments")
    frame = pd.read_csv(_get(sec, "panel", str))
    if _get(sec, "attach_capital_return", bool):
        frame = attach_capital_return(frame, delta=_get(sec, "delta"))
    return MomentWorkspace(frame, _moment_config(cfg, with_margin))


def cmd_estimate(args, cfg) -> int:
    from .estimator import CriterionContext, minimize

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = _theta_space(cfg)
    results = {}
    for margin in _margins(args):
        ws = _workspace(cfg, args, margin)
        ctx = CriterionContext(workspace=ws, space=space)
        res = minimize(ctx, seed=args.seed)
        tag = "with_B" if margin else "without_B"
        results[tag] = {
            "theta": {n: getattr(res.theta, n)
                      for n in ("omega", "eta", "h", "beta")},
            "Q_min": res.Q_min, "U": res.U.tolist()}
    out = out_dir / "estimates.json"
    out.write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "estimate", args.config, args.seed)
    print(f"wrote {out}")
    return EXIT_OK


def _margins(args):
    if args.with_B and args.without_B:
        return (False, True)
    if args.with_B:
        return (True,)
    if args.without_B:
        return (False,)
    return (False, True)


def cmd_infer(args, cfg) -> int:
    from .estimator import CriterionContext
    from .inference import criterion_level_set, mh_sample, quantile_set

    sec = _section(cfg, "inference")
    n_draws = _get(sec, "draws", int)
    level = _get(sec, "level")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = _theta_space(cfg)
    sets = {}
    for margin in _margins(args):
        ws = _workspace(cfg, args, margin)
        ctx = CriterionContext(workspace=ws, space=space)
        chain = mh_sample(ctx, n_draws=n_draws, seed=args.seed)
        tag = "with_B" if margin else "without_B"
        sets[tag] = {
            "criterion_level": criterion_level_set(chain, level).to_dict(),
            "quantile": quantile_set(chain, level).to_dict()}
    if len(sets) == 2:
        a = sets["with_B"]["criterion_level"]["intervals"]
        b = sets["without_B"]["criterion_level"]["intervals"]
        sets["containment"] = {
            name: bool(b[name][0] <= a[name][0] and a[name][1] <= b[name][1])
            for name in a}
    out = out_dir / "confidence_sets.json"
    out.write_text(json.dumps(sets, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "infer", args.config, args.seed)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_filter_b(args, cfg) -> int:
    from .mixed_freq import (extract_B, extraction_frame, mle_fit,
                             steady_gain)

    sec = _section(cfg, "mixed_freq")
    frame = pd.read_csv(_get(sec, "series", str))
    pi_obs = frame["pi_obs"].to_numpy(dtype=float)
    b_obs = frame["b_obs"].to_numpy(dtype=float)
    n_avg = _get(sec, "n_avg", int)
    fit = mle_fit(pi_obs, b_obs, obs_var_b=_get(sec, "obs_var_b"),
                  n_avg=n_avg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    extraction = extract_B(fit, pi_obs, b_obs, n_avg=n_avg)
    out_csv = out_dir / "extraction.csv"
    extraction_frame(extraction).to_csv(out_csv, index=False)
    report = {"parameters": {k: fit[k] for k in
                             ("rho_b", "rho_z", "sig2_b", "sig2_z")},
              "loglik": fit["loglik"], "ratio": fit["ratio"],
              "steady_gain": steady_gain(fit["ratio"])}
    (out_dir / "gain_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "filter-b", args.config, args.seed)
    print(f"wrote {out_csv}")
    return EXIT_OK


def cmd_bounds(args, cfg) -> int:
    from .analytic_bounds import (ToyModel, lambda_coefficients,
                                  refinement_curve, solve_toy_model)

    sec = _section(cfg, "analytic_bounds")
    y_vals = np.array([float(v) for v in _get(sec, "y_vals", str).split(",")])
    y_probs = np.array([float(v)
                        for v in _get(sec, "y_probs", str).split(",")])
    model = ToyModel(beta=_get(sec, "beta"), omega=_get(sec, "omega"),
                     r=_get(sec, "r"), y_vals=y_vals, y_probs=y_probs,
                     x_max=_get(sec, "x_max"))
    solution = solve_toy_model(model)
    lam1, lam0 = lambda_coefficients(model, solution)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"x": solution.x_grid, "c": solution.c_pol}).to_csv(
        out_dir / "toy_policy.csv", index=False)
    refinement_curve(model).to_csv(out_dir / "refinement_curve.csv",
                                   index=False)
    summary = {"rho": model.rho, "x_star": solution.x_star,
               "lambda0": lam0, "lambda1": lam1,
               "iterations": solution.iterations}
    (out_dir / "bounds.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "bounds", args.config, args.seed)
    print(f"wrote {out_dir / 'bounds.json'}")
    return EXIT_OK


def cmd_premium(args, cfg) -> int:
    from .asset_pricing import distortion_frame, premium_prediction

    sec = _section(cfg, "asset_pricing")
    frame = pd.read_csv(_get(sec, "panel", str))
    theta = _theta_from_section(_section(cfg, "theta"))
    equity = _get(sec, "equity_return", str)
    bond = _get(sec, "bond_return", str)
    C = frame["C"].to_numpy(dtype=float)
    V = frame["var_share"].to_numpy(dtype=float)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pred = premium_prediction(theta, C, V,
                              frame[equity].to_numpy(dtype=float),
                              frame[bond].to_numpy(dtype=float))
    distortion_frame(theta, frame, [equity, bond]).to_csv(
        out_dir / "distortions.csv", index=False)
    (out_dir / "premium.json").write_text(
        json.dumps(pred, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "premium", args.config, args.seed)
    print(f"wrote {out_dir / 'premium.json'}")
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise ValidationError(f"out-dir does not exist: {out_dir}")
    summary = {"artifacts": sorted(p.name for p in out_dir.iterdir()
                                   if p.name != "report.json")}
    for manifest in sorted(out_dir.glob("manifest_*.json")):
        summary[manifest.stem] = json.loads(manifest.read_text())
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir / 'report.json'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "infer": cmd_infer,
    "filter-b": cmd_filter_b,
    "bounds": cmd_bounds,
    "premium": cmd_premium,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefbounds",
        description="Set identification of preference parameters from "
                    "aggregate time series under incomplete markets.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True,
                        help="INI config with per-module sections")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="artifacts")
    parser.add_argument("--with-B", dest="with_B", action="store_true",
                        help="use the extensive-margin moment rows")
    parser.add_argument("--without-B", dest="without_B",
                        action="store_true",
                        help="use only the base moment rows")
    return parser


def run_experiment(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except PrefboundsError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run_experiment())
