"""Command-line harness: analyze, run, sweep, dal.

Exit codes: 0 success (a Diverged run is a result, not a failure),
2 configuration error, 3 numerical-contract failure.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import reports
from .dal import DALGame
from .equilibria import br_fixed_point_check, check_strict_local_ne
from .errors import ConfigError, DalGameError, SchemaError, SingularBlock
from .experiments import summarize
from .game import classify_game, game_hessian
from .integrators import CONVERGED, IntegratorConfig, run_trajectory
from .quadratic import QuadraticGame
from .stability import (discrete_stability_map, euler_exact_threshold, exact_threshold,
                        hurwitz_check)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SWEEP_COLUMNS = ["method", "eta", "rk_alpha", "gamma", "lam", "terminal_status",
                 "iters_to_converge", "final_grad_norm", "spectral_radius"]
SUMMARY_COLUMNS = ["arm", "method", "eta", "lam", "terminal_status", "best_target_acc",
                   "iters_to_best", "final_grad_norm", "n_field_evals"]
THRESHOLD_METHODS = ("euler", "rk2", "rk4", "eg")


def _linear(game):
    return isinstance(game, QuadraticGame) and game.is_linear


def _pmap(fn, jobs, items):
    """Ordered map, in worker processes when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        futures = [ex.submit(fn, *it) for it in items]
        return [f.result() for f in futures]


# -- analyze ------------------------------------------------------------------

def _analysis_point(cfg, game, lines):
    if not isinstance(game, DALGame) or "point" in cfg.game:
        return cfgmod.analysis_point(cfg, game)
    a = cfg.analyze
    tcfg = IntegratorConfig(method=a.get("train_method", "rk2"), eta=float(a.get("train_eta", 1.0)),
                            max_iters=int(a.get("train_iters", 2000)), keep_params=True,
                            record_every=max(1, int(a.get("train_iters", 2000))), seed=cfg.seed)
    tr = run_trajectory(game, cfgmod.initial_point(cfg, game), tcfg)
    lines.append(f"trained_with: {tcfg.label} eta={tcfg.eta!r} iters={tr.iters} "
                 f"status={tr.terminal_status}")
    w = tr.final.params
    if w is None or not np.all(np.isfinite(w)):
        raise ConfigError("training run for the analysis point diverged; lower analyze.train_eta")
    return w


def analyze_report(cfg):
    game = cfgmod.build_game(cfg)
    lines = ["command: analyze", f"game: {game.name}", f"n_players: {game.n_players}",
             "partition: " + " ".join(f"{o}:{n}" for o, n in game.partition)]
    point = _analysis_point(cfg, game, lines)
    at_origin = not np.any(point)
    where = "origin" if at_origin else "point"
    if game.d <= 12:
        lines.append("point: " + " ".join(repr(float(x)) for x in point))

    cert = check_strict_local_ne(game, point)
    H = game_hessian(game, point).matrix
    lines.append(f"game_class: {classify_game(H, cert.tol).value}")
    lines.append("[equilibrium]")
    lines.extend(l for l in cert.to_report().splitlines() if not l.startswith("point:"))
    br = None
    if isinstance(game, QuadraticGame):
        try:
            br = br_fixed_point_check(game, point)
        except SingularBlock:
            br = None
    lines.append(f"br_fixed_point: {'n/a' if br is None else br}")
    if not cert.necessary_holds:
        reason = "not stationary" if not cert.stationary else "necessary condition fails"
        lines.append(f"verdict: no NE at {where} ({reason})")
    elif cert.sufficient_holds:
        lines.append(f"verdict: local NE at {where} (sufficient condition holds)")
    else:
        lines.append(f"verdict: inconclusive at {where} (necessary holds, sufficient fails)")

    eta = cfg.analyze.get("eta")
    rep = hurwitz_check(-H, eta=None if eta is None else float(eta))
    lines.append("[spectrum]")
    lines.extend(rep.to_report().splitlines())
    if rep.hurwitz_stable:
        lines.append(f"euler_exact_threshold_from_spectrum: {euler_exact_threshold(rep.eigenvalues)!r}")
    if _linear(game):
        lines.append("[exact_thresholds]")
        for m in THRESHOLD_METHODS:
            t = exact_threshold(game.M, m)
            lines.append(f"exact_threshold_{m}: {'None' if t is None else repr(float(t))}")
    return game, "\n".join(lines) + "\n"


def cmd_analyze(cfg, args):
    out = Path(cfg.output_dir)
    name = cfg.game["name"]
    path = out / f"analyze_{name}.txt"
    reports.check_writable([path], args.overwrite)
    _, text = analyze_report(cfg)
    reports.write_text(path, text)
    print(f"wrote {path}")
    return EXIT_OK


# -- run / dal ----------------------------------------------------------------

def _split_arm(arm):
    arm = dict(arm)
    lam = arm.pop("lam", None)
    return arm, lam


def _arm_job(cfg, k, arm):
    """One arm: returns ``(columns, rows, summary_line, summary_row)``."""
    arm, lam = _split_arm(arm)
    game = cfgmod.build_game(cfg, lam=lam)
    w0 = cfgmod.initial_point(cfg, game)
    icfg = cfgmod.integrator_config(arm, cfg)
    metrics = game.metrics if isinstance(game, DALGame) else None
    tr = run_trajectory(game, w0, icfg, metrics)
    cols = ["iter", "grad_norm"] + [f"J{i + 1}" for i in range(game.n_players)]
    mcols = ["source_acc", "target_acc"] if metrics else []
    rows = []
    for r in tr.records:
        row = [r.iter, r.grad_norm] + [float(x) for x in r.costs]
        row += [r.metrics.get(c, float("nan")) for c in mcols]
        rows.append(row)
    line = (f"arm {k} {icfg.label} eta={icfg.eta!r}: {tr.terminal_status} at iter {tr.iters}, "
            f"grad_norm={tr.final.grad_norm!r}, field_evals={tr.n_field_evals}")
    srow = None
    if metrics:
        s = summarize(tr)
        srow = [k, icfg.label, icfg.eta, game.lam, tr.terminal_status, s.best_target_acc,
                s.iters_to_best, s.final_grad_norm, tr.n_field_evals]
    return cols + mcols, rows, line, srow


def _arm_path(out, prefix, k, arm):
    return out / f"{prefix}_arm{k:02d}_{str(arm.get('method', 'euler')).lower()}.csv"


def _run_arms(cfg, args, prefix, dal_only):
    if not cfg.arms:
        raise ConfigError("config defines no [[arms]]")
    is_dal = cfg.game["name"] == "dal-toy"
    if dal_only and not is_dal:
        raise ConfigError("the dal command needs game.name = 'dal-toy'")
    out = Path(cfg.output_dir)
    paths = [_arm_path(out, prefix, k, a) for k, a in enumerate(cfg.arms)]
    summary_path = out / f"{prefix}_summary.csv"
    reports.check_writable(paths + ([summary_path] if is_dal else []), args.overwrite)
    # validate every arm before any work so a bad arm leaves no partial output
    for a in cfg.arms:
        cfgmod.integrator_config(_split_arm(a)[0], cfg)
    results = _pmap(_arm_job, args.jobs, [(cfg, k, a) for k, a in enumerate(cfg.arms)])
    for path, (cols, rows, line, _) in zip(paths, results):
        reports.write_text(path, reports.csv_text("trajectory", cols, rows))
        print(line)
    if is_dal:
        srows = [r[3] for r in results]
        reports.write_text(summary_path, reports.csv_text("dal-summary", SUMMARY_COLUMNS, srows))
        print("arm  method  eta  best_target_acc  iters_to_best")
        for r in srows:
            print(f"{r[0]}  {r[1]}  {r[2]!r}  {r[5]!r}  {r[6]}")
    return EXIT_OK


def cmd_run(cfg, args):
    return _run_arms(cfg, args, "run", dal_only=False)


def cmd_dal(cfg, args):
    return _run_arms(cfg, args, "dal", dal_only=True)


# -- sweep --------------------------------------------------------------------

def _sweep_job(cfg, lam, arm, w0):
    game = cfgmod.build_game(cfg, lam=lam)
    icfg = cfgmod.integrator_config(arm, cfg)
    tr = run_trajectory(game, w0, icfg)
    rho = None
    if _linear(game) and icfg.method != "adam":
        rho = discrete_stability_map(game.M, icfg.method, icfg.eta, rk_alpha=icfg.rk_alpha,
                                     gamma=icfg.gamma, momentum=icfg.momentum).spectral_radius
    iters = tr.iters if tr.terminal_status == CONVERGED else None
    lam_out = getattr(game, "lam", None) if lam is None else lam
    if lam_out is None and game.split is not None:
        lam_out = game.split.lam
    return [icfg.method, icfg.eta, icfg.rk_alpha if icfg.method == "rk2" else None,
            icfg.gamma if icfg.method == "co" else None, lam_out, tr.terminal_status,
            iters, tr.final.grad_norm, rho]


def sweep_jobs(cfg):
    sw = cfg.sweep
    etas = cfgmod.sweep_etas(sw)
    methods = sw.get("methods", ["euler"])
    base = {k: sw[k] for k in ("max_iters", "stop_grad_norm", "divergence_threshold",
                               "momentum", "batch_size") if k in sw}
    base.setdefault("max_iters", 10000)
    base.setdefault("stop_grad_norm", 1e-8)
    base["record_every"] = max(1, int(base["max_iters"]))
    lams = sw.get("lams", [None])
    if lams != [None] and cfg.game["name"] not in ("example2", "dal-toy"):
        raise ConfigError("a lam grid needs game example2 or dal-toy")
    jobs = []
    for lam in lams:
        for method in methods:
            extra = [{}]
            if method == "rk2" and "rk_alphas" in sw:
                extra = [{"rk_alpha": float(a)} for a in sw["rk_alphas"]]
            if method == "co":
                extra = [{"gamma": float(g)} for g in sw.get("gammas", [0.0])]
            for e in extra:
                for eta in etas:
                    jobs.append((lam, {**base, "method": method, "eta": eta, **e}))
    return jobs


def cmd_sweep(cfg, args):
    out = Path(cfg.output_dir)
    path = out / "sweep.csv"
    reports.check_writable([path], args.overwrite)
    jobs = sweep_jobs(cfg)
    for _, arm in jobs:
        cfgmod.integrator_config(arm, cfg)
    w0 = cfgmod.initial_point(cfg, cfgmod.build_game(cfg))
    rows = _pmap(_sweep_job, args.jobs, [(cfg, lam, arm, w0) for lam, arm in jobs])
    reports.write_text(path, reports.csv_text("sweep", SWEEP_COLUMNS, rows))
    n_conv = sum(r[5] == CONVERGED for r in rows)
    print(f"wrote {path}: {len(rows)} rows, {n_conv} converged")
    return EXIT_OK


# -- entry point --------------------------------------------------------------

COMMANDS = {"analyze": cmd_analyze, "run": cmd_run, "sweep": cmd_sweep, "dal": cmd_dal}


def build_parser():
    p = argparse.ArgumentParser(prog="dalgame", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH", help="TOML experiment file")
        s.add_argument("--out", metavar="DIR", help="output directory (overrides [output].dir)")
        s.add_argument("--seed", type=int, help="seed for the shared initialization")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for arms (default 1)")
        s.add_argument("--overwrite", action="store_true", help="replace existing outputs")
        if name == "analyze":
            s.add_argument("--game", choices=cfgmod.QUADRATIC_NAMES + ("dal-toy",),
                           help="named game (overrides game.name)")
    return p


def _load(args):
    if args.config is not None:
        cfg = cfgmod.load_config(args.config)
    elif args.command == "analyze" and getattr(args, "game", None):
        cfg = cfgmod.ExperimentConfig()
    else:
        raise ConfigError("--config is required")
    if getattr(args, "game", None):
        cfg.game = {**cfg.game, "name": args.game} if args.config else {"name": args.game}
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg.with_overrides(seed=args.seed, out=args.out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DalGameError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
