"""Command-line entry point: train, eval and baseline subcommands.

Every invocation writes its artifacts plus a manifest.json (resolved
config, seed, package version) into --out, so results can be reproduced
from the manifest alone.  All randomness flows from the single --seed via
named substreams.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, baselines, config, evaluate
from .envs import make_env
from .ppo import CURVE_COLUMNS, load_checkpoint, save_checkpoint, train


def _add_config_flags(parser):
    parser.add_argument("--config", help="YAML or JSON config file")
    parser.add_argument("--system", choices=config.SYSTEMS)
    parser.add_argument("--n-atoms", type=int, dest="n_atoms")
    parser.add_argument("--c2", type=float)
    parser.add_argument("--q-min", type=float, dest="q_min")
    parser.add_argument("--q-max", type=float, dest="q_max")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--reward", choices=("log", "delta"))
    parser.add_argument("--init", choices=("fixed", "random"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)


_OVERRIDE_KEYS = ("system", "n_atoms", "c2", "q_min", "q_max", "dt", "steps",
                  "reward", "init", "seed", "workers", "total_epochs", "hidden",
                  "gamma", "episodes_per_epoch", "epochs_per_update")


def _resolve(args) -> config.RunConfig:
    file_values = config.load_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS if hasattr(args, k)}
    return config.resolve(file_values, overrides)


def _write_manifest(out: Path, cfg_dict: dict, argv) -> None:
    manifest = {
        "version": __version__,
        "command": list(argv),
        "config": cfg_dict,
        "seed": cfg_dict.get("seed"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _write_curve(path: Path, curve: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CURVE_COLUMNS) + "\n")
        for row in curve:
            fh.write("%d,%.17g,%.17g,%.17g\n" % (int(row[0]), row[1], row[2], row[3]))


def _parse_hidden(text):
    return tuple(int(x) for x in text.split(","))


def cmd_train(args, argv) -> int:
    cfg = _resolve(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = config.env_spec(cfg)
    tcfg = config.train_config(cfg)
    if not args.quiet:
        def progress(epoch, mean_return, mean_fid, stats):
            if (epoch + 1) % 10 == 0 or epoch == 0:
                print(f"epoch {epoch + 1}/{tcfg.total_epochs}  "
                      f"return {mean_return:9.4f}  fidelity {mean_fid:8.5f}  "
                      f"kl {stats.approx_kl:8.5f}", flush=True)
    else:
        progress = None
    result = train(lambda: make_env(spec), tcfg, progress=progress)
    save_checkpoint(out / "checkpoint.npz", result.ac, tcfg, spec)
    _write_curve(out / "learning_curve.csv", result.curve)
    _write_manifest(out, config.to_dict(cfg), argv)
    print(f"wrote {out / 'checkpoint.npz'}")
    return 0


def cmd_eval(args, argv) -> int:
    ac, tcfg, spec = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = tcfg.seed if args.seed is None else args.seed
    summary = {"mode": args.mode, "checkpoint": str(args.checkpoint),
               "env": spec, "seed": seed}
    if args.mode == "rollout":
        rec = evaluate.rollout(make_env(spec), ac, deterministic=True)
        rec.write_csv(out / "rollout.csv")
        summary["final_fidelity"] = rec.final_fidelity
    elif args.mode == "map":
        n_theta, n_rho = args.grid
        pmap = evaluate.policy_map(ac, n_theta, n_rho)
        pmap.write_csv(out / "policy_map.csv")
        summary["grid"] = [n_theta, n_rho]
    elif args.mode == "noise":
        sigma = args.sigma if args.sigma is not None else 0.1 * abs(spec["c2"])
        report = evaluate.noise_eval(make_env(spec), ac, sigma,
                                     n_samples=args.samples, seed=seed,
                                     workers=args.workers or 1)
        report.write_csv(out / "noise.csv")
        summary.update(sigma=sigma, n_samples=args.samples,
                       final_mean_fidelity=float(report.mean[-1]),
                       final_std_fidelity=float(report.std[-1]))
    elif args.mode == "generalize":
        if spec.get("system") != "quantum":
            print("error: --mode generalize needs a quantum-system checkpoint, "
                  f"got {spec.get('system')!r}", file=sys.stderr)
            return 2
        n_list = [int(x) for x in args.n_list.split(",")]
        rows = evaluate.generalize(ac, spec, n_list)
        with open(out / "generalize.csv", "w") as fh:
            fh.write("n_atoms,final_fidelity\n")
            for n, f in rows:
                fh.write("%d,%.17g\n" % (n, f))
        summary["results"] = [{"n_atoms": n, "final_fidelity": f} for n, f in rows]
    manifest_cfg = {"train": asdict(tcfg), "env": spec, "seed": seed}
    manifest_cfg["train"]["hidden"] = list(tcfg.hidden)
    _write_manifest(out, manifest_cfg, argv)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote artifacts to {out}")
    return 0


def cmd_baseline(args, argv) -> int:
    cfg = _resolve(args)
    spec = config.env_spec(cfg)
    if args.which == "analytic" and cfg.system != "meanfield":
        print("error: the analytic baseline applies to --system meanfield only",
              file=sys.stderr)
        return 2
    if args.which == "constant" and args.q is None:
        print("error: --which constant requires --q", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(spec)
    summary = {"which": args.which, "env": spec}
    if args.which == "greedy":
        rec = baselines.greedy_rollout(env)
    elif args.which == "ramp":
        best, rec = baselines.ramp_search(env)
        summary.update(best)
    elif args.which == "analytic":
        rec = baselines.analytic_meanfield_rollout(env)
    else:
        rec = baselines.constant_q_rollout(env, args.q)
        summary["q"] = args.q
    summary["final_fidelity"] = rec.final_fidelity
    rec.write_csv(out / "run.csv")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _write_manifest(out, config.to_dict(cfg), argv)
    print(f"wrote artifacts to {out}")
    return 0


def _grid(text):
    a, b = text.split(",")
    return int(a), int(b)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinctrl",
        description="Train and evaluate control protocols for spin-1 dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a PPO policy")
    _add_config_flags(p_train)
    p_train.add_argument("--epochs", type=int, dest="total_epochs",
                         help="total training epochs")
    p_train.add_argument("--hidden", type=_parse_hidden,
                         help="comma-separated hidden sizes, e.g. 64,32")
    p_train.add_argument("--gamma", type=float)
    p_train.add_argument("--episodes-per-epoch", type=int, dest="episodes_per_epoch")
    p_train.add_argument("--epochs-per-update", type=int, dest="epochs_per_update")
    p_train.add_argument("--out", default="train_out", help="artifact directory")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--mode", required=True,
                        choices=("rollout", "map", "noise", "generalize"))
    p_eval.add_argument("--sigma", type=float, help="noise width (default 0.1*|c2|)")
    p_eval.add_argument("--samples", type=int, default=100)
    p_eval.add_argument("--n-list", dest="n_list", default="4,6,8,12,14",
                        help="comma-separated atom numbers for --mode generalize")
    p_eval.add_argument("--grid", type=_grid, default=(101, 101),
                        help="policy-map grid as n_theta,n_rho")
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--workers", type=int)
    p_eval.add_argument("--out", default="eval_out")
    p_eval.set_defaults(func=cmd_eval)

    p_base = sub.add_parser("baseline", help="run a non-RL reference protocol")
    _add_config_flags(p_base)
    p_base.add_argument("--which", required=True,
                        choices=("greedy", "ramp", "analytic", "constant"))
    p_base.add_argument("--q", type=float, help="control value for --which constant")
    p_base.add_argument("--out", default="baseline_out")
    p_base.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except config.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
