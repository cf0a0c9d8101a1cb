"""Command-line front end: train, sweep-alpha, sweep-ent, aggregate, plot.

Every option resolves through three layers: a key=value config file
(lowest), RPOLAB_* environment variables, then explicit flags (highest).
Semantic validation lives in RunSpec/TrainConfig so all three layers get
identical error messages.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from types import SimpleNamespace

from .errors import ConfigError, TrainingDiverged, UsageError
from .experiments import (
    RunSpec,
    aggregate,
    counting_clock,
    normalized_return,
    run,
    sweep_alpha,
    sweep_ent,
)
from .metrics import MetricsParseError
from .plots import emit_charts
from .trainer import ENT_COEF_PRESETS


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw: str) -> list[int]:
    items = [int(tok) for tok in raw.split(",") if tok.strip()]
    if not items:
        raise ValueError("empty list")
    return items


def _parse_float_list(raw: str) -> list[float]:
    items = [float(tok) for tok in raw.split(",") if tok.strip()]
    if not items:
        raise ValueError("empty list")
    return items


PARSERS = {
    "env": str,
    "algo": str,
    "dist": str,
    "aug": str,
    "out": str,
    "alpha": float,
    "ent_coef": float,
    "seeds": _parse_int_list,
    "alphas": _parse_float_list,
    "coefs": _parse_float_list,
    "total_timesteps": int,
    "workers": int,
    "fixed_wall_clock": _parse_bool,
    "quiet": _parse_bool,
}

DEFAULTS = {
    "env": None,
    "algo": "ppo",
    "dist": "gaussian",
    "aug": "none",
    "out": "runs",
    "alpha": None,
    "ent_coef": 0.0,
    "seeds": [1],
    "alphas": None,
    "coefs": None,
    "total_timesteps": None,
    "workers": 1,
    "fixed_wall_clock": False,
    "quiet": False,
}


def read_config_file(path: Path | str) -> dict[str, str]:
    """key=value lines; blank lines and # comments are skipped."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        values[key] = value.strip()
    return values


def resolve_settings(ns: argparse.Namespace, config: dict[str, str]) -> SimpleNamespace:
    """Fold flag > environment variable > config file > built-in default."""
    values = {}
    for key, parse in PARSERS.items():
        cli_value = getattr(ns, key, None)
        if cli_value is not None:
            values[key] = cli_value
            continue
        raw = os.environ.get(f"RPOLAB_{key.upper()}")
        if raw is None:
            raw = config.get(key)
        if raw is not None:
            try:
                values[key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key}: {raw!r} ({exc})") from exc
            continue
        values[key] = DEFAULTS[key]
    return SimpleNamespace(**values)


def _require(settings: SimpleNamespace, key: str):
    value = getattr(settings, key)
    if value is None:
        raise ConfigError(f"missing required option: {key}")
    return value


def _run_specs(specs: list[RunSpec], s: SimpleNamespace) -> int:
    clock_factory = counting_clock if s.fixed_wall_clock else None
    log = None if s.quiet else (lambda msg: print(msg, file=sys.stderr))
    paths = run(specs, s.out, workers=s.workers, clock_factory=clock_factory, log=log)
    for path in paths:
        print(path)
    return 0


def cmd_train(s: SimpleNamespace) -> int:
    env = _require(s, "env")
    specs = [
        RunSpec(env=env, algo=s.algo, dist=s.dist, alpha=s.alpha,
                ent_coef=s.ent_coef, aug=s.aug, seed=seed,
                total_timesteps=s.total_timesteps)
        for seed in s.seeds
    ]
    return _run_specs(specs, s)


def cmd_sweep_alpha(s: SimpleNamespace) -> int:
    env = _require(s, "env")
    alphas = _require(s, "alphas")
    base = RunSpec(env=env, algo="rpo", dist=s.dist, ent_coef=s.ent_coef,
                   aug=s.aug, total_timesteps=s.total_timesteps)
    return _run_specs(sweep_alpha(env, alphas, s.seeds, base), s)


def cmd_sweep_ent(s: SimpleNamespace) -> int:
    env = _require(s, "env")
    base = RunSpec(env=env, algo=s.algo, dist=s.dist, alpha=s.alpha,
                   aug=s.aug, total_timesteps=s.total_timesteps)
    coefs = tuple(s.coefs) if s.coefs is not None else ENT_COEF_PRESETS
    return _run_specs(sweep_ent(env, s.seeds, coefs, base), s)


def cmd_aggregate(s: SimpleNamespace) -> int:
    summary = aggregate(s.out)
    for key in sorted(summary):
        stats = summary[key]
        print(f"{key}: return {stats['final_return_mean']:.2f} "
              f"+/- {stats['final_return_std']:.2f} "
              f"entropy {stats['final_entropy_mean']:.3f}")
    envs = {key.split("/", 1)[0] for key in summary}
    if len(envs) > 1:
        for variant, score in normalized_return(summary).items():
            print(f"normalized {variant}: {score:.3f}")
    print(f"wrote {Path(s.out) / 'summary.json'}")
    return 0


def cmd_plot(s: SimpleNamespace) -> int:
    for path in emit_charts(s.out):
        print(path)
    return 0


COMMANDS = {
    "train": cmd_train,
    "sweep-alpha": cmd_sweep_alpha,
    "sweep-ent": cmd_sweep_ent,
    "aggregate": cmd_aggregate,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value option file (lowest precedence)")
    common.add_argument("--out", help="output root directory (default: runs)")
    common.add_argument("--workers", type=int, help="parallel run processes (default: 1)")
    common.add_argument("--quiet", action="store_true", default=None,
                        help="suppress per-run progress lines")
    runner = argparse.ArgumentParser(add_help=False)
    runner.add_argument("--env", help="pendulum | cartpole | pointmass")
    runner.add_argument("--dist", help="gaussian | laplace | gumbel")
    runner.add_argument("--ent-coef", type=float, dest="ent_coef")
    runner.add_argument("--aug", help="none | rad | drac")
    runner.add_argument("--seeds", type=_parse_int_list,
                        help="comma-separated seeds, e.g. 1,2,3")
    runner.add_argument("--total-timesteps", type=int, dest="total_timesteps")
    runner.add_argument("--fixed-wall-clock", action="store_true", default=None,
                        dest="fixed_wall_clock",
                        help="deterministic wall_s column (byte-stable CSVs)")

    parser = argparse.ArgumentParser(
        prog="rpolab",
        description="Train and compare clipped-surrogate policies on small "
                    "continuous-control tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common, runner],
                       help="train one variant across seeds")
    p.add_argument("--algo", help="ppo | rpo")
    p.add_argument("--alpha", type=float,
                   help="mean perturbation half-width (rpo only)")

    p = sub.add_parser("sweep-alpha", parents=[common, runner],
                       help="run the rpo algorithm across perturbation widths")
    p.add_argument("--alphas", type=_parse_float_list,
                   help="comma-separated half-widths, e.g. 0.001,0.5,1000")

    p = sub.add_parser("sweep-ent", parents=[common, runner],
                       help="sweep entropy-bonus coefficients")
    p.add_argument("--algo", help="ppo | rpo")
    p.add_argument("--alpha", type=float)
    p.add_argument("--coefs", type=_parse_float_list,
                   help="override the preset coefficient ladder")

    sub.add_parser("aggregate", parents=[common],
                   help="summarize per-seed CSVs into summary.json")
    sub.add_parser("plot", parents=[common],
                   help="render learning-curve SVGs from per-seed CSVs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config_path = ns.config or os.environ.get("RPOLAB_CONFIG")
        config = read_config_file(config_path) if config_path else {}
        settings = resolve_settings(ns, config)
        return COMMANDS[ns.command](settings)
    except (ConfigError, UsageError, MetricsParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc} {exc.diagnostics}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
