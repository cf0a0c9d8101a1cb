"""Batch experiment execution and result aggregation.

A RunSpec names one training run; run() executes a list of them either
inline or across worker processes, writing one CSV per run under
<out>/<env>/<variant>/seed<k>.csv. aggregate() folds those CSVs into a
summary keyed by env/variant with final-window statistics.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .metrics import CSV_HEADER, MetricRow, read_csv
from .trainer import ENT_COEF_PRESETS, TrainConfig, train

ALGOS = ("ppo", "rpo")

# Desk-scale step budgets: enough for the learning-curve comparisons to
# separate, small enough to run a grid on one machine.
DEFAULT_TIMESTEPS = {
    "pendulum": 1_000_000,
    "cartpole": 500_000,
    "pointmass": 100_000,
}


def counting_clock():
    """Clock stand-in yielding 0.0, 1.0, 2.0, ... per call.

    Swapping this in for the wall clock makes the wall_s column, and so
    the whole CSV, reproducible byte for byte.
    """
    counter = itertools.count()
    return lambda: float(next(counter))


@dataclass
class RunSpec:
    env: str
    algo: str = "ppo"
    dist: str = "gaussian"
    alpha: float | None = None
    ent_coef: float = 0.0
    aug: str = "none"
    seed: int = 1
    total_timesteps: int | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.env not in DEFAULT_TIMESTEPS:
            raise ConfigError(
                f"unknown environment {self.env!r}; choose from {sorted(DEFAULT_TIMESTEPS)}"
            )
        if self.algo == "ppo" and self.alpha not in (None, 0.0):
            raise ConfigError("alpha only applies to the rpo algorithm")
        if self.alpha is None:
            self.alpha = 0.5 if self.algo == "rpo" else 0.0
        if self.total_timesteps is None:
            self.total_timesteps = DEFAULT_TIMESTEPS[self.env]

    def train_config(self) -> TrainConfig:
        kwargs = dict(
            total_timesteps=self.total_timesteps,
            rpo_alpha=self.alpha if self.algo == "rpo" else 0.0,
            dist_family=self.dist,
            ent_coef=self.ent_coef,
            aug_mode=self.aug,
            seed=self.seed,
        )
        kwargs.update(self.overrides)
        return TrainConfig(**kwargs)


def variant_name(spec: RunSpec) -> str:
    """Directory-safe label: algo, family, then only the active knobs."""
    parts = [spec.algo, spec.dist]
    if spec.algo == "rpo":
        parts.append(f"a{spec.alpha:g}")
    if spec.ent_coef != 0.0:
        parts.append(f"ent{spec.ent_coef:g}")
    if spec.aug != "none":
        parts.append(spec.aug)
    return "-".join(parts)


def csv_path(out_root: Path | str, spec: RunSpec) -> Path:
    return Path(out_root) / spec.env / variant_name(spec) / f"seed{spec.seed}.csv"


def run_single(spec: RunSpec, out_root: Path | str, clock=None,
               skip_existing: bool = False) -> Path:
    """Train one run, streaming metric rows to its CSV as they arrive."""
    cfg = spec.train_config()
    path = csv_path(out_root, spec)
    expected_rows = cfg.total_timesteps // cfg.batch_size
    if skip_existing and path.exists():
        try:
            if len(read_csv(path)) == expected_rows:
                return path
        except Exception:
            pass  # unreadable or partial: redo the run
    path.parent.mkdir(parents=True, exist_ok=True)
    kwargs = {} if clock is None else {"clock": clock}
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")

        def sink(row: MetricRow) -> None:
            fh.write(row.to_csv_line() + "\n")
            fh.flush()

        train(cfg, env_name=spec.env, metric_sink=sink, **kwargs)
    return path


def _worker(spec: RunSpec, out_root: str, clock_factory, skip_existing: bool) -> str:
    clock = clock_factory() if clock_factory is not None else None
    return str(run_single(spec, out_root, clock, skip_existing))


def run(specs: list[RunSpec], out_root: Path | str, workers: int = 1,
        clock_factory=None, skip_existing: bool = False, log=None) -> list[Path]:
    """Execute runs, inline when workers <= 1, else in a process pool.

    With a process pool, clock_factory must be picklable (a module-level
    function such as counting_clock, or None for the real clock).
    """
    if not specs:
        return []
    paths: list[Path] = []
    if workers <= 1:
        for spec in specs:
            t0 = time.perf_counter()
            clock = clock_factory() if clock_factory is not None else None
            paths.append(run_single(spec, out_root, clock, skip_existing))
            if log is not None:
                log(f"{csv_path(out_root, spec)} done in {time.perf_counter() - t0:.1f}s")
        return paths
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_worker, spec, str(out_root), clock_factory, skip_existing)
            for spec in specs
        ]
        for spec, fut in zip(specs, futures):
            paths.append(Path(fut.result()))
            if log is not None:
                log(f"{paths[-1]} done")
    return paths


def final_window(values: np.ndarray) -> np.ndarray:
    """Last 10% of entries (at least one) used for end-of-training stats."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigError("cannot take the final window of an empty series")
    return values[-max(1, values.size // 10):]


def summarize_rows(rows: list[MetricRow]) -> dict[str, float]:
    returns = final_window([r.episodic_return_mean for r in rows])
    entropies = final_window([r.policy_entropy for r in rows])
    return {
        "final_return": float(returns.mean()),
        "final_entropy": float(entropies.mean()),
        "rows": len(rows),
    }


def aggregate(out_root: Path | str, write: bool = True) -> dict:
    """Collect per-seed CSVs under out_root into env/variant statistics.

    Final-window per-seed values are averaged across seeds; spread is the
    population standard deviation (ddof=0).
    """
    root = Path(out_root)
    groups: dict[str, dict[int, dict[str, float]]] = {}
    for path in sorted(root.glob("*/*/seed*.csv")):
        env, variant, fname = path.parts[-3], path.parts[-2], path.parts[-1]
        seed = int(fname[len("seed"):-len(".csv")])
        groups.setdefault(f"{env}/{variant}", {})[seed] = summarize_rows(read_csv(path))
    if not groups:
        raise ConfigError(f"no run CSVs found under {root}")
    summary: dict[str, dict] = {}
    for key, by_seed in groups.items():
        seeds = sorted(by_seed)
        rets = np.array([by_seed[s]["final_return"] for s in seeds])
        ents = np.array([by_seed[s]["final_entropy"] for s in seeds])
        summary[key] = {
            "seeds": seeds,
            "final_return_mean": float(rets.mean()),
            "final_return_std": float(rets.std()),
            "final_entropy_mean": float(ents.mean()),
            "final_entropy_std": float(ents.std()),
            "per_seed": {str(s): by_seed[s] for s in seeds},
        }
    if write:
        with open(root / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary


def normalized_return(summary: dict) -> dict[str, float]:
    """Cross-env score: min-max normalize per env, then average per variant.

    A constant column (every variant equal within an env) maps to 0.5 so
    that env still contributes without preferring anyone. Invariant to
    affine rescaling of any single env's returns.
    """
    per_env: dict[str, dict[str, float]] = {}
    for key, stats in summary.items():
        env, variant = key.split("/", 1)
        per_env.setdefault(env, {})[variant] = stats["final_return_mean"]
    scores: dict[str, list[float]] = {}
    for table in per_env.values():
        lo, hi = min(table.values()), max(table.values())
        for variant, value in table.items():
            x = 0.5 if hi == lo else (value - lo) / (hi - lo)
            scores.setdefault(variant, []).append(x)
    return {v: float(np.mean(xs)) for v, xs in sorted(scores.items())}


def sweep_alpha(env: str, alphas: list[float], seeds: list[int],
                base: RunSpec | None = None) -> list[RunSpec]:
    """Perturbation half-width sweep; every spec is the rpo algorithm."""
    if base is None:
        base = RunSpec(env=env, algo="rpo")
    specs = []
    for alpha in alphas:
        if alpha < 0:
            raise ConfigError("alpha must be >= 0")
        for seed in seeds:
            specs.append(replace(base, env=env, algo="rpo", alpha=alpha, seed=seed))
    return specs


def sweep_ent(env: str, seeds: list[int], coefs: tuple[float, ...] = ENT_COEF_PRESETS,
              base: RunSpec | None = None) -> list[RunSpec]:
    """Entropy-bonus coefficient sweep over the preset ladder."""
    if base is None:
        base = RunSpec(env=env)
    specs = []
    for coef in coefs:
        for seed in seeds:
            specs.append(replace(base, env=env, ent_coef=coef, seed=seed))
    return specs
