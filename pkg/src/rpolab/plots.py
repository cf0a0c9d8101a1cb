from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigError  # noqa: E402
from .metrics import MetricRow, read_csv  # noqa: E402

CHART_COLUMNS = {
    "return": ("episodic_return_mean", "episodic return"),
    "entropy": ("policy_entropy", "policy entropy"),
}

# Fixed salt (plus dropping the Date below) keeps SVG output byte-stable.
plt.rcParams["svg.hashsalt"] = "rpolab"


def nearest_values(steps: np.ndarray, values: np.ndarray,
                   ref_steps: np.ndarray) -> np.ndarray:
    """Sample a series at the steps nearest each reference step.

    Ties between the two neighbors resolve to the earlier step.
    """
    steps = np.asarray(steps, dtype=float)
    values = np.asarray(values, dtype=float)
    ref_steps = np.asarray(ref_steps, dtype=float)
    if steps.size == 0:
        raise ConfigError("cannot align an empty series")
    if steps.size == 1:
        return np.full(ref_steps.shape, values[0])
    idx = np.clip(np.searchsorted(steps, ref_steps), 1, steps.size - 1)
    left, right = steps[idx - 1], steps[idx]
    take_left = (ref_steps - left) <= (right - ref_steps)
    return np.where(take_left, values[idx - 1], values[idx])


def aggregate_curves(runs: list[list[MetricRow]], column: str
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cross-seed mean and std (ddof=0) of one metric column.

    The first run's step grid is the reference; other runs contribute
    their nearest-step value at each reference point.
    """
    if not runs or not runs[0]:
        raise ConfigError("need at least one non-empty run to aggregate")
    attr = CHART_COLUMNS[column][0] if column in CHART_COLUMNS else column
    ref_steps = np.array([r.global_step for r in runs[0]], dtype=float)
    stacked = np.empty((len(runs), ref_steps.size))
    for i, rows in enumerate(runs):
        steps = np.array([r.global_step for r in rows], dtype=float)
        values = np.array([getattr(r, attr) for r in rows], dtype=float)
        stacked[i] = nearest_values(steps, values, ref_steps)
    return ref_steps, np.nanmean(stacked, axis=0), np.nanstd(stacked, axis=0)


def _load_groups(out_root: Path) -> dict[str, dict[str, list[list[MetricRow]]]]:
    groups: dict[str, dict[str, list[list[MetricRow]]]] = {}
    for path in sorted(out_root.glob("*/*/seed*.csv")):
        env, variant = path.parts[-3], path.parts[-2]
        groups.setdefault(env, {}).setdefault(variant, []).append(read_csv(path))
    if not groups:
        raise ConfigError(f"no run CSVs found under {out_root}")
    return groups


def emit_charts(out_root: Path | str, kinds: tuple[str, ...] = ("return", "entropy")
                ) -> list[Path]:
    """One SVG per (env, metric kind), bands showing mean +/- std over seeds."""
    root = Path(out_root)
    chart_dir = root / "charts"
    chart_dir.mkdir(parents=True, exist_ok=True)
    groups = _load_groups(root)
    written: list[Path] = []
    for env in sorted(groups):
        for kind in kinds:
            _, ylabel = CHART_COLUMNS[kind]
            fig, ax = plt.subplots(figsize=(6.4, 4.0))
            # sorted: color assignment must not depend on directory order
            for variant in sorted(groups[env]):
                steps, mean, std = aggregate_curves(groups[env][variant], kind)
                ax.plot(steps, mean, label=variant, linewidth=1.2)
                ax.fill_between(steps, mean - std, mean + std, alpha=0.2, linewidth=0)
            ax.set_xlabel("environment steps")
            ax.set_ylabel(ylabel)
            ax.set_title(env)
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = chart_dir / f"{env}_{kind}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
