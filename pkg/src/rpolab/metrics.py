"""Per-iteration metric records and their on-disk CSV form.

The column set is a stable contract: header and float formatting are
pinned so identical runs serialize to identical bytes, and every value
round-trips losslessly (floats are written with repr, i.e. shortest
round-trip form).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

CSV_HEADER = "step,return_mean,entropy,policy_loss,value_loss,approx_kl,clip_frac,wall_s"


@dataclass
class MetricRow:
    global_step: int
    episodic_return_mean: float
    policy_entropy: float
    policy_loss: float
    value_loss: float
    approx_kl: float
    clip_fraction: float
    wall_time_s: float

    def to_csv_line(self) -> str:
        vals = [getattr(self, f.name) for f in fields(self)]
        return ",".join([str(int(vals[0]))] + [repr(float(v)) for v in vals[1:]])


class MetricsParseError(ValueError):
    """Raised with the offending file and line when a CSV does not parse."""


def write_csv(path: Path | str, rows: list[MetricRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER] + [r.to_csv_line() for r in rows]
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path | str) -> list[MetricRow]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise MetricsParseError(f"{path}: cannot read metrics file: {e}") from e
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise MetricsParseError(f"{path}:1: expected header {CSV_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise MetricsParseError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
        try:
            rows.append(MetricRow(int(parts[0]), *(float(p) for p in parts[1:])))
        except ValueError as e:
            raise MetricsParseError(f"{path}:{lineno}: {e}") from e
    return rows
