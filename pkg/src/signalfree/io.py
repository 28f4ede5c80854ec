"""File emission: CSV traces, metrics JSON, event logs and rasters.

Numbers use 9 significant digits, ``.`` as decimal separator and ``\\n`` line
endings so that identical runs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .feasibility import FeasibilityRaster
from .model import PiecewiseTrajectory
from .monitors import sample_grid
from .scheduler import ScheduleEntry

__all__ = [
    "fmt",
    "write_csv",
    "write_json",
    "write_text",
    "trajectory_csv",
    "schedule_csv",
    "raster_csv",
    "solution_csv",
    "metrics_json",
]

TRAJECTORY_HEADER = ("t", "vehicle_id", "lane", "zone", "p", "v", "u", "arc_kind")
SCHEDULE_HEADER = ("vehicle_id", "lane", "t0", "v0", "tm_star", "vm", "binding_case")
RASTER_HEADER = ("tau", "upsilon", "s_star", "feasible")
SOLUTION_HEADER = ("t", "p", "v", "u", "arc_kind")


def fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        out = f"{x:.9g}"
        return "0" if out == "-0" else out
    return str(x)


def _round(obj: Any) -> Any:
    """Round floats to 9 significant digits for stable JSON."""
    if isinstance(obj, float):
        return None if math.isnan(obj) else float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return write_text(path, csv_text(header, rows))


def json_text(obj: Any) -> str:
    return json.dumps(_round(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, obj: Any) -> Path:
    return write_text(path, json_text(obj))


def trajectory_csv(rows: Iterable[Sequence[Any]]) -> str:
    return csv_text(TRAJECTORY_HEADER, rows)


def schedule_csv(entries: Sequence[ScheduleEntry]) -> str:
    rows = [(e.vehicle_id, e.lane, e.t0, e.v0, e.tm_star, e.vm, e.binding_case.value) for e in entries]
    return csv_text(SCHEDULE_HEADER, rows)


def raster_csv(raster: FeasibilityRaster) -> str:
    return csv_text(RASTER_HEADER, raster.rows())


def solution_csv(traj: PiecewiseTrajectory, step: float) -> str:
    ts = sample_grid(traj.t0, traj.tm, step)
    p, v, u, kinds = traj.sample(ts)
    rows = [(float(t), float(a), float(b), float(c), k.value) for t, a, b, c, k in zip(ts, p, v, u, kinds)]
    return csv_text(SOLUTION_HEADER, rows)


def metrics_json(obj: Any) -> str:
    return json_text(obj)
