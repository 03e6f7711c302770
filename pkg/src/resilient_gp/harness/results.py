"""Results files: per-round stream, baselines, trim reports and a JSON summary."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..errors import ConfigError

RESULT_COLUMNS = ("round", "t", "mse_cloud", "mse_local_mean", "mse_fused_mean",
                  "avg_var_cloud", "avg_var_fused", "d_max", "kept_count",
                  "bound_violation_rate")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def result_row(m) -> dict:
    return {
        "round": m.round, "t": m.t, "mse_cloud": m.mse_cloud,
        "mse_local_mean": m.mse_local_mean, "mse_fused_mean": m.mse_fused_mean,
        "avg_var_cloud": m.avg_var_cloud, "avg_var_fused": m.avg_var_fused,
        "d_max": m.d_max, "kept_count": m.kept_count,
        "bound_violation_rate": m.bound_violation_rate,
    }


def render_results(rounds, fmt: str = "csv") -> str:
    """The results stream as text (CSV with header, or JSON lines)."""
    lines = []
    if fmt == "csv":
        lines.append(",".join(RESULT_COLUMNS))
        for m in rounds:
            row = result_row(m)
            lines.append(",".join(_fmt(row[c]) for c in RESULT_COLUMNS))
    elif fmt == "json":
        for m in rounds:
            row = result_row(m)
            lines.append(json.dumps({c: _jsonable(row[c]) for c in RESULT_COLUMNS}))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return "\n".join(lines) + "\n"


def render_baselines(rounds) -> str:
    lines = ["round,t,aggregator,mse,avg_var"]
    for m in rounds:
        for name in sorted(m.baselines):
            b = m.baselines[name]
            lines.append(f"{m.round},{m.t},{name},{_fmt(b['mse'])},{_fmt(b['avg_var'])}")
    return "\n".join(lines) + "\n"


def _dump(obj) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return _jsonable(o)
    return json.dumps(clean(obj), sort_keys=True)


def write_artifact(artifact, out_dir, fmt: str = "csv") -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        name = "results.csv" if fmt == "csv" else "results.jsonl"
        (out / name).write_text(render_results(artifact.rounds, fmt), encoding="utf-8")
        (out / "baselines.csv").write_text(render_baselines(artifact.rounds), encoding="utf-8")
        (out / "trim.jsonl").write_text(
            "".join(_dump(d) + "\n" for d in artifact.details), encoding="utf-8")
        (out / "summary.json").write_text(
            json.dumps(json.loads(_dump(artifact.summary())), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write results to {out}: {exc}") from exc
    return out


def write_table(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
