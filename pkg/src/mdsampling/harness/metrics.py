"""CSV records and percentile summaries (the data behind the MSE/MC boxplots)."""
import csv
from collections import defaultdict
from dataclasses import astuple, fields
import json
from pathlib import Path

import numpy as np

from .evaluation import ResultRecord

COLUMNS = tuple(f.name for f in fields(ResultRecord))


def write_records_csv(records, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in astuple(r)])


def read_records_csv(path):
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(ResultRecord(
                method=row["method"], M=int(row["M"]), b=float(row["b"]), d=float(row["d"]),
                seq=int(row["seq"]), window=int(row["window"]), mse=float(row["mse"]),
                mc=float(row["mc"]), time_ms=float(row["time_ms"]), seed=int(row["seed"]),
            ))
    return out


def percentiles(values):
    v = np.asarray(values, dtype=float)
    p25, p50, p75 = np.percentile(v, [25, 50, 75])
    return {"p25": float(p25), "p50": float(p50), "p75": float(p75), "n": int(v.size)}


def summarize(records):
    """Nested ``{config tag: {method: {"mse": ..., "mc": ..., "time_ms": ...}}}``."""
    groups = defaultdict(lambda: defaultdict(list))
    for r in records:
        groups[f"M{r.M}_b{r.b:g}_d{r.d:g}"][r.method].append(r)
    summary = {}
    for tag, by_method in sorted(groups.items()):
        summary[tag] = {
            method: {
                "mse": percentiles([r.mse for r in rs]),
                "mc": percentiles([r.mc for r in rs]),
                "time_ms": percentiles([r.time_ms for r in rs]),
            }
            for method, rs in sorted(by_method.items())
        }
    return summary


def emit_metrics(records, out_dir, stem="results"):
    """Write ``<stem>.csv`` and ``<stem>_summary.json``; returns both paths."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}_summary.json"
    write_records_csv(records, csv_path)
    json_path.write_text(json.dumps(summarize(records), indent=2, sort_keys=True))
    return csv_path, json_path
