"""Serialisation of reports: JSON, CSV and aligned text."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .data import version_line


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_text(path: Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def write_json(path: Path, obj) -> None:
    write_text(path, dumps(obj))


def ic_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write(version_line())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "ic", "fit_term", "penalty"])
    for r in report["selection"]["ic_table"]:
        w.writerow([r["k"], repr(r["ic"]), repr(r["fit_term"]), repr(r["penalty"])])
    return buf.getvalue()


def membership_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write(version_line())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group_id", "cluster"])
    for gid, k in report["membership"].items():
        w.writerow([gid, k])
    return buf.getvalue()


def estimates_csv(report: dict) -> str:
    """One row per cluster and coefficient with original and debiased estimates."""
    buf = io.StringIO()
    buf.write(version_line())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", "groups", "coefficient", "estimate", "debiased", "ci_lo", "ci_hi", "alpha", "B", "failures"])
    for c in report["clusters"]:
        if c.get("empty"):
            continue
        inf = {r["name"]: r for r in (c["inference"] or [])}
        for name, val in c["estimate"].items():
            r = inf.get(name)
            tail = [repr(r["debiased"]), repr(r["ci"][0]), repr(r["ci"][1]), r["alpha"], r["B"], r["failures"]] if r else [""] * 6
            w.writerow([c["cluster"], len(c["groups"]), name, repr(val), *tail])
    return buf.getvalue()


def mc_text(summary_json: dict) -> str:
    """Plain-text digest of a Monte Carlo summary."""
    lines = [f"{summary_json['kind']}: {summary_json['replications']} replications, "
             f"{summary_json['failed_replications']} failed"]
    freq = summary_json.get("k_frequencies") or []
    if freq:
        lines.append("K frequencies: " + "  ".join(f"K={k + 1}: {f:.3f}" for k, f in enumerate(freq)))
    if summary_json.get("mean_accuracy") is not None:
        lines.append(f"mean classification accuracy: {summary_json['mean_accuracy']:.4f}")
    for c in summary_json.get("clusters", []):
        for est, stats in c["estimators"].items():
            for coef, row in stats.items():
                cov = f"  coverage {row['coverage']:.3f}" if row.get("coverage") is not None else ""
                lines.append(
                    f"cluster {c['cluster'] + 1}  {est:<9} {coef:<12} truth {row['truth']:>6.3f}  "
                    f"bias {row['bias']:>8.4f}  rmse {row['rmse']:>7.4f}{cov}"
                )
    return "\n".join(lines) + "\n"
