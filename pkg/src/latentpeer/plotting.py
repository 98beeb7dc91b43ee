"""Figures written next to the delimited reports (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_ic(report: dict, path: Path) -> Path:
    rows = report["selection"]["ic_table"]
    ks = [r["k"] for r in rows]
    ic = [np.nan if r["ic"] is None else r["ic"] for r in rows]
    fit = [np.nan if r["fit_term"] is None else r["fit_term"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ks, ic, "o-", label="IC")
    ax.plot(ks, fit, "s--", label="fit term")
    sel = report["selection"]["selected_k"]
    ax.axvline(sel, color="grey", lw=0.8, ls=":")
    ax.set_xlabel("number of clusters K")
    ax.set_xticks(ks)
    ax.legend()
    return _save(fig, path)


def plot_slopes(report: dict, path: Path) -> Path:
    """First-step slopes (peer effect vs first covariate) coloured by cluster."""
    slopes = report["first_step"]["slopes"]
    names = list(next(iter(slopes.values())).keys())
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(names) < 2:
        ax.text(0.5, 0.5, "no covariates", ha="center")
        return _save(fig, path)
    member = report["membership"]
    for k in sorted(set(member.values())):
        pts = np.array([[slopes[g][names[0]], slopes[g][names[1]]] for g, c in member.items() if c == k])
        label = "excluded" if k < 0 else f"cluster {k + 1}"
        ax.scatter(pts[:, 0], pts[:, 1], s=12, alpha=0.7, label=label)
    for c in report["clusters"]:
        if c.get("empty"):
            continue
        ax.plot(c["estimate"][names[0]], c["estimate"][names[1]], "k*", ms=12)
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_k_frequencies(summary_json: dict, path: Path) -> Path:
    freq = summary_json.get("k_frequencies") or []
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.bar(np.arange(1, len(freq) + 1), freq, color="steelblue")
    ax.set_xlabel("selected K")
    ax.set_ylabel("frequency")
    ax.set_ylim(0, 1)
    return _save(fig, path)


def plot_bias(summary_json: dict, path: Path) -> Path:
    """Median bias per cluster, coefficient and estimator."""
    labels, values, est_names = [], {}, []
    for c in summary_json.get("clusters", []):
        for est, stats in c["estimators"].items():
            if est not in est_names:
                est_names.append(est)
            for coef, row in stats.items():
                lab = f"{c['cluster'] + 1}:{coef}"
                if lab not in labels:
                    labels.append(lab)
                values[(lab, est)] = row["bias"]
    fig, ax = plt.subplots(figsize=(max(5, 0.8 * len(labels)), 3.5))
    width = 0.8 / max(len(est_names), 1)
    x = np.arange(len(labels))
    for i, est in enumerate(est_names):
        ax.bar(x + i * width, [values.get((lab, est), np.nan) for lab in labels], width, label=est)
    ax.axhline(0, color="black", lw=0.6)
    ax.set_xticks(x + width * (len(est_names) - 1) / 2)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("median bias")
    ax.legend(fontsize=8)
    return _save(fig, path)
