"""Estimation, model selection and inference as one run.

per-group NPL -> C-Lasso and IC over K = 1..k_max -> post-classification NPL
-> parametric bootstrap per cluster.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .bootstrap import ContrastReport, bootstrap_draws, coefficient_names, coordinate_reports
from .classo import ClassoConfig
from .data import FORMAT_VERSION, Panel
from .equilibrium import EquilibriumError
from .npl import NplConfig, NplFit, PerGroupFits, npl_fit_per_group
from .selection import Selection, select_clusters

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A stage failed; ``partial`` holds whatever was finished."""

    def __init__(self, stage: str, message: str, partial: dict | None = None, kind: str = "convergence"):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.partial = partial or {}
        self.kind = kind


@dataclass(frozen=True)
class PipelineOptions:
    k_max: int = 4
    rho: float | None = None
    rho_scale: float = 0.5
    lam: float | None = None
    boot_reps: int = 500
    alpha: float = 0.05
    bootstrap: bool = True
    kmeans_restarts: int = 20
    npl: NplConfig = field(default_factory=NplConfig)

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.boot_reps < 1:
            raise ValueError("boot_reps must be positive")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.rho_scale < 0:
            raise ValueError("rho_scale must be nonnegative")


@dataclass(frozen=True, eq=False)
class PipelineResult:
    panel: Panel
    options: PipelineOptions
    seed: int
    first_step: PerGroupFits
    selection: Selection
    inference: tuple[tuple[ContrastReport, ...] | None, ...]

    @property
    def k_hat(self) -> int:
        return self.selection.selected_k

    @property
    def membership(self) -> np.ndarray:
        return self.selection.chosen.solution.membership

    @property
    def cluster_fits(self) -> tuple[NplFit | None, ...]:
        return self.selection.chosen.post_fits


def derived_seed(seed: int, *key: int) -> int:
    """Deterministic child seed."""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def run_pipeline(panel: Panel, options: PipelineOptions | None = None, seed: int = 0, workers: int = 1) -> PipelineResult:
    opts = options or PipelineOptions()
    if panel.G == 0:
        raise PipelineError("input", "panel has no groups", kind="validation")
    try:
        first = npl_fit_per_group(panel, opts.npl)
    except EquilibriumError as exc:
        raise PipelineError("first_step", str(exc)) from exc
    if not first.usable:
        raise PipelineError("first_step", "every group failed the per-group fit")
    ccfg = ClassoConfig(
        rho=opts.rho,
        rho_scale=opts.rho_scale,
        kmeans_restarts=opts.kmeans_restarts,
        seed=derived_seed(seed, 1),
        mu_bound=opts.npl.mu_bound,
        peer_bound=opts.npl.peer_bound,
        slope_bound=opts.npl.slope_bound,
    )
    try:
        sel = select_clusters(panel, first, opts.k_max, opts.rho, opts.lam, ccfg, opts.npl)
    except EquilibriumError as exc:
        raise PipelineError("selection", str(exc), {"first_step": _first_step_json(panel, first)}) from exc
    inference = []
    chosen = sel.chosen
    boot_seed = derived_seed(seed, 2)
    for k, fit in enumerate(chosen.post_fits):
        if not opts.bootstrap or fit is None:
            inference.append(None)
            continue
        draws = bootstrap_draws(panel, fit, opts.boot_reps, boot_seed, opts.npl, stream=k, workers=workers)
        inference.append(tuple(coordinate_reports(draws, opts.alpha)))
    return PipelineResult(panel, opts, seed, first, sel, tuple(inference))


def _vec(theta, names):
    return {n: float(v) for n, v in zip(names, theta)}


def _first_step_json(panel: Panel, first: PerGroupFits) -> dict:
    names = coefficient_names(panel.p)
    return {
        "failed_groups": [panel.group_ids[g] for g in first.failed],
        "slopes": {panel.group_ids[g]: _vec(first.fits[g].theta, names) for g in range(panel.G)},
    }


def pipeline_report(result: PipelineResult) -> dict:
    """Deterministic JSON-ready report (no timings, no host details)."""
    panel, opts, sel = result.panel, result.options, result.selection
    names = coefficient_names(panel.p)
    chosen = sel.chosen
    clusters = []
    for k, fit in enumerate(chosen.post_fits):
        if fit is None:
            clusters.append({"cluster": k, "groups": [], "empty": True})
            continue
        inf = result.inference[k]
        clusters.append(
            {
                "cluster": k,
                "groups": list(fit.group_ids),
                "estimate": _vec(fit.theta, names),
                "fixed_effects": {g: float(m) for g, m in zip(fit.group_ids, fit.fixed_effects)},
                "diagnostics": fit.diagnostics(),
                "inference": None if inf is None else [r.to_json() for r in inf],
            }
        )
    config = asdict(opts)
    return {
        "format_version": FORMAT_VERSION,
        "kind": "pipeline_report",
        "seed": result.seed,
        "config": config,
        "data": {
            "groups": panel.G,
            "individuals": panel.n_total,
            "covariates": panel.p,
            "mean_group_size": panel.mean_group_size,
        },
        "first_step": _first_step_json(panel, result.first_step),
        "selection": {
            "lambda": sel.lam,
            "rho": chosen.solution.rho,
            "selected_k": sel.selected_k,
            "ic_table": [asdict(r) for r in sel.table],
            "classo": [
                {
                    "k": c.K,
                    "sweeps": len(c.solution.objective_trace) - 1,
                    "converged": c.solution.converged,
                    "final_objective": c.solution.objective_trace[-1],
                    "empty_clusters": list(c.solution.empty_clusters),
                    "centers": [_vec(row, names) for row in c.solution.centers],
                }
                for c in sel.candidates
            ],
        },
        "membership": {
            panel.group_ids[g]: int(k) for g, k in enumerate(result.membership)
        },
        "clusters": clusters,
    }


def report_text(report: dict) -> str:
    """Aligned plain-text rendering of a pipeline report."""
    lines = []
    d = report["data"]
    lines.append(f"groups {d['groups']}  individuals {d['individuals']}  covariates {d['covariates']}")
    s = report["selection"]
    lines.append(f"lambda {s['lambda']:.6g}  rho {s['rho']:.6g}  selected K {s['selected_k']}")
    lines.append("")
    lines.append(f"{'K':>3} {'IC':>12} {'fit':>12} {'penalty':>12}")
    for r in s["ic_table"]:
        mark = " *" if r["k"] == s["selected_k"] else ""
        lines.append(f"{r['k']:>3} {r['ic']:>12.6f} {r['fit_term']:>12.6f} {r['penalty']:>12.6f}{mark}")
    lines.append("")
    header = f"{'cluster':>7} {'groups':>6} {'coef':<12} {'estimate':>10} {'debiased':>10} {'ci_lo':>10} {'ci_hi':>10}"
    lines.append(header)
    for c in report["clusters"]:
        if c.get("empty"):
            lines.append(f"{c['cluster']:>7} {0:>6} (empty)")
            continue
        inf = {r["name"]: r for r in (c["inference"] or [])}
        for name, val in c["estimate"].items():
            r = inf.get(name)
            tail = (
                f"{r['debiased']:>10.4f} {r['ci'][0]:>10.4f} {r['ci'][1]:>10.4f}" if r else f"{'':>10} {'':>10} {'':>10}"
            )
            lines.append(f"{c['cluster']:>7} {len(c['groups']):>6} {name:<12} {val:>10.4f} {tail}")
    return "\n".join(lines) + "\n"
