"""Replication studies on the clustered design, scored against the truth.

Three studies:
  * ``run_monte_carlo``: full pipeline; K selection and classification
    accuracy (optionally bootstrap inference for matched clusters).
  * ``run_oracle_study``: true membership, post-classification fits and
    bootstrap; bias, RMSE and coverage of original and debiased estimates.
  * ``run_pooled_study``: common-slope fit over all groups against the
    post-classification fits of the full pipeline.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .bootstrap import bootstrap_draws, coefficient_names, coordinate_reports
from .classo import post_classification_fit
from .data import FORMAT_VERSION, version_line
from .dgp import DgpConfig, generate_panel
from .equilibrium import EquilibriumError
from .npl import npl_fit
from .parallel import ordered_map
from .pipeline import PipelineError, PipelineOptions, derived_seed, run_pipeline

log = logging.getLogger(__name__)


def classification_accuracy(true_labels, est_labels) -> float:
    """Best agreement rate over relabelings of the estimated clusters.

    Works for differing numbers of clusters; unlabeled groups (-1) count as
    misclassified.
    """
    t = np.asarray(true_labels)
    e = np.asarray(est_labels)
    if t.shape != e.shape or t.size == 0:
        raise ValueError("label vectors must be nonempty and of equal length")
    ok = e >= 0
    kt, ke = int(t.max()) + 1, int(e[ok].max()) + 1 if ok.any() else 0
    if ke == 0:
        return 0.0
    conf = np.zeros((kt, ke))
    np.add.at(conf, (t[ok], e[ok]), 1.0)
    r, c = linear_sum_assignment(-conf)
    return float(conf[r, c].sum() / t.size)


def match_clusters(est_centers, true_centers) -> np.ndarray:
    """For each true cluster, the estimated cluster assigned to it (or -1).

    Minimises total center distance over one-to-one assignments.
    """
    est = np.atleast_2d(np.asarray(est_centers, dtype=float))
    tru = np.atleast_2d(np.asarray(true_centers, dtype=float))
    d = np.linalg.norm(tru[:, None, :] - est[None, :, :], axis=2)
    r, c = linear_sum_assignment(d)
    out = np.full(tru.shape[0], -1, dtype=np.int64)
    out[r] = c
    return out


@dataclass(frozen=True)
class StudyTask:
    kind: str
    config: DgpConfig
    options: PipelineOptions
    rep: int


def _theta_list(x):
    return [float(v) for v in x]


def _one_rep(task: StudyTask) -> dict:
    t0 = time.perf_counter()
    cfg, opts, rep = task.config, task.options, task.rep
    rec = {"rep": rep, "ok": True, "error": None}
    try:
        panel, truth = generate_panel(cfg, rep)
        member = truth.membership(panel)
        if task.kind == "oracle":
            rec.update(_oracle_rep(panel, member, cfg, opts, rep))
        else:
            res = run_pipeline(panel, opts, derived_seed(cfg.seed, rep, 3))
            est_member = res.membership
            rec["k_hat"] = res.k_hat
            rec["accuracy"] = classification_accuracy(member, est_member)
            fits = res.cluster_fits
            valid = [k for k, f in enumerate(fits) if f is not None]
            match = match_clusters(np.array([fits[k].theta for k in valid]), cfg.slopes)
            est = {}
            for k0, j in enumerate(match):
                if j < 0:
                    continue
                k = valid[j]
                entry = {"original": _theta_list(fits[k].theta)}
                inf = res.inference[k]
                if inf is not None:
                    entry["debiased"] = [r.debiased for r in inf]
                    entry["ci"] = [list(r.ci) for r in inf]
                est[str(k0)] = entry
            rec["estimates"] = est
            if task.kind == "pooled":
                pooled = npl_fit(panel, config=replace(opts.npl, polish=False))
                rec["pooled"] = _theta_list(pooled.theta)
    except (PipelineError, EquilibriumError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("replication %d failed: %s", rep, exc)
        rec = {"rep": rep, "ok": False, "error": str(exc)}
    rec["runtime"] = time.perf_counter() - t0
    return rec


def _oracle_rep(panel, member, cfg: DgpConfig, opts: PipelineOptions, rep: int) -> dict:
    fits = post_classification_fit(panel, member, opts.npl, cfg.K)
    seed = derived_seed(cfg.seed, rep, 4)
    est = {}
    for k, fit in enumerate(fits):
        if fit is None:
            continue
        entry = {"original": _theta_list(fit.theta)}
        if opts.bootstrap:
            draws = bootstrap_draws(panel, fit, opts.boot_reps, seed, opts.npl, stream=k)
            reps = coordinate_reports(draws, opts.alpha)
            entry["debiased"] = [r.debiased for r in reps]
            entry["ci"] = [list(r.ci) for r in reps]
            entry["failures"] = draws.failures
        est[str(k)] = entry
    return {"estimates": est}


@dataclass(frozen=True, eq=False)
class McSummary:
    kind: str
    config: DgpConfig
    options: PipelineOptions
    records: tuple[dict, ...]

    @property
    def ok_records(self) -> list[dict]:
        return [r for r in self.records if r["ok"]]

    @property
    def failures(self) -> int:
        return len(self.records) - len(self.ok_records)

    def k_frequencies(self) -> list[float]:
        ks = [r["k_hat"] for r in self.ok_records if "k_hat" in r]
        if not ks:
            return []
        counts = np.bincount(ks, minlength=self.options.k_max + 1)[1:]
        return (counts / len(ks)).tolist()

    def mean_accuracy(self) -> float | None:
        acc = [r["accuracy"] for r in self.ok_records if "accuracy" in r]
        return float(np.mean(acc)) if acc else None

    def cluster_stats(self) -> list[dict]:
        """Median bias, RMSE and (where available) coverage per true cluster and coefficient."""
        names = coefficient_names(self.config.p)
        truth = self.config.slopes
        out = []
        for k0 in range(self.config.K):
            per_est: dict[str, dict] = {}
            entries = [r["estimates"][str(k0)] for r in self.ok_records if str(k0) in r.get("estimates", {})]
            series = {"original": [e["original"] for e in entries]}
            if entries and all("debiased" in e for e in entries):
                series["debiased"] = [e["debiased"] for e in entries]
            if self.kind == "pooled":
                series["pooled"] = [r["pooled"] for r in self.ok_records]
            cis = [e["ci"] for e in entries if "ci" in e]
            for est_name, vals in series.items():
                if not vals:
                    continue
                v = np.asarray(vals, dtype=float)
                err = v - truth[k0]
                stats = {}
                for j, nm in enumerate(names):
                    row = {
                        "truth": float(truth[k0, j]),
                        "bias": float(np.median(err[:, j])),
                        "rmse": float(np.sqrt(np.mean(err[:, j] ** 2))),
                        "n": int(v.shape[0]),
                    }
                    if est_name == "debiased" and len(cis) == len(vals):
                        c = np.asarray(cis, dtype=float)[:, j, :]
                        row["coverage"] = float(np.mean((c[:, 0] <= truth[k0, j]) & (truth[k0, j] <= c[:, 1])))
                    stats[nm] = row
                per_est[est_name] = stats
            out.append({"cluster": k0, "estimators": per_est})
        return out

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": f"mc_summary_{self.kind}",
            "config": asdict(self.config),
            "options": asdict(self.options),
            "replications": len(self.records),
            "failed_replications": self.failures,
            "k_frequencies": self.k_frequencies(),
            "mean_accuracy": self.mean_accuracy(),
            "clusters": self.cluster_stats(),
            "records": [{k: v for k, v in r.items() if k != "runtime"} for r in self.records],
            "runtimes": [r["runtime"] for r in self.records],
        }

    def table_csv(self) -> str:
        """CSV shaped like the corresponding published table."""
        buf = io.StringIO()
        buf.write(version_line())
        w = csv.writer(buf, lineterminator="\n")
        G, n = self.config.G, self.config.n
        if self.kind == "selection":
            kmax = self.options.k_max
            w.writerow(["G", "n", "reps"] + [f"k_{k}" for k in range(1, kmax + 1)] + ["accuracy"])
            freq = self.k_frequencies() or [float("nan")] * kmax
            acc = self.mean_accuracy()
            w.writerow([G, n, len(self.ok_records)] + [repr(f) for f in freq] + [repr(acc)])
            return buf.getvalue()
        cov = self.kind == "oracle"
        head = ["G", "n", "cluster", "coefficient", "truth", "estimator", "bias", "rmse"]
        w.writerow(head + (["coverage"] if cov else []))
        for c in self.cluster_stats():
            for est_name, stats in c["estimators"].items():
                for coef, row in stats.items():
                    line = [G, n, c["cluster"] + 1, coef, repr(row["truth"]), est_name,
                            repr(row["bias"]), repr(row["rmse"])]
                    if cov:
                        line.append(repr(row["coverage"]) if "coverage" in row else "")
                    w.writerow(line)
        return buf.getvalue()


def _run(kind: str, config: DgpConfig, options: PipelineOptions, workers: int) -> McSummary:
    tasks = [StudyTask(kind, config, options, rep) for rep in range(config.mc_reps)]
    records = ordered_map(_one_rep, tasks, workers)
    summary = McSummary(kind, config, options, tuple(records))
    if summary.failures:
        log.warning("%d of %d replications failed", summary.failures, len(records))
    return summary


def run_monte_carlo(config: DgpConfig, options: PipelineOptions | None = None, workers: int = 1) -> McSummary:
    """Full pipeline per replication; bootstrap only if ``options.bootstrap``."""
    opts = replace(options or PipelineOptions(bootstrap=False), boot_reps=config.boot_reps)
    return _run("selection", config, opts, workers)


def run_oracle_study(config: DgpConfig, options: PipelineOptions | None = None, workers: int = 1) -> McSummary:
    """True membership, post-classification fits and bootstrap per cluster."""
    opts = replace(options or PipelineOptions(), boot_reps=config.boot_reps)
    return _run("oracle", config, opts, workers)


def run_pooled_study(config: DgpConfig, options: PipelineOptions | None = None, workers: int = 1) -> McSummary:
    """Common-slope fit versus the pipeline's post-classification fits."""
    opts = replace(options or PipelineOptions(bootstrap=False), boot_reps=config.boot_reps)
    return _run("pooled", config, opts, workers)
