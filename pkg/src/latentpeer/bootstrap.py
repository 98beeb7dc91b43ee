"""Parametric bootstrap for bias correction and confidence intervals.

Outcomes are redrawn from the fitted model with beliefs held at the
equilibrium of the estimates, the estimator is rerun on every replicate, and
the distribution of ``c'(theta_b - theta_hat)`` is used to debias and to
build a basic (reverse-percentile) interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Panel, stack_groups
from .equilibrium import logistic_draws
from .npl import NplConfig, NplFit, replicate_scopes
from .parallel import ordered_map

log = logging.getLogger(__name__)

FAILURE_SHARE_LIMIT = 0.10


def empirical_quantile(values, q: float) -> float:
    """Linear-interpolation quantile at 1-based position ``(m - 1) q + 1``."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    h = (v.size - 1) * q
    lo = int(np.floor(h))
    hi = min(lo + 1, v.size - 1)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def replicate_rng(seed: int, b: int, stream: int = 0) -> np.random.Generator:
    """Generator for bootstrap replicate ``b``; independent of batching and workers."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1_000_003 + stream, b)))


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    theta_hat: np.ndarray
    draws: np.ndarray  # successful replicates only, in replicate order
    B: int
    failures: int

    @property
    def unreliable(self) -> bool:
        return self.failures > FAILURE_SHARE_LIMIT * self.B


@dataclass(frozen=True)
class ContrastReport:
    contrast: tuple[float, ...]
    name: str
    point: float
    debiased: float
    ci: tuple[float, float]
    alpha: float
    B: int
    failures: int
    draws_summary: dict
    unreliable: bool = False

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "contrast": list(self.contrast),
            "point": self.point,
            "debiased": self.debiased,
            "ci": [self.ci[0], self.ci[1]],
            "alpha": self.alpha,
            "B": self.B,
            "failures": self.failures,
            "unreliable": self.unreliable,
            "draws_summary": self.draws_summary,
        }


def fitted_index(fit: NplFit, groups) -> np.ndarray:
    """Latent index of the fitted model at its equilibrium beliefs (stacked order)."""
    st = stack_groups(groups)
    p_eq = np.concatenate(fit.generating_ccp)
    return fit.fixed_effects[st.group] + fit.slope.peer_effect * (st.peer @ p_eq) + st.x @ fit.slope.covariate_slopes


def simulate_replicate(index: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One redraw ``1{index > eps}`` with standard logistic errors."""
    return (index > logistic_draws(rng, index.shape[0])).astype(float)


def bootstrap_draws(
    panel: Panel,
    fit: NplFit,
    B: int,
    seed: int,
    config: NplConfig | None = None,
    stream: int = 0,
    chunk: int = 50,
    workers: int = 1,
) -> BootstrapDraws:
    """Refit ``fit``'s scope on B parametric replicates.

    Replicate b uses its own generator, and replicates are solved in chunks
    whose results do not depend on the chunk size or on how chunks are spread
    over workers.  Replicates that fail or do not converge are dropped and
    counted.
    """
    if B < 1:
        raise ValueError("B must be positive")
    cfg = config or NplConfig()
    index = {gid: i for i, gid in enumerate(panel.group_ids)}
    groups = [panel.groups[index[g]] for g in fit.group_ids]
    index_hat = fitted_index(fit, groups)
    ys = np.stack([simulate_replicate(index_hat, replicate_rng(seed, b, stream)) for b in range(B)])
    init_ccp = np.concatenate(fit.generating_ccp)
    tasks = [(groups, ys[s:s + chunk], cfg, init_ccp, fit.fixed_effects, fit.theta) for s in range(0, B, chunk)]
    parts = ordered_map(_refit_chunk, tasks, workers)
    theta = np.concatenate([t for t, _ in parts])
    good = np.concatenate([g for _, g in parts])
    failures = int(B - good.sum())
    out = BootstrapDraws(fit.theta.copy(), theta[good], B, failures)
    if failures:
        log.warning("%d of %d bootstrap replicates failed and were dropped", failures, B)
    if out.unreliable:
        log.warning("bootstrap failure share above %.0f%%: inference is unreliable", 100 * FAILURE_SHARE_LIMIT)
    return out


def _refit_chunk(task):
    groups, block, cfg, init_ccp, init_mu, init_theta = task
    raw = replicate_scopes(groups, block, block.shape[0], cfg, init_ccp, init_mu, init_theta)
    ok = raw.converged & ~raw.failed & np.all(np.isfinite(raw.theta), axis=1)
    return raw.theta, ok


def bootstrap_contrast(draws: BootstrapDraws, contrast, alpha: float = 0.05, name: str = "") -> ContrastReport:
    """Debiased estimate and basic interval for ``c' theta``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    c = np.asarray(contrast, dtype=float)
    if c.shape != draws.theta_hat.shape:
        raise ValueError("contrast has the wrong length")
    point = float(c @ draws.theta_hat)
    if draws.draws.shape[0] == 0:
        nan = float("nan")
        return ContrastReport(tuple(c.tolist()), name, point, nan, (nan, nan), alpha, draws.B, draws.failures, {"n": 0}, True)
    dev = draws.draws @ c - point
    q_mid = empirical_quantile(dev, 0.5)
    q_lo = empirical_quantile(dev, alpha / 2)
    q_hi = empirical_quantile(dev, 1 - alpha / 2)
    summary = {
        "n": int(dev.size),
        "mean": float(np.mean(dev)),
        "sd": float(np.std(dev, ddof=1)) if dev.size > 1 else 0.0,
        "median": q_mid,
        "q_lo": q_lo,
        "q_hi": q_hi,
    }
    return ContrastReport(
        contrast=tuple(c.tolist()),
        name=name,
        point=point,
        debiased=point - q_mid,
        ci=(point - q_hi, point - q_lo),
        alpha=alpha,
        B=draws.B,
        failures=draws.failures,
        draws_summary=summary,
        unreliable=draws.unreliable,
    )


def coefficient_names(p: int) -> list[str]:
    return ["peer_effect"] + [f"x_{j + 1}" for j in range(p)]


def coordinate_reports(draws: BootstrapDraws, alpha: float = 0.05) -> list[ContrastReport]:
    """One report per slope coordinate (unit contrasts)."""
    q = draws.theta_hat.shape[0]
    names = coefficient_names(q - 1)
    return [bootstrap_contrast(draws, np.eye(q)[j], alpha, names[j]) for j in range(q)]
