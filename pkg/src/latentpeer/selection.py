"""Choosing the number of clusters with an information criterion.

For each candidate K the fit term is the average individual negative
log-likelihood at the post-classification slope of each group's cluster,
with the group's fixed effect re-profiled at its first-step beliefs.  The
penalty is ``lam * p * K`` where p counts the slope coefficients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .classo import ClassoConfig, ClusterSolution, classo_fit, post_classification_fit
from .data import Panel
from .npl import NplConfig, NplFit, PerGroupFits, profile_nll

log = logging.getLogger(__name__)


def default_lambda(mean_group_size: float) -> float:
    """``log(log nbar) / (4 nbar)``, floored at zero for very small groups."""
    if mean_group_size <= math.e:
        return 0.0
    return max(0.0, 0.25 * math.log(math.log(mean_group_size)) / mean_group_size)


@dataclass(frozen=True)
class IcRow:
    k: int
    ic: float
    fit_term: float
    penalty: float


@dataclass(frozen=True, eq=False)
class KCandidate:
    """Everything estimated for one K."""

    K: int
    solution: ClusterSolution
    post_fits: tuple[NplFit | None, ...]
    row: IcRow


@dataclass(frozen=True, eq=False)
class Selection:
    candidates: tuple[KCandidate, ...]
    selected_k: int
    lam: float

    @property
    def table(self) -> list[IcRow]:
        return [c.row for c in self.candidates]

    @property
    def chosen(self) -> KCandidate:
        return self.candidates[self.selected_k - 1]


def fit_term(panel: Panel, first_step: PerGroupFits, membership, post_fits, mu_bound: float = 10.0) -> float:
    """Individual-weighted mean NLL at cluster slopes and re-profiled fixed effects."""
    total, count = 0.0, 0
    for g in first_step.usable:
        k = int(membership[g])
        fit = post_fits[k]
        if fit is None:
            raise ValueError(f"group {g} assigned to an empty cluster")
        grp = panel.groups[g]
        belief = first_step.fits[g].belief_ccp[0]
        total += grp.n * profile_nll(grp, fit.slope, belief, mu_bound)
        count += grp.n
    return total / count


def compute_ic(fit: float, K: int, p: int, lam: float) -> IcRow:
    pen = lam * p * K
    return IcRow(K, fit + pen, fit, pen)


def select_k(rows) -> int:
    """Smallest K attaining the minimum criterion value."""
    rows = list(rows)
    if not rows:
        raise ValueError("no candidates")
    best = min(r.ic for r in rows)
    return min(r.k for r in rows if r.ic == best)


def select_clusters(
    panel: Panel,
    first_step: PerGroupFits,
    k_max: int,
    rho: float | None = None,
    lam: float | None = None,
    classo_config: ClassoConfig | None = None,
    npl_config: NplConfig | None = None,
) -> Selection:
    """Run C-Lasso and post-classification NPL for K = 1..k_max and pick K."""
    ccfg = classo_config or ClassoConfig()
    ncfg = npl_config or NplConfig()
    usable = len(first_step.usable)
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if usable == 0:
        raise ValueError("no group survived the first-step fit")
    if k_max > usable:
        log.warning("k_max=%d exceeds usable groups (%d); capping", k_max, usable)
        k_max = usable
    if lam is None:
        lam = default_lambda(panel.mean_group_size)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    q = 1 + panel.p
    cands = []
    for K in range(1, k_max + 1):
        sol = classo_fit(panel, first_step, K, rho, ccfg)
        member = sol.membership
        # groups that failed the first step carry label -1 and are left out
        post = post_classification_fit(panel, member, ncfg, K)
        if any(f is None for f in post):
            log.warning("K=%d has empty cluster(s)", K)
            ic = IcRow(K, math.inf, math.inf, lam * q * K)
        else:
            ic = compute_ic(fit_term(panel, first_step, member, post, ncfg.mu_bound), K, q, lam)
        cands.append(KCandidate(K, sol, tuple(post), ic))
    k_hat = select_k(c.row for c in cands)
    return Selection(tuple(cands), k_hat, float(lam))
