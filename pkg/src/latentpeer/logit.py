"""Logistic link and the pseudo-likelihood of the peer-effects logit.

Beliefs enter every function here as fixed data: derivatives are taken with
respect to ``(mu_g, theta)`` only, never through the equilibrium map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import GroupData, Panel, mean_peer_belief


@dataclass(frozen=True)
class SlopeParams:
    """Peer effect and covariate slopes, ``theta = (peer_effect, *covariate_slopes)``."""

    peer_effect: float
    covariate_slopes: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.covariate_slopes, dtype=float))
        object.__setattr__(self, "covariate_slopes", b)
        object.__setattr__(self, "peer_effect", float(self.peer_effect))
        if not (np.isfinite(self.peer_effect) and np.all(np.isfinite(b))):
            raise ValueError("slope parameters must be finite")

    @classmethod
    def from_vector(cls, theta) -> "SlopeParams":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.peer_effect], self.covariate_slopes])

    @property
    def dim(self) -> int:
        return 1 + self.covariate_slopes.shape[0]


@dataclass(frozen=True)
class GroupParams:
    fixed_effect: float
    slope: SlopeParams

    def __post_init__(self):
        object.__setattr__(self, "fixed_effect", float(self.fixed_effect))
        if not np.isfinite(self.fixed_effect):
            raise ValueError("fixed effect must be finite")

    @classmethod
    def from_vector(cls, zeta) -> "GroupParams":
        zeta = np.asarray(zeta, dtype=float)
        return cls(zeta[0], SlopeParams.from_vector(zeta[1:]))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.fixed_effect], self.slope.as_vector()])


def logistic_cdf(x):
    """Standard logistic CDF, stable for large ``|x|``."""
    return expit(x)


def nll_individual(y, index):
    """``-y log L(index) - (1 - y) log(1 - L(index))`` in log-sum-exp form."""
    index = np.asarray(index, dtype=float)
    return np.logaddexp(0.0, index) - np.asarray(y, dtype=float) * index


def _check(group: GroupData, params: GroupParams, ccp) -> np.ndarray:
    if params.slope.covariate_slopes.shape[0] != group.p:
        raise ValueError(
            f"expected {group.p} covariate slopes, got {params.slope.covariate_slopes.shape[0]}"
        )
    return mean_peer_belief(group, ccp)


def regressors(group: GroupData, ccp) -> np.ndarray:
    """Design rows ``z_i = (Pbar_i, X_i)`` for the slope vector."""
    pbar = mean_peer_belief(group, ccp)
    return np.column_stack([pbar, group.x])


def utility_index(group: GroupData, params: GroupParams, ccp) -> np.ndarray:
    pbar = _check(group, params, ccp)
    s = params.slope
    return params.fixed_effect + s.peer_effect * pbar + group.x @ s.covariate_slopes


def group_nll(group: GroupData, params: GroupParams, ccp) -> float:
    """Average negative log-likelihood of one group."""
    idx = utility_index(group, params, ccp)
    return float(np.mean(nll_individual(group.y, idx)))


def group_nll_grad_hess(group: GroupData, params: GroupParams, ccp):
    """Gradient and Hessian of :func:`group_nll` in ``(mu, peer_effect, beta)``."""
    idx = utility_index(group, params, ccp)
    z = np.column_stack([np.ones(group.n), regressors(group, ccp)])
    lam = expit(idx)
    n = group.n
    grad = -(group.y - lam) @ z / n
    w = lam * (1.0 - lam)
    hess = (z * w[:, None]).T @ z / n
    return grad, 0.5 * (hess + hess.T)


def panel_nll(panel: Panel, params, ccps) -> float:
    """Mean over groups of :func:`group_nll`."""
    if len(params) != panel.G or len(ccps) != panel.G:
        raise ValueError("need one parameter set and one ccp profile per group")
    if panel.G == 0:
        raise ValueError("empty panel")
    return float(np.mean([group_nll(g, th, c) for g, th, c in zip(panel.groups, params, ccps)]))
