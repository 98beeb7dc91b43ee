"""Equilibrium beliefs: the best-response map and its fixed point.

With logistic errors the best-response map is a sup-norm contraction with
modulus at most ``|peer_effect| / 4``, so plain successive substitution
converges geometrically whenever ``|peer_effect| < 4``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .data import GroupData, mean_peer_belief
from .logit import GroupParams

CONTRACTION_LIMIT = 4.0


class EquilibriumError(RuntimeError):
    """Fixed-point iteration did not converge."""


@dataclass(frozen=True)
class CcpProfile:
    values: np.ndarray
    residual: float
    iterations: int
    converged: bool = True
    step_sizes: tuple[float, ...] = ()


def gamma_map(group: GroupData, params: GroupParams, ccp) -> np.ndarray:
    """One application of the best-response map to a belief profile."""
    pbar = mean_peer_belief(group, ccp)
    s = params.slope
    if s.covariate_slopes.shape[0] != group.p:
        raise ValueError("covariate slope dimension does not match the group")
    return expit(params.fixed_effect + group.x @ s.covariate_slopes + s.peer_effect * pbar)


def _check_peer(peer_effect) -> None:
    if np.any(np.abs(peer_effect) >= CONTRACTION_LIMIT):
        raise ValueError(
            f"|peer effect| must be below {CONTRACTION_LIMIT} for a unique equilibrium"
        )


def solve_equilibrium(
    group: GroupData,
    params: GroupParams,
    init=None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    record_steps: bool = False,
) -> CcpProfile:
    """Solve ``P = Gamma(P)`` for one group by successive substitution.

    Returns the first iterate whose residual ``||Gamma(P) - P||_inf`` is at
    most ``tol``; ``iterations`` counts map applications needed to reach it.
    """
    _check_peer(params.slope.peer_effect)
    if init is None:
        p = np.full(group.n, 0.5)
    else:
        p = np.asarray(init, dtype=float).copy()
        if p.shape != (group.n,):
            raise ValueError("init has the wrong length")
    base = params.fixed_effect + group.x @ params.slope.covariate_slopes
    b = params.slope.peer_effect
    w = group.peer_matrix
    steps = []
    for t in range(max_iter + 1):
        nxt = expit(base + b * (w @ p))
        r = float(np.max(np.abs(nxt - p))) if group.n else 0.0
        if record_steps:
            steps.append(r)
        if r <= tol:
            return CcpProfile(p, r, t, True, tuple(steps))
        p = nxt
    raise EquilibriumError(
        f"group {group.group_id}: no convergence in {max_iter} iterations (residual {r:.3g})"
    )


def solve_equilibrium_stacked(
    peer: sp.csr_array,
    base: np.ndarray,
    peer_effect: np.ndarray,
    offsets: np.ndarray,
    init=None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
):
    """Vectorised :func:`solve_equilibrium` over block-diagonal groups.

    ``base`` and ``peer_effect`` are per row and ``offsets`` delimits the
    (nonempty) groups.  Each group stops at its own first converged iterate,
    so results match separate per-group solves.
    Returns ``(ccp, converged_per_group, iterations_per_group)``.
    """
    _check_peer(peer_effect)
    n_groups = offsets.shape[0] - 1
    sizes = np.diff(offsets)
    starts = offsets[:-1]
    p = np.full(base.shape[0], 0.5) if init is None else np.asarray(init, dtype=float).copy()
    active = np.ones(n_groups, dtype=bool)
    iters = np.zeros(n_groups, dtype=np.int64)
    for t in range(max_iter + 1):
        nxt = expit(base + peer_effect * (peer @ p))
        diff = np.maximum.reduceat(np.abs(nxt - p), starts) if n_groups else np.zeros(0)
        done = active & (diff <= tol)
        iters[done] = t
        active &= ~done
        if not active.any():
            return p, np.ones(n_groups, dtype=bool), iters
        rows = np.repeat(active, sizes)
        p[rows] = nxt[rows]
    iters[active] = max_iter
    return p, ~active, iters


def simulate_outcomes(group: GroupData, params: GroupParams, equilibrium_ccp, rng: np.random.Generator) -> np.ndarray:
    """Draw ``Y_i = 1{index_i > eps_i}`` with standard logistic ``eps``."""
    pbar = mean_peer_belief(group, equilibrium_ccp)
    s = params.slope
    index = params.fixed_effect + s.peer_effect * pbar + group.x @ s.covariate_slopes
    return (index > logistic_draws(rng, group.n)).astype(float)


def logistic_draws(rng: np.random.Generator, size) -> np.ndarray:
    """Standard logistic variates by inverse CDF of open-interval uniforms."""
    u = rng.random(size)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return np.log(u) - np.log1p(-u)
