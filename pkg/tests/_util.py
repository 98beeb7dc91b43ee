"""Shared builders and independent reference computations for the tests."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from latentpeer.data import GroupData, Panel


def random_adjacency(rng, n, max_deg=5, empty=False):
    if empty or n == 1:
        return sp.csr_array((n, n), dtype=bool)
    rows, cols = [], []
    for i in range(n):
        k = int(rng.integers(0, min(max_deg, n - 1) + 1))
        others = np.delete(np.arange(n), i)
        for j in rng.choice(others, size=k, replace=False):
            rows.append(i)
            cols.append(int(j))
    return sp.csr_array((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n))


def random_group(rng, n, p, gid="g", max_deg=5, empty=False, y=None):
    x = rng.standard_normal((n, p))
    if y is None:
        y = (rng.random(n) < 0.5).astype(float)
    return GroupData(gid, tuple(str(i) for i in range(n)), y, x, random_adjacency(rng, n, max_deg, empty))


def random_panel(rng, G, n, p, empty=False, sizes=None):
    groups = []
    for g in range(G):
        ng = n if sizes is None else sizes[g]
        groups.append(random_group(rng, ng, p, gid=f"g{g}", empty=empty))
    return Panel(tuple(groups), p)


def richardson_gradient(f, x, h=1e-3):
    """Central differences with one Richardson step (error O(h^4))."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = 1.0

        def d(step):
            return (f(x + step * e) - f(x - step * e)) / (2 * step)

        g[j] = (4 * d(h / 2) - d(h)) / 3
    return g


def richardson_jacobian(fvec, x, h=1e-3):
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = 1.0

        def d(step):
            return (fvec(x + step * e) - fvec(x - step * e)) / (2 * step)

        cols.append((4 * d(h / 2) - d(h)) / 3)
    return np.column_stack(cols)


def fe_logit_newton(panel: Panel, weights=None, tol=1e-13, max_iter=200):
    """Dense Newton for a logit with one intercept per group and common slopes.

    Maximises sum_g w_g sum_i loglik (w_g = 1 by default).  Written directly
    on the full parameter vector, independent of the package's solver.
    """
    G, p = panel.G, panel.p
    ys = np.concatenate([g.y for g in panel.groups])
    xs = np.vstack([g.x for g in panel.groups])
    gi = np.concatenate([np.full(g.n, k) for k, g in enumerate(panel.groups)])
    w = np.ones(G) if weights is None else np.asarray(weights, dtype=float)
    wi = w[gi]
    D = np.zeros((ys.size, G))
    D[np.arange(ys.size), gi] = 1.0
    Z = np.hstack([D, xs])
    b = np.zeros(G + p)
    for _ in range(max_iter):
        eta = Z @ b
        lam = 1.0 / (1.0 + np.exp(-eta))
        grad = Z.T @ (wi * (ys - lam))
        H = (Z * (wi * lam * (1 - lam))[:, None]).T @ Z
        step = np.linalg.solve(H, grad)
        b = b + step
        if np.max(np.abs(step)) < tol:
            break
    return b[:G], b[G:]
