"""Classifier-Lasso over per-group slopes with frozen first-step beliefs.

The criterion is

    (1/G) sum_g [ Q_g(theta_g) + rho * prod_k ||theta_g - center_k|| ]

where ``Q_g`` is the profile (fixed-effect concentrated) negative
log-likelihood of group g at its first-step beliefs.  It is minimised by
block descent; every block move is accepted only if it does not raise the
criterion, so the recorded trace is non-increasing.

A sweep consists of
  1. a slope step per group (smooth damped Newton compared against every
     center as a candidate point, and the current point),
  2. per center, a weighted geometric-median update (Weiszfeld with the
     Vardi-Zhang correction for coincident points), and
  3. per center, a rigid move of the center together with its member slopes
     (offsets held fixed), which lets a cluster whose slopes have snapped
     onto its center move as a whole.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import expit

from .data import Panel, stack_groups
from .npl import NplConfig, NplFit, PerGroupFits, npl_fit_scopes, profile_mu_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassoConfig:
    rho: float | None = None  # None: rho_scale * dispersion * nbar^(-1/3)
    rho_scale: float = 0.5
    max_sweeps: int = 200
    rel_tol: float = 1e-8
    kmeans_restarts: int = 20
    seed: int = 0
    mu_bound: float = 10.0
    newton_iters: int = 20
    peer_bound: float = 3.99
    slope_bound: float = 25.0
    weiszfeld_iters: int = 500
    rigid_iters: int = 10

    def __post_init__(self):
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.rho_scale < 0 or self.rel_tol <= 0 or self.max_sweeps < 1:
            raise ValueError("invalid C-Lasso configuration")


@dataclass(frozen=True, eq=False)
class ClusterSolution:
    """C-Lasso output for one K.

    ``groups`` are the panel indices that took part (first-step failures are
    left out); ``membership`` is indexed like the panel with -1 for excluded
    groups.
    """

    groups: np.ndarray
    per_group_slopes: np.ndarray
    centers: np.ndarray
    membership: np.ndarray
    rho: float
    objective_trace: tuple[float, ...]
    converged: bool
    empty_clusters: tuple[int, ...] = ()

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def assign_clusters(slopes, centers) -> np.ndarray:
    """Nearest center in Euclidean distance; ties go to the lowest index."""
    slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] == 0:
        raise ValueError("need at least one center")
    if slopes.shape[1] != centers.shape[1]:
        raise ValueError("slopes and centers differ in dimension")
    d = np.linalg.norm(slopes[:, None, :] - centers[None, :, :], axis=2)
    return np.argmin(d, axis=1)


def default_rho(slopes: np.ndarray, mean_group_size: float, scale: float = 0.5) -> float:
    """``scale * sqrt(trace cov(slopes)) * nbar^(-1/3)``."""
    if slopes.shape[0] < 2:
        return 0.0
    spread = float(np.sqrt(np.trace(np.atleast_2d(np.cov(slopes, rowvar=False)))))
    return scale * spread * mean_group_size ** (-1.0 / 3.0)


class ProfileLikelihood:
    """Profile NLL ``Q_g`` of many groups at their own slopes, with derivatives."""

    def __init__(self, panel: Panel, groups, beliefs, mu_bound: float = 10.0):
        gs = [panel.groups[g] for g in groups]
        st = stack_groups(gs, panel.p)
        pbar = st.peer @ np.concatenate([np.asarray(b, dtype=float) for b in beliefs]) if gs else np.zeros(0)
        self.z = np.column_stack([pbar, st.x])
        self.y = st.y
        self.offsets = st.offsets
        self.gidx = st.group
        self.G = st.n_groups
        self.sizes = st.sizes
        self.n = st.sizes.astype(float)
        self.bound = mu_bound

    def __call__(self, theta: np.ndarray, derivs: bool = False, subset=None):
        """Evaluate at ``theta`` (one row per group); ``subset`` restricts to a boolean mask."""
        if subset is None or subset.all():
            gidx, z, y, offsets, sel = self.gidx, self.z, self.y, self.offsets, slice(None)
            G, n, th = self.G, self.n, theta
        else:
            sel = np.flatnonzero(subset)
            rows = np.repeat(subset, self.sizes)
            sizes = self.sizes[sel]
            G, n, th = sel.size, self.n[sel], theta[sel]
            gidx = np.repeat(np.arange(G), sizes)
            z, y = self.z[rows], self.y[rows]
            offsets = np.concatenate([[0], np.cumsum(sizes)])
        a = np.einsum("ij,ij->i", z, th[gidx])
        # start from a function of the inputs only, so the criterion is a pure function of theta
        ones = np.bincount(gidx, y, minlength=G)
        start = np.log((ones + 0.5) / (n - ones + 0.5)) - np.bincount(gidx, a, minlength=G) / n
        mu = profile_mu_batch(a, y, offsets, self.bound, init=start)
        eta = a + mu[gidx]
        psi = np.logaddexp(0.0, eta) - y * eta
        q = np.bincount(gidx, psi, minlength=G) / n
        if not derivs:
            return q
        lam = expit(eta)
        r = lam - y
        v = lam * (1.0 - lam)
        d = z.shape[1]
        grad = np.stack([np.bincount(gidx, r * z[:, j], minlength=G) for j in range(d)], axis=1)
        hvz = np.stack([np.bincount(gidx, v * z[:, j], minlength=G) for j in range(d)], axis=1)
        hvv = np.bincount(gidx, v, minlength=G)
        htt = np.empty((G, d, d))
        for j in range(d):
            for k in range(j, d):
                htt[:, j, k] = htt[:, k, j] = np.bincount(gidx, v * z[:, j] * z[:, k], minlength=G)
        interior = np.abs(mu) < self.bound
        corr = np.einsum("gj,gk->gjk", hvz, hvz) / np.maximum(hvv, 1e-300)[:, None, None]
        hess = htt - corr * interior[:, None, None]
        return q, grad / n[:, None], hess / n[:, None, None]


def _distances(theta, centers):
    return np.linalg.norm(theta[:, None, :] - centers[None, :, :], axis=2)


def _penalty(theta, centers):
    return np.prod(_distances(theta, centers), axis=1)


def _penalty_derivs(theta, centers):
    """Value, gradient and Hessian of prod_k ||theta - c_k|| (all distances > 0)."""
    u = theta[:, None, :] - centers[None, :, :]
    d = np.linalg.norm(u, axis=2)
    pi = np.prod(d, axis=1)
    s = np.einsum("gkj,gk->gj", u, 1.0 / d**2)
    q = theta.shape[1]
    eye = np.eye(q)
    inner = eye[None] * (1.0 / d**2).sum(axis=1)[:, None, None] - 2.0 * np.einsum(
        "gki,gkj,gk->gij", u, u, 1.0 / d**4
    )
    hess = pi[:, None, None] * (np.einsum("gi,gj->gij", s, s) + inner)
    return pi, pi[:, None] * s, hess


def _psd(h):
    w, v = np.linalg.eigh(h)
    return np.einsum("gij,gj,gkj->gik", v, np.maximum(w, 0.0), v)


def _solve_pd(h, g):
    w, v = np.linalg.eigh(h)
    floor = 1e-10 * np.maximum(np.abs(w).max(axis=1), 1e-300)
    w = np.maximum(w, floor[:, None])
    return np.einsum("gij,gj,gkj,gk->gi", v, 1.0 / w, v, g)


def _vertex_is_optimal(points, weights, j) -> bool:
    diff = points - points[j]
    dist = np.linalg.norm(diff, axis=1)
    away = dist > 0
    pull = (weights[away, None] * diff[away] / dist[away, None]).sum(axis=0)
    return float(np.linalg.norm(pull)) <= weights[~away].sum()


def weighted_geometric_median(points, weights, init, max_iter=500, tol=1e-12):
    """Minimise sum_i w_i ||x_i - c|| by Weiszfeld iteration (Vardi-Zhang).

    Coincident points are handled: at a data point the iterate only moves if
    the pull of the remaining points exceeds the weight sitting there.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    c = np.asarray(init, dtype=float).copy()

    def obj(x):
        return float(np.sum(weights * np.linalg.norm(points - x, axis=1)))

    if weights.sum() <= 0:
        return c
    f = obj(c)
    for _ in range(max_iter):
        d = np.linalg.norm(points - c, axis=1)
        # Weiszfeld crawls towards a vertex optimum; test the nearest point directly
        j = int(np.argmin(d))
        if d[j] > 0 and _vertex_is_optimal(points, weights, j):
            f_j = obj(points[j])
            if f_j <= f:
                return points[j].copy()
        at = d <= 1e-14 * max(1.0, np.linalg.norm(c))
        eta = weights[at].sum()
        w = np.where(at, 0.0, weights / np.where(at, 1.0, d))
        if w.sum() <= 0:
            break
        t = (w[:, None] * points).sum(axis=0) / w.sum()
        if eta > 0:
            r = np.linalg.norm((w[:, None] * (points - c)).sum(axis=0))
            if r <= eta:
                break
            frac = eta / r
            nxt = (1.0 - frac) * t + frac * c
        else:
            nxt = t
        f_new = obj(nxt)
        if f_new > f:
            break
        step = np.linalg.norm(nxt - c)
        c, f = nxt, f_new
        if step <= tol * max(1.0, np.linalg.norm(c)):
            break
    return c


def _kmeans_centers(slopes: np.ndarray, K: int, restarts: int, seed: int) -> np.ndarray:
    best, best_inertia = None, np.inf
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(K,)))
    for _ in range(max(restarts, 1)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            centers, labels = kmeans2(slopes, K, minit="++", seed=rng)
        inertia = float(np.sum((slopes - centers[labels]) ** 2))
        if inertia < best_inertia:
            best, best_inertia = centers, inertia
    return np.array(best, dtype=float)


class _Criterion:
    def __init__(self, prof: ProfileLikelihood, rho: float):
        self.prof = prof
        self.rho = rho

    def per_group(self, theta, centers, subset=None):
        """Per-group criterion terms (restricted to ``subset`` when given)."""
        q = self.prof(theta, subset=subset)
        th = theta if subset is None else theta[subset]
        return q + self.rho * _penalty(th, centers)

    def total(self, theta, centers) -> float:
        return float(np.mean(self.per_group(theta, centers)))


def _slope_step(crit: _Criterion, theta, centers, start_alt, newton_iters, box):
    """Per-group descent on Q_g + rho * prod distances; never increases any group's term."""
    G, q = theta.shape
    rho = crit.rho
    f_cur = crit.per_group(theta, centers)
    best, f_best = theta.copy(), f_cur.copy()

    # centers as candidate points (the penalty vanishes there); a center is a
    # local minimum when the likelihood pull there is weaker than the penalty
    # cone, and groups sitting at such a center need no smooth search
    K = centers.shape[0]
    local_min = np.zeros(G, dtype=bool)
    for k in range(K):
        cand = np.broadcast_to(centers[k], theta.shape).copy()
        f_k, g_k, _ = crit.prof(cand, derivs=True)
        better = f_k < f_best
        best[better], f_best[better] = cand[better], f_k[better]
        others = np.delete(np.arange(K), k)
        cone = rho * np.prod(np.linalg.norm(centers[others] - centers[k], axis=1))
        local_min[better] = np.linalg.norm(g_k[better], axis=1) <= cone
        local_min[~better & (f_k == f_best)] |= np.linalg.norm(g_k[~better & (f_k == f_best)], axis=1) <= cone

    # smooth damped Newton from the current point, or from the first-step
    # slope when the current point is a kink
    at_kink = _distances(theta, centers).min(axis=1) <= 1e-12
    x = np.where(at_kink[:, None], start_alt, theta)
    fx = crit.per_group(x, centers)
    active = ~(local_min & (f_best <= fx))
    for _ in range(newton_iters):
        if not active.any():
            break
        _, gq, hq = crit.prof(x, derivs=True, subset=active)
        xa = x[active]
        smooth = _distances(xa, centers).min(axis=1) > 1e-12
        if rho > 0:
            _, gp, hp = _penalty_derivs(np.where(smooth[:, None], xa, xa + 1e-8), centers)
            grad = gq + rho * gp
            hess = hq + rho * _psd(hp)
        else:
            grad, hess = gq, hq
        step = np.zeros_like(x)
        slope = np.zeros(G)
        step[active] = -_solve_pd(hess, grad)
        slope[active] = np.einsum("gi,gi->g", grad, step[active])
        sm = np.zeros(G, dtype=bool)
        sm[active] = smooth
        # a negligible decrement means the group is at its smooth minimum
        active &= sm & (slope < -1e-15)
        alpha = np.ones(G)
        trying = active.copy()
        for _ls in range(12):
            if not trying.any():
                break
            xt = np.clip(x + alpha[:, None] * step, -box, box)
            ft = np.full(G, np.inf)
            ft[trying] = crit.per_group(xt, centers, subset=trying)
            ok = trying & (ft <= fx + 1e-4 * alpha * slope)
            x[ok], fx[ok] = xt[ok], ft[ok]
            trying &= ~ok
            alpha[trying] *= 0.5
        moved = active & ~trying
        tiny = np.linalg.norm(alpha[:, None] * step, axis=1) <= 1e-12 * np.maximum(1.0, np.linalg.norm(x, axis=1))
        active &= moved & ~tiny
    better = fx < f_best
    best[better], f_best[better] = x[better], fx[better]
    return best


def _rigid_move(crit: _Criterion, theta, centers, k, members, iters):
    """Move center k and its member slopes together to lower the criterion."""
    rho = crit.rho
    others = np.delete(np.arange(centers.shape[0]), k)
    offsets = theta[members] - centers[k]
    nonmem = np.setdiff1d(np.arange(theta.shape[0]), members)

    def build(c):
        th = theta.copy()
        th[members] = c + offsets
        cs = centers.copy()
        cs[k] = c
        return th, cs

    th0, cs0 = build(centers[k])
    f = crit.total(th0, cs0)
    c = centers[k].copy()
    for _ in range(iters):
        th, cs = build(c)
        _, gq, hq = crit.prof(th, derivs=True)
        grad = gq[members].sum(axis=0)
        hess = hq[members].sum(axis=0)
        if rho > 0:
            # member terms: rho * ||u_g|| * prod_{l != k} ||c + u_g - c_l||
            if others.size:
                u = th[members][:, None, :] - centers[others][None, :, :]
                d = np.linalg.norm(u, axis=2)
                d = np.maximum(d, 1e-300)
                pm = np.prod(d, axis=1) * np.linalg.norm(offsets, axis=1)
                grad = grad + rho * np.einsum("g,gj->j", pm, np.einsum("gkj,gk->gj", u, 1.0 / d**2))
            # non-member terms: rho * w_g * ||theta_g - c||
            if nonmem.size:
                w = np.prod(_distances(theta[nonmem], centers[others]), axis=1) if others.size else np.ones(nonmem.size)
                diff = c - theta[nonmem]
                dn = np.maximum(np.linalg.norm(diff, axis=1), 1e-300)
                grad = grad + rho * np.einsum("g,gj->j", w / dn, diff)
        step = -_solve_pd(hess[None], grad[None])[0]
        slope = float(grad @ step)
        if not slope < 0:
            break
        alpha, moved = 1.0, False
        for _ls in range(30):
            ct = c + alpha * step
            tht, cst = build(ct)
            ft = crit.total(tht, cst)
            if ft <= f + 1e-4 * alpha * slope / theta.shape[0]:
                c, f, moved = ct, ft, True
                break
            alpha *= 0.5
        if not moved or np.linalg.norm(alpha * step) <= 1e-11 * max(1.0, np.linalg.norm(c)):
            break
    return build(c)


def classo_fit(
    panel: Panel,
    first_step: PerGroupFits,
    K: int,
    rho: float | None = None,
    config: ClassoConfig | None = None,
) -> ClusterSolution:
    """Penalised classification of per-group slopes into K clusters."""
    cfg = config or ClassoConfig()
    if panel.G == 0:
        raise ValueError("empty panel")
    groups = np.array(first_step.usable, dtype=np.int64)
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > groups.size:
        raise ValueError(f"K={K} exceeds the number of usable groups ({groups.size})")
    start = first_step.slopes()[groups]
    if rho is None:
        rho = cfg.rho if cfg.rho is not None else default_rho(start, panel.mean_group_size, cfg.rho_scale)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    beliefs = [first_step.fits[g].belief_ccp[0] for g in groups]
    prof = ProfileLikelihood(panel, groups, beliefs, cfg.mu_bound)
    crit = _Criterion(prof, rho)

    box = np.concatenate([[cfg.peer_bound], np.full(panel.p, cfg.slope_bound)])
    theta = start.copy()
    centers = _kmeans_centers(start, K, cfg.kmeans_restarts, cfg.seed)
    trace = [crit.total(theta, centers)]
    converged = False
    empty: tuple[int, ...] = ()
    for _sweep in range(cfg.max_sweeps):
        theta = _slope_step(crit, theta, centers, start, cfg.newton_iters, box)
        if rho > 0:
            for k in range(K):
                others = np.delete(np.arange(K), k)
                w = np.prod(_distances(theta, centers[others]), axis=1) if others.size else np.ones(theta.shape[0])
                c_new = weighted_geometric_median(theta, w, centers[k], cfg.weiszfeld_iters)
                trial = centers.copy()
                trial[k] = c_new
                if crit.total(theta, trial) <= crit.total(theta, centers):
                    centers = trial
                members = np.flatnonzero(assign_clusters(theta, centers) == k)
                if members.size:
                    th_new, c_new_all = _rigid_move(crit, theta, centers, k, members, cfg.rigid_iters)
                    if crit.total(th_new, c_new_all) <= crit.total(theta, centers):
                        theta, centers = th_new, c_new_all
            theta, centers, empty = _reseed_empty(crit, theta, centers)
        trace.append(crit.total(theta, centers))
        prev, cur = trace[-2], trace[-1]
        if abs(prev - cur) <= cfg.rel_tol * max(abs(prev), 1e-300):
            converged = True
            break
    if not converged:
        log.warning("C-Lasso (K=%d) stopped after %d sweeps without converging", K, cfg.max_sweeps)
    labels = assign_clusters(theta, centers)
    membership = np.full(panel.G, -1, dtype=np.int64)
    membership[groups] = labels
    empty = tuple(int(k) for k in range(K) if not np.any(labels == k))
    return ClusterSolution(
        groups=groups,
        per_group_slopes=theta,
        centers=centers,
        membership=membership,
        rho=float(rho),
        objective_trace=tuple(trace),
        converged=converged,
        empty_clusters=empty,
    )


def _reseed_empty(crit: _Criterion, theta, centers):
    labels = assign_clusters(theta, centers)
    empty = [k for k in range(centers.shape[0]) if not np.any(labels == k)]
    for k in empty:
        far = int(np.argmax(_distances(theta, centers).min(axis=1)))
        trial = centers.copy()
        trial[k] = theta[far]
        if crit.total(theta, trial) <= crit.total(theta, centers):
            centers = trial
    labels = assign_clusters(theta, centers)
    still = tuple(k for k in range(centers.shape[0]) if not np.any(labels == k))
    return theta, centers, still


def post_classification_fit(
    panel: Panel,
    membership,
    config: NplConfig | None = None,
    K: int | None = None,
) -> list[NplFit | None]:
    """Pooled NPL within each cluster; ``None`` for clusters with no groups."""
    membership = np.asarray(membership)
    if membership.shape != (panel.G,):
        raise ValueError("membership must cover every group")
    if K is None:
        K = int(membership.max()) + 1 if membership.size else 0
    scopes = [list(np.flatnonzero(membership == k)) for k in range(K)]
    nonempty = [s for s in scopes if s]
    fits = iter(npl_fit_scopes(panel, nonempty, config))
    out: list[NplFit | None] = []
    for s in scopes:
        if not s:
            out.append(None)
            continue
        f = next(fits)
        if len(s) == 1:
            log.warning("cluster with a single group (%s): estimates are imprecise", f.group_ids[0])
        out.append(f)
    return out
