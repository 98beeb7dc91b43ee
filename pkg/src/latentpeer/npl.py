"""Nested pseudo likelihood (NPL) estimation with group fixed effects.

Every estimation problem here is a set of *scopes*: disjoint sets of groups
that share one slope vector ``theta = (peer_effect, beta)`` while each group
keeps its own fixed effect.  A per-group fit is G single-group scopes, a pooled
fit is one scope, a post-classification fit is one scope per cluster, and a
bootstrap run is B replicated scopes.  All scopes are solved in one
vectorised pass; a scope's iterates depend only on its own data, so results
do not depend on how scopes are batched.

The objective of a scope is the mean over its groups of the mean individual
negative log-likelihood, with beliefs held fixed inside each minimisation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .data import GroupData, Panel, Stack, stack_groups
from .equilibrium import solve_equilibrium_stacked
from .logit import GroupParams, SlopeParams, group_nll

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NplConfig:
    ccp_tol: float = 1e-5
    max_outer: int = 500
    mu_bound: float = 10.0
    peer_bound: float = 3.99
    slope_bound: float = 25.0
    inner_tol: float = 1e-20  # Newton decrement
    max_inner: int = 100
    polish: bool = True
    eq_tol: float = 1e-10
    eq_max_iter: int = 10_000
    peer_effect_fixed: float | None = None

    def __post_init__(self):
        for name in ("ccp_tol", "mu_bound", "peer_bound", "slope_bound", "inner_tol", "eq_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.peer_bound >= 4.0:
            raise ValueError("peer_bound must be below 4")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass(frozen=True, eq=False)
class NplFit:
    """Output of one NPL run over one scope.

    ``ccp`` is the final belief update; ``belief_ccp`` the profile the final
    slope was estimated against (``theta`` exactly minimises the pseudo
    likelihood at it); ``equilibrium_ccp`` the exact fixed point at the
    estimates when polishing is on.
    """

    group_ids: tuple[str, ...]
    slope: SlopeParams
    fixed_effects: np.ndarray
    ccp: tuple[np.ndarray, ...]
    belief_ccp: tuple[np.ndarray, ...]
    equilibrium_ccp: tuple[np.ndarray, ...] | None
    outer_iterations: int
    converged: bool
    final_nll: float
    rank_deficient: bool = False
    mu_at_bound: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    slope_at_bound: bool = False
    polish_converged: bool = True
    failed: bool = False

    @property
    def theta(self) -> np.ndarray:
        return self.slope.as_vector()

    @property
    def generating_ccp(self) -> tuple[np.ndarray, ...]:
        return self.equilibrium_ccp if self.equilibrium_ccp is not None else self.ccp

    def diagnostics(self) -> dict:
        return {
            "outer_iterations": int(self.outer_iterations),
            "converged": bool(self.converged),
            "final_nll": float(self.final_nll),
            "rank_deficient": bool(self.rank_deficient),
            "fixed_effects_at_bound": [g for g, b in zip(self.group_ids, self.mu_at_bound) if b],
            "slope_at_bound": bool(self.slope_at_bound),
            "polish_converged": bool(self.polish_converged),
        }


def default_init_ccp(group: GroupData) -> np.ndarray:
    """Smoothed group frequency ``(sum y + 0.5) / (n + 1)`` clipped to [0.02, 0.98]."""
    v = (group.y.sum() + 0.5) / (group.n + 1.0)
    return np.full(group.n, float(np.clip(v, 0.02, 0.98)))


# ------------------------------------------------------------------ engine


class _Batch:
    """Stacked rows of several scopes, ready for vectorised Newton steps."""

    def __init__(self, stack: Stack, scope_of_group: np.ndarray, n_scopes: int, y=None):
        self.stack = stack
        self.y = stack.y if y is None else y
        self.x = stack.x
        self.peer = stack.peer
        self.gidx = stack.group
        self.G = stack.n_groups
        self.sizes = stack.sizes
        self.offsets = stack.offsets
        self.sg = np.asarray(scope_of_group, dtype=np.int64)
        self.S = n_scopes
        self.sobs = self.sg[self.gidx]
        groups_per_scope = np.bincount(self.sg, minlength=n_scopes).astype(float)
        self.omega = 1.0 / (groups_per_scope[self.sg] * self.sizes)[self.gidx]
        self.q = 1 + stack.x.shape[1]

    def take(self, scopes: np.ndarray):
        """Sub-batch restricted to ``scopes`` (sorted); returns (batch, groups, rows)."""
        keep_g = np.isin(self.sg, scopes)
        groups = np.flatnonzero(keep_g)
        rows = np.flatnonzero(keep_g[self.gidx])
        sizes = self.sizes[groups]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        peer = sp.csr_array(self.peer[rows][:, rows])
        peer.sort_indices()
        st = Stack(self.y[rows], self.x[rows], peer, np.repeat(np.arange(groups.size), sizes), offsets)
        remap = np.full(self.S, -1, dtype=np.int64)
        remap[scopes] = np.arange(scopes.size)
        return _Batch(st, remap[self.sg[groups]], scopes.size), groups, rows


def _scope_sum(batch: _Batch, values: np.ndarray) -> np.ndarray:
    return np.bincount(batch.sobs, values, minlength=batch.S)


def _objective(batch: _Batch, z, mu, theta):
    eta = mu[batch.gidx] + np.einsum("ij,ij->i", z, theta[batch.sobs])
    psi = np.logaddexp(0.0, eta) - batch.y * eta
    return _scope_sum(batch, batch.omega * psi), eta


def _bounds(cfg: NplConfig, q: int):
    hi = np.full(q, cfg.slope_bound)
    hi[0] = cfg.peer_bound
    return -hi, hi


def _inner_newton(batch: _Batch, z, mu, theta, cfg: NplConfig, fixed_theta=None):
    """Minimise each scope's pseudo-likelihood over (mu, theta) with box bounds.

    Projected Newton: variables sitting on a bound with the gradient pushing
    outward are held fixed; the block-arrow Hessian is reduced to a q x q
    Schur complement per scope.
    """
    S, q, G = batch.S, batch.q, batch.G
    sg = batch.sg
    mu = mu.copy()
    theta = theta.copy()
    tlo, thi = _bounds(cfg, q)
    M = cfg.mu_bound
    if fixed_theta is None:
        fixed_theta = np.zeros(q, dtype=bool)
    f, eta = _objective(batch, z, mu, theta)
    active = np.isfinite(f)
    failed = ~active
    rankdef = np.zeros(S, dtype=bool)
    iu = np.triu_indices(q)
    for _ in range(cfg.max_inner):
        lam = expit(eta)
        r = batch.omega * (lam - batch.y)
        v = batch.omega * lam * (1.0 - lam)
        gmu = np.bincount(batch.gidx, r, minlength=G)
        hmm = np.bincount(batch.gidx, v, minlength=G)
        gth = np.empty((S, q))
        hmt = np.empty((G, q))
        for j in range(q):
            gth[:, j] = _scope_sum(batch, r * z[:, j])
            hmt[:, j] = np.bincount(batch.gidx, v * z[:, j], minlength=G)
        htt = np.empty((S, q, q))
        for a, b in zip(*iu):
            htt[:, a, b] = htt[:, b, a] = _scope_sum(batch, v * z[:, a] * z[:, b])

        mu_fixed = ((mu >= M) & (gmu < 0)) | ((mu <= -M) & (gmu > 0))
        th_fixed = fixed_theta[None, :] | ((theta >= thi) & (gth < 0)) | ((theta <= tlo) & (gth > 0))
        free_mu = ~mu_fixed
        hmm_safe = np.maximum(hmm, 1e-300)
        ratio = hmt * (free_mu / hmm_safe)[:, None]
        corr = np.zeros((S, q, q))
        for a, b in zip(*iu):
            corr[:, a, b] = corr[:, b, a] = np.bincount(sg, ratio[:, a] * hmt[:, b], minlength=S)
        schur = htt - corr
        rhs = -gth + np.stack([np.bincount(sg, ratio[:, j] * gmu, minlength=S) for j in range(q)], axis=1)
        free_th = ~th_fixed
        schur = schur * (free_th[:, :, None] & free_th[:, None, :])
        diag_scale = np.abs(np.diagonal(schur, axis1=1, axis2=2)).max(axis=1)
        diag_scale = np.where(diag_scale > 0, diag_scale, 1.0)
        idx = np.arange(q)
        schur[:, idx, idx] += th_fixed * diag_scale[:, None]
        rhs = rhs * free_th
        evals, evecs = np.linalg.eigh(schur)
        cut = 1e-10 * np.maximum(np.abs(evals).max(axis=1), 1e-300)
        ok = evals > cut[:, None]
        rankdef = np.where(active, (~ok).any(axis=1), rankdef)
        inv = np.where(ok, 1.0 / np.where(ok, evals, 1.0), 0.0)
        dth = np.einsum("sij,sj->si", evecs, inv * np.einsum("sji,sj->si", evecs, rhs))
        dth = dth * free_th
        dmu = np.where(free_mu, -(gmu + np.einsum("gj,gj->g", hmt, dth[sg])) / hmm_safe, 0.0)
        dec = -(np.bincount(sg, gmu * dmu, minlength=S) + np.einsum("sj,sj->s", gth, dth))
        active &= ~(dec <= cfg.inner_tol)
        if not active.any():
            break

        # inside the quadratic region objective differences drop below float
        # resolution, so small-decrement steps are taken without a test
        accepted = ~active
        near = active & (dec < 1e-8)
        if near.any():
            ng = near[sg]
            mu[ng] = np.clip(mu + dmu, -M, M)[ng]
            theta[near] = np.clip(theta + dth, tlo, thi)[near]
            f_n, eta_n = _objective(batch, z, mu, theta)
            f[near] = f_n[near]
            nrow = ng[batch.gidx]
            eta[nrow] = eta_n[nrow]
            accepted |= near
        alpha = np.ones(S)
        for _ls in range(30):
            if accepted.all():
                break
            trying = ~accepted
            a_g = alpha[sg]
            mu_t = np.where(trying[sg], np.clip(mu + a_g * dmu, -M, M), mu)
            th_t = np.where(trying[:, None], np.clip(theta + alpha[:, None] * dth, tlo, thi), theta)
            f_t, eta_t = _objective(batch, z, mu_t, th_t)
            pred = np.bincount(sg, gmu * (mu_t - mu), minlength=S) + np.einsum("sj,sj->s", gth, th_t - theta)
            ok_s = trying & np.isfinite(f_t) & (f_t <= f + 1e-4 * pred)
            if ok_s.any():
                og = ok_s[sg]
                mu[og] = mu_t[og]
                theta[ok_s] = th_t[ok_s]
                f[ok_s] = f_t[ok_s]
                orow = og[batch.gidx]
                eta[orow] = eta_t[orow]
                accepted |= ok_s
            alpha[~accepted] *= 0.5
        # no acceptable step: numerically at the optimum
        active &= ~(~accepted)
        if not active.any():
            break
    return mu, theta, f, failed, rankdef


def _index(batch: _Batch, z, mu, theta):
    return mu[batch.gidx] + np.einsum("ij,ij->i", z, theta[batch.sobs])


def _max_by_scope(batch: _Batch, values: np.ndarray) -> np.ndarray:
    per_group = np.maximum.reduceat(values, batch.offsets[:-1]) if batch.G else np.zeros(0)
    out = np.zeros(batch.S)
    np.maximum.at(out, batch.sg, per_group)
    return out


@dataclass
class _RawFit:
    mu: np.ndarray
    theta: np.ndarray
    ccp: np.ndarray
    belief: np.ndarray
    eq_ccp: np.ndarray | None
    iters: np.ndarray
    converged: np.ndarray
    nll: np.ndarray
    rankdef: np.ndarray
    failed: np.ndarray
    polish_ok: np.ndarray


def _run_npl(batch: _Batch, p0, mu0, theta0, cfg: NplConfig) -> _RawFit:
    """Algorithm loop: minimise at frozen beliefs, then update beliefs once."""
    S, q = batch.S, batch.q
    fixed_theta = np.zeros(q, dtype=bool)
    theta0 = np.array(theta0, dtype=float)
    if cfg.peer_effect_fixed is not None:
        fixed_theta[0] = True
        theta0[:, 0] = cfg.peer_effect_fixed
    tlo, thi = _bounds(cfg, q)
    theta0 = np.clip(theta0, tlo, thi)
    mu0 = np.clip(np.asarray(mu0, dtype=float), -cfg.mu_bound, cfg.mu_bound)

    P = np.asarray(p0, dtype=float).copy()
    belief = P.copy()
    mu = mu0.copy()
    theta = theta0.copy()
    iters = np.zeros(S, dtype=np.int64)
    converged = np.zeros(S, dtype=bool)
    failed = np.zeros(S, dtype=bool)
    nll = np.full(S, np.nan)
    rankdef = np.zeros(S, dtype=bool)

    # current working batch and its maps into the full arrays
    cur, cur_groups, cur_rows = batch, np.arange(batch.G), np.arange(batch.y.shape[0])
    cur_scopes = np.arange(S)
    live = np.ones(S, dtype=bool)
    for t in range(1, cfg.max_outer + 1):
        if not live.any():
            break
        live_cur = live[cur_scopes]
        if live_cur.sum() <= 0.5 * cur_scopes.size:
            keep = np.flatnonzero(live_cur)
            cur, g_loc, r_loc = cur.take(keep)
            cur_groups, cur_rows, cur_scopes = cur_groups[g_loc], cur_rows[r_loc], cur_scopes[keep]
        Pc = P[cur_rows]
        pbar = cur.peer @ Pc
        z = np.column_stack([pbar, cur.x])
        mu_c, th_c, f_c, fail_c, rd_c = _inner_newton(cur, z, mu[cur_groups], theta[cur_scopes], cfg, fixed_theta)
        P_new = expit(_index(cur, z, mu_c, th_c))
        diff = _max_by_scope(cur, np.abs(P_new - Pc))

        upd = live[cur_scopes]
        ug = upd[cur.sg]
        ur = ug[cur.gidx]
        mu[cur_groups[ug]] = mu_c[ug]
        theta[cur_scopes[upd]] = th_c[upd]
        belief[cur_rows[ur]] = Pc[ur]
        P[cur_rows[ur]] = P_new[ur]
        nll[cur_scopes[upd]] = f_c[upd]
        rankdef[cur_scopes[upd]] = rd_c[upd]
        iters[cur_scopes[upd]] = t
        bad = upd & (fail_c | ~np.isfinite(P_new).all() | ~np.isfinite(f_c))
        failed[cur_scopes[bad]] = True
        done = upd & (diff <= cfg.ccp_tol)
        converged[cur_scopes[done]] = True
        live[cur_scopes[done | bad]] = False

    eq_ccp = None
    polish_ok = np.ones(S, dtype=bool)
    if cfg.polish and batch.G:
        st = batch.stack
        base = mu[batch.gidx] + np.einsum("ij,ij->i", batch.x, theta[batch.sobs][:, 1:])
        eq_ccp, ok_g, _ = solve_equilibrium_stacked(
            st.peer, base, theta[batch.sobs][:, 0], st.offsets, init=P,
            tol=cfg.eq_tol, max_iter=cfg.eq_max_iter,
        )
        polish_ok = np.ones(S, dtype=bool)
        np.logical_and.at(polish_ok, batch.sg, ok_g)
    return _RawFit(mu, theta, P, belief, eq_ccp, iters, converged, nll, rankdef, failed, polish_ok)


def _split_rows(values, offsets, groups) -> tuple[np.ndarray, ...]:
    return tuple(values[offsets[g]:offsets[g + 1]].copy() for g in groups)


def _package(raw: _RawFit, batch: _Batch, group_ids: Sequence[str], cfg: NplConfig) -> list[NplFit]:
    fits = []
    tlo, thi = _bounds(cfg, batch.q)
    for s in range(batch.S):
        groups = np.flatnonzero(batch.sg == s)
        th = raw.theta[s]
        mu = raw.mu[groups].copy()
        at_bound = np.abs(mu) >= cfg.mu_bound
        slope_at_bound = bool(np.any((th <= tlo) | (th >= thi)))
        fits.append(
            NplFit(
                group_ids=tuple(group_ids[g] for g in groups),
                slope=SlopeParams.from_vector(th),
                fixed_effects=mu,
                ccp=_split_rows(raw.ccp, batch.offsets, groups),
                belief_ccp=_split_rows(raw.belief, batch.offsets, groups),
                equilibrium_ccp=None if raw.eq_ccp is None else _split_rows(raw.eq_ccp, batch.offsets, groups),
                outer_iterations=int(raw.iters[s]),
                converged=bool(raw.converged[s]),
                final_nll=float(raw.nll[s]),
                rank_deficient=bool(raw.rankdef[s]),
                mu_at_bound=at_bound,
                slope_at_bound=slope_at_bound,
                polish_converged=bool(raw.polish_ok[s]),
                failed=bool(raw.failed[s]),
            )
        )
    return fits


def _starting_values(groups: Sequence[GroupData], scope_of_group, n_scopes, q, init_ccp, init_mu, init_theta):
    if init_ccp is None:
        p0 = np.concatenate([default_init_ccp(g) for g in groups]) if groups else np.zeros(0)
    else:
        p0 = np.concatenate([np.asarray(c, dtype=float) for c in init_ccp])
    if init_mu is None:
        mu0 = np.array([np.log((g.y.sum() + 0.5) / (g.n - g.y.sum() + 0.5)) for g in groups])
    else:
        mu0 = np.asarray(init_mu, dtype=float)
    if init_theta is None:
        th0 = np.zeros((n_scopes, q))
    else:
        th0 = np.broadcast_to(np.asarray(init_theta, dtype=float), (n_scopes, q)).copy()
    return p0, mu0, th0


def npl_fit_scopes(
    panel: Panel,
    scopes: Sequence[Sequence[int]],
    config: NplConfig | None = None,
    init_ccp=None,
    init_mu=None,
    init_theta=None,
) -> list[NplFit]:
    """Fit a common slope within each scope (disjoint lists of group indices).

    ``init_ccp`` / ``init_mu`` are indexed by panel group; ``init_theta`` is
    one row per scope (or a single row broadcast to all scopes).
    """
    cfg = config or NplConfig()
    order = [g for s in scopes for g in s]
    if len(set(order)) != len(order):
        raise ValueError("scopes must be disjoint")
    if any(len(s) == 0 for s in scopes):
        raise ValueError("scopes must be nonempty")
    if not scopes:
        return []
    groups = [panel.groups[g] for g in order]
    if any(g.n == 0 for g in groups):
        raise ValueError("groups must be nonempty")
    sg = np.repeat(np.arange(len(scopes)), [len(s) for s in scopes])
    stack = stack_groups(groups, panel.p)
    batch = _Batch(stack, sg, len(scopes))
    ccp0 = None if init_ccp is None else [init_ccp[g] for g in order]
    mu0 = None if init_mu is None else np.asarray(init_mu, dtype=float)[order]
    p0, mu0, th0 = _starting_values(groups, sg, len(scopes), batch.q, ccp0, mu0, init_theta)
    raw = _run_npl(batch, p0, mu0, th0, cfg)
    fits = _package(raw, batch, [g.group_id for g in groups], cfg)
    for f in fits:
        if f.failed:
            log.warning("NPL failed for scope starting with group %s", f.group_ids[0])
        elif not f.converged:
            log.warning("NPL did not converge for scope starting with group %s", f.group_ids[0])
    return fits


def npl_fit(panel: Panel, init_ccp=None, config: NplConfig | None = None, init_mu=None, init_theta=None) -> NplFit:
    """Common-slope NPL over every group of ``panel``."""
    if panel.G == 0:
        raise ValueError("empty panel")
    return npl_fit_scopes(panel, [list(range(panel.G))], config, init_ccp, init_mu, init_theta)[0]


@dataclass(frozen=True)
class PerGroupFits:
    fits: tuple[NplFit, ...]
    failed: tuple[int, ...]

    @property
    def usable(self) -> list[int]:
        bad = set(self.failed)
        return [i for i in range(len(self.fits)) if i not in bad]

    def slopes(self) -> np.ndarray:
        return np.array([f.theta for f in self.fits])


def npl_fit_per_group(panel: Panel, config: NplConfig | None = None) -> PerGroupFits:
    """Heterogeneous-slope NPL: each group is its own scope.

    Failed groups are reported in ``failed`` rather than raising.
    """
    fits = npl_fit_scopes(panel, [[g] for g in range(panel.G)], config)
    failed = tuple(i for i, f in enumerate(fits) if f.failed)
    if failed:
        log.warning("%d group(s) failed the first-step fit and are excluded", len(failed))
    return PerGroupFits(tuple(fits), failed)


def replicate_scopes(
    fit_groups: Sequence[GroupData],
    outcomes: np.ndarray,
    n_rep: int,
    config: NplConfig,
    init_ccp: np.ndarray,
    init_mu: np.ndarray,
    init_theta: np.ndarray,
) -> _RawFit:
    """Fit ``n_rep`` replicated copies of one scope with different outcomes.

    ``outcomes`` is ``(n_rep, N)`` in stacked row order of ``fit_groups``.
    Used by the parametric bootstrap.
    """
    base = stack_groups(fit_groups)
    G, N = base.n_groups, base.y.shape[0]
    peer = sp.csr_array(sp.kron(sp.eye(n_rep, format="csr"), base.peer, format="csr"))
    peer.sort_indices()
    sizes = np.tile(base.sizes, n_rep)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    st = Stack(
        y=np.asarray(outcomes, dtype=float).reshape(-1),
        x=np.tile(base.x, (n_rep, 1)),
        peer=peer,
        group=np.repeat(np.arange(G * n_rep), sizes),
        offsets=offsets,
    )
    batch = _Batch(st, np.repeat(np.arange(n_rep), G), n_rep)
    return _run_npl(
        batch,
        np.tile(init_ccp, n_rep),
        np.tile(init_mu, n_rep),
        np.broadcast_to(init_theta, (n_rep, batch.q)),
        replace(config, polish=False),
    )


# ------------------------------------------------------- profile likelihood


def profile_mu_batch(a: np.ndarray, y: np.ndarray, offsets: np.ndarray, bound: float, init=None, tol=1e-13, max_iter=100):
    """Per-group argmin over mu in [-bound, bound] of sum_i psi(a_i + mu).

    Safeguarded Newton (falls back to bisection outside the bracket).
    """
    G = offsets.shape[0] - 1
    gidx = np.repeat(np.arange(G), np.diff(offsets))

    def score(mu):
        return np.bincount(gidx, expit(a + mu[gidx]) - y, minlength=G)

    lo = np.full(G, -bound)
    hi = np.full(G, bound)
    s_lo, s_hi = score(lo), score(hi)
    at_lo = s_lo >= 0
    at_hi = s_hi <= 0
    mu = np.zeros(G) if init is None else np.clip(np.asarray(init, dtype=float), -bound, bound)
    mu = np.where(at_lo, -bound, np.where(at_hi, bound, mu))
    active = ~(at_lo | at_hi)
    for _ in range(max_iter):
        if not active.any():
            break
        lam = expit(a + mu[gidx])
        s = np.bincount(gidx, lam - y, minlength=G)
        h = np.bincount(gidx, lam * (1.0 - lam), minlength=G)
        step = -s / np.maximum(h, 1e-300)
        scale = np.maximum(1.0, np.abs(mu))
        active &= (np.abs(step) > tol * scale) & (hi - lo > tol * scale)
        lo = np.where(active & (s < 0), np.maximum(lo, mu), lo)
        hi = np.where(active & (s > 0), np.minimum(hi, mu), hi)
        cand = mu + step
        outside = (cand <= lo) | (cand >= hi) | ~np.isfinite(cand)
        cand = np.where(outside, 0.5 * (lo + hi), cand)
        mu = np.where(active, cand, mu)
    return mu


def profile_fixed_effect(group: GroupData, slope: SlopeParams, ccp, bound: float = 10.0) -> float:
    """Concentrated fixed effect given the slope and beliefs."""
    pbar = group.peer_matrix @ np.asarray(ccp, dtype=float)
    a = slope.peer_effect * pbar + group.x @ slope.covariate_slopes
    return float(profile_mu_batch(a, group.y, np.array([0, group.n]), bound)[0])


def profile_nll(group: GroupData, slope: SlopeParams, ccp, bound: float = 10.0) -> float:
    """Profile negative log-likelihood: group NLL at the concentrated fixed effect."""
    mu = profile_fixed_effect(group, slope, ccp, bound)
    return group_nll(group, GroupParams(mu, slope), ccp)
