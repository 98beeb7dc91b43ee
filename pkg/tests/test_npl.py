import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentpeer.data import Panel
from latentpeer.dgp import DgpConfig, generate_panel
from latentpeer.equilibrium import gamma_map
from latentpeer.logit import GroupParams, SlopeParams, group_nll, group_nll_grad_hess
from latentpeer.npl import (
    NplConfig,
    default_init_ccp,
    npl_fit,
    npl_fit_per_group,
    npl_fit_scopes,
    profile_fixed_effect,
    profile_nll,
)

from _util import fe_logit_newton, random_panel


def _panel_gradient(panel, fit, ccps):
    grads = []
    for g, mu, c in zip(panel.groups, fit.fixed_effects, ccps):
        grad, _ = group_nll_grad_hess(g, GroupParams(mu, fit.slope), c)
        grads.append(grad)
    grads = np.array(grads)
    # mu_g enters one group only; slopes are shared and averaged over groups
    return grads[:, 0], grads[:, 1:].mean(axis=0)


def test_fixed_zero_peer_effect_matches_fixed_effect_logit():
    rng = np.random.default_rng(0)
    sizes = [int(s) for s in rng.integers(20, 60, size=6)]
    panel = random_panel(rng, 6, 0, 2, sizes=sizes)
    fit = npl_fit(panel, config=NplConfig(peer_effect_fixed=0.0))
    mu_ref, beta_ref = fe_logit_newton(panel, weights=1.0 / np.array(sizes))
    assert fit.slope.peer_effect == 0.0
    assert np.max(np.abs(fit.fixed_effects - mu_ref)) < 1e-6
    assert np.max(np.abs(fit.slope.covariate_slopes - beta_ref)) < 1e-6


def test_empty_networks_leave_peer_effect_unidentified():
    rng = np.random.default_rng(1)
    panel = random_panel(rng, 5, 30, 1, empty=True)
    fit = npl_fit(panel)
    assert fit.rank_deficient
    assert fit.slope.peer_effect == 0.0
    mu_ref, beta_ref = fe_logit_newton(panel)
    assert np.max(np.abs(fit.slope.covariate_slopes - beta_ref)) < 1e-6
    assert np.max(np.abs(fit.fixed_effects - mu_ref)) < 1e-6


def test_npl_fixed_point_conditions():
    panel, _ = generate_panel(DgpConfig(G=20, n=40, seed=3))
    fit = npl_fit(panel)
    assert fit.converged and not fit.failed
    g_mu, g_slope = _panel_gradient(panel, fit, fit.belief_ccp)
    assert np.max(np.abs(g_mu)) < 1e-8 and np.max(np.abs(g_slope)) < 1e-8
    # beliefs reproduce themselves up to the outer tolerance
    for g, mu, b, c in zip(panel.groups, fit.fixed_effects, fit.belief_ccp, fit.ccp):
        assert np.allclose(c, gamma_map(g, GroupParams(mu, fit.slope), b), rtol=0, atol=1e-13)
        assert np.max(np.abs(c - b)) <= 1e-5
    # polished profile is an exact equilibrium at the estimates
    for g, mu, e in zip(panel.groups, fit.fixed_effects, fit.equilibrium_ccp):
        assert np.max(np.abs(gamma_map(g, GroupParams(mu, fit.slope), e) - e)) <= 1e-10


def test_scope_batching_is_invariant():
    panel, _ = generate_panel(DgpConfig(G=9, n=25, seed=4))
    scopes = [[0, 3, 5], [1, 2], [4, 6, 7, 8]]
    together = npl_fit_scopes(panel, scopes)
    for s, f in zip(scopes, together):
        alone = npl_fit(Panel(tuple(panel.groups[g] for g in s), panel.p))
        assert np.allclose(f.theta, alone.theta, rtol=0, atol=1e-10)
        assert np.allclose(f.fixed_effects, alone.fixed_effects, rtol=0, atol=1e-10)
        assert f.outer_iterations == alone.outer_iterations


def test_scope_validation():
    panel, _ = generate_panel(DgpConfig(G=4, n=10, seed=5))
    with pytest.raises(ValueError):
        npl_fit_scopes(panel, [[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        npl_fit_scopes(panel, [[0], []])


def test_default_start_is_group_share():
    rng = np.random.default_rng(6)
    panel = random_panel(rng, 1, 12, 1)
    g = panel.groups[0]
    init = default_init_ccp(g)
    assert init.shape == (12,)
    assert np.all((init > 0) & (init < 1))
    fit = npl_fit(panel)
    # a tiny random group may push the peer effect to its bound
    assert fit.converged or fit.slope_at_bound


def test_all_ones_group_hits_fixed_effect_bound():
    rng = np.random.default_rng(7)
    panel = random_panel(rng, 4, 15, 1)
    g0 = panel.groups[0]
    ones = type(g0)(g0.group_id, g0.individual_ids, np.ones(g0.n), g0.x, g0.adjacency)
    panel = Panel((ones,) + panel.groups[1:], panel.p)
    fit = npl_fit(panel)
    assert fit.mu_at_bound[0] and not fit.mu_at_bound[1:].any()
    assert fit.fixed_effects[0] == 10.0


def test_per_group_fits_recover_cluster_slopes_on_large_groups():
    cfg = DgpConfig(G=10, n=400, seed=8)
    panel, truth = generate_panel(cfg)
    first = npl_fit_per_group(panel)
    assert first.failed == ()
    err = first.slopes() - cfg.slopes[truth.membership(panel)]
    # per-group sampling error at n = 400 is of order 0.1 to 0.5
    assert np.median(np.abs(err)) < 0.5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 40), peer=st.floats(-3, 3))
def test_profiled_fixed_effect_solves_the_score(seed, n, peer):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, 1, n, 2)
    g = panel.groups[0]
    slope = SlopeParams(peer, rng.normal(size=2))
    ccp = rng.random(n)
    mu = profile_fixed_effect(g, slope, ccp)
    grad, _ = group_nll_grad_hess(g, GroupParams(mu, slope), ccp)
    if abs(mu) < 10:
        assert abs(grad[0]) < 1e-10
    else:
        # at the box edge the score points outward
        assert grad[0] * np.sign(mu) <= 0
    assert profile_nll(g, slope, ccp) == group_nll(g, GroupParams(mu, slope), ccp)
    for d in (-1e-4, 1e-4):
        m2 = float(np.clip(mu + d, -10, 10))
        assert group_nll(g, GroupParams(m2, slope), ccp) >= profile_nll(g, slope, ccp) - 1e-14
