import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentpeer.data import stack_groups
from latentpeer.equilibrium import (
    EquilibriumError,
    gamma_map,
    logistic_draws,
    simulate_outcomes,
    solve_equilibrium,
    solve_equilibrium_stacked,
)
from latentpeer.logit import GroupParams, SlopeParams

from _util import random_group


def _params(rng, p, peer):
    return GroupParams(rng.normal(), SlopeParams(peer, rng.normal(size=p)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 50), p=st.integers(1, 4), peer=st.floats(-3.9, 3.9))
def test_fixed_point_is_unique_and_accurate(seed, n, p, peer):
    rng = np.random.default_rng(seed)
    g = random_group(rng, n, p)
    par = _params(rng, p, peer)
    sols = [solve_equilibrium(g, par, init=rng.random(n)).values for _ in range(4)]
    for s in sols:
        assert np.max(np.abs(gamma_map(g, par, s) - s)) <= 1e-10
        assert np.all((s > 0) & (s < 1))
    spread = max(np.max(np.abs(a - sols[0])) for a in sols)
    assert spread < 1e-8


def test_observed_contraction_factor():
    rng = np.random.default_rng(5)
    for _ in range(20):
        peer = rng.uniform(-3.9, 3.9)
        g = random_group(rng, 30, 2)
        prof = solve_equilibrium(g, _params(rng, 2, peer), init=rng.random(30), record_steps=True)
        r = np.array(prof.step_sizes)
        big = r[:-1] > 1e-7
        ratios = r[1:][big] / r[:-1][big]
        assert np.all(ratios <= abs(peer) / 4 + 1e-12)


def test_zero_peer_effect_is_one_step():
    rng = np.random.default_rng(6)
    g = random_group(rng, 10, 1)
    par = GroupParams(0.3, SlopeParams(0.0, [1.0]))
    prof = solve_equilibrium(g, par)
    assert prof.iterations == 1
    assert np.allclose(prof.values, 1 / (1 + np.exp(-(0.3 + g.x[:, 0]))), atol=0, rtol=1e-15)


def test_isolated_individuals_have_closed_form():
    rng = np.random.default_rng(7)
    g = random_group(rng, 8, 1, empty=True)
    par = GroupParams(-0.5, SlopeParams(3.0, [2.0]))
    prof = solve_equilibrium(g, par)
    assert np.allclose(prof.values, 1 / (1 + np.exp(-(-0.5 + 2.0 * g.x[:, 0]))))


def test_rejects_non_contracting_peer_effect():
    rng = np.random.default_rng(8)
    g = random_group(rng, 5, 1)
    with pytest.raises(ValueError):
        solve_equilibrium(g, GroupParams(0.0, SlopeParams(4.0, [0.0])))
    with pytest.raises(ValueError):
        solve_equilibrium(g, GroupParams(0.0, SlopeParams(-4.5, [0.0])))


def test_iteration_cap_raises():
    rng = np.random.default_rng(9)
    g = random_group(rng, 20, 1)
    with pytest.raises(EquilibriumError):
        solve_equilibrium(g, GroupParams(0.0, SlopeParams(3.9, [1.0])), max_iter=1, tol=1e-15)


def test_stacked_solver_matches_per_group():
    rng = np.random.default_rng(10)
    groups = [random_group(rng, int(rng.integers(1, 30)), 2, gid=f"g{i}") for i in range(6)]
    pars = [_params(rng, 2, rng.uniform(-3.5, 3.5)) for _ in groups]
    st_ = stack_groups(groups)
    base = np.concatenate([p.fixed_effect + g.x @ p.slope.covariate_slopes for g, p in zip(groups, pars)])
    peer = np.concatenate([np.full(g.n, p.slope.peer_effect) for g, p in zip(groups, pars)])
    ccp, ok, iters = solve_equilibrium_stacked(st_.peer, base, peer, st_.offsets)
    assert ok.all()
    for k, (g, p) in enumerate(zip(groups, pars)):
        single = solve_equilibrium(g, p)
        assert np.array_equal(ccp[st_.offsets[k]:st_.offsets[k + 1]], single.values)
        assert iters[k] == single.iterations


def test_simulated_frequencies_match_probabilities():
    rng = np.random.default_rng(11)
    g = random_group(rng, 200, 1)
    par = GroupParams(0.2, SlopeParams(1.5, [0.7]))
    eq = solve_equilibrium(g, par).values
    draws = np.mean([simulate_outcomes(g, par, eq, rng) for _ in range(400)], axis=0)
    se = np.sqrt(eq * (1 - eq) / 400)
    assert np.mean(np.abs(draws - eq) <= 3 * se) > 0.98


def test_logistic_draws_distribution():
    rng = np.random.default_rng(12)
    e = logistic_draws(rng, 200_000)
    assert abs(np.mean(e)) < 0.02
    assert abs(np.var(e) - np.pi**2 / 3) < 0.05
    assert abs(np.mean(e <= 1.0) - 1 / (1 + np.exp(-1.0))) < 0.005
