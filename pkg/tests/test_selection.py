import math

import numpy as np
import pytest

from latentpeer.dgp import DgpConfig, generate_panel
from latentpeer.npl import npl_fit_per_group, profile_nll
from latentpeer.selection import IcRow, compute_ic, default_lambda, fit_term, select_clusters, select_k


def test_default_lambda_formula():
    assert default_lambda(100.0) == pytest.approx(math.log(math.log(100.0)) / 400.0, rel=1e-15)
    assert default_lambda(2.0) == 0.0
    assert default_lambda(math.e) == 0.0
    assert default_lambda(3.0) > 0.0


def test_compute_ic_penalty():
    row = compute_ic(0.6, 3, 2, 0.01)
    assert row == IcRow(3, 0.6 + 0.06, 0.6, pytest.approx(0.06))


def test_select_k_prefers_smallest_on_ties():
    rows = [IcRow(1, 0.5, 0.5, 0), IcRow(2, 0.4, 0.4, 0), IcRow(3, 0.4, 0.4, 0), IcRow(4, math.inf, math.inf, 0)]
    assert select_k(rows) == 2
    assert select_k([IcRow(1, 0.1, 0.1, 0)]) == 1
    with pytest.raises(ValueError):
        select_k([])


@pytest.fixture(scope="module")
def selection():
    cfg = DgpConfig(G=30, n=100, seed=31)
    panel, truth = generate_panel(cfg)
    first = npl_fit_per_group(panel)
    return panel, first, select_clusters(panel, first, 4)


def test_information_criterion_recovers_three_clusters(selection):
    _, _, sel = selection
    assert sel.selected_k == 3
    assert [r.k for r in sel.table] == [1, 2, 3, 4]
    assert sel.chosen.K == 3


def test_fit_term_is_individual_weighted_profile_nll(selection):
    panel, first, sel = selection
    cand = sel.candidates[1]
    num = den = 0.0
    for g in first.usable:
        grp = panel.groups[g]
        slope = cand.post_fits[cand.solution.membership[g]].slope
        num += grp.n * profile_nll(grp, slope, first.fits[g].belief_ccp[0])
        den += grp.n
    assert fit_term(panel, first, cand.solution.membership, cand.post_fits) == pytest.approx(num / den, rel=1e-14)
    assert cand.row.fit_term == pytest.approx(num / den, rel=1e-14)
    assert cand.row.penalty == pytest.approx(sel.lam * (1 + panel.p) * 2)


def test_fit_term_decreases_with_more_clusters(selection):
    _, _, sel = selection
    fits = [r.fit_term for r in sel.table]
    assert fits[0] > fits[2]


def test_zero_lambda_and_cap(selection):
    panel, first, _ = selection
    small = select_clusters(panel, first, 2, lam=0.0)
    assert small.lam == 0.0
    assert all(r.penalty == 0.0 for r in small.table)
    with pytest.raises(ValueError):
        select_clusters(panel, first, 0)
