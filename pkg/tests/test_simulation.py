import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentpeer.data import DgpTruth
from latentpeer.dgp import DgpConfig, cluster_sizes, generate_panel, random_network
from latentpeer.equilibrium import gamma_map
from latentpeer.logit import GroupParams, SlopeParams
from latentpeer.pipeline import PipelineOptions
from latentpeer.simulation import (
    classification_accuracy,
    match_clusters,
    run_monte_carlo,
    run_oracle_study,
    run_pooled_study,
)


def test_cluster_sizes_round_to_total():
    assert list(cluster_sizes(100, (0.3, 0.3, 0.4))) == [30, 30, 40]
    assert list(cluster_sizes(10, (0.3, 0.3, 0.4))) == [3, 3, 4]
    assert cluster_sizes(7, (0.3, 0.3, 0.4)).sum() == 7


def test_design_shapes_and_truth():
    cfg = DgpConfig(G=20, n=15, seed=1)
    panel, truth = generate_panel(cfg)
    assert panel.G == 20 and all(g.n == 15 for g in panel.groups)
    assert np.bincount(truth.membership(panel)).tolist() == [6, 6, 8]
    for g in panel.groups:
        assert g.degree.max() <= cfg.n_max
        assert set(np.unique(g.y)) <= {0.0, 1.0}
        k = truth.cluster_of_group[g.group_id]
        slope = SlopeParams.from_vector(cfg.slopes[k])
        eq = truth.equilibrium_ccp[g.group_id]
        res = gamma_map(g, GroupParams(truth.fixed_effects[g.group_id], slope), eq) - eq
        assert np.max(np.abs(res)) <= 1e-10
    again = DgpTruth.from_json(truth.to_json())
    assert again.cluster_of_group == truth.cluster_of_group


def test_design_is_deterministic():
    cfg = DgpConfig(G=5, n=10, seed=9)
    a, _ = generate_panel(cfg, rep=2)
    b, _ = generate_panel(cfg, rep=2)
    c, _ = generate_panel(cfg, rep=3)
    assert a.equals(b) and not a.equals(c)


def test_singleton_groups_have_no_links():
    rng = np.random.default_rng(0)
    assert random_network(rng, 1, 5).nnz == 0
    net = random_network(rng, 3, 5)
    assert np.diff(net.indptr).max() <= 2
    assert not net.diagonal().any()


def test_outcome_frequencies_match_equilibrium():
    # standardised residuals y - p over many independent panels
    cfg = DgpConfig(G=3, n=30, seed=2)
    z = []
    for r in range(300):
        panel, tr = generate_panel(cfg, rep=r)
        for g in panel.groups:
            p = tr.equilibrium_ccp[g.group_id]
            z.append((g.y - p) / np.sqrt(p * (1 - p)))
    z = np.concatenate(z)
    assert abs(z.mean()) < 3 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 0.05


@settings(max_examples=60, deadline=None)
@given(
    t=st.lists(st.integers(0, 3), min_size=1, max_size=9),
    seed=st.integers(0, 2**31 - 1),
)
def test_accuracy_equals_best_permutation(t, seed):
    t = np.array(t)
    rng = np.random.default_rng(seed)
    e = rng.integers(-1, 4, size=t.size)
    best = 0
    for perm in itertools.permutations(range(4)):
        mapped = np.array([perm[v] if v >= 0 else -1 for v in e])
        best = max(best, int(np.sum(mapped == t)))
    assert classification_accuracy(t, e) == pytest.approx(best / t.size)


def test_match_clusters_finds_nearest_assignment():
    true = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
    est = np.array([[5.1, 5.0], [0.1, 0.0], [0.9, 1.1]])
    assert list(match_clusters(est, true)) == [1, 2, 0]
    assert list(match_clusters(est[:2], true)) == [1, -1, 0]


def test_small_studies_run_and_report():
    cfg = DgpConfig(G=12, n=30, seed=3, mc_reps=2, boot_reps=20)
    opts = PipelineOptions(k_max=3, bootstrap=False, kmeans_restarts=5)
    sel = run_monte_carlo(cfg, opts)
    assert len(sel.records) == 2
    assert abs(sum(sel.k_frequencies()) - 1.0) < 1e-12
    assert sel.table_csv().startswith("# format_version=1\nG,n,reps,k_1,k_2,k_3,accuracy\n")
    oracle = run_oracle_study(cfg, PipelineOptions(boot_reps=20))
    csv = oracle.table_csv().splitlines()
    assert csv[1] == "G,n,cluster,coefficient,truth,estimator,bias,rmse,coverage"
    pooled = run_pooled_study(cfg, opts)
    assert pooled.to_json()["kind"] == "mc_summary_pooled"
    assert "pooled" in pooled.cluster_stats()[0]["estimators"]
