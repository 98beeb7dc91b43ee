import io

import numpy as np
import pytest
import scipy.sparse as sp

from latentpeer.data import (
    GroupData,
    Panel,
    PanelFormatError,
    load_panel,
    mean_peer_belief,
    panel_to_strings,
    save_panel,
)

from _util import random_panel


def _load(nodes: str, edges: str) -> Panel:
    return load_panel(io.StringIO(nodes), io.StringIO(edges))


NODES = "group_id,individual_id,y,x_1\nA,1,1,0.5\nA,2,0,-1.0\nA,3,1,2.0\nB,1,0,0.0\n"
EDGES = "group_id,from_id,to_id\nA,1,2\nA,1,3\nA,2,1\n"


def test_load_small_panel():
    panel = _load(NODES, EDGES)
    assert panel.group_ids == ("A", "B")
    a = panel.groups[0]
    assert a.n == 3 and a.p == 1
    assert list(a.degree) == [2, 1, 0]
    # mean over influencers, zero for isolates
    pbar = mean_peer_belief(a, np.array([0.2, 0.4, 0.9]))
    assert np.allclose(pbar, [(0.4 + 0.9) / 2, 0.2, 0.0])
    assert panel.groups[1].n == 1


def test_round_trip_is_bit_exact():
    rng = np.random.default_rng(3)
    panel = random_panel(rng, 4, 7, 2)
    nodes, edges = panel_to_strings(panel)
    back = _load(nodes, edges)
    assert back.equals(panel)
    assert panel_to_strings(back) == (nodes, edges)


def test_version_comment_is_written_and_skipped():
    nodes, edges = panel_to_strings(_load(NODES, EDGES))
    assert nodes.startswith("# format_version=1\n")
    assert edges.startswith("# format_version=1\n")
    assert _load(nodes, edges).G == 2


@pytest.mark.parametrize(
    "nodes,edges,fragment,line",
    [
        ("group_id,individual_id,y,x_1\nA,1,2,0.5\n", "group_id,from_id,to_id\n", "y must be 0 or 1", 2),
        ("group_id,individual_id,y,x_1\nA,1,1,abc\n", "group_id,from_id,to_id\n", "non-numeric", 2),
        ("group_id,individual_id,y,x_1\nA,1,1,nan\n", "group_id,from_id,to_id\n", "non-finite", 2),
        ("group_id,individual_id,y,x_1\nA,1,1,1\nA,1,0,1\n", "group_id,from_id,to_id\n", "duplicate individual", 3),
        ("group_id,individual_id,y,x_1\nA,1,1,1\nA,2\n", "group_id,from_id,to_id\n", "expected 4 fields", 3),
        ("gid,individual_id,y\n", "group_id,from_id,to_id\n", "header", 1),
        (NODES, "group_id,from_id,to_id\nA,1,1\n", "self-link", 2),
        (NODES, "group_id,from_id,to_id\nC,1,2\n", "unknown group", 2),
        (NODES, "group_id,from_id,to_id\nA,1,9\n", "unknown individual", 2),
        (NODES, "group_id,from_id,to_id\nA,1,2\nA,1,2\n", "duplicate edge", 3),
        (NODES, "from,to\n", "header", 1),
        ("", "group_id,from_id,to_id\n", "empty nodes", 1),
    ],
)
def test_malformed_input_reports_line(nodes, edges, fragment, line):
    with pytest.raises(PanelFormatError) as info:
        _load(nodes, edges)
    assert fragment in str(info.value)
    assert info.value.line == line


def test_group_validation():
    with pytest.raises(ValueError):
        GroupData("g", ("a", "b"), [0, 1], np.zeros((2, 1)), sp.csr_array(np.eye(2, dtype=bool)))
    with pytest.raises(ValueError):
        GroupData("g", ("a", "a"), [0, 1], np.zeros((2, 1)), sp.csr_array((2, 2), dtype=bool))
    with pytest.raises(ValueError):
        GroupData("g", ("a", "b"), [0, 0.5], np.zeros((2, 1)), sp.csr_array((2, 2), dtype=bool))
    with pytest.raises(ValueError):
        Panel((GroupData("g", ("a",), [1], np.zeros((1, 1)), sp.csr_array((1, 1), dtype=bool)),), p=2)


def test_save_to_paths(tmp_path):
    panel = _load(NODES, EDGES)
    save_panel(panel, tmp_path / "n.csv", tmp_path / "e.csv")
    assert load_panel(tmp_path / "n.csv", tmp_path / "e.csv").equals(panel)
