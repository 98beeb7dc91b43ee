"""Panel-of-groups containers and the nodes/edges CSV exchange format.

A row ``(g, i, j)`` in the edges file means that individual ``i`` of group
``g`` is influenced by ``j``.  Adjacency is kept as a row-indexed sparse
matrix because observed friendship networks are very sparse.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

FORMAT_VERSION = 1


class PanelFormatError(ValueError):
    """Raised when CSV input violates the exchange format."""

    def __init__(self, message: str, source: str = "", line: int | None = None):
        where = source
        if line is not None:
            where = f"{source} line {line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line


@dataclass(frozen=True, eq=False)
class GroupData:
    """One group: outcomes ``y``, covariates ``x`` (n x p) and a directed network.

    ``adjacency[i, j]`` is true when ``i`` is influenced by ``j``.
    """

    group_id: str
    individual_ids: tuple[str, ...]
    y: np.ndarray
    x: np.ndarray
    adjacency: sp.csr_array

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        n = y.shape[0]
        if x.ndim == 1:
            x = x.reshape(n, -1) if n else x.reshape(0, 0)
        if x.ndim != 2 or x.shape[0] != n:
            raise ValueError(f"group {self.group_id}: x must have {n} rows")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError(f"group {self.group_id}: y must be binary")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"group {self.group_id}: covariates must be finite")
        if len(self.individual_ids) != n:
            raise ValueError(f"group {self.group_id}: expected {n} individual ids")
        if len(set(self.individual_ids)) != n:
            raise ValueError(f"group {self.group_id}: duplicate individual id")
        adj = sp.csr_array(self.adjacency, dtype=bool)
        if adj.shape != (n, n):
            raise ValueError(f"group {self.group_id}: adjacency must be {n} x {n}")
        adj.sum_duplicates()
        adj.eliminate_zeros()
        adj.sort_indices()
        if n and adj.diagonal().any():
            raise ValueError(f"group {self.group_id}: self-links are not allowed")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "individual_ids", tuple(str(i) for i in self.individual_ids))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @cached_property
    def degree(self) -> np.ndarray:
        """Influencer count ``N_i`` per individual."""
        d = np.diff(self.adjacency.indptr).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def peer_matrix(self) -> sp.csr_array:
        """Row-normalised adjacency; rows of isolated individuals are zero."""
        deg = self.degree
        data = np.repeat(1.0 / np.maximum(deg, 1), deg)
        return sp.csr_array(
            (data, self.adjacency.indices.copy(), self.adjacency.indptr.copy()),
            shape=(self.n, self.n),
        )

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def with_outcomes(self, y: np.ndarray) -> "GroupData":
        return GroupData(self.group_id, self.individual_ids, y, self.x, self.adjacency)

    def equals(self, other: "GroupData") -> bool:
        return (
            self.group_id == other.group_id
            and self.individual_ids == other.individual_ids
            and np.array_equal(self.y, other.y)
            and self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
            and (self.adjacency != other.adjacency).nnz == 0
        )


def mean_peer_belief(group: GroupData, ccp: np.ndarray) -> np.ndarray:
    """Average belief over each individual's influencers (0 for isolates)."""
    ccp = np.asarray(ccp, dtype=float)
    if ccp.shape != (group.n,):
        raise ValueError(f"ccp has shape {ccp.shape}, expected ({group.n},)")
    return group.peer_matrix @ ccp


@dataclass(frozen=True)
class Stack:
    """Groups concatenated into flat arrays for vectorised estimation."""

    y: np.ndarray
    x: np.ndarray
    peer: sp.csr_array  # block-diagonal row-normalised adjacency
    group: np.ndarray  # group index of each row
    offsets: np.ndarray  # row offsets, length G + 1

    @property
    def n_groups(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)


def stack_groups(groups: Sequence[GroupData], p: int | None = None) -> Stack:
    if p is None:
        p = groups[0].p if groups else 0
    sizes = np.array([g.n for g in groups], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    if groups:
        y = np.concatenate([g.y for g in groups])
        x = np.vstack([g.x for g in groups])
        peer = sp.csr_array(sp.block_diag([g.peer_matrix for g in groups], format="csr"))
    else:
        y = np.zeros(0)
        x = np.zeros((0, p))
        peer = sp.csr_array((0, 0))
    peer.sort_indices()
    group = np.repeat(np.arange(len(groups)), sizes)
    return Stack(y=y, x=x, peer=peer, group=group, offsets=offsets)


@dataclass(frozen=True, eq=False)
class Panel:
    """An ordered collection of groups sharing the covariate dimension ``p``."""

    groups: tuple[GroupData, ...]
    p: int
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        ids = [g.group_id for g in groups]
        if len(set(ids)) != len(ids):
            raise ValueError("group ids must be unique")
        for g in groups:
            if g.p != self.p:
                raise ValueError(f"group {g.group_id} has {g.p} covariates, expected {self.p}")
        if not self.covariate_names:
            object.__setattr__(self, "covariate_names", tuple(f"x_{j + 1}" for j in range(self.p)))
        elif len(self.covariate_names) != self.p:
            raise ValueError("covariate_names must have length p")

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(g.group_id for g in self.groups)

    @property
    def n_total(self) -> int:
        return sum(g.n for g in self.groups)

    @property
    def mean_group_size(self) -> float:
        return self.n_total / self.G if self.G else 0.0

    @cached_property
    def stack(self) -> Stack:
        return stack_groups(self.groups, self.p)

    def subset(self, indices: Iterable[int]) -> "Panel":
        return Panel(tuple(self.groups[i] for i in indices), self.p, self.covariate_names)

    def equals(self, other: "Panel") -> bool:
        return (
            self.p == other.p
            and self.G == other.G
            and all(a.equals(b) for a, b in zip(self.groups, other.groups))
        )


@dataclass(frozen=True)
class DgpTruth:
    """Known truth for a simulated panel."""

    cluster_of_group: dict[str, int]
    coefficients: np.ndarray  # K x (1 + p): peer effect then covariate slopes
    fixed_effects: dict[str, float]  # composite mu_g0 + c_k0
    equilibrium_ccp: dict[str, np.ndarray]

    def membership(self, panel: Panel) -> np.ndarray:
        return np.array([self.cluster_of_group[g] for g in panel.group_ids], dtype=np.int64)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "cluster_of_group": {k: int(v) for k, v in self.cluster_of_group.items()},
            "coefficients": self.coefficients.tolist(),
            "fixed_effects": {k: float(v) for k, v in self.fixed_effects.items()},
            "equilibrium_ccp": {k: v.tolist() for k, v in self.equilibrium_ccp.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DgpTruth":
        return cls(
            cluster_of_group={k: int(v) for k, v in obj["cluster_of_group"].items()},
            coefficients=np.asarray(obj["coefficients"], dtype=float),
            fixed_effects={k: float(v) for k, v in obj["fixed_effects"].items()},
            equilibrium_ccp={k: np.asarray(v, dtype=float) for k, v in obj["equilibrium_ccp"].items()},
        )


# ---------------------------------------------------------------- CSV format


def _open_text(source) -> tuple[IO[str], bool, str]:
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        return open(source, newline="", encoding="utf-8"), True, str(source)
    return source, False, getattr(source, "name", "")


def version_line() -> str:
    """Leading comment line carried by every CSV the package writes."""
    return f"# format_version={FORMAT_VERSION}\n"


def _read_header(reader, name: str, what: str) -> list[str]:
    """First non-comment row; rows starting with '#' before it are skipped."""
    for row in reader:
        if row and row[0].lstrip().startswith("#"):
            continue
        if not row:
            continue
        return [h.strip() for h in row]
    raise PanelFormatError(f"empty {what} file", name, 1)


def _parse_binary(value: str, name: str, line: int) -> float:
    try:
        v = float(value)
    except ValueError:
        raise PanelFormatError(f"y must be 0 or 1, got {value!r}", name, line) from None
    if v not in (0.0, 1.0):
        raise PanelFormatError(f"y must be 0 or 1, got {value!r}", name, line)
    return v


def load_panel(nodes_source, edges_source) -> Panel:
    """Read and validate a panel from nodes and edges CSV sources.

    Sources may be paths or open text streams. Individuals keep their order of
    first appearance within each group; groups keep their order of first
    appearance in the nodes file.
    """
    fh, close, name = _open_text(nodes_source)
    try:
        reader = csv.reader(fh)
        header = _read_header(reader, name, "nodes")
        if header[:3] != ["group_id", "individual_id", "y"]:
            raise PanelFormatError("header must start with group_id,individual_id,y", name, reader.line_num)
        cov_names = tuple(header[3:])
        p = len(cov_names)
        order: list[str] = []
        rows: dict[str, dict] = {}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3 + p:
                raise PanelFormatError(f"expected {3 + p} fields, got {len(row)}", name, line)
            gid, iid = row[0], row[1]
            y = _parse_binary(row[2], name, line)
            xs = []
            for col, value in zip(cov_names, row[3:]):
                try:
                    v = float(value)
                except ValueError:
                    raise PanelFormatError(f"non-numeric covariate {col}={value!r}", name, line) from None
                if not math.isfinite(v):
                    raise PanelFormatError(f"non-finite covariate {col}={value!r}", name, line)
                xs.append(v)
            if gid not in rows:
                order.append(gid)
                rows[gid] = {"ids": [], "index": {}, "y": [], "x": []}
            g = rows[gid]
            if iid in g["index"]:
                raise PanelFormatError(f"duplicate individual id {iid!r} in group {gid!r}", name, line)
            g["index"][iid] = len(g["ids"])
            g["ids"].append(iid)
            g["y"].append(y)
            g["x"].append(xs)
    finally:
        if close:
            fh.close()

    edges: dict[str, tuple[list[int], list[int]]] = {gid: ([], []) for gid in order}
    seen: set[tuple[str, int, int]] = set()
    fh, close, name = _open_text(edges_source)
    try:
        reader = csv.reader(fh)
        header = _read_header(reader, name, "edges")
        if header != ["group_id", "from_id", "to_id"]:
            raise PanelFormatError("header must be group_id,from_id,to_id", name, reader.line_num)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise PanelFormatError(f"expected 3 fields, got {len(row)}", name, line)
            gid, src, dst = row
            if gid not in rows:
                raise PanelFormatError(f"unknown group {gid!r}", name, line)
            index = rows[gid]["index"]
            for who in (src, dst):
                if who not in index:
                    raise PanelFormatError(f"unknown individual {who!r} in group {gid!r}", name, line)
            if src == dst:
                raise PanelFormatError(f"self-link for individual {src!r}", name, line)
            key = (gid, index[src], index[dst])
            if key in seen:
                raise PanelFormatError(f"duplicate edge {src!r}->{dst!r}", name, line)
            seen.add(key)
            edges[gid][0].append(index[src])
            edges[gid][1].append(index[dst])
    finally:
        if close:
            fh.close()

    groups = []
    for gid in order:
        g = rows[gid]
        n = len(g["ids"])
        r, c = edges[gid]
        adj = sp.csr_array((np.ones(len(r), dtype=bool), (np.array(r, dtype=np.int64), np.array(c, dtype=np.int64))), shape=(n, n))
        x = np.array(g["x"], dtype=float).reshape(n, p)
        groups.append(GroupData(gid, tuple(g["ids"]), np.array(g["y"]), x, adj))
    return Panel(tuple(groups), p, cov_names)


def _fmt(v: float) -> str:
    return repr(float(v))


def save_panel(panel: Panel, nodes_sink, edges_sink) -> None:
    """Write ``panel`` in the format read by :func:`load_panel`.

    Floats are written with ``repr`` so a round trip is bit-exact.
    """
    fh, close, _ = _open_text_w(nodes_sink)
    try:
        fh.write(version_line())
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", "individual_id", "y", *panel.covariate_names])
        for g in panel.groups:
            for i in range(g.n):
                w.writerow([g.group_id, g.individual_ids[i], str(int(g.y[i])), *(_fmt(v) for v in g.x[i])])
    finally:
        if close:
            fh.close()
    fh, close, _ = _open_text_w(edges_sink)
    try:
        fh.write(version_line())
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", "from_id", "to_id"])
        for g in panel.groups:
            for i in range(g.n):
                for j in g.neighbors(i):
                    w.writerow([g.group_id, g.individual_ids[i], g.individual_ids[j]])
    finally:
        if close:
            fh.close()


def _open_text_w(sink) -> tuple[IO[str], bool, str]:
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        return open(sink, "w", newline="", encoding="utf-8"), True, str(sink)
    return sink, False, ""


def panel_to_strings(panel: Panel) -> tuple[str, str]:
    nodes, edges = io.StringIO(), io.StringIO()
    save_panel(panel, nodes, edges)
    return nodes.getvalue(), edges.getvalue()
