"""Three-cluster data generating process with known truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import DgpTruth, GroupData, Panel, stack_groups
from .equilibrium import CONTRACTION_LIMIT, logistic_draws, solve_equilibrium_stacked

DEFAULT_COEFFICIENTS = ((1.5, -1.0, -0.5), (0.75, 0.0, -0.25), (0.0, 1.0, 0.0))


@dataclass(frozen=True)
class DgpConfig:
    """Simulation design.  Each coefficient row is ``(peer, beta_1..beta_p, c_k)``."""

    G: int = 100
    n: int = 100
    n_max: int = 5
    cluster_proportions: tuple[float, ...] = (0.3, 0.3, 0.4)
    cluster_coefficients: tuple[tuple[float, ...], ...] = DEFAULT_COEFFICIENTS
    mu_sd: float = 1.0
    x_loading: float = 0.1
    seed: int = 0
    mc_reps: int = 100
    boot_reps: int = 200
    eq_tol: float = 1e-10

    def __post_init__(self):
        if self.G < 1 or self.n < 1:
            raise ValueError("G and n must be positive")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        props = np.asarray(self.cluster_proportions, dtype=float)
        if props.ndim != 1 or props.size == 0 or np.any(props < 0) or not np.isclose(props.sum(), 1.0):
            raise ValueError("cluster proportions must be nonnegative and sum to 1")
        if len(self.cluster_coefficients) != props.size:
            raise ValueError("need one coefficient row per cluster")
        widths = {len(c) for c in self.cluster_coefficients}
        if len(widths) != 1 or widths.pop() < 2:
            raise ValueError("coefficient rows must share a length of at least 2")
        if any(abs(c[0]) >= CONTRACTION_LIMIT for c in self.cluster_coefficients):
            raise ValueError("|peer effect| must be below 4")
        if self.mu_sd < 0:
            raise ValueError("mu_sd must be nonnegative")

    @property
    def p(self) -> int:
        return len(self.cluster_coefficients[0]) - 2

    @property
    def K(self) -> int:
        return len(self.cluster_proportions)

    @property
    def slopes(self) -> np.ndarray:
        """True ``theta_k`` rows (peer effect then covariate slopes)."""
        return np.array([c[:-1] for c in self.cluster_coefficients], dtype=float)

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([c[-1] for c in self.cluster_coefficients], dtype=float)


def cluster_sizes(G: int, proportions) -> np.ndarray:
    """Largest-remainder rounding of ``G * proportions`` to integers summing to G."""
    raw = G * np.asarray(proportions, dtype=float)
    sizes = np.floor(raw + 1e-9).astype(np.int64)
    short = G - int(sizes.sum())
    if short > 0:
        rema = raw - sizes
        order = np.argsort(-rema, kind="stable")
        sizes[order[:short]] += 1
    return sizes


def rep_rng(seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for replication ``rep`` (and sub-stream)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep, stream)))


def random_network(rng: np.random.Generator, n: int, n_max: int) -> sp.csr_array:
    """Each individual draws N_i ~ U{0..n_max} (capped at n - 1) distinct influencers."""
    rows, cols = [], []
    others_all = np.arange(n)
    for i in range(n):
        k = int(rng.integers(0, n_max + 1))
        k = min(k, n - 1)
        if k == 0:
            continue
        others = np.delete(others_all, i)
        friends = np.sort(rng.choice(others, size=k, replace=False))
        rows.extend([i] * k)
        cols.extend(friends.tolist())
    return sp.csr_array(
        (np.ones(len(rows), dtype=bool), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(n, n),
    )


def generate_panel(config: DgpConfig, rep: int = 0) -> tuple[Panel, DgpTruth]:
    """Draw one panel from the clustered peer-effects design."""
    rng = rep_rng(config.seed, rep)
    G, n, p = config.G, config.n, config.p
    sizes = cluster_sizes(G, config.cluster_proportions)
    clusters = np.repeat(np.arange(config.K), sizes)
    slopes, intercepts = config.slopes, config.intercepts
    width = len(str(G))

    mus, xs, nets, ids = [], [], [], []
    for g in range(G):
        mu0 = config.mu_sd * rng.standard_normal()
        x = config.x_loading * mu0 + rng.standard_normal((n, p))
        net = random_network(rng, n, config.n_max)
        mus.append(mu0 + intercepts[clusters[g]])
        xs.append(x)
        nets.append(net)
        ids.append(f"g{g + 1:0{width}d}")
    indiv = tuple(str(i + 1) for i in range(n))
    placeholder = [GroupData(ids[g], indiv, np.zeros(n), xs[g], nets[g]) for g in range(G)]
    st = stack_groups(placeholder, p)
    th_rows = slopes[clusters][st.group]
    base = np.asarray(mus)[st.group] + np.einsum("ij,ij->i", st.x, th_rows[:, 1:])
    ccp, ok, _ = solve_equilibrium_stacked(st.peer, base, th_rows[:, 0], st.offsets, tol=config.eq_tol)
    if not ok.all():
        raise RuntimeError("equilibrium did not converge for the simulated design")
    index = base + th_rows[:, 0] * (st.peer @ ccp)
    y = (index > logistic_draws(rng, index.shape[0])).astype(float)

    groups = tuple(
        GroupData(ids[g], indiv, y[st.offsets[g]:st.offsets[g + 1]], xs[g], nets[g]) for g in range(G)
    )
    truth = DgpTruth(
        cluster_of_group={ids[g]: int(clusters[g]) for g in range(G)},
        coefficients=slopes.copy(),
        fixed_effects={ids[g]: float(mus[g]) for g in range(G)},
        equilibrium_ccp={ids[g]: ccp[st.offsets[g]:st.offsets[g + 1]].copy() for g in range(G)},
    )
    return Panel(groups, p), truth
