"""Seeded synthetic bipartite graphs for testing and benchmarking."""

from __future__ import annotations

import numpy as np

from .graph import BipartiteGraph


def random_bipartite(n_users: int, n_repos: int, p: float, seed: int) -> BipartiteGraph:
    """Every user/repo pair is linked independently with probability ``p``."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n_users, n_repos)) < p
    return BipartiteGraph(n_users, n_repos, np.argwhere(mask))


def planted_partition(
    n_communities: int,
    n_users: int,
    n_repos: int,
    p_in: float,
    p_out: float,
    seed: int,
    casual_fraction: float = 0.0,
) -> tuple[BipartiteGraph, np.ndarray, np.ndarray]:
    """Bipartite stochastic block model with equal-sized planted groups.

    User ``i`` belongs to group ``i * n_communities // n_users`` (likewise for
    repos).  A user/repo pair is linked with probability ``p_in`` inside a
    group and ``p_out`` across groups.

    Args:
        casual_fraction: share of users that are one-off contributors.  Each
            such user (chosen independently) keeps exactly one link, to a
            uniformly drawn repo of its own group, instead of the block-model
            links.

    Returns:
        ``(graph, user_groups, repo_groups)``.
    """
    if not 0.0 <= casual_fraction <= 1.0:
        raise ValueError("casual_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    ug = np.arange(n_users) * n_communities // n_users
    rg = np.arange(n_repos) * n_communities // n_repos
    edges = []
    # row blocks keep memory at O(block * n_repos)
    block = max(1, 2_000_000 // max(n_repos, 1))
    for lo in range(0, n_users, block):
        hi = min(n_users, lo + block)
        prob = np.where(ug[lo:hi, None] == rg[None, :], p_in, p_out)
        hit = np.argwhere(rng.random(prob.shape) < prob)
        hit[:, 0] += lo
        edges.append(hit)
    edges = np.vstack(edges)
    if casual_fraction > 0:
        casual = np.flatnonzero(rng.random(n_users) < casual_fraction)
        edges = edges[~np.isin(edges[:, 0], casual)]
        start = np.searchsorted(rg, np.arange(n_communities))
        size = np.bincount(rg, minlength=n_communities)
        g = ug[casual]
        pick = start[g] + np.floor(rng.random(casual.size) * size[g]).astype(np.int64)
        edges = np.vstack((edges, np.column_stack((casual, pick))))
    return BipartiteGraph(n_users, n_repos, edges), ug, rg


def collaboration_graph(
    n_users: int,
    n_repos: int,
    n_edges: int,
    seed: int,
    exponent: float = 1.0,
) -> BipartiteGraph:
    """Sparse heavy-tailed contribution graph with exactly ``n_edges`` links.

    Repository popularity follows a Zipf law with the given exponent.  Every
    user first joins one repository, then extra links are drawn by
    popularity until ``n_edges`` distinct pairs exist.
    """
    if n_edges < n_users or n_edges > n_users * n_repos:
        raise ValueError("n_edges must lie in [n_users, n_users * n_repos]")
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_repos + 1) ** exponent
    weights /= weights.sum()
    keys = np.arange(n_users, dtype=np.int64) * n_repos + rng.choice(n_repos, size=n_users, p=weights)
    keys = np.unique(keys)
    while keys.size < n_edges:
        need = n_edges - keys.size
        extra = rng.integers(0, n_users, need) * n_repos + rng.choice(n_repos, size=need, p=weights)
        extra = extra[~np.isin(extra, keys)]
        # first occurrences in draw order, so the result depends only on the seed
        _, first = np.unique(extra, return_index=True)
        keys = np.union1d(keys, extra[np.sort(first)][:need])
    return BipartiteGraph(n_users, n_repos, np.column_stack((keys // n_repos, keys % n_repos)))


def two_bicliques(users_per: int = 5, repos_per: int = 2, bridge: bool = True) -> BipartiteGraph:
    """Two complete bipartite blocks, optionally joined by one user-repo bridge link.

    Users ``0..users_per-1`` and repos ``0..repos_per-1`` form the first block;
    the bridge joins the last user of block one to the first repo of block two.
    """
    edges = [(u, r) for u in range(users_per) for r in range(repos_per)]
    edges += [(users_per + u, repos_per + r) for u in range(users_per) for r in range(repos_per)]
    if bridge:
        edges.append((users_per - 1, repos_per))
    return BipartiteGraph(2 * users_per, 2 * repos_per, edges)


def toy_graph() -> BipartiteGraph:
    """The 4-link example ``u0-r0, u1-r0, u1-r1, u2-r1``."""
    return BipartiteGraph(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)])
