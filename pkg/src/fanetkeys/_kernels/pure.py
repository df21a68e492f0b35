"""Numpy implementations of the hot kernels (fallback for the Cython core)."""

from __future__ import annotations

import numpy as np


def _dense(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    if len(indices):
        rows = np.repeat(np.arange(n), np.diff(indptr))
        adj[rows, indices] = True
    return adj


def contact_pairs_idx(pos: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i < j) with Euclidean distance <= r."""
    n = pos.shape[0]
    if n < 2:
        e = np.empty(0, dtype=np.int32)
        return e, e.copy()
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    iu, ju = np.triu_indices(n, k=1)
    hit = d2[iu, ju] <= r * r
    return iu[hit].astype(np.int32), ju[hit].astype(np.int32)


def component_labels(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """Connected-component label per node; labels count up from the
    lowest-index unvisited node."""
    adj = _dense(indptr, indices, n)
    labels = np.full(n, -1, dtype=np.int32)
    label = 0
    while True:
        seeds = np.flatnonzero(labels < 0)
        if len(seeds) == 0:
            break
        reach = np.zeros(n, dtype=bool)
        reach[seeds[0]] = True
        frontier = reach.copy()
        while frontier.any():
            nxt = adj[frontier].any(axis=0) & ~reach
            reach |= nxt
            frontier = nxt
        labels[reach] = label
        label += 1
    return labels


def _levels(adj: np.ndarray, n: int) -> np.ndarray:
    """All-pairs hop counts by batched frontier expansion (one float matmul
    per BFS level, all sources at once)."""
    adj_f = adj.astype(np.float32)
    dist = np.full((n, n), -1, dtype=np.int32)
    np.fill_diagonal(dist, 0)
    reached = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=np.float32)
    d = 0
    while True:
        d += 1
        nxt = (frontier @ adj_f > 0.0) & ~reached
        if not nxt.any():
            break
        dist[nxt] = d
        reached |= nxt
        frontier = nxt.astype(np.float32)
    return dist


def all_pairs_hops(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    return _levels(_dense(indptr, indices, n), n)


def bfs_tree(indptr: np.ndarray, indices: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Hop counts plus, per source, each node's lowest-index predecessor.

    ``parent[s, v]`` is the smallest-index neighbor u of v with
    ``dist[s, u] == dist[s, v] - 1``; -1 for sources and unreachable nodes.
    """
    adj = _dense(indptr, indices, n)
    dist = _levels(adj, n)
    parent = np.full((n, n), -1, dtype=np.int32)
    for s in range(n):
        ds = dist[s]
        cand = adj & ((ds[:, None] + 1) == ds[None, :]) & (ds[:, None] >= 0)
        has = cand.any(axis=0)
        first = cand.argmax(axis=0)
        row = parent[s]
        row[has] = first[has]
        row[s] = -1
    return dist, parent


def path_expand_sums(
    key_dist: np.ndarray, key_parent: np.ndarray, phys_dist: np.ndarray
) -> np.ndarray:
    """Physical length of each key path, for pairs (s, t) with s < t.

    Walks t back to s through ``key_parent[s]`` and sums the physical hop
    count of every key hop; -1 when the pair is key-unreachable or any hop
    has no physical path. Lower-triangle entries are left at -1.
    """
    n = key_dist.shape[0]
    out = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(out, 0)
    for s in range(n - 1):
        t = np.arange(s + 1, n)
        t = t[key_dist[s, s + 1 :] > 0]
        if len(t) == 0:
            continue
        acc = np.zeros(len(t), dtype=np.int64)
        ok = np.ones(len(t), dtype=bool)
        cur = t.copy()
        while True:
            walking = ok & (cur != s)
            if not walking.any():
                break
            prev = key_parent[s, cur[walking]]
            seg = phys_dist[prev, cur[walking]]
            bad = seg < 0
            acc_w = acc[walking]
            acc_w[~bad] += seg[~bad]
            acc[walking] = acc_w
            ok_w = ok[walking]
            ok_w[bad] = False
            ok[walking] = ok_w
            nxt = cur[walking]
            nxt[~bad] = prev[~bad]
            cur[walking] = nxt
        out[s, t[ok]] = acc[ok]
    return out
