"""Per-snapshot physical and key graphs and the path queries over them.

The physical graph links nodes within radio range. The key graph links i and
j iff each currently holds a valid record of the other (valid: unexpired and
matching the owner's current public key) -- one-sided knowledge is not
enough for the hop-by-hop relay, so edges require mutual possession.

Key-paths are minimum-hop. BFS ties are broken toward the lowest neighbor
index, which makes every path query deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import all_pairs_hops, bfs_tree, component_labels, graph_csr
from .keying import KeyPair, KeyTable


class Graph:
    """Undirected simple graph over node indices, stored as a dense boolean
    adjacency matrix (desk-scale node counts)."""

    __slots__ = ("n", "adj")

    def __init__(self, adj: np.ndarray):
        adj = np.asarray(adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.diagonal().any():
            raise ValueError("self-loops are not allowed")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        self.n = adj.shape[0]
        self.adj = adj
        self.adj.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j})")
            adj[i, j] = adj[j, i] = True
        return cls(adj)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i])

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])

    def edge_count(self) -> int:
        return int(self.adj.sum()) // 2

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        return graph_csr(self.adj)


@dataclass(frozen=True)
class PathResult:
    """An ordered node path; hops = len(nodes) - 1."""

    nodes: tuple[int, ...]

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


def build_phys_graph(positions, r: float) -> Graph:
    """Graph with an edge wherever the Euclidean distance is <= r."""
    from .radio import _positions_array, contact_pairs_idx

    if r < 0:
        raise ValueError(f"range must be >= 0, got {r}")
    pos = _positions_array(positions)
    n = pos.shape[0]
    ii, jj = contact_pairs_idx(pos, r)
    adj = np.zeros((n, n), dtype=bool)
    adj[ii, jj] = True
    adj[jj, ii] = True
    return Graph(adj)


def key_adjacency(
    tables: Sequence[KeyTable], own_keys: Sequence[KeyPair], now: float
) -> np.ndarray:
    """Directed validity matrix folded to mutual edges.

    holds[i, j] is true when i's stored record of j is unexpired and matches
    j's current public key; the key graph keeps pairs where both directions
    hold.
    """
    n = len(tables)
    holds = np.zeros((n, n), dtype=bool)
    for i, table in enumerate(tables):
        for owner, rec in table.entries.items():
            if rec.valid_at(now) and rec.key == own_keys[owner].pub:
                holds[i, owner] = True
    np.fill_diagonal(holds, False)
    return holds & holds.T


def build_key_graph(
    tables: Sequence[KeyTable], own_keys: Sequence[KeyPair], now: float
) -> Graph:
    return Graph(key_adjacency(tables, own_keys, now))


def shortest_path(g: Graph, s: int, d: int) -> PathResult | None:
    """Minimum-hop path from s to d, or None if disconnected.

    Among equal-length paths, each node's predecessor is its lowest-index
    neighbor one level closer to s.
    """
    if not (0 <= s < g.n and 0 <= d < g.n):
        raise ValueError(f"node index out of range: s={s}, d={d}, n={g.n}")
    if s == d:
        return PathResult((s,))
    indptr, indices = g.csr()
    dist, parent = bfs_tree(indptr, indices, g.n)
    if dist[s, d] < 0:
        return None
    nodes = [d]
    v = d
    while v != s:
        v = int(parent[s, v])
        nodes.append(v)
    return PathResult(tuple(reversed(nodes)))


def de_steps(path: PathResult) -> int:
    """Intermediate decrypt-and-re-encrypt count: hops - 1, floored at 0."""
    return max(path.hops - 1, 0)


def overall_path_len(key_path: PathResult, phys: Graph) -> int | None:
    """Physical hop count realizing a key path: the sum over consecutive key
    hops of the physical shortest-path length, None if any hop is physically
    unreachable in this snapshot."""
    if key_path.hops == 0:
        return 0
    indptr, indices = phys.csr()
    dist = all_pairs_hops(indptr, indices, phys.n)
    total = 0
    for u, v in zip(key_path.nodes, key_path.nodes[1:]):
        hop = int(dist[u, v])
        if hop < 0:
            return None
        total += hop
    return total


def is_connected(g: Graph) -> bool:
    """True iff a single component spans every node."""
    if g.n <= 1:
        return True
    indptr, indices = g.csr()
    labels = component_labels(indptr, indices, g.n)
    return bool(labels.max() == 0)
