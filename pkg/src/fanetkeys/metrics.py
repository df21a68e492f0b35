"""Evaluation metrics: communication density, key-path statistics, meeting
(visit-all) trackers, time to full connectivity, and the density-normality
moment diagnostics.

Communication density is the expected number of other nodes inside one
node's communication disk (2D) or sphere (3D): ``n*pi*r^2 / (X*Y)`` and
``n*(4/3)*pi*r^3 / (X*Y*Z)``. Per-node neighbor counts serve as the
operational samples of node density; their sample skewness and excess
kurtosis quantify how close the per-snapshot density distribution is to a
normal one.

Pair statistics are over unordered distinct pairs. Averages (DE steps, hops,
overall length) are taken over key-reachable pairs only; unreachable pairs
affect only the key-path existence probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import all_pairs_hops, bfs_tree, graph_csr, path_expand_sums
from .keygraph import Graph
from .mobility import BoundingBox


def comm_density(box: BoundingBox, r: float, n: int) -> float:
    """Average node count inside one communication disk (2D box) or sphere
    (3D box)."""
    if r < 0:
        raise ValueError(f"range must be >= 0, got {r}")
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if not box.is_3d:
        return n * math.pi * r * r / (box.x_len * box.y_len)
    volume = box.x_len * box.y_len * box.z_len
    if volume <= 0:
        raise ValueError(f"3D box must have positive volume, got {box}")
    return n * (4.0 / 3.0) * math.pi * r**3 / volume


@dataclass(frozen=True)
class KeyPathStats:
    """Pair statistics of one snapshot's key graph (expanded over the same
    snapshot's physical graph)."""

    keypath_prob: float
    avg_de_steps: float | None
    avg_keypath_hops: float | None
    avg_overall_len: float | None
    path_inequality_violations: int = 0


def keypath_stats(key_g: Graph, phys_g: Graph) -> KeyPathStats:
    """Reachability and length statistics over all unordered node pairs.

    avg_overall_len averages over the reachable pairs whose every key hop
    also has a physical path in this snapshot; pairs with a physically
    unrealizable hop are excluded from that average only.
    """
    if phys_g.n != key_g.n:
        raise ValueError(f"graph sizes differ: {key_g.n} vs {phys_g.n}")
    return _keypath_stats_from_adj(key_g.adj, phys_g.adj)


def _keypath_stats_from_adj(key_adj: np.ndarray, phys_adj: np.ndarray) -> KeyPathStats:
    n = key_adj.shape[0]
    if n < 2:
        raise ValueError("pair statistics need at least 2 nodes")

    ki, kx = graph_csr(key_adj)
    key_dist, key_parent = bfs_tree(ki, kx, n)
    pi, px = graph_csr(phys_adj)
    phys_dist = all_pairs_hops(pi, px, n)
    overall = path_expand_sums(key_dist, key_parent, phys_dist)

    iu, ju = np.triu_indices(n, k=1)
    hops = key_dist[iu, ju]
    reach = hops > 0
    total_pairs = len(hops)
    prob = float(reach.sum()) / total_pairs

    if not reach.any():
        return KeyPathStats(prob, None, None, None, 0)

    rh = hops[reach].astype(np.float64)
    avg_hops = float(rh.mean())
    avg_de = float((rh - 1.0).mean())

    ov = overall[iu, ju][reach]
    expandable = ov >= 0
    violations = int((ov[expandable] < rh[expandable]).sum())
    avg_overall = float(ov[expandable].mean()) if expandable.any() else None
    return KeyPathStats(prob, avg_de, avg_hops, avg_overall, violations)


@dataclass(frozen=True)
class DensityMoments:
    """Sample moments of pooled per-node neighbor counts."""

    mean: float
    variance: float
    skewness: float | None
    excess_kurtosis: float | None
    count: int


def density_moments(samples) -> DensityMoments:
    """Mean, unbiased variance, and standardized skewness/excess kurtosis.

    Skewness and kurtosis are the plain moment estimators m3/m2^1.5 and
    m4/m2^2 - 3; both are reported absent for degenerate (constant) samples.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    m2 = float(x.var(ddof=0))
    if m2 == 0.0:
        return DensityMoments(mean, 0.0, None, None, int(x.size))
    c = x - mean
    skew = float((c**3).mean() / m2**1.5)
    kurt = float((c**4).mean() / m2**2 - 3.0)
    return DensityMoments(mean, var, skew, kurt, int(x.size))


def moments_from_histogram(hist: np.ndarray) -> DensityMoments:
    """Same moments computed from integer-value counts (hist[v] = number of
    samples equal to v); avoids keeping raw per-snapshot samples around."""
    hist = np.asarray(hist, dtype=np.float64)
    count = hist.sum()
    if count < 2:
        raise ValueError(f"need at least 2 samples, got {int(count)}")
    v = np.arange(len(hist), dtype=np.float64)
    mean = float((v * hist).sum() / count)
    c = v - mean
    m2 = float((c**2 * hist).sum() / count)
    var = m2 * count / (count - 1.0)
    if m2 == 0.0:
        return DensityMoments(mean, 0.0, None, None, int(count))
    skew = float((c**3 * hist).sum() / count / m2**1.5)
    kurt = float((c**4 * hist).sum() / count / m2**2 - 3.0)
    return DensityMoments(mean, var, skew, kurt, int(count))


class VisitTracker:
    """Tracks which nodes each node has ever been in contact with and when
    each node first completed meeting all others."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        self.n = n
        self.met = np.zeros((n, n), dtype=bool)
        self.met_count = np.zeros(n, dtype=np.int32)
        self.completion = np.full(n, np.nan)
        if n == 1:
            self.completion[:] = 0.0
        self._last_t = -math.inf

    def met_set(self, i: int) -> set[int]:
        return set(np.flatnonzero(self.met[i]).tolist())


def update_visit_tracker(tracker: VisitTracker, contacts, t: float) -> VisitTracker:
    """Fold a snapshot's contact pairs into the tracker (t non-decreasing).

    Accepts an iterable of (i, j) pairs or a pair of index arrays.
    """
    if t < tracker._last_t:
        raise ValueError(f"timestamps must be non-decreasing, got {t}")
    tracker._last_t = t
    if isinstance(contacts, tuple) and len(contacts) == 2:
        ii, jj = contacts
        ii = np.asarray(ii, dtype=np.int64)
        jj = np.asarray(jj, dtype=np.int64)
    else:
        pairs = list(contacts)
        if not pairs:
            return tracker
        arr = np.asarray(pairs, dtype=np.int64)
        ii, jj = arr[:, 0], arr[:, 1]
    if len(ii) == 0:
        return tracker
    new = ~tracker.met[ii, jj]
    if new.any():
        ni, nj = ii[new], jj[new]
        tracker.met[ni, nj] = True
        tracker.met[nj, ni] = True
        np.add.at(tracker.met_count, ni, 1)
        np.add.at(tracker.met_count, nj, 1)
        done = np.isnan(tracker.completion) & (tracker.met_count >= tracker.n - 1)
        tracker.completion[done] = t
    return tracker


def visit_metrics(tracker: VisitTracker, horizon: float) -> tuple[float, float | None]:
    """(fraction of nodes that met everyone by the horizon, mean completion
    time over those nodes; None if no node completed)."""
    done = tracker.completion[~np.isnan(tracker.completion)]
    done = done[done <= horizon]
    fraction = float(len(done)) / tracker.n
    avg = float(done.mean()) if len(done) else None
    return fraction, avg


def ttfc(times: Sequence[float], flags: Sequence[bool]) -> float | None:
    """Earliest timestamp whose full-connectivity flag is true, else None."""
    times = np.asarray(times, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    if len(times) != len(flags):
        raise ValueError("times and flags must have equal length")
    if len(times) > 1 and not (np.diff(times) > 0).all():
        raise ValueError("timestamps must be strictly increasing")
    hits = np.flatnonzero(flags)
    return float(times[hits[0]]) if len(hits) else None


@dataclass(frozen=True)
class SnapshotMetrics:
    """Metrics of one snapshot. Path statistics are None on snapshots the
    metrics stride skipped (and when undefined, e.g. empty key graph)."""

    t: float
    keypath_prob: float
    fully_key_connected: bool
    avg_de_steps: float | None
    avg_keypath_hops: float | None
    avg_overall_len: float | None
    neighbor_counts: np.ndarray | None


class SnapshotSeries:
    """Column-oriented store of per-snapshot metrics; indexing materializes
    :class:`SnapshotMetrics` views."""

    def __init__(
        self,
        t: np.ndarray,
        keypath_prob: np.ndarray,
        fully_key_connected: np.ndarray,
        avg_de_steps: np.ndarray,
        avg_keypath_hops: np.ndarray,
        avg_overall_len: np.ndarray,
        measured: np.ndarray,
        neighbor_counts: np.ndarray | None = None,
    ):
        self.t = t
        self.keypath_prob = keypath_prob
        self.fully_key_connected = fully_key_connected
        self.avg_de_steps = avg_de_steps
        self.avg_keypath_hops = avg_keypath_hops
        self.avg_overall_len = avg_overall_len
        self.measured = measured
        self.neighbor_counts = neighbor_counts

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> SnapshotMetrics:
        def opt(a):
            v = a[i]
            return None if np.isnan(v) else float(v)

        return SnapshotMetrics(
            t=float(self.t[i]),
            keypath_prob=float(self.keypath_prob[i]),
            fully_key_connected=bool(self.fully_key_connected[i]),
            avg_de_steps=opt(self.avg_de_steps),
            avg_keypath_hops=opt(self.avg_keypath_hops),
            avg_overall_len=opt(self.avg_overall_len),
            neighbor_counts=(
                None if self.neighbor_counts is None else self.neighbor_counts[i]
            ),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass
class RunResult:
    """Everything one simulation run produced."""

    seed: int
    config_fingerprint: str
    comm_density_2d: float
    comm_density_3d: float | None
    ttfc: float | None
    visit_all_fraction: float
    avg_time_to_visit_all: float | None
    snapshots: SnapshotSeries
    density_moments: DensityMoments
    degree_histogram: np.ndarray
    path_inequality_violations: int
    notes: dict[str, str]

    def _mean_over_measured(self, column: np.ndarray) -> float | None:
        vals = column[self.snapshots.measured]
        vals = vals[~np.isnan(vals)]
        return float(vals.mean()) if len(vals) else None

    def summary(self) -> dict[str, float | None]:
        """Run-level scalars: time averages over the traced snapshots."""
        s = self.snapshots
        return {
            "keypath_prob": float(s.keypath_prob.mean()) if len(s) else None,
            "avg_de_steps": self._mean_over_measured(s.avg_de_steps),
            "avg_keypath_hops": self._mean_over_measured(s.avg_keypath_hops),
            "avg_overall_len": self._mean_over_measured(s.avg_overall_len),
            "ttfc": self.ttfc,
            "visit_all_fraction": self.visit_all_fraction,
            "avg_time_to_visit_all": self.avg_time_to_visit_all,
            "density_mean": self.density_moments.mean,
            "density_variance": self.density_moments.variance,
            "density_skewness": self.density_moments.skewness,
            "density_excess_kurtosis": self.density_moments.excess_kurtosis,
        }
