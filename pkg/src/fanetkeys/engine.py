"""Run orchestration: one seed-deterministic simulation and parameter sweeps.

Each snapshot advances the pipeline in a fixed order: move all nodes, rotate
expired keypairs, detect contacts, perform the mutual key exchanges (contact
pairs in ascending order), purge expired table entries, build the physical
and key graphs, then record metrics. Light metrics (key-path existence
probability, full-connectivity flag, neighbor counts, visit tracking) are
recorded every snapshot; the path-length statistics, which need all-pairs
searches, are recorded every ``metrics_stride`` snapshots.

Randomness: node i's mobility stream and keying stream are spawned from
(seed, purpose, node) via numpy SeedSequence, so trajectories and key
material are reproducible and unaffected by the metrics stride.

Storage backends: unlimited capacity uses a matrix of record expiries (one
cell per holder/owner pair), finite capacity uses real per-node
:class:`~fanetkeys.keying.KeyTable` objects; both yield identical key graphs
where their domains overlap (see tests).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import component_labels, contact_pairs_idx, graph_csr
from .errors import ConfigError, SimulationError
from .keying import (
    TOY_CURVE,
    CurveParams,
    InsertOutcome,
    KeyPair,
    KeyTable,
    PublicKeyRecord,
    Strategy,
    StrategyKind,
    FRESHEST_REPLACE,
    _insert_unchecked,
    keygen,
    make_record,
    purge_expired,
)
from .metrics import (
    DensityMoments,
    RunResult,
    SnapshotSeries,
    _keypath_stats_from_adj,
    comm_density,
    moments_from_histogram,
    update_visit_tracker,
    visit_metrics,
    VisitTracker,
)
from .mobility import BoundingBox, MobilityConfig, MobilityField, MobilityModel
from .radio import PropagationModel, RadioConfig, comm_range

FANET = "FANET"
MANET = "MANET"

RESULT_NOTES = {
    "comm_density_3d_formula": "n * (4/3) * pi * r^3 / (X * Y * Z)",
    "comm_density_2d_formula": "n * pi * r^2 / (X * Y)",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One full experiment description; validated on construction."""

    n: int = 100
    box: BoundingBox = BoundingBox(1000.0, 1000.0, 100.0)
    mobility: MobilityConfig = MobilityConfig(model=MobilityModel.GM)
    radio: RadioConfig = RadioConfig()
    key_ttl: float = math.inf
    strategy: Strategy = FRESHEST_REPLACE
    capacity: int | None = None
    duration: float = 1000.0
    snapshot_dt: float = 1.0
    metrics_stride: int = 1
    seeds: tuple[int, ...] = tuple(range(20))
    network_kind: str = FANET
    curve: CurveParams = TOY_CURVE
    keep_neighbor_counts: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.duration <= 0:
            raise ConfigError(f"duration must be > 0, got {self.duration}")
        if self.snapshot_dt <= 0:
            raise ConfigError(f"snapshot_dt must be > 0, got {self.snapshot_dt}")
        if self.metrics_stride < 1:
            raise ConfigError(
                f"metrics_stride must be >= 1, got {self.metrics_stride}"
            )
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.key_ttl <= 0:
            raise ConfigError(f"key_ttl must be > 0, got {self.key_ttl}")
        if self.capacity is not None and self.capacity < 0:
            raise ConfigError(f"capacity must be >= 0, got {self.capacity}")
        if (
            self.capacity is not None
            and self.strategy.kind is StrategyKind.HYBRID
            and self.strategy.k1 + self.strategy.k2 != self.capacity
        ):
            raise ConfigError(
                f"hybrid k1+k2 = {self.strategy.k1 + self.strategy.k2} "
                f"must equal capacity {self.capacity}"
            )
        if self.network_kind not in (FANET, MANET):
            raise ConfigError(f"network_kind must be FANET or MANET, got {self.network_kind!r}")
        sub = self.snapshot_dt / self.mobility.step_dt
        if abs(sub - round(sub)) > 1e-9 or round(sub) < 1:
            raise ConfigError(
                f"snapshot_dt {self.snapshot_dt} must be a positive integer "
                f"multiple of mobility step_dt {self.mobility.step_dt}"
            )

    @property
    def substeps(self) -> int:
        return int(round(self.snapshot_dt / self.mobility.step_dt))

    @property
    def snapshot_count(self) -> int:
        return int(round(self.duration / self.snapshot_dt))


def config_dict(cfg: ScenarioConfig) -> dict:
    """Canonical JSON-safe dict of a validated config (also the fingerprint
    input). Infinite TTL maps to null."""
    return {
        "n": cfg.n,
        "box": [cfg.box.x_len, cfg.box.y_len, cfg.box.z_len],
        "mobility": {
            "model": cfg.mobility.model.value,
            "v_min": cfg.mobility.v_min,
            "v_max": cfg.mobility.v_max,
            "pause_s": cfg.mobility.pause_s,
            "gm_alpha": cfg.mobility.gm_alpha,
            "gm_mean_speed": cfg.mobility.gm_mean_speed,
            "gm_pitch_max": cfg.mobility.gm_pitch_max,
            "step_dt": cfg.mobility.step_dt,
        },
        "radio": {
            "tx_power_dbm": cfg.radio.tx_power_dbm,
            "tx_gain_db": cfg.radio.tx_gain_db,
            "rx_gain_db": cfg.radio.rx_gain_db,
            "freq_hz": cfg.radio.freq_hz,
            "rx_threshold_dbm": cfg.radio.rx_threshold_dbm,
            "ant_height_tx_m": cfg.radio.ant_height_tx_m,
            "ant_height_rx_m": cfg.radio.ant_height_rx_m,
            "model": cfg.radio.model.value,
            "explicit_range_m": cfg.radio.explicit_range_m,
        },
        "key_ttl": None if math.isinf(cfg.key_ttl) else cfg.key_ttl,
        "strategy": {
            "kind": cfg.strategy.kind.value,
            "k1": cfg.strategy.k1,
            "k2": cfg.strategy.k2,
        },
        "capacity": cfg.capacity,
        "duration": cfg.duration,
        "snapshot_dt": cfg.snapshot_dt,
        "metrics_stride": cfg.metrics_stride,
        "seeds": list(cfg.seeds),
        "network_kind": cfg.network_kind,
        "curve": {
            "p": cfg.curve.p,
            "a": cfg.curve.a,
            "b": cfg.curve.b,
            "gx": cfg.curve.G.x,
            "gy": cfg.curve.G.y,
            "n": cfg.curve.n,
            "h": cfg.curve.h,
        },
    }


def config_fingerprint(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class _ArrayKeyStore:
    """Unlimited-capacity backend: expires[i, j] holds the expiry of the
    record of j that i stores (-inf before the first exchange)."""

    def __init__(self, n: int):
        self.expires = np.full((n, n), -math.inf)

    def exchange_contacts(self, ii, jj, record_expiry: np.ndarray) -> None:
        self.expires[ii, jj] = record_expiry[jj]
        self.expires[jj, ii] = record_expiry[ii]

    def purge(self, now: float) -> None:
        pass  # validity is checked against `now` at graph build time

    def key_adjacency(self, now: float) -> np.ndarray:
        holds = self.expires > now
        return holds & holds.T


class _TableKeyStore:
    """Finite-capacity backend over real KeyTable objects.

    Tracks which (holder, owner) cells are occupied in a boolean matrix so
    the key graph needs no per-snapshot table walk; records are the engine's
    own signed objects, so inserts skip the redundant per-call signature
    verification (the public :func:`~fanetkeys.keying.table_insert` always
    verifies). A cached per-table minimum expiry gates the purge scan.
    """

    def __init__(self, cfg: ScenarioConfig):
        self.tables = [
            KeyTable(capacity=cfg.capacity, strategy=cfg.strategy, curve=cfg.curve)
            for _ in range(cfg.n)
        ]
        self.n = cfg.n
        self.holds = np.zeros((cfg.n, cfg.n), dtype=bool)
        self._min_expiry = np.full(cfg.n, math.inf)

    def exchange_contacts(self, ii, jj, records: list[PublicKeyRecord], now: float) -> None:
        tables = self.tables
        for i, j in zip(ii.tolist(), jj.tolist()):
            rec_j = records[j]
            if tables[i].entries.get(j) is not rec_j:
                self._insert(i, rec_j, now)
            rec_i = records[i]
            if tables[j].entries.get(i) is not rec_i:
                self._insert(j, rec_i, now)

    def _insert(self, holder: int, rec: PublicKeyRecord, now: float) -> None:
        res = _insert_unchecked(self.tables[holder], rec, now)
        if res.outcome is InsertOutcome.DISCARDED:
            return
        if res.evicted is not None:
            self.holds[holder, res.evicted] = False
        self.holds[holder, rec.owner] = True
        if rec.expires_at < self._min_expiry[holder]:
            self._min_expiry[holder] = rec.expires_at

    def purge(self, now: float) -> None:
        for holder in np.flatnonzero(self._min_expiry <= now).tolist():
            table = self.tables[holder]
            purge_expired(table, now)
            row = self.holds[holder]
            row[:] = False
            nxt = math.inf
            for owner, rec in table.entries.items():
                row[owner] = True
                if rec.expires_at < nxt:
                    nxt = rec.expires_at
            self._min_expiry[holder] = nxt

    def key_adjacency(self, keypairs: list[KeyPair], now: float) -> np.ndarray:
        mutual = self.holds & self.holds.T
        np.fill_diagonal(mutual, False)
        return mutual


def run(cfg: ScenarioConfig, seed: int) -> RunResult:
    """Execute one deterministic run; same (cfg, seed) gives an identical
    RunResult."""
    n = cfg.n
    try:
        r = comm_range(cfg.radio)
    except Exception as exc:
        raise ConfigError(f"radio configuration yields no range: {exc}") from exc

    root = np.random.SeedSequence(seed)
    mob_ss, key_ss = root.spawn(2)
    mob_rngs = [np.random.default_rng(s) for s in mob_ss.spawn(n)]
    key_rngs = [np.random.default_rng(s) for s in key_ss.spawn(n)]

    field_ = MobilityField(cfg.mobility, cfg.box, mob_rngs)
    # Initial expirations are staggered uniformly over (0, ttl] so key
    # lifetimes are spread as they would be with independent issuance times;
    # synchronized expiry would make every later rotation happen at once.
    keypairs = []
    for i in range(n):
        if math.isinf(cfg.key_ttl):
            first_ttl = cfg.key_ttl
        else:
            first_ttl = cfg.key_ttl * (1.0 - key_rngs[i].uniform())
        keypairs.append(keygen(cfg.curve, key_rngs[i], 0.0, first_ttl))
    records = [make_record(keypairs[i], i, cfg.curve, key_rngs[i]) for i in range(n)]
    pair_expiry = np.array([kp.expires_at for kp in keypairs])

    unlimited = cfg.capacity is None
    store = _ArrayKeyStore(n) if unlimited else _TableKeyStore(cfg)
    tracker = VisitTracker(n)

    steps = cfg.snapshot_count
    t_col = np.empty(steps)
    prob_col = np.empty(steps)
    fully_col = np.zeros(steps, dtype=bool)
    de_col = np.full(steps, np.nan)
    hops_col = np.full(steps, np.nan)
    overall_col = np.full(steps, np.nan)
    measured_col = np.zeros(steps, dtype=bool)
    nbr_store = (
        np.zeros((steps, n), dtype=np.int32) if cfg.keep_neighbor_counts else None
    )
    degree_hist = np.zeros(n, dtype=np.int64)
    violations = 0
    pair_total = n * (n - 1) // 2

    for k in range(steps):
        now = (k + 1) * cfg.snapshot_dt
        for _ in range(cfg.substeps):
            field_.step()

        if np.any(now >= pair_expiry):
            for i in np.flatnonzero(now >= pair_expiry).tolist():
                keypairs[i] = keygen(cfg.curve, key_rngs[i], now, cfg.key_ttl)
                records[i] = make_record(keypairs[i], i, cfg.curve, key_rngs[i])
                pair_expiry[i] = keypairs[i].expires_at

        ii, jj = contact_pairs_idx(field_.pos, r)
        if unlimited:
            store.exchange_contacts(ii, jj, pair_expiry)
        else:
            store.exchange_contacts(ii, jj, records, now)
        store.purge(now)

        phys_adj = np.zeros((n, n), dtype=bool)
        phys_adj[ii, jj] = True
        phys_adj[jj, ii] = True
        key_adj = (
            store.key_adjacency(now) if unlimited else store.key_adjacency(keypairs, now)
        )

        update_visit_tracker(tracker, (ii, jj), now)

        indptr, indices = graph_csr(key_adj)
        labels = component_labels(indptr, indices, n)
        sizes = np.bincount(labels)
        reachable_pairs = int((sizes * (sizes - 1)).sum()) // 2
        prob = reachable_pairs / pair_total if pair_total else 1.0
        fully = len(sizes) == 1

        degrees = phys_adj.sum(axis=1).astype(np.int64)
        degree_hist += np.bincount(degrees, minlength=n)
        if nbr_store is not None:
            nbr_store[k] = degrees

        t_col[k] = now
        prob_col[k] = prob
        fully_col[k] = fully

        if k % cfg.metrics_stride == 0 and n >= 2:
            stats = _keypath_stats_from_adj(key_adj, phys_adj)
            measured_col[k] = True
            de_col[k] = np.nan if stats.avg_de_steps is None else stats.avg_de_steps
            hops_col[k] = (
                np.nan if stats.avg_keypath_hops is None else stats.avg_keypath_hops
            )
            overall_col[k] = (
                np.nan if stats.avg_overall_len is None else stats.avg_overall_len
            )
            violations += stats.path_inequality_violations
            if abs(stats.keypath_prob - prob) > 1e-12:
                raise SimulationError(
                    "component-based and BFS-based key-path probabilities diverged"
                )

    series = SnapshotSeries(
        t=t_col,
        keypath_prob=prob_col,
        fully_key_connected=fully_col,
        avg_de_steps=de_col,
        avg_keypath_hops=hops_col,
        avg_overall_len=overall_col,
        measured=measured_col,
        neighbor_counts=nbr_store,
    )
    hits = np.flatnonzero(fully_col)
    ttfc_val = float(t_col[hits[0]]) if len(hits) else None
    fraction, avg_visit = visit_metrics(tracker, cfg.duration)
    density_2d = comm_density(
        BoundingBox(cfg.box.x_len, cfg.box.y_len, 0.0), r, n
    )
    density_3d = comm_density(cfg.box, r, n) if cfg.box.is_3d else None
    moments = (
        moments_from_histogram(degree_hist)
        if degree_hist.sum() >= 2
        else DensityMoments(float("nan"), float("nan"), None, None, int(degree_hist.sum()))
    )
    return RunResult(
        seed=seed,
        config_fingerprint=config_fingerprint(cfg),
        comm_density_2d=density_2d,
        comm_density_3d=density_3d,
        ttfc=ttfc_val,
        visit_all_fraction=fraction,
        avg_time_to_visit_all=avg_visit,
        snapshots=series,
        density_moments=moments,
        degree_histogram=degree_hist,
        path_inequality_violations=violations,
        notes=dict(RESULT_NOTES),
    )


def fanet_defaults(**overrides) -> ScenarioConfig:
    """Table-style aerial scenario: 3D box with 100 m elevation, free-space
    loss, speeds up to 50 m/s."""
    base = dict(
        box=BoundingBox(1000.0, 1000.0, 100.0),
        mobility=MobilityConfig(model=MobilityModel.GM, v_min=0.0, v_max=50.0),
        radio=RadioConfig(model=PropagationModel.FREE_SPACE),
        network_kind=FANET,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def manet_defaults(**overrides) -> ScenarioConfig:
    """Ground scenario: 2D box, two-ray loss, speeds up to 20 m/s."""
    base = dict(
        box=BoundingBox(1000.0, 1000.0, 0.0),
        mobility=MobilityConfig(
            model=MobilityModel.GM, v_min=0.0, v_max=20.0, gm_pitch_max=0.0
        ),
        radio=RadioConfig(model=PropagationModel.TWO_RAY),
        network_kind=MANET,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


DEFAULT_AREA_LENGTHS = tuple(float(v) for v in range(500, 1600, 100))


@dataclass(frozen=True)
class SweepSpec:
    """A square-area sweep of one scenario family."""

    base: ScenarioConfig
    area_lengths: tuple[float, ...] = DEFAULT_AREA_LENGTHS
    network_kind: str | None = None

    def __post_init__(self):
        if not self.area_lengths:
            raise ConfigError("area_lengths must be non-empty")
        if any(length <= 0 for length in self.area_lengths):
            raise ConfigError("area lengths must be positive")
        if self.network_kind is not None and self.network_kind != self.base.network_kind:
            raise ConfigError(
                f"sweep network_kind {self.network_kind!r} contradicts base "
                f"config kind {self.base.network_kind!r}"
            )

    @property
    def kind(self) -> str:
        return self.network_kind or self.base.network_kind

    def scenario_for_length(self, length: float) -> ScenarioConfig:
        box = BoundingBox(length, length, self.base.box.z_len)
        return replace(self.base, box=box)


@dataclass(frozen=True)
class SweepRow:
    area_length: float
    seed: int
    result: RunResult


AGGREGATE_METRICS = (
    "keypath_prob",
    "avg_de_steps",
    "avg_keypath_hops",
    "avg_overall_len",
    "ttfc",
    "visit_all_fraction",
    "avg_time_to_visit_all",
    "density_mean",
    "density_variance",
    "density_skewness",
    "density_excess_kurtosis",
)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)

    def aggregates(self) -> list[tuple[float, str, float | None]]:
        """Per-area-length seed means of each summary metric (absent seeds
        excluded; None when no seed defines the metric)."""
        out = []
        for length in self.spec.area_lengths:
            summaries = [
                row.result.summary() for row in self.rows if row.area_length == length
            ]
            for metric in AGGREGATE_METRICS:
                vals = [s[metric] for s in summaries if s[metric] is not None]
                out.append((length, metric, float(np.mean(vals)) if vals else None))
        return out


def _run_cell(args) -> tuple[float, int, RunResult]:
    spec, length, seed = args
    return length, seed, run(spec.scenario_for_length(length), seed)


def default_workers() -> int:
    env = os.environ.get("FANETKEYS_JOBS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"FANETKEYS_JOBS must be an integer, got {env!r}") from exc
    return 1


def sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """One run per (area length, seed); deterministic result order."""
    if workers is None:
        workers = default_workers()
    cells = [
        (spec, length, seed) for length in spec.area_lengths for seed in spec.base.seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        results = [_run_cell(c) for c in cells]
    results.sort(key=lambda t: (t[0], t[1]))
    return SweepResult(spec, [SweepRow(length, seed, res) for length, seed, res in results])
