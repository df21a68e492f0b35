"""Command-line front end.

Subcommands:
  run           execute one scenario file (or defaults) for each seed
  sweep         execute an area-length sweep and emit per-seed + mean rows
  figure N      prewired scenario reproducing evaluation figure N in {2..8}
  density-check neighbor-count normality diagnostics only
  ecc-selftest  toy-curve group-law and signature checks

Scenario files are JSON. A single object describes one run; the presence of
"area_lengths" turns it into a sweep. Unknown keys are rejected. Every field
is optional; "network_kind" picks the aerial or ground preset and each
preset value can be overridden explicitly. Results are emitted as CSV (fixed
header: network_kind,mobility_model,area_length_m,comm_density_2d,
comm_density_3d,metric,value,seed) or as a JSON array of identical row
objects; numbers carry 12 significant digits.

Exit codes: 0 success, 2 configuration error, 3 simulation error, 4 I/O
error. FANETKEYS_JOBS sets the default process count for sweeps.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .engine import (
    DEFAULT_AREA_LENGTHS,
    FANET,
    MANET,
    ScenarioConfig,
    SweepResult,
    SweepRow,
    SweepSpec,
    config_dict,
    default_workers,
    run,
    sweep,
)
from .errors import ConfigError, FanetKeysError, SimulationError
from .keying import (
    EXPIRED_ONLY_REPLACE,
    FRESHEST_REPLACE,
    Strategy,
    StrategyKind,
    ecc_selftest,
    hybrid,
)
from .metrics import RunResult, moments_from_histogram
from .mobility import BoundingBox, MobilityConfig, MobilityModel
from .radio import PropagationModel, RadioConfig

CSV_HEADER = (
    "network_kind,mobility_model,area_length_m,comm_density_2d,"
    "comm_density_3d,metric,value,seed"
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4

_KIND_PRESETS = {
    FANET: {
        "z_len": 100.0,
        "v_max": 50.0,
        "propagation": PropagationModel.FREE_SPACE,
        "gm_pitch_max": 0.05,
    },
    MANET: {
        "z_len": 0.0,
        "v_max": 20.0,
        "propagation": PropagationModel.TWO_RAY,
        "gm_pitch_max": 0.0,
    },
}

_SCENARIO_KEYS = {
    "network_kind",
    "mobility_model",
    "n",
    "area_length_m",
    "box",
    "duration_s",
    "snapshot_dt_s",
    "step_dt_s",
    "metrics_stride",
    "seeds",
    "seed_count",
    "v_min",
    "v_max",
    "pause_s",
    "gm_alpha",
    "gm_mean_speed",
    "gm_pitch_max",
    "tx_power_dbm",
    "tx_gain_db",
    "rx_gain_db",
    "freq_hz",
    "rx_threshold_dbm",
    "ant_height_tx_m",
    "ant_height_rx_m",
    "propagation",
    "explicit_range_m",
    "key_ttl_s",
    "strategy",
    "k",
    "k1",
    "k2",
    "area_lengths",
}

_STRATEGIES = {
    "freshest_replace": StrategyKind.FRESHEST_REPLACE,
    "expired_only_replace": StrategyKind.EXPIRED_ONLY_REPLACE,
    "hybrid": StrategyKind.HYBRID,
}


def build_scenario(data: dict) -> ScenarioConfig | SweepSpec:
    """Validate a scenario dict; see the module docstring for the schema."""
    if not isinstance(data, dict):
        raise ConfigError(f"scenario must be a JSON object, got {type(data).__name__}")
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario fields: {', '.join(sorted(unknown))}")

    kind = data.get("network_kind", FANET)
    if kind not in _KIND_PRESETS:
        raise ConfigError(f"network_kind must be FANET or MANET, got {kind!r}")
    preset = _KIND_PRESETS[kind]

    model_name = str(data.get("mobility_model", "GM")).upper()
    try:
        model = MobilityModel[model_name]
    except KeyError:
        raise ConfigError(f"mobility_model must be RWP or GM, got {model_name!r}")

    mobility = MobilityConfig(
        model=model,
        v_min=float(data.get("v_min", 0.0)),
        v_max=float(data.get("v_max", preset["v_max"])),
        pause_s=float(data.get("pause_s", 0.0)),
        gm_alpha=float(data.get("gm_alpha", 0.85)),
        gm_mean_speed=(
            float(data["gm_mean_speed"])
            if data.get("gm_mean_speed") is not None
            else None
        ),
        gm_pitch_max=float(data.get("gm_pitch_max", preset["gm_pitch_max"])),
        step_dt=float(data.get("step_dt_s", data.get("snapshot_dt_s", 1.0))),
    )

    prop = data.get("propagation", preset["propagation"])
    if isinstance(prop, str):
        try:
            prop = PropagationModel(prop)
        except ValueError:
            raise ConfigError(
                f"propagation must be free_space or two_ray, got {prop!r}"
            )
    radio = RadioConfig(
        tx_power_dbm=float(data.get("tx_power_dbm", 7.5)),
        tx_gain_db=float(data.get("tx_gain_db", 0.0)),
        rx_gain_db=float(data.get("rx_gain_db", 0.0)),
        freq_hz=float(data.get("freq_hz", 2.4e9)),
        rx_threshold_dbm=float(data.get("rx_threshold_dbm", -72.55)),
        ant_height_tx_m=float(data.get("ant_height_tx_m", 1.5)),
        ant_height_rx_m=float(data.get("ant_height_rx_m", 1.5)),
        model=prop,
        explicit_range_m=(
            float(data["explicit_range_m"])
            if data.get("explicit_range_m") is not None
            else None
        ),
    )

    if "box" in data:
        box_vals = data["box"]
        if not (isinstance(box_vals, (list, tuple)) and len(box_vals) == 3):
            raise ConfigError(f"box must be [x_len, y_len, z_len], got {box_vals!r}")
        box = BoundingBox(*(float(v) for v in box_vals))
    else:
        side = float(data.get("area_length_m", 1000.0))
        box = BoundingBox(side, side, preset["z_len"])

    if "seeds" in data and "seed_count" in data:
        raise ConfigError("give either seeds or seed_count, not both")
    if "seeds" in data:
        seeds = tuple(int(s) for s in data["seeds"])
    else:
        seeds = tuple(range(int(data.get("seed_count", 20))))

    strategy_name = data.get("strategy", "freshest_replace")
    if strategy_name not in _STRATEGIES:
        raise ConfigError(
            f"strategy must be one of {sorted(_STRATEGIES)}, got {strategy_name!r}"
        )
    kind_enum = _STRATEGIES[strategy_name]
    capacity = int(data["k"]) if data.get("k") is not None else None
    if kind_enum is StrategyKind.HYBRID:
        if data.get("k1") is None or data.get("k2") is None:
            raise ConfigError("hybrid strategy requires k1 and k2")
        strategy = hybrid(int(data["k1"]), int(data["k2"]))
        if capacity is None:
            capacity = strategy.k1 + strategy.k2
    elif kind_enum is StrategyKind.EXPIRED_ONLY_REPLACE:
        strategy = EXPIRED_ONLY_REPLACE
    else:
        strategy = FRESHEST_REPLACE

    ttl = data.get("key_ttl_s")
    cfg = ScenarioConfig(
        n=int(data.get("n", 100)),
        box=box,
        mobility=mobility,
        radio=radio,
        key_ttl=math.inf if ttl is None else float(ttl),
        strategy=strategy,
        capacity=capacity,
        duration=float(data.get("duration_s", 1000.0)),
        snapshot_dt=float(data.get("snapshot_dt_s", 1.0)),
        metrics_stride=int(data.get("metrics_stride", 1)),
        seeds=seeds,
        network_kind=kind,
    )
    if "area_lengths" in data:
        return SweepSpec(
            base=cfg,
            area_lengths=tuple(float(v) for v in data["area_lengths"]),
            network_kind=kind,
        )
    return cfg


def parse_scenario(path: str) -> ScenarioConfig | SweepSpec:
    """Load and validate a scenario file (see build_scenario)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise _IOFailure(f"cannot read scenario file {path!r}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path!r}: {exc}") from exc
    return build_scenario(data)


def scenario_to_json(obj: ScenarioConfig | SweepSpec) -> dict:
    """Canonical scenario-file dict; parsing it back reproduces the same
    validated configuration."""
    spec = obj if isinstance(obj, SweepSpec) else None
    cfg = spec.base if spec is not None else obj
    d = {
        "network_kind": cfg.network_kind,
        "mobility_model": cfg.mobility.model.name,
        "n": cfg.n,
        "box": [cfg.box.x_len, cfg.box.y_len, cfg.box.z_len],
        "duration_s": cfg.duration,
        "snapshot_dt_s": cfg.snapshot_dt,
        "step_dt_s": cfg.mobility.step_dt,
        "metrics_stride": cfg.metrics_stride,
        "seeds": list(cfg.seeds),
        "v_min": cfg.mobility.v_min,
        "v_max": cfg.mobility.v_max,
        "pause_s": cfg.mobility.pause_s,
        "gm_alpha": cfg.mobility.gm_alpha,
        "gm_mean_speed": cfg.mobility.gm_mean_speed,
        "gm_pitch_max": cfg.mobility.gm_pitch_max,
        "tx_power_dbm": cfg.radio.tx_power_dbm,
        "tx_gain_db": cfg.radio.tx_gain_db,
        "rx_gain_db": cfg.radio.rx_gain_db,
        "freq_hz": cfg.radio.freq_hz,
        "rx_threshold_dbm": cfg.radio.rx_threshold_dbm,
        "ant_height_tx_m": cfg.radio.ant_height_tx_m,
        "ant_height_rx_m": cfg.radio.ant_height_rx_m,
        "propagation": cfg.radio.model.value,
        "explicit_range_m": cfg.radio.explicit_range_m,
        "key_ttl_s": None if math.isinf(cfg.key_ttl) else cfg.key_ttl,
        "strategy": cfg.strategy.kind.value,
        "k": cfg.capacity,
        "k1": cfg.strategy.k1,
        "k2": cfg.strategy.k2,
    }
    if spec is not None:
        d["area_lengths"] = list(spec.area_lengths)
    return d


class _IOFailure(FanetKeysError):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return f"{float(value):.12g}"


def rows_from_run(
    cfg: ScenarioConfig, result: RunResult, metrics=None, metric_suffix: str = ""
) -> list[dict]:
    summary = result.summary()
    names = metrics if metrics is not None else list(summary)
    rows = []
    for name in names:
        rows.append(
            {
                "network_kind": cfg.network_kind,
                "mobility_model": cfg.mobility.model.name,
                "area_length_m": cfg.box.x_len,
                "comm_density_2d": result.comm_density_2d,
                "comm_density_3d": result.comm_density_3d,
                "metric": name + metric_suffix,
                "value": summary[name],
                "seed": result.seed,
            }
        )
    return rows


def rows_from_sweep(
    res: SweepResult, metrics=None, metric_suffix: str = ""
) -> list[dict]:
    rows = []
    for row in res.rows:
        cfg = res.spec.scenario_for_length(row.area_length)
        rows.extend(rows_from_run(cfg, row.result, metrics, metric_suffix))
    by_length: dict[float, SweepRow] = {r.area_length: r for r in res.rows}
    for length, metric, value in res.aggregates():
        if metrics is not None and metric not in metrics:
            continue
        sample = by_length[length].result
        rows.append(
            {
                "network_kind": res.spec.kind,
                "mobility_model": res.spec.base.mobility.model.name,
                "area_length_m": length,
                "comm_density_2d": sample.comm_density_2d,
                "comm_density_3d": sample.comm_density_3d,
                "metric": metric + metric_suffix,
                "value": value,
                "seed": "mean",
            }
        )
    return rows


def emit_results(rows: list[dict], fmt: str, path: str) -> None:
    """Write rows as CSV (fixed header) or a JSON array; '-' means stdout.

    CSV and JSON render every number identically (12 significant digits).
    """
    if not rows:
        raise ValueError("no results to emit")
    columns = CSV_HEADER.split(",")
    if fmt == "csv":
        lines = [CSV_HEADER]
        for row in rows:
            lines.append(",".join(_fmt(row[c]) for c in columns))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = []
        for row in rows:
            obj = {}
            for c in columns:
                v = row[c]
                if v is None or isinstance(v, (str, int)):
                    obj[c] = v
                else:
                    obj[c] = float(_fmt(v))
            payload.append(obj)
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IOFailure(f"cannot write results to {path!r}: {exc}") from exc


def _apply_common_overrides(args, obj):
    """--seed/--seeds/--metrics-stride rewrite the validated config."""
    from dataclasses import replace as dc_replace

    def adjust(cfg: ScenarioConfig) -> ScenarioConfig:
        changes = {}
        if args.seed is not None:
            changes["seeds"] = (args.seed,)
        elif args.seeds is not None:
            changes["seeds"] = tuple(range(args.seeds))
        if args.metrics_stride is not None:
            changes["metrics_stride"] = args.metrics_stride
        return dc_replace(cfg, **changes) if changes else cfg

    if isinstance(obj, SweepSpec):
        return dc_replace(obj, base=adjust(obj.base))
    return adjust(obj)


def _dump_config(args, obj) -> None:
    if getattr(args, "dump_config", None):
        try:
            with open(args.dump_config, "w", encoding="utf-8") as fh:
                json.dump(scenario_to_json(obj), fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise _IOFailure(f"cannot write config to {args.dump_config!r}: {exc}")


def _cmd_run(args) -> int:
    obj = parse_scenario(args.config) if args.config else ScenarioConfig()
    if isinstance(obj, SweepSpec):
        raise ConfigError("scenario file describes a sweep; use the sweep command")
    cfg = _apply_common_overrides(args, obj)
    _dump_config(args, cfg)
    rows = []
    for seed in cfg.seeds:
        rows.extend(rows_from_run(cfg, run(cfg, seed)))
    emit_results(rows, args.format, args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    obj = parse_scenario(args.config) if args.config else SweepSpec(base=ScenarioConfig())
    if isinstance(obj, ScenarioConfig):
        obj = SweepSpec(base=obj)
    spec = _apply_common_overrides(args, obj)
    _dump_config(args, spec)
    res = sweep(spec, workers=args.workers)
    emit_results(rows_from_sweep(res), args.format, args.out)
    return EXIT_OK


_FIGURE_METRIC = {
    2: "keypath_prob",
    3: "ttfc",
    4: "avg_de_steps",
    5: "visit_all_fraction",
    6: "avg_time_to_visit_all",
    7: "keypath_prob",
    8: "avg_overall_len",
}


def _figure_bases(overrides: dict) -> list[dict]:
    """Scenario dicts for one figure family (kind x mobility)."""
    out = []
    for kind in (FANET, MANET):
        for model in ("RWP", "GM"):
            d = {"network_kind": kind, "mobility_model": model}
            d.update(overrides)
            out.append(d)
    return out


def _cmd_figure(args) -> int:
    fig = args.number
    metric = _FIGURE_METRIC[fig]
    overrides = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise _IOFailure(f"cannot read config {args.config!r}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.config!r}: {exc}")
    rows: list[dict] = []
    if fig in (2, 3, 4, 5, 6):
        for base in _figure_bases(overrides):
            base.setdefault("area_lengths", list(DEFAULT_AREA_LENGTHS))
            spec = _apply_common_overrides(args, build_scenario(base))
            res = sweep(spec, workers=args.workers)
            rows.extend(rows_from_sweep(res, metrics=[metric]))
    else:
        for model in ("RWP", "GM"):
            for strat in ("freshest_replace", "expired_only_replace", "hybrid"):
                d = {
                    "network_kind": FANET,
                    "mobility_model": model,
                    "strategy": strat,
                    "k": 10,
                    "key_ttl_s": 100.0,
                    "area_lengths": list(DEFAULT_AREA_LENGTHS),
                }
                if strat == "hybrid":
                    d.update(k1=5, k2=5)
                d.update(overrides)
                spec = _apply_common_overrides(args, build_scenario(d))
                res = sweep(spec, workers=args.workers)
                rows.extend(
                    rows_from_sweep(res, metrics=[metric], metric_suffix=f"[{strat}]")
                )
    emit_results(rows, args.format, args.out)
    return EXIT_OK


def _cmd_density_check(args) -> int:
    import numpy as np

    if args.config:
        obj = parse_scenario(args.config)
        scenarios = [obj.base if isinstance(obj, SweepSpec) else obj]
    else:
        scenarios = [
            build_scenario(
                {
                    "network_kind": kind,
                    "mobility_model": model,
                    "area_length_m": 700.0,
                    "duration_s": 300.0,
                    "seed_count": 3,
                    "metrics_stride": 1000,
                }
            )
            for kind in (FANET, MANET)
            for model in ("RWP", "GM")
        ]
    rows = []
    for cfg in scenarios:
        cfg = _apply_common_overrides(args, cfg)
        hist = None
        sample = None
        for seed in cfg.seeds:
            res = run(cfg, seed)
            sample = res
            h = res.degree_histogram
            hist = h.copy() if hist is None else hist + h
            rows.extend(
                rows_from_run(
                    cfg,
                    res,
                    metrics=[
                        "density_mean",
                        "density_variance",
                        "density_skewness",
                        "density_excess_kurtosis",
                    ],
                )
            )
        pooled = moments_from_histogram(hist)
        print(
            f"{cfg.network_kind} {cfg.mobility.model.name} "
            f"area={cfg.box.x_len:g}m: mean={pooled.mean:.3f} "
            f"var={pooled.variance:.3f} "
            f"skew={np.nan if pooled.skewness is None else pooled.skewness:.3f} "
            f"excess_kurt={np.nan if pooled.excess_kurtosis is None else pooled.excess_kurtosis:.3f}",
            file=sys.stderr,
        )
    emit_results(rows, args.format, args.out)
    return EXIT_OK


def _cmd_ecc_selftest(args) -> int:
    seed = args.seed or 0
    results = ecc_selftest(fuzz_cases=args.fuzz, seed=seed)
    ok_all = True
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        print(f"{status} {name}" + (f" ({detail})" if detail else ""))
        ok_all &= ok
    if args.out != "-":
        rows = [
            {
                "network_kind": "",
                "mobility_model": "",
                "area_length_m": None,
                "comm_density_2d": None,
                "comm_density_3d": None,
                "metric": f"ecc_selftest/{name}",
                "value": 1.0 if ok else 0.0,
                "seed": seed,
            }
            for name, ok, _ in results
        ]
        emit_results(rows, args.format, args.out)
    return EXIT_OK if ok_all else EXIT_SIMULATION


def _add_io_args(p: argparse.ArgumentParser, dump: bool = False) -> None:
    p.add_argument("--seed", type=int, default=None, help="run a single seed")
    p.add_argument(
        "--seeds", type=int, default=None, metavar="N", help="run seeds 0..N-1"
    )
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument(
        "--metrics-stride",
        type=int,
        default=None,
        metavar="N",
        help="record path statistics every N snapshots (default: config value)",
    )
    p.add_argument(
        "--workers",
        type=int,
        default=default_workers(),
        help="parallel sweep processes (default: $FANETKEYS_JOBS or 1)",
    )
    if dump:
        p.add_argument(
            "--dump-config",
            metavar="PATH",
            help="write the fully validated scenario back out as canonical JSON",
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fanetkeys",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("config", nargs="?", help="scenario JSON file (default: Table-style FANET)")
    _add_io_args(p_run, dump=True)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="execute an area-length sweep")
    p_sweep.add_argument("config", nargs="?", help="scenario JSON file with area_lengths")
    _add_io_args(p_sweep, dump=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fig = sub.add_parser(
        "figure",
        help="reproduce the data behind evaluation figure N (2..8); "
        "full seed counts take a while",
    )
    p_fig.add_argument("number", type=int, choices=sorted(_FIGURE_METRIC))
    p_fig.add_argument("--config", help="JSON overrides merged into the preset")
    _add_io_args(p_fig)
    p_fig.set_defaults(func=_cmd_figure)

    p_dc = sub.add_parser("density-check", help="density-normality diagnostics")
    p_dc.add_argument("--config", help="scenario JSON file")
    _add_io_args(p_dc)
    p_dc.set_defaults(func=_cmd_density_check)

    p_ecc = sub.add_parser("ecc-selftest", help="toy-curve self checks")
    p_ecc.add_argument("--fuzz", type=int, default=1000, help="tamper fuzz cases")
    p_ecc.add_argument("--seed", type=int, default=0)
    p_ecc.add_argument("--out", default="-", help="also write check rows to a file")
    p_ecc.add_argument("--format", choices=("csv", "json"), default="csv")
    p_ecc.set_defaults(func=_cmd_ecc_selftest)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
