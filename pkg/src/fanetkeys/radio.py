"""Link-budget models and range-based contact detection.

Free-space (Friis) loss serves the aerial scenarios, two-ray ground loss the
ground ones. Below the two-ray crossover distance ``dc = 4*pi*ht*hr/lambda``
the two-ray model falls back to free space, which makes received power
continuous and strictly decreasing in distance and lets the communication
range be inverted in closed form. An explicit range override skips the link
budget entirely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import contact_pairs_idx
from .errors import ConfigError, NoCoverageError

SPEED_OF_LIGHT = 299_792_458.0


class PropagationModel(enum.Enum):
    FREE_SPACE = "free_space"
    TWO_RAY = "two_ray"


@dataclass(frozen=True)
class RadioConfig:
    tx_power_dbm: float = 7.5
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    freq_hz: float = 2.4e9
    rx_threshold_dbm: float = -72.55
    ant_height_tx_m: float = 1.5
    ant_height_rx_m: float = 1.5
    model: PropagationModel = PropagationModel.FREE_SPACE
    explicit_range_m: float | None = None

    def __post_init__(self):
        if self.freq_hz <= 0:
            raise ConfigError(f"freq_hz must be > 0, got {self.freq_hz}")
        if self.model is PropagationModel.TWO_RAY and (
            self.ant_height_tx_m <= 0 or self.ant_height_rx_m <= 0
        ):
            raise ConfigError("two-ray model requires positive antenna heights")
        if self.explicit_range_m is not None and self.explicit_range_m <= 0:
            raise ConfigError(
                f"explicit_range_m must be > 0, got {self.explicit_range_m}"
            )

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.freq_hz

    @property
    def crossover_m(self) -> float:
        """Two-ray/free-space crossover distance (the models agree there)."""
        return 4.0 * math.pi * self.ant_height_tx_m * self.ant_height_rx_m / self.wavelength_m


def received_power(cfg: RadioConfig, d: float) -> float:
    """Received power in dBm at distance ``d`` meters."""
    if d <= 0:
        raise ValueError(f"distance must be > 0, got {d}")
    eirp = cfg.tx_power_dbm + cfg.tx_gain_db + cfg.rx_gain_db
    if cfg.model is PropagationModel.TWO_RAY and d >= cfg.crossover_m:
        ht, hr = cfg.ant_height_tx_m, cfg.ant_height_rx_m
        return eirp + 20.0 * math.log10(ht * hr) - 40.0 * math.log10(d)
    return eirp + 20.0 * math.log10(cfg.wavelength_m / (4.0 * math.pi * d))


def comm_range(cfg: RadioConfig) -> float:
    """Largest distance at which received power still meets the threshold.

    Closed-form inversion per model; honors ``explicit_range_m`` when set.
    """
    if cfg.explicit_range_m is not None:
        return cfg.explicit_range_m
    eirp = cfg.tx_power_dbm + cfg.tx_gain_db + cfg.rx_gain_db
    margin_db = eirp - cfg.rx_threshold_dbm
    r_fs = cfg.wavelength_m / (4.0 * math.pi) * 10.0 ** (margin_db / 20.0)
    if not math.isfinite(r_fs) or r_fs <= 0:
        raise NoCoverageError(
            f"threshold {cfg.rx_threshold_dbm} dBm unreachable with EIRP {eirp} dBm"
        )
    if cfg.model is PropagationModel.FREE_SPACE or r_fs <= cfg.crossover_m:
        return r_fs
    ht, hr = cfg.ant_height_tx_m, cfg.ant_height_rx_m
    exponent = (margin_db + 20.0 * math.log10(ht * hr)) / 40.0
    return 10.0 ** exponent


def contact_pairs(positions, r: float) -> set[tuple[int, int]]:
    """Unordered index pairs at Euclidean distance <= r (boundary inclusive)."""
    if r < 0:
        raise ValueError(f"range must be >= 0, got {r}")
    pos = _positions_array(positions)
    ii, jj = contact_pairs_idx(pos, r)
    return {(int(i), int(j)) for i, j in zip(ii, jj)}


def _positions_array(positions) -> np.ndarray:
    if isinstance(positions, np.ndarray):
        a = np.ascontiguousarray(positions, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 3:
            raise ValueError(f"positions array must be (n, 3), got {a.shape}")
        return a
    return np.array([[p.x, p.y, p.z] for p in positions], dtype=np.float64)
