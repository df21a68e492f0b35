"""Random waypoint and Gauss-Markov mobility in a 2D or 3D bounding box.

Two interfaces are provided for the same models:

* scalar, per-node transitions (``rwp_step`` / ``gm_step``) that take and
  return :class:`MobilityState` values -- the reference semantics, used by
  the unit tests and for small scenarios;
* an array-based :class:`MobilityField` that advances all nodes of a run at
  once with numpy, consuming one independent random substream per node so
  the trajectories are identical to stepping each node's scalar state with
  its own generator.

Conventions:
* the box spans ``[0, x_len] x [0, y_len] x [0, z_len]``; ``z_len == 0``
  selects 2D (ground network) mode, in which every z coordinate and the
  Gauss-Markov pitch stay exactly 0;
* Gauss-Markov updates speed, heading and pitch with the AR(1) recurrence
  ``v' = a*v + (1-a)*mean + sqrt(1-a^2)*xi`` (one standard normal draw per
  channel and step, drawn in the order speed, heading, pitch);
* speed is clamped to ``[v_min, v_max]`` and pitch to
  ``[-gm_pitch_max, gm_pitch_max]``; boundary crossings reflect the position
  and flip the offending heading/pitch component;
* random waypoint draws waypoints uniformly inside the box (so nodes never
  exit) and clamps arrival at the waypoint within a step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


class MobilityModel(enum.Enum):
    RWP = "rwp"
    GM = "gm"


@dataclass(frozen=True)
class Vec3:
    """A position in meters. Components must be finite."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"non-finite coordinate in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned simulation volume; ``z_len = 0`` means 2D mode."""

    x_len: float
    y_len: float
    z_len: float = 0.0

    def __post_init__(self):
        if not (self.x_len > 0 and self.y_len > 0):
            raise ConfigError(f"box sides must be positive, got {self}")
        if self.z_len < 0:
            raise ConfigError(f"z_len must be >= 0, got {self.z_len}")

    @property
    def is_3d(self) -> bool:
        return self.z_len > 0

    def lengths(self) -> np.ndarray:
        return np.array([self.x_len, self.y_len, self.z_len], dtype=np.float64)

    def contains(self, p: Vec3, tol: float = 1e-9) -> bool:
        return (
            -tol <= p.x <= self.x_len + tol
            and -tol <= p.y <= self.y_len + tol
            and -tol <= p.z <= self.z_len + tol
        )


@dataclass(frozen=True)
class MobilityConfig:
    model: MobilityModel
    v_min: float = 0.0
    v_max: float = 50.0
    pause_s: float = 0.0
    gm_alpha: float = 0.85
    gm_mean_speed: float | None = None
    gm_pitch_max: float = 0.05
    step_dt: float = 1.0

    def __post_init__(self):
        if not 0 <= self.v_min <= self.v_max:
            raise ConfigError(
                f"v_min/v_max must satisfy 0 <= v_min <= v_max, got "
                f"v_min={self.v_min}, v_max={self.v_max}"
            )
        if self.step_dt <= 0:
            raise ConfigError(f"step_dt must be > 0, got {self.step_dt}")
        if not 0 <= self.gm_alpha <= 1:
            raise ConfigError(f"gm_alpha must be in [0, 1], got {self.gm_alpha}")
        if self.gm_pitch_max < 0:
            raise ConfigError(f"gm_pitch_max must be >= 0, got {self.gm_pitch_max}")
        if self.pause_s < 0:
            raise ConfigError(f"pause_s must be >= 0, got {self.pause_s}")
        if self.gm_mean_speed is None:
            object.__setattr__(self, "gm_mean_speed", 0.5 * (self.v_min + self.v_max))


@dataclass(frozen=True)
class MobilityState:
    """One node's kinematic state.

    RWP uses ``waypoint``, ``leg_speed`` and ``pause_remaining``; GM uses
    ``gm_speed``, ``gm_direction``, ``gm_pitch`` plus the per-node fixed
    ``gm_mean_direction`` the heading reverts to.
    """

    pos: Vec3
    waypoint: Vec3 | None = None
    leg_speed: float = 0.0
    pause_remaining: float = 0.0
    gm_speed: float = 0.0
    gm_direction: float = 0.0
    gm_pitch: float = 0.0
    gm_mean_direction: float = 0.0


def _init_one(cfg: MobilityConfig, box: BoundingBox, rng: np.random.Generator) -> MobilityState:
    """Draw one fresh state. Draw order is fixed: position (x, y, z), then
    the model's extra state, so per-node streams are reproducible."""
    pos = Vec3(
        rng.uniform(0.0, box.x_len),
        rng.uniform(0.0, box.y_len),
        rng.uniform(0.0, box.z_len),
    )
    if cfg.model is MobilityModel.RWP:
        wp = Vec3(
            rng.uniform(0.0, box.x_len),
            rng.uniform(0.0, box.y_len),
            rng.uniform(0.0, box.z_len),
        )
        speed = rng.uniform(cfg.v_min, cfg.v_max)
        return MobilityState(pos=pos, waypoint=wp, leg_speed=speed)
    direction = rng.uniform(0.0, TWO_PI)
    pitch = rng.uniform(0.0, cfg.gm_pitch_max)
    if not box.is_3d:
        pitch = 0.0
    return MobilityState(
        pos=pos,
        gm_speed=cfg.gm_mean_speed,
        gm_direction=direction,
        gm_pitch=pitch,
        gm_mean_direction=direction,
    )


def init_positions(
    n: int, box: BoundingBox, cfg: MobilityConfig, rng: np.random.Generator
) -> list[MobilityState]:
    """n i.i.d. uniform starting states, each with fresh model-specific state."""
    if n < 1:
        raise ConfigError(f"empty scenario: node count must be >= 1, got {n}")
    return [_init_one(cfg, box, rng) for _ in range(n)]


def rwp_step(
    state: MobilityState, cfg: MobilityConfig, box: BoundingBox, rng: np.random.Generator
) -> MobilityState:
    """Advance one random-waypoint node by ``cfg.step_dt`` seconds.

    Arrival is clamped at the waypoint; on arrival the node enters its pause
    and immediately holds a freshly drawn waypoint and leg speed.
    """
    dt = cfg.step_dt
    if state.pause_remaining > 0:
        return replace(state, pause_remaining=max(0.0, state.pause_remaining - dt))
    p = state.pos.as_array()
    w = state.waypoint.as_array()
    delta = w - p
    dist = float(np.linalg.norm(delta))
    travel = state.leg_speed * dt
    if travel >= dist:
        wp = Vec3(
            rng.uniform(0.0, box.x_len),
            rng.uniform(0.0, box.y_len),
            rng.uniform(0.0, box.z_len),
        )
        speed = rng.uniform(cfg.v_min, cfg.v_max)
        return replace(
            state,
            pos=state.waypoint,
            waypoint=wp,
            leg_speed=speed,
            pause_remaining=cfg.pause_s,
        )
    new = p + delta * (travel / dist)
    return replace(state, pos=Vec3(*new))


def _reflect(coord: float, length: float) -> tuple[float, bool]:
    """Mirror a coordinate into [0, length]; the flag reports an odd number
    of reflections (the velocity component must flip)."""
    flipped = False
    c = coord
    while c < 0.0 or c > length:
        if c < 0.0:
            c = -c
        else:
            c = 2.0 * length - c
        flipped = not flipped
    return c, flipped


def gm_step(
    state: MobilityState, cfg: MobilityConfig, box: BoundingBox, rng: np.random.Generator
) -> MobilityState:
    """Advance one Gauss-Markov node by ``cfg.step_dt`` seconds.

    Consumes exactly three standard normal draws (speed, heading, pitch),
    also in 2D mode where the pitch channel is forced to zero afterwards.
    """
    dt = cfg.step_dt
    a = cfg.gm_alpha
    noise = math.sqrt(1.0 - a * a)
    xi = rng.standard_normal(3)

    speed = a * state.gm_speed + (1.0 - a) * cfg.gm_mean_speed + noise * xi[0]
    speed = min(max(speed, cfg.v_min), cfg.v_max)
    direction = a * state.gm_direction + (1.0 - a) * state.gm_mean_direction + noise * xi[1]
    mean_pitch = 0.5 * cfg.gm_pitch_max
    pitch = a * state.gm_pitch + (1.0 - a) * mean_pitch + noise * xi[2]
    pitch = min(max(pitch, -cfg.gm_pitch_max), cfg.gm_pitch_max)
    if not box.is_3d:
        pitch = 0.0

    cos_p = math.cos(pitch)
    x = state.pos.x + speed * math.cos(direction) * cos_p * dt
    y = state.pos.y + speed * math.sin(direction) * cos_p * dt
    z = state.pos.z + speed * math.sin(pitch) * dt

    # Reflections mirror the heading process (instantaneous and mean
    # direction alike); a mean left pointing into the wall would drag the
    # node straight back and pile nodes up along the boundary.
    mean_direction = state.gm_mean_direction
    x, fx = _reflect(x, box.x_len)
    y, fy = _reflect(y, box.y_len)
    if box.is_3d:
        z, fz = _reflect(z, box.z_len)
    else:
        z, fz = 0.0, False
    if fx:
        direction = math.pi - direction
        mean_direction = math.pi - mean_direction
    if fy:
        direction = -direction
        mean_direction = -mean_direction
    if fz:
        pitch = -pitch

    return replace(
        state,
        pos=Vec3(x, y, z),
        gm_speed=speed,
        gm_direction=direction,
        gm_pitch=pitch,
        gm_mean_direction=mean_direction,
    )


def step(
    state: MobilityState, cfg: MobilityConfig, box: BoundingBox, rng: np.random.Generator
) -> MobilityState:
    if cfg.model is MobilityModel.RWP:
        return rwp_step(state, cfg, box, rng)
    return gm_step(state, cfg, box, rng)


class MobilityField:
    """Vectorized stepper for all nodes of one run.

    Node ``i`` owns generator ``rngs[i]`` and consumes draws from it in the
    same order as the scalar functions above, so a :class:`MobilityField`
    trajectory matches per-node scalar stepping draw for draw. GM noise is
    pre-drawn in per-node blocks of ``block_steps`` steps to keep the hot
    loop free of per-node generator calls.
    """

    def __init__(
        self,
        cfg: MobilityConfig,
        box: BoundingBox,
        rngs: list[np.random.Generator],
        block_steps: int = 1024,
    ):
        self.cfg = cfg
        self.box = box
        self.rngs = rngs
        self.n = len(rngs)
        if self.n < 1:
            raise ConfigError("empty scenario: node count must be >= 1")
        self._lengths = box.lengths()
        self._block_steps = block_steps

        states = [_init_one(cfg, box, rng) for rng in rngs]
        self.pos = np.array([s.pos.as_array() for s in states])
        if cfg.model is MobilityModel.RWP:
            self.waypoint = np.array([s.waypoint.as_array() for s in states])
            self.leg_speed = np.array([s.leg_speed for s in states])
            self.pause_remaining = np.zeros(self.n)
        else:
            self.gm_speed = np.array([s.gm_speed for s in states])
            self.gm_direction = np.array([s.gm_direction for s in states])
            self.gm_pitch = np.array([s.gm_pitch for s in states])
            self.gm_mean_direction = np.array([s.gm_mean_direction for s in states])
            self._noise = np.empty((self.n, 0, 3))
            self._noise_at = 0

    def step(self) -> None:
        if self.cfg.model is MobilityModel.RWP:
            self._step_rwp()
        else:
            self._step_gm()

    def _step_rwp(self) -> None:
        cfg, box = self.cfg, self.box
        dt = cfg.step_dt
        pausing = self.pause_remaining > 0
        self.pause_remaining[pausing] = np.maximum(self.pause_remaining[pausing] - dt, 0.0)

        moving = ~pausing
        delta = self.waypoint - self.pos
        dist = np.linalg.norm(delta, axis=1)
        travel = self.leg_speed * dt
        arrive = moving & (travel >= dist)
        cruise = moving & ~arrive

        if np.any(cruise):
            frac = (travel[cruise] / dist[cruise])[:, None]
            self.pos[cruise] += delta[cruise] * frac
        for i in np.flatnonzero(arrive):
            rng = self.rngs[i]
            self.pos[i] = self.waypoint[i]
            self.waypoint[i, 0] = rng.uniform(0.0, box.x_len)
            self.waypoint[i, 1] = rng.uniform(0.0, box.y_len)
            self.waypoint[i, 2] = rng.uniform(0.0, box.z_len)
            self.leg_speed[i] = rng.uniform(cfg.v_min, cfg.v_max)
            self.pause_remaining[i] = cfg.pause_s

    def _next_noise(self) -> np.ndarray:
        if self._noise_at >= self._noise.shape[1]:
            self._noise = np.stack(
                [rng.standard_normal((self._block_steps, 3)) for rng in self.rngs]
            )
            self._noise_at = 0
        xi = self._noise[:, self._noise_at, :]
        self._noise_at += 1
        return xi

    def _step_gm(self) -> None:
        cfg, box = self.cfg, self.box
        dt = cfg.step_dt
        a = cfg.gm_alpha
        noise = math.sqrt(1.0 - a * a)
        xi = self._next_noise()

        self.gm_speed = np.clip(
            a * self.gm_speed + (1.0 - a) * cfg.gm_mean_speed + noise * xi[:, 0],
            cfg.v_min,
            cfg.v_max,
        )
        self.gm_direction = (
            a * self.gm_direction + (1.0 - a) * self.gm_mean_direction + noise * xi[:, 1]
        )
        mean_pitch = 0.5 * cfg.gm_pitch_max
        pitch = a * self.gm_pitch + (1.0 - a) * mean_pitch + noise * xi[:, 2]
        self.gm_pitch = np.clip(pitch, -cfg.gm_pitch_max, cfg.gm_pitch_max)
        if not box.is_3d:
            self.gm_pitch[:] = 0.0

        cos_p = np.cos(self.gm_pitch)
        self.pos[:, 0] += self.gm_speed * np.cos(self.gm_direction) * cos_p * dt
        self.pos[:, 1] += self.gm_speed * np.sin(self.gm_direction) * cos_p * dt
        self.pos[:, 2] += self.gm_speed * np.sin(self.gm_pitch) * dt

        for axis in range(3):
            length = self._lengths[axis]
            if axis == 2 and not box.is_3d:
                self.pos[:, 2] = 0.0
                continue
            c = self.pos[:, axis]
            out = (c < 0.0) | (c > length)
            if not np.any(out):
                continue
            flipped = np.zeros(self.n, dtype=bool)
            while np.any(out):
                below = c < 0.0
                above = c > length
                c[below] = -c[below]
                c[above] = 2.0 * length - c[above]
                flipped ^= below | above
                out = (c < 0.0) | (c > length)
            if axis == 0:
                self.gm_direction[flipped] = math.pi - self.gm_direction[flipped]
                self.gm_mean_direction[flipped] = math.pi - self.gm_mean_direction[flipped]
            elif axis == 1:
                self.gm_direction[flipped] = -self.gm_direction[flipped]
                self.gm_mean_direction[flipped] = -self.gm_mean_direction[flipped]
            else:
                self.gm_pitch[flipped] = -self.gm_pitch[flipped]

    def states(self) -> list[MobilityState]:
        """Materialize scalar states (for inspection and equivalence tests)."""
        out = []
        for i in range(self.n):
            pos = Vec3(*self.pos[i])
            if self.cfg.model is MobilityModel.RWP:
                out.append(
                    MobilityState(
                        pos=pos,
                        waypoint=Vec3(*self.waypoint[i]),
                        leg_speed=float(self.leg_speed[i]),
                        pause_remaining=float(self.pause_remaining[i]),
                    )
                )
            else:
                out.append(
                    MobilityState(
                        pos=pos,
                        gm_speed=float(self.gm_speed[i]),
                        gm_direction=float(self.gm_direction[i]),
                        gm_pitch=float(self.gm_pitch[i]),
                        gm_mean_direction=float(self.gm_mean_direction[i]),
                    )
                )
        return out
