"""Acoustic environments, Sabine absorption, and the conditioning embedding.

An environment is a rectangular (shoebox) room with one omnidirectional
source, one listener, and a target reverberation time. For the neural
generator the environment is flattened into a ten-entry vector, every
entry affinely normalized into [-1.2, 1.2]:

    (room L, W, H, listener x, y, z, source x, y, z, T60)

Spatial entries share a single normalization constant ``d_max`` (the
largest room dimension of the corpus); the T60 entry is normalized by a
separate ``t60_max`` so that it spans the same range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigurationError, InfeasibleT60Error, ValidationError

if TYPE_CHECKING:
    from .corpus import CorpusGrid

SPEED_OF_SOUND = 343.0  # m/s, configurable where it matters

EMBEDDING_DIM = 10
EMBEDDING_BOUND = 1.2
_SPAN = 2.0 * EMBEDDING_BOUND

DEFAULT_WALL_MARGIN = 0.3  # m, keeps random placements off the walls

_SABINE_CONST = 0.161  # s/m, empirical constant of the Sabine relation


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return arr


@dataclass
class AcousticEnv:
    """A shoebox room with source/listener positions and a target T60.

    Construction does not validate; call :meth:`validate` where the
    invariants (positions inside the room, distinct source/listener,
    positive T60) are actually required. This keeps round-trip utilities
    usable on boundary cases such as the all-zero embedding.
    """

    room_dims: np.ndarray
    source_pos: np.ndarray
    listener_pos: np.ndarray
    t60: float

    def __post_init__(self):
        self.room_dims = _vec3(self.room_dims, "room_dims")
        self.source_pos = _vec3(self.source_pos, "source_pos")
        self.listener_pos = _vec3(self.listener_pos, "listener_pos")
        self.t60 = float(self.t60)

    def validate(self) -> "AcousticEnv":
        """Check the type invariants, raising ValidationError naming the field."""
        if not np.all(self.room_dims > 0):
            raise ValidationError(f"room_dims must be positive, got {self.room_dims.tolist()}")
        for name, pos in (("source_pos", self.source_pos), ("listener_pos", self.listener_pos)):
            if np.any(pos < 0) or np.any(pos > self.room_dims):
                raise ValidationError(
                    f"{name} {pos.tolist()} lies outside room {self.room_dims.tolist()}"
                )
        if np.array_equal(self.source_pos, self.listener_pos):
            raise ValidationError("source_pos equals listener_pos")
        if self.t60 <= 0:
            raise ValidationError(f"t60 must be positive, got {self.t60}")
        return self

    @property
    def volume(self) -> float:
        return float(np.prod(self.room_dims))

    @property
    def surface_area(self) -> float:
        l, w, h = self.room_dims
        return float(2.0 * (l * w + l * h + w * h))

    def direct_distance(self) -> float:
        return float(np.linalg.norm(self.source_pos - self.listener_pos))

    def to_dict(self) -> dict:
        return {
            "room": self.room_dims.tolist(),
            "source": self.source_pos.tolist(),
            "listener": self.listener_pos.tolist(),
            "t60": self.t60,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AcousticEnv":
        try:
            return cls(
                room_dims=data["room"],
                source_pos=data["source"],
                listener_pos=data["listener"],
                t60=data["t60"],
            )
        except KeyError as exc:
            raise ValidationError(f"environment dict is missing key {exc}") from exc


@dataclass(frozen=True)
class NormalizationConfig:
    """Constants that map physical quantities into the embedding range."""

    d_max: float = 11.0   # largest room dimension of the default corpus grid, m
    t60_max: float = 0.7  # largest reverberation time of the default corpus, s

    def __post_init__(self):
        if self.d_max <= 0:
            raise ConfigurationError(f"d_max must be positive, got {self.d_max}")
        if self.t60_max <= 0:
            raise ConfigurationError(f"t60_max must be positive, got {self.t60_max}")

    def to_dict(self) -> dict:
        return {"d_max": self.d_max, "t60_max": self.t60_max}

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationConfig":
        return cls(d_max=data["d_max"], t60_max=data["t60_max"])


def _normalize(value: float, maximum: float) -> float:
    return _SPAN * value / maximum - EMBEDDING_BOUND


def _denormalize(value: float, maximum: float) -> float:
    return (value + EMBEDDING_BOUND) * maximum / _SPAN


def build_embedding(env: AcousticEnv, cfg: NormalizationConfig) -> np.ndarray:
    """Map an environment to the normalized ten-entry conditioning vector.

    Every spatial coordinate x maps to 2.4*x/d_max - 1.2 and the T60 entry
    to 2.4*t60/t60_max - 1.2, so 0 lands on -1.2 and the corpus maximum on
    +1.2. Raises ValidationError naming any out-of-range field.
    """
    fields = [
        ("room_dims", env.room_dims),
        ("listener_pos", env.listener_pos),
        ("source_pos", env.source_pos),
    ]
    out = np.empty(EMBEDDING_DIM, dtype=np.float64)
    i = 0
    for name, vec in fields:
        for axis, x in zip("xyz", vec):
            if x < 0 or x > cfg.d_max:
                raise ValidationError(
                    f"{name}.{axis} = {x} outside [0, d_max = {cfg.d_max}]"
                )
            out[i] = _normalize(float(x), cfg.d_max)
            i += 1
    if env.t60 < 0 or env.t60 > cfg.t60_max:
        raise ValidationError(f"t60 = {env.t60} outside [0, t60_max = {cfg.t60_max}]")
    out[9] = _normalize(env.t60, cfg.t60_max)
    return out


def validate_embedding(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (EMBEDDING_DIM,):
        raise ValidationError(f"embedding must have shape ({EMBEDDING_DIM},), got {vec.shape}")
    if np.any(np.abs(vec) > EMBEDDING_BOUND):
        bad = int(np.argmax(np.abs(vec) > EMBEDDING_BOUND))
        raise ValidationError(
            f"embedding[{bad}] = {vec[bad]} outside [-{EMBEDDING_BOUND}, {EMBEDDING_BOUND}]"
        )
    return vec


def invert_embedding(vec: np.ndarray, cfg: NormalizationConfig) -> AcousticEnv:
    """Recover the physical environment from a normalized embedding.

    Exact inverse of :func:`build_embedding`; the result is not validated
    (an arbitrary in-range vector may decode to e.g. coincident positions).
    """
    vec = validate_embedding(vec)
    spatial = np.array([_denormalize(v, cfg.d_max) for v in vec[:9]])
    return AcousticEnv(
        room_dims=spatial[0:3],
        listener_pos=spatial[3:6],
        source_pos=spatial[6:9],
        t60=_denormalize(float(vec[9]), cfg.t60_max),
    )


def sabine_absorption(room_dims, t60: float) -> float:
    """Average absorption coefficient for a room to decay 60 dB in ``t60``.

    Uses the empirical relation alpha = 0.161 * V / (S * t60) with volume V
    and total surface area S. Raises InfeasibleT60Error when the required
    coefficient exceeds 1 (the room cannot absorb that fast); the error
    carries the smallest feasible T60.
    """
    dims = _vec3(room_dims, "room_dims")
    if np.any(dims <= 0):
        raise ValidationError(f"room_dims must be positive, got {dims.tolist()}")
    if t60 <= 0:
        raise ValidationError(f"t60 must be positive, got {t60}")
    volume = float(np.prod(dims))
    l, w, h = dims
    surface = 2.0 * (l * w + l * h + w * h)
    alpha = _SABINE_CONST * volume / (surface * t60)
    if alpha > 1.0:
        t_min = _SABINE_CONST * volume / surface
        raise InfeasibleT60Error(
            f"t60 = {t60} s needs absorption {alpha:.3f} > 1 in room {dims.tolist()}; "
            f"smallest feasible t60 is {t_min:.4f} s",
            min_feasible_t60=t_min,
        )
    return alpha


def min_feasible_t60(room_dims) -> float:
    """Smallest T60 reachable with full absorption (alpha = 1)."""
    dims = _vec3(room_dims, "room_dims")
    l, w, h = dims
    return _SABINE_CONST * float(np.prod(dims)) / (2.0 * (l * w + l * h + w * h))


def sample_positions(
    rng: np.random.Generator, room_dims: np.ndarray, margin: float = DEFAULT_WALL_MARGIN
) -> tuple[np.ndarray, np.ndarray]:
    """Draw source and listener positions uniformly inside the walled-off interior.

    Resamples on (near-)collision so the pair is always distinct.
    """
    dims = _vec3(room_dims, "room_dims")
    if np.any(dims <= 2.0 * margin):
        raise ConfigurationError(
            f"room {dims.tolist()} too small for wall margin {margin} m"
        )
    lo, hi = margin, dims - margin
    while True:
        source = rng.uniform(lo, hi)
        listener = rng.uniform(lo, hi)
        if np.linalg.norm(source - listener) > 1e-6:
            return source, listener


def sample_environment(
    seed, grid: "CorpusGrid", margin: float = DEFAULT_WALL_MARGIN
) -> AcousticEnv:
    """Draw one valid environment from a corpus grid.

    Room dimensions are picked uniformly from the grid's enumerated values,
    T60 uniformly from the grid range (resampled while Sabine-infeasible),
    and positions uniformly in the interior with the given wall margin.
    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    dims = np.array(
        [
            rng.choice(grid.lengths.values()),
            rng.choice(grid.widths.values()),
            rng.choice(grid.heights.values()),
        ]
    )
    source, listener = sample_positions(rng, dims, margin)
    t_lo, t_hi = grid.t60_range
    floor = min_feasible_t60(dims)
    if t_hi <= floor:
        raise ConfigurationError(
            f"t60 range {grid.t60_range} entirely below feasible minimum {floor:.4f} s "
            f"for room {dims.tolist()}"
        )
    while True:
        t60 = float(rng.uniform(t_lo, t_hi))
        if t60 > floor:
            break
    return AcousticEnv(dims, source, listener, t60).validate()
