"""Classical reference RIR synthesis.

Two stages: a specular part from the rectangular-room image-source method,
and a stochastic late tail of Poisson-arrival Gaussian impulses shaped by
the 60 dB/T60 energy envelope. Their combination is the ground-truth
generator used to build training corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .env import AcousticEnv, sabine_absorption
from .errors import DegenerateSignalError, ValidationError

# ln(10^6): energy drops by 60 dB when the exponent advances by this much.
DECAY_60DB = math.log(1e6)

SINC_TAPS = 8  # windowed-sinc support for fractional-delay placement


class Provenance(str, Enum):
    IMAGE_METHOD = "image_method"
    DIFFUSE_HYBRID = "diffuse_hybrid"
    NEURAL = "neural"


@dataclass
class Rir:
    """A mono impulse response with its origin recorded."""

    samples: np.ndarray
    sample_rate: int = 16000
    provenance: Provenance = Provenance.IMAGE_METHOD
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValidationError(f"rir samples must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate


@dataclass(frozen=True)
class SynthConfig:
    """Controls for the reference synthesis chain."""

    sample_rate: int = 16000
    n_samples: int = 4096
    speed_of_sound: float = 343.0
    # None enumerates every image arriving within the RIR duration; an
    # explicit order keeps only images with at most that many reflections.
    max_image_order: int | None = None
    energy_floor_db: float = -60.0  # prune images this far below the direct path
    mixing_time_ms: float | None = None  # None: max(2*sqrt(V) ms, direct + 2 ms)
    diffuse_density: float = 8000.0  # Poisson arrivals per second in the tail
    seed: int = 0

    def __post_init__(self):
        if self.n_samples <= 0 or self.sample_rate <= 0:
            raise ValidationError("n_samples and sample_rate must be positive")
        if self.max_image_order is not None and self.max_image_order < 0:
            raise ValidationError("max_image_order must be >= 0")
        if self.mixing_time_ms is not None and self.mixing_time_ms < 0:
            raise ValidationError("mixing_time_ms must be >= 0")
        if self.diffuse_density < 0:
            raise ValidationError("diffuse_density must be >= 0")


def enumerate_images(env: AcousticEnv, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """List image sources as (distances, reflection_orders).

    Mirrors the source across the six walls on the standard lattice: image
    positions (1-2p)*src + 2r*L for p in {0,1}^3 and integer r, with
    reflection count sum(|r-p| + |r|) per axis. Enumeration covers every
    image whose arrival can land inside the RIR (plus interpolation slack),
    restricted to ``max_image_order`` when one is set.
    """
    env.validate()
    dims = env.room_dims
    duration = cfg.n_samples / cfg.sample_rate
    max_dist = cfg.speed_of_sound * duration + cfg.speed_of_sound / cfg.sample_rate * SINC_TAPS

    ranges = [np.arange(-int(np.ceil(max_dist / (2 * d))), int(np.ceil(max_dist / (2 * d))) + 1)
              for d in dims]
    rx, ry, rz = np.meshgrid(*ranges, indexing="ij")
    r = np.stack([rx.ravel(), ry.ravel(), rz.ravel()], axis=1)  # (M, 3)

    p_combos = np.array([[px, py, pz] for px in (0, 1) for py in (0, 1) for pz in (0, 1)])

    dists, orders = [], []
    for p in p_combos:
        pos = (1 - 2 * p) * env.source_pos + 2 * r * dims
        d = np.linalg.norm(pos - env.listener_pos, axis=1)
        n_refl = np.sum(np.abs(r - p) + np.abs(r), axis=1)
        keep = d <= max_dist
        if cfg.max_image_order is not None:
            keep &= n_refl <= cfg.max_image_order
        dists.append(d[keep])
        orders.append(n_refl[keep])
    return np.concatenate(dists), np.concatenate(orders)


def place_impulses(
    distances: np.ndarray,
    amplitudes: np.ndarray,
    n_samples: int,
    sample_rate: int,
    speed_of_sound: float,
) -> np.ndarray:
    """Scatter attenuated arrivals onto the sample grid with fractional delay.

    Each arrival becomes an 8-tap Hann-windowed sinc centered at its exact
    (non-integer) delay, so sub-sample timing is preserved.
    """
    out = np.zeros(n_samples, dtype=np.float64)
    if distances.size == 0:
        return out
    centers = distances / speed_of_sound * sample_rate
    base = np.floor(centers).astype(np.int64)
    offsets = np.arange(-(SINC_TAPS // 2 - 1), SINC_TAPS // 2 + 1)  # -3 .. 4
    idx = base[:, None] + offsets[None, :]
    t = idx - centers[:, None]  # in (-4, 4]
    kernel = np.sinc(t) * 0.5 * (1.0 + np.cos(np.pi * t / (SINC_TAPS // 2)))
    values = amplitudes[:, None] * kernel
    valid = (idx >= 0) & (idx < n_samples)
    np.add.at(out, idx[valid], values[valid])
    return out


def _peak_normalize(samples: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(samples))
    if peak == 0:
        raise DegenerateSignalError("impulse response is all zero")
    return samples / peak


def image_method_rir(env: AcousticEnv, cfg: SynthConfig | None = None) -> Rir:
    """Specular impulse response of a shoebox room.

    Wall reflectivity is sqrt(1 - alpha) with alpha from the Sabine relation
    for the environment's target T60, applied uniformly to all six surfaces.
    Each image contributes reflectivity^order / distance at delay distance/c.
    Output is peak-normalized and exactly ``cfg.n_samples`` long.
    """
    cfg = cfg or SynthConfig()
    alpha = sabine_absorption(env.room_dims, env.t60)
    beta = math.sqrt(1.0 - alpha)

    dists, orders = enumerate_images(env, cfg)
    amps = np.where(orders == 0, 1.0, beta ** orders.astype(np.float64)) / dists

    # Drop images that cannot register above the energy floor (relative to
    # the direct path), keeping the lattice sum cheap for low-absorption rooms.
    direct_amp = 1.0 / env.direct_distance()
    floor = direct_amp * 10.0 ** (cfg.energy_floor_db / 20.0)
    keep = amps >= floor
    samples = place_impulses(
        dists[keep], amps[keep], cfg.n_samples, cfg.sample_rate, cfg.speed_of_sound
    )
    return Rir(
        samples=_peak_normalize(samples),
        sample_rate=cfg.sample_rate,
        provenance=Provenance.IMAGE_METHOD,
    )


def _auto_mixing_time(env: AcousticEnv, cfg: SynthConfig) -> float:
    """Mixing time in seconds: max(2*sqrt(V) ms, direct delay + 2 ms)."""
    if cfg.mixing_time_ms is not None:
        return cfg.mixing_time_ms / 1000.0
    by_volume = 2.0 * math.sqrt(env.volume) / 1000.0
    direct = env.direct_distance() / cfg.speed_of_sound
    return max(by_volume, direct + 0.002)


def diffuse_tail(env: AcousticEnv, specular: Rir, cfg: SynthConfig | None = None) -> Rir:
    """Replace the late field of a specular response with a diffuse tail.

    After the mixing time the field is treated as statistically diffuse:
    zero-mean Gaussian impulses with Poisson arrival density
    ``diffuse_density``, shaped by the exp(-13.8155 * t / T60) energy
    envelope (60 dB per T60). The tail's first 5 ms is scaled to match the
    specular energy in the 5 ms window before the mixing time, and the two
    fields are power-crossfaded over 2 ms. Keeping the raw image cascade
    past the mixing time would let slowly decaying axial bounce paths
    dominate the late energy and drag the realized T60 above its target.
    The result is re-peak-normalized.
    """
    cfg = cfg or SynthConfig()
    fs = specular.sample_rate
    n = specular.length
    t_mix = _auto_mixing_time(env, cfg)
    n_mix = int(round(t_mix * fs))
    if n_mix >= n:
        return replace(specular, info={**specular.info, "tail_skipped": True})

    rng = np.random.default_rng(cfg.seed)
    n_tail = n - n_mix
    # Compound-Poisson noise at sample resolution: each sample accumulates a
    # Poisson-distributed number of unit-variance arrivals.
    counts = rng.poisson(cfg.diffuse_density / fs, size=n_tail)
    if not np.any(counts):
        return replace(specular, info={**specular.info, "tail_empty": True})
    noise = rng.standard_normal(n_tail) * np.sqrt(counts)

    t_rel = np.arange(n_tail, dtype=np.float64) / fs
    envelope = np.exp(-DECAY_60DB * t_rel / (2.0 * env.t60))  # amplitude for 60 dB/T60 energy decay
    tail = noise * envelope

    window = max(1, int(round(0.005 * fs)))
    spec_energy = float(np.mean(specular.samples[max(0, n_mix - window):n_mix] ** 2))
    tail_energy = float(np.mean(tail[:window] ** 2))
    if tail_energy == 0.0:
        # No arrivals landed in the matching window; fall back to the
        # expected per-sample energy of the compound-Poisson process.
        tail_energy = cfg.diffuse_density / fs * float(np.mean(envelope[:window] ** 2))
    tail *= math.sqrt(spec_energy / tail_energy) if tail_energy > 0 else 0.0

    n_fade = min(n_tail, max(1, int(round(0.002 * fs))))
    ramp = np.arange(n_fade) / n_fade
    fade_in = np.sin(0.5 * np.pi * ramp) ** 2
    tail[:n_fade] *= fade_in

    samples = specular.samples.copy()
    samples[n_mix : n_mix + n_fade] *= 1.0 - fade_in  # specular fades out
    samples[n_mix + n_fade :] = 0.0
    samples[n_mix:] += tail
    return Rir(
        samples=_peak_normalize(samples),
        sample_rate=fs,
        provenance=specular.provenance,
        info={**specular.info, "mixing_time_s": t_mix},
    )


def generate_reference_rir(env: AcousticEnv, cfg: SynthConfig | None = None) -> Rir:
    """Ground-truth RIR: image-source specular part plus the diffuse tail."""
    cfg = cfg or SynthConfig()
    specular = image_method_rir(env, cfg)
    out = diffuse_tail(env, specular, cfg)
    out.provenance = Provenance.DIFFUSE_HYBRID
    return out
