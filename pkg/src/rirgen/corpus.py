"""Corpus generation: grid enumeration, deterministic builds, manifests.

The default grid enumerates 15 x 10 x 5 room dimension combinations with
100 randomly positioned source/listener pairs each (75,000 items), target
T60 drawn uniformly from [0.2, 0.7] s and resampled when Sabine-infeasible.
Every item derives its own RNG from (grid seed, item index), so builds are
reproducible and resumable item by item.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__ as _generator_version
from .audioio import read_sidecar, read_wav, write_sidecar, write_wav
from .env import (
    DEFAULT_WALL_MARGIN,
    AcousticEnv,
    NormalizationConfig,
    build_embedding,
    min_feasible_t60,
    sample_positions,
)
from .errors import ConfigurationError, ValidationError
from .synthesis import Rir, SynthConfig, generate_reference_rir


@dataclass(frozen=True)
class Axis:
    """Evenly spaced values: ``count`` points from ``lo`` to ``hi`` inclusive."""

    count: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError(f"axis count must be >= 1, got {self.count}")
        if self.lo >= self.hi:
            raise ConfigurationError(f"axis range must satisfy lo < hi, got [{self.lo}, {self.hi}]")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    def to_dict(self) -> dict:
        return {"count": self.count, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, data: dict) -> "Axis":
        return cls(count=data["count"], lo=data["lo"], hi=data["hi"])


@dataclass(frozen=True)
class CorpusGrid:
    """Room-dimension grid and per-room sampling recipe."""

    lengths: Axis = Axis(15, 8.0, 11.0)
    widths: Axis = Axis(10, 6.0, 8.0)
    heights: Axis = Axis(5, 2.5, 3.5)
    rirs_per_room: int = 100
    t60_range: tuple[float, float] = (0.2, 0.7)
    seed: int = 0

    def __post_init__(self):
        if self.rirs_per_room < 1:
            raise ConfigurationError(f"rirs_per_room must be >= 1, got {self.rirs_per_room}")
        lo, hi = self.t60_range
        if not (0 < lo < hi):
            raise ConfigurationError(f"t60_range must satisfy 0 < lo < hi, got {self.t60_range}")

    @property
    def total(self) -> int:
        return self.lengths.count * self.widths.count * self.heights.count * self.rirs_per_room

    def room_dims(self) -> np.ndarray:
        """All room dimension combinations, length-major, shape (rooms, 3)."""
        combos = []
        for l in self.lengths.values():
            for w in self.widths.values():
                for h in self.heights.values():
                    combos.append((l, w, h))
        return np.array(combos)

    @property
    def d_max(self) -> float:
        return max(self.lengths.hi, self.widths.hi, self.heights.hi)

    def to_dict(self) -> dict:
        return {
            "lengths": self.lengths.to_dict(),
            "widths": self.widths.to_dict(),
            "heights": self.heights.to_dict(),
            "rirs_per_room": self.rirs_per_room,
            "t60_range": list(self.t60_range),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusGrid":
        return cls(
            lengths=Axis.from_dict(data["lengths"]),
            widths=Axis.from_dict(data["widths"]),
            heights=Axis.from_dict(data["heights"]),
            rirs_per_room=data["rirs_per_room"],
            t60_range=tuple(data["t60_range"]),
            seed=data["seed"],
        )


@dataclass
class ManifestItem:
    id: str
    env: AcousticEnv
    embedding: np.ndarray
    rir_path: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "env": self.env.to_dict(),
            "embedding": [float(v) for v in self.embedding],
            "rir_path": self.rir_path,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestItem":
        return cls(
            id=data["id"],
            env=AcousticEnv.from_dict(data["env"]),
            embedding=np.asarray(data["embedding"], dtype=np.float64),
            rir_path=data["rir_path"],
            seed=data["seed"],
        )


@dataclass
class CorpusManifest:
    items: list
    grid: CorpusGrid
    normalization: NormalizationConfig
    synth: SynthConfig
    generator_version: str = _generator_version

    def to_dict(self) -> dict:
        return {
            "generator_version": self.generator_version,
            "grid": self.grid.to_dict(),
            "normalization": self.normalization.to_dict(),
            "synth": {
                "sample_rate": self.synth.sample_rate,
                "n_samples": self.synth.n_samples,
                "speed_of_sound": self.synth.speed_of_sound,
                "max_image_order": self.synth.max_image_order,
                "energy_floor_db": self.synth.energy_floor_db,
                "mixing_time_ms": self.synth.mixing_time_ms,
                "diffuse_density": self.synth.diffuse_density,
            },
            "items": [item.to_dict() for item in self.items],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        data = json.loads(Path(path).read_text())
        synth = data["synth"]
        manifest = cls(
            items=[ManifestItem.from_dict(d) for d in data["items"]],
            grid=CorpusGrid.from_dict(data["grid"]),
            normalization=NormalizationConfig.from_dict(data["normalization"]),
            synth=SynthConfig(
                sample_rate=synth["sample_rate"],
                n_samples=synth["n_samples"],
                speed_of_sound=synth["speed_of_sound"],
                max_image_order=synth["max_image_order"],
                energy_floor_db=synth["energy_floor_db"],
                mixing_time_ms=synth["mixing_time_ms"],
                diffuse_density=synth["diffuse_density"],
            ),
            generator_version=data["generator_version"],
        )
        ids = [item.id for item in manifest.items]
        if len(set(ids)) != len(ids):
            raise ValidationError("manifest contains duplicate item ids")
        return manifest

    def load_rir(self, base_dir, item: ManifestItem) -> Rir:
        rate, samples = read_wav(Path(base_dir) / item.rir_path)
        return Rir(samples=samples, sample_rate=rate)


def _draw_item_env(
    grid: CorpusGrid, dims: np.ndarray, index: int, margin: float
) -> tuple[AcousticEnv, int]:
    """Environment for corpus item ``index``; the item seed keys all randomness."""
    seq = np.random.SeedSequence(entropy=(grid.seed, index))
    rng = np.random.default_rng(seq)
    item_seed = int(seq.generate_state(1, dtype=np.uint32)[0])
    source, listener = sample_positions(rng, dims, margin)
    t_lo, t_hi = grid.t60_range
    floor = min_feasible_t60(dims)
    if t_hi <= floor:
        raise ConfigurationError(
            f"t60 range {grid.t60_range} infeasible for room {dims.tolist()} "
            f"(minimum {floor:.4f} s)"
        )
    while True:
        t60 = float(rng.uniform(t_lo, t_hi))
        if t60 > floor:
            break
    return AcousticEnv(dims, source, listener, t60).validate(), item_seed


def plan_corpus(
    grid: CorpusGrid,
    normalization: NormalizationConfig | None = None,
    margin: float = DEFAULT_WALL_MARGIN,
) -> list:
    """Deterministically enumerate (id, env, embedding, seed) for every item."""
    norm = normalization or NormalizationConfig(d_max=grid.d_max, t60_max=grid.t60_range[1])
    rooms = grid.room_dims()
    planned = []
    index = 0
    for dims in rooms:
        for _ in range(grid.rirs_per_room):
            env, item_seed = _draw_item_env(grid, dims, index, margin)
            embedding = build_embedding(env, norm)
            item_id = f"rir_{index:06d}"
            planned.append((item_id, env, embedding, item_seed))
            index += 1
    return planned


def build_corpus(
    grid: CorpusGrid,
    synth: SynthConfig,
    out_dir,
    normalization: NormalizationConfig | None = None,
    margin: float = DEFAULT_WALL_MARGIN,
    workers: int = 1,
) -> CorpusManifest:
    """Generate every reference RIR of the grid into ``out_dir``.

    Writes ``wav/<id>.wav`` plus a JSON sidecar per item and a
    ``manifest.json`` at the top level. Items whose WAV and sidecar already
    exist are skipped, so interrupted builds resume. Raises if any item is
    missing at the end.
    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    norm = normalization or NormalizationConfig(d_max=grid.d_max, t60_max=grid.t60_range[1])

    planned = plan_corpus(grid, norm, margin)

    def build_item(entry) -> ManifestItem:
        item_id, env, embedding, item_seed = entry
        rel_path = f"wav/{item_id}.wav"
        wav_path = out_dir / rel_path
        sidecar_path = wav_path.with_suffix(".json")
        if not (wav_path.exists() and sidecar_path.exists()):
            item_cfg = SynthConfig(
                sample_rate=synth.sample_rate,
                n_samples=synth.n_samples,
                speed_of_sound=synth.speed_of_sound,
                max_image_order=synth.max_image_order,
                energy_floor_db=synth.energy_floor_db,
                mixing_time_ms=synth.mixing_time_ms,
                diffuse_density=synth.diffuse_density,
                seed=item_seed,
            )
            rir = generate_reference_rir(env, item_cfg)
            write_wav(wav_path, rir.sample_rate, rir.samples)
            write_sidecar(
                sidecar_path,
                {"env": env.to_dict(), "provenance": rir.provenance.value, "seed": item_seed},
            )
        return ManifestItem(item_id, env, embedding, rel_path, item_seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(build_item, planned))
    else:
        items = [build_item(entry) for entry in planned]

    missing = [item.id for item in items if not (out_dir / item.rir_path).exists()]
    if missing:
        raise ConfigurationError(f"corpus build left {len(missing)} items missing: {missing[:5]}")

    manifest = CorpusManifest(items=items, grid=grid, normalization=norm, synth=synth)
    manifest.save(out_dir / "manifest.json")
    return manifest
