"""Mono WAV reading and writing.

Impulse responses are stored as 32-bit float mono WAV. Speech input is
accepted as 16-bit PCM or 32-bit float and always written back as float.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ValidationError


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a mono WAV file, returning (sample_rate, float32 samples in [-1, 1])."""
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValidationError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        samples = data
    elif data.dtype == np.float64:
        samples = data.astype(np.float32)
    else:
        raise ValidationError(f"{path}: unsupported sample format {data.dtype}")
    return int(rate), samples


def write_wav(path, sample_rate: int, samples: np.ndarray) -> None:
    """Write mono float32 WAV; parent directories are created as needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), int(sample_rate), np.asarray(samples, dtype=np.float32))


def write_sidecar(path, payload: dict) -> None:
    """Write the JSON sidecar describing a generated RIR next to its WAV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def read_sidecar(path) -> dict:
    return json.loads(Path(path).read_text())
