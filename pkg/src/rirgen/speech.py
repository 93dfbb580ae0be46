"""Reverberant-speech simulation.

Clean speech becomes far-field speech by full linear convolution with a
room impulse response. Long recordings are split into segments at the
start of sufficiently long silences (so reverberation cannot smear across
segment boundaries when each segment gets its own room), then every
segment is convolved with a randomly drawn RIR from a corpus.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import oaconvolve

from .audioio import read_wav, write_wav
from .corpus import CorpusManifest
from .errors import ValidationError
from .synthesis import Rir

SILENCE_THRESHOLD_DBFS = -40.0
SILENCE_FRAME_MS = 10.0
MIN_SILENCE_S = 3.0


@dataclass
class SpeechSegment:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""
    start_offset: int = 0  # sample index in the original recording
    gain_applied: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValidationError("speech segment must be a non-empty 1-D signal")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def convolve_speech(clean: SpeechSegment, rir: Rir) -> SpeechSegment:
    """Full linear convolution of a speech segment with an impulse response.

    FFT overlap-add; output length is len(clean) + len(rir) - 1. The output
    is rescaled only if it would clip, with the applied gain recorded on
    the returned segment.
    """
    if clean.sample_rate != rir.sample_rate:
        raise ValidationError(
            f"sample rate mismatch: speech {clean.sample_rate} Hz vs RIR {rir.sample_rate} Hz"
        )
    wet = oaconvolve(
        np.asarray(clean.samples, dtype=np.float64),
        np.asarray(rir.samples, dtype=np.float64),
        mode="full",
    )
    gain = 1.0
    peak = float(np.max(np.abs(wet))) if wet.size else 0.0
    if peak > 1.0:
        gain = 1.0 / peak
        wet = wet * gain
    return SpeechSegment(
        samples=wet,
        sample_rate=clean.sample_rate,
        source_id=clean.source_id,
        start_offset=clean.start_offset,
        gain_applied=gain,
    )


def split_on_silence(
    samples: np.ndarray,
    sample_rate: int,
    min_silence: float = MIN_SILENCE_S,
    threshold_dbfs: float = SILENCE_THRESHOLD_DBFS,
    frame_ms: float = SILENCE_FRAME_MS,
    source_id: str = "",
) -> list[SpeechSegment]:
    """Split a recording at the start of every silence of at least ``min_silence``.

    Silence is frame RMS below ``threshold_dbfs`` over ``frame_ms`` frames.
    Placing the cut at the silence onset keeps a segment's reverberated
    energy from spilling into the next one. The segments partition the
    recording exactly; a recording with no qualifying silence comes back
    whole.
    """
    samples = np.asarray(samples)
    if samples.ndim != 1 or samples.size == 0:
        raise ValidationError("recording must be a non-empty 1-D signal")
    frame_len = max(1, int(round(sample_rate * frame_ms / 1000.0)))
    n_frames = -(-samples.size // frame_len)
    threshold = 10.0 ** (threshold_dbfs / 20.0)

    padded = np.zeros(n_frames * frame_len, dtype=np.float64)
    padded[: samples.size] = samples
    rms = np.sqrt(np.mean(padded.reshape(n_frames, frame_len) ** 2, axis=1))
    silent = rms < threshold

    frames_needed = max(1, int(np.ceil(min_silence * sample_rate / frame_len)))
    cut_points = []
    run_start = None
    run_length = 0
    for i, is_silent in enumerate(silent):
        if is_silent:
            if run_start is None:
                run_start = i
            run_length += 1
        else:
            if run_start is not None and run_length >= frames_needed:
                cut_points.append(run_start * frame_len)
            run_start, run_length = None, 0
    if run_start is not None and run_length >= frames_needed:
        cut_points.append(run_start * frame_len)

    cut_points = [c for c in cut_points if 0 < c < samples.size]
    pieces = np.split(samples, cut_points)
    segments = []
    offset = 0
    for i, piece in enumerate(pieces):
        segments.append(
            SpeechSegment(
                samples=piece,
                sample_rate=sample_rate,
                source_id=f"{source_id}#{i:04d}" if source_id else f"#{i:04d}",
                start_offset=offset,
            )
        )
        offset += piece.size
    return segments


@dataclass
class ReverbRecord:
    segment_id: str
    rir_id: str
    gain_applied: float
    output_path: str = ""


def reverberate_segments(
    segments: list, rirs: list, seed: int
) -> list[tuple[SpeechSegment, ReverbRecord]]:
    """Convolve each segment with a uniformly drawn (rir_id, Rir) pair."""
    if not segments or not rirs:
        raise ValidationError("need at least one segment and one RIR")
    rng = np.random.default_rng(seed)
    choices = rng.integers(0, len(rirs), size=len(segments))
    out = []
    for segment, choice in zip(segments, choices):
        rir_id, rir = rirs[choice]
        wet = convolve_speech(segment, rir)
        out.append(
            (wet, ReverbRecord(segment.source_id, rir_id, wet.gain_applied))
        )
    return out


def reverberate_corpus(
    segments: list,
    manifest: CorpusManifest,
    manifest_dir,
    out_dir,
    seed: int = 0,
) -> list[ReverbRecord]:
    """Reverberate segments with RIRs drawn from a corpus manifest.

    Writes one float WAV per segment into ``out_dir`` plus a
    ``reverb_manifest.csv`` recording the segment/RIR pairing and any
    anti-clip gain.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rirs = [
        (item.id, manifest.load_rir(manifest_dir, item)) for item in manifest.items
    ]
    records = []
    for i, (wet, record) in enumerate(reverberate_segments(segments, rirs, seed)):
        record.output_path = f"segment_{i:05d}.wav"
        write_wav(out_dir / record.output_path, wet.sample_rate, wet.samples)
        records.append(record)
    with (out_dir / "reverb_manifest.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "rir_id", "gain_applied", "output_path"])
        for record in records:
            writer.writerow(
                [record.segment_id, record.rir_id, f"{record.gain_applied:.9g}",
                 record.output_path]
            )
    return records


def load_recording(path) -> SpeechSegment:
    rate, samples = read_wav(path)
    return SpeechSegment(samples=samples, sample_rate=rate, source_id=Path(path).stem)
