import numpy as np
import pytest

from rirgen.corpus import Axis, CorpusGrid, build_corpus
from rirgen.errors import ValidationError
from rirgen.speech import (
    SpeechSegment,
    convolve_speech,
    reverberate_corpus,
    reverberate_segments,
    split_on_silence,
)
from rirgen.synthesis import Rir, SynthConfig


def direct_convolve(x, h):
    out = np.zeros(len(x) + len(h) - 1)
    for i, xi in enumerate(x):
        for j, hj in enumerate(h):
            out[i + j] += xi * hj
    return out


def seg(samples, fs=16000, source_id="s"):
    return SpeechSegment(samples=np.asarray(samples, dtype=np.float64),
                         sample_rate=fs, source_id=source_id)


class TestConvolveSpeech:
    def test_unit_impulse_identity(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.5, 0.5, 500)
        delta = np.zeros(64)
        delta[0] = 1.0
        out = convolve_speech(seg(x), Rir(samples=delta, sample_rate=16000))
        assert np.allclose(out.samples[:500], x, atol=1e-12)
        assert np.allclose(out.samples[500:], 0.0, atol=1e-12)
        assert out.gain_applied == 1.0

    def test_hand_convolution(self):
        out = convolve_speech(seg([1.0, 2.0]), Rir(samples=np.array([1.0, 1.0]),
                                                   sample_rate=16000))
        # [1,2] * [1,1] = [1,3,2], rescaled only because 3 would clip
        assert np.allclose(out.samples * 3.0, [1.0, 3.0, 2.0], atol=1e-12)
        assert out.gain_applied == pytest.approx(1.0 / 3.0)

    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(1)
        for n, m in [(50, 13), (256, 100), (999, 71)]:
            x = rng.standard_normal(n) * 0.1
            h = rng.standard_normal(m) * 0.1
            out = convolve_speech(seg(x), Rir(samples=h, sample_rate=16000))
            ref = direct_convolve(x, h) * out.gain_applied
            scale = np.max(np.abs(ref)) or 1.0
            assert np.max(np.abs(out.samples - ref)) / scale < 1e-9

    def test_matches_direct_convolution_full_length(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(4096) * 0.05
        h = rng.standard_normal(4096) * 0.05
        out = convolve_speech(seg(x), Rir(samples=h, sample_rate=16000))
        ref = np.convolve(x, h) * out.gain_applied
        assert np.max(np.abs(out.samples - ref)) / np.max(np.abs(ref)) < 1e-9

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(300) * 0.01
        y = rng.standard_normal(300) * 0.01
        h = rng.standard_normal(64) * 0.01
        rir = Rir(samples=h, sample_rate=16000)
        combined = convolve_speech(seg(2.0 * x + 3.0 * y), rir).samples
        parts = 2.0 * convolve_speech(seg(x), rir).samples + \
            3.0 * convolve_speech(seg(y), rir).samples
        assert np.max(np.abs(combined - parts)) < 1e-9

    def test_rate_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="sample rate"):
            convolve_speech(seg(np.ones(10), fs=8000),
                            Rir(samples=np.ones(4), sample_rate=16000))


class TestSplitOnSilence:
    def tone(self, seconds, fs=16000, freq=440.0, amp=0.5):
        t = np.arange(int(seconds * fs)) / fs
        return amp * np.sin(2 * np.pi * freq * t)

    def test_splits_at_constructed_gap(self):
        fs = 16000
        signal = np.concatenate([self.tone(2.0), np.zeros(4 * fs), self.tone(2.0)])
        segments = split_on_silence(signal, fs)
        assert len(segments) == 2
        assert segments[1].start_offset == 2 * fs
        rejoined = np.concatenate([s.samples for s in segments])
        assert np.array_equal(rejoined, signal)

    def test_all_silence_single_segment(self):
        segments = split_on_silence(np.zeros(16000 * 5), 16000)
        assert len(segments) == 1
        assert segments[0].samples.size == 16000 * 5

    def test_short_gap_no_split(self):
        fs = 16000
        signal = np.concatenate([self.tone(1.0), np.zeros(int(2.9 * fs)), self.tone(1.0)])
        assert len(split_on_silence(signal, fs)) == 1

    def test_multiple_gaps(self):
        fs = 8000
        signal = np.concatenate([
            self.tone(1.0, fs), np.zeros(4 * fs),
            self.tone(0.5, fs), np.zeros(5 * fs),
            self.tone(0.25, fs),
        ])
        segments = split_on_silence(signal, fs)
        assert len(segments) == 3
        rejoined = np.concatenate([s.samples for s in segments])
        assert np.array_equal(rejoined, signal)
        assert [s.start_offset for s in segments] == [0, fs, int(5.5 * fs)]

    def test_trailing_silence_not_dropped(self):
        fs = 8000
        signal = np.concatenate([self.tone(1.0, fs), np.zeros(4 * fs)])
        segments = split_on_silence(signal, fs)
        assert sum(s.samples.size for s in segments) == signal.size


class TestReverberateCorpus:
    def test_singleton_choice_deterministic(self):
        segments = [seg(np.ones(32) * 0.1)]
        rirs = [("r0", Rir(samples=np.array([1.0]), sample_rate=16000))]
        out = reverberate_segments(segments, rirs, seed=0)
        assert out[0][1].rir_id == "r0"

    def test_fixed_seed_identical_pairing(self):
        rng = np.random.default_rng(4)
        segments = [seg(rng.standard_normal(64) * 0.1, source_id=f"s{i}") for i in range(20)]
        rirs = [(f"r{i}", Rir(samples=np.eye(8)[i % 8] * 0.5, sample_rate=16000))
                for i in range(10)]
        a = [rec.rir_id for _, rec in reverberate_segments(segments, rirs, seed=7)]
        b = [rec.rir_id for _, rec in reverberate_segments(segments, rirs, seed=7)]
        assert a == b

    def test_uniform_usage(self):
        rng = np.random.default_rng(5)
        segments = [seg(rng.standard_normal(8) * 0.1, source_id=f"s{i}") for i in range(1000)]
        rirs = [(f"r{i}", Rir(samples=np.array([1.0]), sample_rate=16000)) for i in range(10)]
        counts = {}
        for _, rec in reverberate_segments(segments, rirs, seed=11):
            counts[rec.rir_id] = counts.get(rec.rir_id, 0) + 1
        # binomial n=1000 p=0.1: 4 sigma ~ 38
        assert all(100 - 40 <= counts.get(f"r{i}", 0) <= 100 + 40 for i in range(10))

    def test_end_to_end_with_manifest(self, tmp_path):
        grid = CorpusGrid(
            lengths=Axis(1, 8.0, 9.0), widths=Axis(1, 6.0, 7.0), heights=Axis(1, 2.5, 3.0),
            rirs_per_room=3, t60_range=(0.3, 0.5), seed=3,
        )
        out = tmp_path / "corpus"
        manifest = build_corpus(grid, SynthConfig(sample_rate=16000, n_samples=1024), out)
        rng = np.random.default_rng(6)
        segments = [seg(rng.standard_normal(400) * 0.05, source_id=f"s{i}") for i in range(5)]
        records = reverberate_corpus(segments, manifest, out, tmp_path / "wet", seed=1)
        assert len(records) == 5
        manifest_csv = (tmp_path / "wet" / "reverb_manifest.csv").read_text().splitlines()
        assert manifest_csv[0] == "segment_id,rir_id,gain_applied,output_path"
        assert len(manifest_csv) == 6
        for record in records:
            assert (tmp_path / "wet" / record.output_path).exists()
