import json

import numpy as np
import pytest

from rirgen.analysis import estimate_t60, t60_error
from rirgen.corpus import Axis, CorpusGrid, CorpusManifest, build_corpus, plan_corpus
from rirgen.env import build_embedding
from rirgen.errors import ConfigurationError
from rirgen.synthesis import SynthConfig


def desk_grid(seed=5):
    return CorpusGrid(
        lengths=Axis(3, 8.0, 11.0),
        widths=Axis(2, 6.0, 8.0),
        heights=Axis(1, 2.5, 3.5),
        rirs_per_room=20,
        t60_range=(0.2, 0.7),
        seed=seed,
    )


def desk_synth():
    return SynthConfig(sample_rate=16000, n_samples=4096)


class TestGrid:
    def test_paper_scale_totals(self):
        grid = CorpusGrid()
        assert grid.total == 75_000
        assert grid.lengths.count * grid.widths.count * grid.heights.count == 15 * 10 * 5

    def test_length_values_evenly_spaced_inclusive(self):
        grid = CorpusGrid()
        expected = [8.0 + 3.0 * k / 14 for k in range(15)]
        assert np.allclose(grid.lengths.values(), expected)
        rooms = grid.room_dims()
        lengths, counts = np.unique(rooms[:, 0], return_counts=True)
        assert np.allclose(lengths, expected)
        assert np.all(counts == 10 * 5)

    def test_invalid_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            Axis(0, 1.0, 2.0)
        with pytest.raises(ConfigurationError):
            Axis(3, 2.0, 2.0)
        with pytest.raises(ConfigurationError):
            CorpusGrid(rirs_per_room=0)


class TestBuildCorpus:
    def test_desk_scale_build(self, tmp_path):
        grid = desk_grid()
        manifest = build_corpus(grid, desk_synth(), tmp_path / "corpus")
        assert len(manifest.items) == 120
        ids = [item.id for item in manifest.items]
        assert len(set(ids)) == 120
        for item in manifest.items:
            assert (tmp_path / "corpus" / item.rir_path).exists()
            expected = build_embedding(item.env, manifest.normalization)
            assert np.allclose(item.embedding, expected, atol=1e-12)

    def test_estimates_within_band(self, tmp_path):
        grid = desk_grid(seed=9)
        out = tmp_path / "corpus"
        manifest = build_corpus(grid, desk_synth(), out)
        rirs = [manifest.load_rir(out, item) for item in manifest.items[:40]]
        for rir, item in zip(rirs, manifest.items[:40]):
            est = estimate_t60(rir)
            assert 0.15 <= est <= 0.75, (item.id, item.env.t60, est)

    def test_rebuild_is_byte_identical_and_resumable(self, tmp_path):
        grid = CorpusGrid(
            lengths=Axis(2, 8.0, 9.0), widths=Axis(1, 6.0, 7.0), heights=Axis(1, 2.5, 3.0),
            rirs_per_room=3, t60_range=(0.25, 0.6), seed=1,
        )
        synth = SynthConfig(sample_rate=8000, n_samples=1024)
        out = tmp_path / "c"
        build_corpus(grid, synth, out)
        first = (out / "manifest.json").read_bytes()
        wav_bytes = {
            item: (out / item).read_bytes()
            for item in [i.rir_path for i in CorpusManifest.load(out / "manifest.json").items]
        }
        # delete one wav: the rebuild regenerates only that item
        victim = sorted(wav_bytes)[0]
        (out / victim).unlink()
        build_corpus(grid, synth, out)
        assert (out / "manifest.json").read_bytes() == first
        for item, blob in wav_bytes.items():
            assert (out / item).read_bytes() == blob

    def test_manifest_roundtrip(self, tmp_path):
        grid = CorpusGrid(
            lengths=Axis(1, 8.0, 9.0), widths=Axis(1, 6.0, 7.0), heights=Axis(1, 2.5, 3.0),
            rirs_per_room=2, t60_range=(0.3, 0.5), seed=2,
        )
        out = tmp_path / "c"
        manifest = build_corpus(grid, SynthConfig(sample_rate=8000, n_samples=512), out)
        loaded = CorpusManifest.load(out / "manifest.json")
        assert [i.id for i in loaded.items] == [i.id for i in manifest.items]
        assert loaded.grid == manifest.grid
        assert loaded.synth.n_samples == 512
        rir = loaded.load_rir(out, loaded.items[0])
        assert rir.length == 512

    def test_plan_is_deterministic(self):
        a = plan_corpus(desk_grid(seed=3))
        b = plan_corpus(desk_grid(seed=3))
        for (id_a, env_a, emb_a, seed_a), (id_b, env_b, emb_b, seed_b) in zip(a, b):
            assert id_a == id_b and seed_a == seed_b
            assert np.array_equal(env_a.source_pos, env_b.source_pos)
            assert np.array_equal(emb_a, emb_b)
