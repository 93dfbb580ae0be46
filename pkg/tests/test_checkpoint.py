import struct

import numpy as np
import pytest

from rirgen.env import NormalizationConfig
from rirgen.errors import CheckpointError
from rirgen.nn.checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint
from rirgen.nn.model import GanModel, ModelConfig


def small_model(seed=0):
    return GanModel.build(ModelConfig(rir_length=256, base_channels=16), seed=seed)


class TestCheckpoint:
    def test_roundtrip_exact(self, tmp_path):
        model = small_model(3)
        norm = NormalizationConfig(d_max=9.5, t60_max=0.6)
        path = tmp_path / "m.bin"
        save_checkpoint(model, norm, 16000, path)
        loaded = load_checkpoint(path)
        assert loaded.normalization == norm
        assert loaded.sample_rate == 16000
        assert loaded.model.config == model.config
        a, b = model.snapshot(), loaded.model.snapshot()
        assert set(a) == set(b)
        for key in a:
            assert np.array_equal(a[key], b[key]), key

    def test_inference_identical_after_reload(self, tmp_path):
        model = small_model(1)
        path = tmp_path / "m.bin"
        save_checkpoint(model, NormalizationConfig(), 16000, path)
        loaded = load_checkpoint(path)
        emb = np.random.default_rng(0).uniform(-1, 1, (3, 10)).astype(np.float32)
        assert np.array_equal(
            model.generator.forward(emb, training=False),
            loaded.model.generator.forward(emb, training=False),
        )

    def test_save_is_deterministic(self, tmp_path):
        model = small_model(2)
        save_checkpoint(model, NormalizationConfig(), 16000, tmp_path / "a.bin")
        save_checkpoint(model, NormalizationConfig(), 16000, tmp_path / "b.bin")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_wrong_format_version_rejected(self, tmp_path):
        model = small_model()
        path = tmp_path / "m.bin"
        save_checkpoint(model, NormalizationConfig(), 16000, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", FORMAT_VERSION + 1)
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="format"):
            load_checkpoint(path)

    def test_header_is_little_endian_float32_records(self, tmp_path):
        model = small_model()
        path = tmp_path / "m.bin"
        save_checkpoint(model, NormalizationConfig(), 16000, path)
        raw = path.read_bytes()
        assert raw[:4] == MAGIC
        (version,) = struct.unpack_from("<I", raw, 4)
        assert version == FORMAT_VERSION
        (header_len,) = struct.unpack_from("<I", raw, 8)
        header = raw[12 : 12 + header_len].decode("utf-8")
        assert '"tensors"' in header and '"sample_rate"' in header
