import math

import numpy as np
import pytest

from rirgen.nn.gradcheck import check_layer_gradients, finite_difference_grad, max_relative_error
from rirgen.nn.layers import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Dense,
    LeakyReLU,
    ReLU,
    Sigmoid,
    Tanh,
)
from rirgen.nn.model import Discriminator, Generator, GanModel, ModelConfig, plan_lengths


RNG = np.random.default_rng(2024)


class TestGradients:
    def test_dense(self):
        layer = Dense(7, 5, dtype=np.float64, rng=RNG, init_scale=0.5)
        x = RNG.standard_normal((4, 7))
        assert check_layer_gradients(layer, x) <= 1e-6

    def test_conv1d_full_kernel(self):
        layer = Conv1d(3, 4, kernel=41, stride=4, padding=19, dtype=np.float64,
                       rng=RNG, init_scale=0.3)
        x = RNG.standard_normal((2, 3, 16))
        assert check_layer_gradients(layer, x) <= 1e-5

    def test_conv1d_small(self):
        layer = Conv1d(2, 3, kernel=5, stride=2, padding=2, dtype=np.float64,
                       rng=RNG, init_scale=0.5)
        x = RNG.standard_normal((3, 2, 12))
        assert check_layer_gradients(layer, x) <= 1e-6

    def test_conv_transpose1d_full_kernel(self):
        layer = ConvTranspose1d(3, 2, kernel=41, stride=4, padding=19, output_padding=1,
                                dtype=np.float64, rng=RNG, init_scale=0.3)
        x = RNG.standard_normal((2, 3, 8))
        assert check_layer_gradients(layer, x) <= 1e-5

    def test_conv_transpose1d_small(self):
        layer = ConvTranspose1d(2, 3, kernel=5, stride=2, padding=2, output_padding=1,
                                dtype=np.float64, rng=RNG, init_scale=0.5)
        x = RNG.standard_normal((2, 2, 6))
        assert check_layer_gradients(layer, x) <= 1e-6

    def test_batchnorm_training_mode(self):
        layer = BatchNorm1d(3, dtype=np.float64)
        layer.gamma[...] = RNG.uniform(0.5, 1.5, 3)
        layer.beta[...] = RNG.standard_normal(3)
        x = RNG.standard_normal((4, 3, 6)) * 2.0 + 0.5
        assert check_layer_gradients(layer, x) <= 1e-5

    @pytest.mark.parametrize("layer", [ReLU(), LeakyReLU(0.2), Tanh(), Sigmoid()])
    def test_activations(self, layer):
        x = RNG.standard_normal((3, 4)) + 0.1  # keep clear of the ReLU kink
        assert check_layer_gradients(layer, x) <= 1e-6


class TestShapes:
    def test_transpose_conv_quadruples_length(self):
        layer = ConvTranspose1d(4, 2, kernel=41, stride=4, padding=19, output_padding=1)
        x = np.zeros((1, 4, 4), dtype=np.float32)
        lengths = [4]
        for _ in range(5):
            x = np.zeros((1, 4, lengths[-1]), dtype=np.float32)
            y = ConvTranspose1d(4, 4, 41, 4, 19, 1).forward(x, training=False)
            lengths.append(y.shape[2])
        assert lengths == [4, 16, 64, 256, 1024, 4096]

    def test_conv_divides_length(self):
        lengths = [4096]
        for _ in range(5):
            x = np.zeros((1, 2, lengths[-1]), dtype=np.float32)
            y = Conv1d(2, 2, 41, 4, 19).forward(x, training=False)
            lengths.append(y.shape[2])
        assert lengths == [4096, 1024, 256, 64, 16, 4]

    def test_plan_lengths(self):
        assert plan_lengths(4096) == (4, 5)
        assert plan_lengths(512) == (8, 3)
        assert plan_lengths(256) == (4, 3)

    def test_conv_transpose_matches_upsample_zero_insert_reference(self):
        # reference: insert stride-1 zeros, then correlate with the flipped
        # kernel at stride 1 and padding kernel-1-padding
        rng = np.random.default_rng(5)
        layer = ConvTranspose1d(2, 3, kernel=7, stride=3, padding=3, output_padding=2,
                                dtype=np.float64, rng=rng, init_scale=0.5)
        x = rng.standard_normal((2, 2, 5))
        y = layer.forward(x, training=False)
        b, ci, l = x.shape
        co, k, s, p = 3, 7, 3, 3
        l_out = (l - 1) * s - 2 * p + k + 2
        ref = np.zeros((b, co, l_out))
        for bb in range(b):
            for o in range(co):
                acc = np.zeros(l_out)
                for c in range(ci):
                    for i in range(l):
                        for kk in range(k):
                            j = i * s + kk - p
                            if 0 <= j < l_out:
                                acc[j] += x[bb, c, i] * layer.weight[c, kk, o]
                ref[bb, o] = acc + layer.bias[o]
        assert np.allclose(y, ref, atol=1e-12)

    def test_conv_matches_direct_loops(self):
        rng = np.random.default_rng(6)
        layer = Conv1d(2, 3, kernel=5, stride=2, padding=2, dtype=np.float64,
                       rng=rng, init_scale=0.5)
        x = rng.standard_normal((2, 2, 9))
        y = layer.forward(x, training=False)
        l_out = (9 + 4 - 5) // 2 + 1
        xp = np.pad(x, ((0, 0), (0, 0), (2, 2)))
        ref = np.zeros((2, 3, l_out))
        for bb in range(2):
            for o in range(3):
                for j in range(l_out):
                    ref[bb, o, j] = layer.bias[o] + sum(
                        xp[bb, c, j * 2 + kk] * layer.weight[o, c, kk]
                        for c in range(2)
                        for kk in range(5)
                    )
        assert np.allclose(y, ref, atol=1e-12)


class TestNetworks:
    def toy_model(self):
        return GanModel.build(ModelConfig(rir_length=256, base_channels=16), seed=3)

    def test_generator_output_shape_and_bound(self):
        model = self.toy_model()
        emb = np.random.default_rng(0).uniform(-1.2, 1.2, (6, 10)).astype(np.float32)
        out = model.generator.forward(emb, training=True)
        assert out.shape == (6, 256)
        assert np.all(np.abs(out) <= 1.0)

    def test_full_size_topology(self):
        gen = Generator(ModelConfig(rir_length=4096, base_channels=512))
        emb = np.zeros((1, 10), dtype=np.float32)
        assert gen.forward(emb, training=False).shape == (1, 4096)
        disc = Discriminator(ModelConfig(rir_length=4096, base_channels=512))
        scores = disc.forward(np.zeros((1, 4096), dtype=np.float32), emb, training=False)
        assert scores.shape == (1,)

    def test_identical_embeddings_identical_outputs_in_eval(self):
        model = self.toy_model()
        emb = np.tile(np.linspace(-1, 1, 10, dtype=np.float32), (4, 1))
        out = model.generator.forward(emb, training=False)
        assert np.allclose(out, out[0][None, :], atol=0)

    def test_scores_in_open_unit_interval(self):
        model = self.toy_model()
        rng = np.random.default_rng(1)
        rirs = rng.uniform(-1, 1, (8, 256)).astype(np.float32)
        emb = rng.uniform(-1.2, 1.2, (8, 10)).astype(np.float32)
        scores = model.discriminator.forward(rirs, emb, training=True)
        assert np.all(scores > 0) and np.all(scores < 1)

    def test_untrained_scores_near_half(self):
        model = self.toy_model()
        rng = np.random.default_rng(2)
        rirs = rng.uniform(-1, 1, (32, 256)).astype(np.float32)
        emb = rng.uniform(-1.2, 1.2, (32, 10)).astype(np.float32)
        scores = model.discriminator.forward(rirs, emb, training=False)
        assert abs(float(scores.mean()) - 0.5) < 0.05

    def test_generator_end_to_end_gradient(self):
        # backprop through the whole generator vs finite differences on a
        # couple of parameters from each layer family
        model = GanModel.build(ModelConfig(rir_length=64, base_channels=8),
                               dtype=np.float64, seed=9)
        gen = model.generator
        rng = np.random.default_rng(3)
        emb = rng.uniform(-1, 1, (3, 10))
        projection = rng.standard_normal((3, 64))

        def objective():
            return float(np.sum(gen.forward(emb, training=True) * projection))

        objective()
        gen.backward(projection.copy())
        analytic = {k: v.copy() for k, v in gen.gradients().items()}
        for name in ["project.weight", "up0.weight", "norm0.gamma", "up1.bias"]:
            param = gen.parameters()[name]
            numeric = finite_difference_grad(objective, param)
            assert max_relative_error(analytic[name], numeric) <= 1e-5, name

    def test_discriminator_end_to_end_gradient(self):
        model = GanModel.build(ModelConfig(rir_length=64, base_channels=8),
                               dtype=np.float64, seed=4)
        disc = model.discriminator
        rng = np.random.default_rng(8)
        rirs = rng.uniform(-1, 1, (3, 64))
        emb = rng.uniform(-1, 1, (3, 10))
        projection = rng.standard_normal(3)

        def objective():
            return float(np.sum(disc.forward(rirs, emb, training=True) * projection))

        objective()
        d_rirs, _ = disc.backward(projection.copy())
        analytic = {k: v.copy() for k, v in disc.gradients().items()}

        numeric_in = finite_difference_grad(objective, rirs)
        assert max_relative_error(d_rirs, numeric_in) <= 1e-5
        for name in ["enc0.weight", "embed.weight", "head.weight", "enc_norm1.gamma"]:
            param = disc.parameters()[name]
            numeric = finite_difference_grad(objective, param)
            assert max_relative_error(analytic[name], numeric) <= 1e-5, name
