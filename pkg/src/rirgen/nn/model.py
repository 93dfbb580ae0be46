"""Generator and discriminator networks for conditional RIR synthesis.

The generator maps the ten-entry environment embedding to a waveform: a
dense projection seeds a short multi-channel signal, then a chain of
stride-4 transposed convolutions (kernel 41) quadruples the length per
stage while halving channels, ending in a tanh. The discriminator mirrors
the chain with stride-4 convolutions, injects a learned projection of the
embedding at the deepest feature map, and scores realism through a
sigmoid head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .layers import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Dense,
    LeakyReLU,
    ReLU,
    Reshape,
    Sigmoid,
    Tanh,
)

EMBEDDING_DIM = 10


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs; the defaults build the full 4096-sample model.

    The generator halves channels per upsampling stage from
    ``base_channels`` down to the single waveform channel; 512 reproduces
    the widest published plan, while the default of 256 keeps single-item
    CPU inference ahead of the reference simulator on small machines.
    """

    rir_length: int = 4096
    base_channels: int = 256  # generator channels at the seed length
    kernel_size: int = 41
    stride: int = 4
    leak: float = 0.2
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def to_dict(self) -> dict:
        return {
            "rir_length": self.rir_length,
            "base_channels": self.base_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
            "leak": self.leak,
            "bn_momentum": self.bn_momentum,
            "bn_eps": self.bn_eps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


def plan_lengths(rir_length: int, stride: int = 4, min_seed_length: int = 4) -> tuple[int, int]:
    """Split a waveform length into (seed_length, upsample_stages).

    Greedily divides by the stride while the quotient stays at or above the
    minimum seed length; 4096 -> (4, 5), 512 -> (8, 3).
    """
    if rir_length < min_seed_length * stride:
        raise ConfigurationError(f"rir_length {rir_length} too short for stride {stride}")
    seed_len, stages = rir_length, 0
    while seed_len % stride == 0 and seed_len // stride >= min_seed_length:
        seed_len //= stride
        stages += 1
    if stages == 0:
        raise ConfigurationError(
            f"rir_length {rir_length} is not divisible into stride-{stride} stages"
        )
    return seed_len, stages


def _padding_for(kernel: int, stride: int) -> tuple[int, int]:
    """Padding / output padding that make a stage exactly multiply by stride.

    Kernel 41 with stride 4 yields padding 19 and output padding 1, forced
    by the seed-to-waveform length chain.
    """
    if kernel <= stride:
        raise ConfigurationError(f"kernel {kernel} must exceed stride {stride}")
    padding = (kernel - stride + 1) // 2
    output_padding = 2 * padding - kernel + stride
    return padding, output_padding


class _Net:
    """Shared parameter bookkeeping for layer stacks."""

    def __init__(self):
        self._named_layers: list[tuple[str, object]] = []

    def _register(self, name: str, layer) -> object:
        self._named_layers.append((name, layer))
        return layer

    def parameters(self) -> dict:
        out = {}
        for name, layer in self._named_layers:
            for pname, arr in layer.parameters().items():
                out[f"{name}.{pname}"] = arr
        return out

    def gradients(self) -> dict:
        out = {}
        for name, layer in self._named_layers:
            for pname, arr in layer.gradients().items():
                out[f"{name}.{pname}"] = arr
        return out

    def state(self) -> dict:
        out = {}
        for name, layer in self._named_layers:
            if isinstance(layer, BatchNorm1d):
                for sname, arr in layer.state().items():
                    out[f"{name}.{sname}"] = arr
        return out

    def zero_grads(self) -> None:
        for _, layer in self._named_layers:
            layer.zero_grads()

    def tensors(self) -> dict:
        """Parameters plus persistent state, for checkpointing."""
        return {**self.parameters(), **self.state()}


class Generator(_Net):
    def __init__(self, cfg: ModelConfig, dtype=np.float32, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.cfg = cfg
        seed_len, stages = plan_lengths(cfg.rir_length, cfg.stride)
        padding, output_padding = _padding_for(cfg.kernel_size, cfg.stride)
        channels = [max(1, cfg.base_channels // 2**i) for i in range(stages)] + [1]
        if channels[0] < 2**(stages - 1):
            raise ConfigurationError(
                f"base_channels {cfg.base_channels} too small for {stages} stages"
            )
        self.seed_len = seed_len
        self.stages = stages

        self.layers: list = []

        def add(name, layer):
            self.layers.append(self._register(name, layer))

        add("project", Dense(EMBEDDING_DIM, channels[0] * seed_len, dtype=dtype, rng=rng))
        add("reshape", Reshape((channels[0], seed_len)))
        add("norm0", BatchNorm1d(channels[0], cfg.bn_momentum, cfg.bn_eps, dtype=dtype))
        add("act0", ReLU())
        for i in range(stages):
            last = i == stages - 1
            add(
                f"up{i}",
                ConvTranspose1d(
                    channels[i], channels[i + 1], cfg.kernel_size, cfg.stride,
                    padding, output_padding, dtype=dtype, rng=rng,
                ),
            )
            if not last:
                add(f"norm{i + 1}", BatchNorm1d(channels[i + 1], cfg.bn_momentum,
                                                cfg.bn_eps, dtype=dtype))
                add(f"act{i + 1}", ReLU())
        add("out", Tanh())

    def forward(self, embeddings: np.ndarray, training: bool) -> np.ndarray:
        x = np.asarray(embeddings)
        if x.ndim != 2 or x.shape[1] != EMBEDDING_DIM:
            raise ConfigurationError(
                f"generator expects (batch, {EMBEDDING_DIM}) embeddings, got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, training)
        return x[:, 0, :]

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        grad = d_out[:, None, :]
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


class Discriminator(_Net):
    def __init__(self, cfg: ModelConfig, dtype=np.float32, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(1)
        self.cfg = cfg
        seed_len, stages = plan_lengths(cfg.rir_length, cfg.stride)
        padding, _ = _padding_for(cfg.kernel_size, cfg.stride)
        first = max(2, cfg.base_channels // 2 ** (stages - 1))
        channels = [1] + [first * 2**i for i in range(stages)]
        self.seed_len = seed_len
        self.embed_channels = max(2, channels[-1] // 4)

        self.encoder: list = []
        for i in range(stages):
            self.encoder.append(
                self._register(
                    f"enc{i}",
                    Conv1d(channels[i], channels[i + 1], cfg.kernel_size, cfg.stride,
                           padding, dtype=dtype, rng=rng),
                )
            )
            if i > 0:
                self.encoder.append(
                    self._register(f"enc_norm{i}", BatchNorm1d(channels[i + 1],
                                                               cfg.bn_momentum, cfg.bn_eps,
                                                               dtype=dtype))
                )
            self.encoder.append(self._register(f"enc_act{i}", LeakyReLU(cfg.leak)))

        self.embed = self._register(
            "embed", Dense(EMBEDDING_DIM, self.embed_channels * seed_len, dtype=dtype, rng=rng)
        )
        self.embed_act = self._register("embed_act", LeakyReLU(cfg.leak))
        self.head = self._register(
            "head", Dense((channels[-1] + self.embed_channels) * seed_len, 1, dtype=dtype, rng=rng)
        )
        self.out = self._register("out", Sigmoid())
        self._feat_channels = channels[-1]

    def forward(self, rirs: np.ndarray, embeddings: np.ndarray, training: bool) -> np.ndarray:
        x = np.asarray(rirs)
        if x.ndim != 2 or x.shape[1] != self.cfg.rir_length:
            raise ConfigurationError(
                f"discriminator expects (batch, {self.cfg.rir_length}) waveforms, got {x.shape}"
            )
        x = x[:, None, :]
        for layer in self.encoder:
            x = layer.forward(x, training)
        e = self.embed.forward(np.asarray(embeddings), training)
        e = self.embed_act.forward(e, training)
        e = e.reshape(x.shape[0], self.embed_channels, self.seed_len)
        joint = np.concatenate([x, e], axis=1)
        self._joint_shape = joint.shape
        flat = joint.reshape(joint.shape[0], -1)
        scores = self.out.forward(self.head.forward(flat, training)[:, 0], training)
        return scores

    def backward(self, d_scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d_flat = self.head.backward(self.out.backward(d_scores)[:, None])
        d_joint = d_flat.reshape(self._joint_shape)
        d_feat = d_joint[:, : self._feat_channels, :]
        d_embed_map = d_joint[:, self._feat_channels :, :]
        d_e = self.embed.backward(
            self.embed_act.backward(d_embed_map.reshape(d_embed_map.shape[0], -1))
        )
        grad = d_feat
        for layer in reversed(self.encoder):
            grad = layer.backward(grad)
        return grad[:, 0, :], d_e


@dataclass
class GanModel:
    """Generator/discriminator pair with their shared architecture config."""

    generator: Generator
    discriminator: Discriminator
    config: ModelConfig
    dtype: type = np.float32

    @classmethod
    def build(cls, config: ModelConfig | None = None, dtype=np.float32, seed: int = 0) -> "GanModel":
        config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        return cls(
            generator=Generator(config, dtype=dtype, rng=rng),
            discriminator=Discriminator(config, dtype=dtype, rng=rng),
            config=config,
            dtype=dtype,
        )

    def snapshot(self) -> dict:
        """Copies of every tensor, for divergence recovery and checkpoints."""
        out = {}
        for prefix, net in (("generator", self.generator), ("discriminator", self.discriminator)):
            for name, arr in net.tensors().items():
                out[f"{prefix}.{name}"] = arr.copy()
        return out

    def restore(self, snapshot: dict) -> None:
        for prefix, net in (("generator", self.generator), ("discriminator", self.discriminator)):
            tensors = net.tensors()
            for name, arr in tensors.items():
                key = f"{prefix}.{name}"
                if key not in snapshot:
                    raise ConfigurationError(f"snapshot is missing tensor {key}")
                arr[...] = snapshot[key]
