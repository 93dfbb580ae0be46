"""Alternating adversarial training with RMSprop.

Each batch takes one discriminator ascent step on real and generated
waveforms, then one generator descent step on the combined adversarial,
waveform-matching, and reverberation-time objective. The learning rate
decays by a fixed factor on a fixed epoch schedule. A snapshot of the
previous epoch's tensors is kept so divergence aborts at a usable state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..analysis import t60_error, t60_loss_with_grad
from ..errors import TrainingDivergedError, ValidationError
from ..synthesis import Rir
from .losses import (
    RMSprop,
    cgan_generator_loss,
    d_mean_log,
    d_mean_log_one_minus,
    discriminator_objective,
    generator_objective,
    mse_loss,
)
from .model import GanModel


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 8e-5
    lr_decay_factor: float = 0.7
    lr_decay_every: int = 40
    lambda_mse: float = 10.0
    lambda_t60: float = 1.0
    epochs: int = 100
    seed: int = 0
    rmsprop_rho: float = 0.99
    rmsprop_eps: float = 1e-8
    holdout_fraction: float = 0.125

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 < self.lr_decay_factor <= 1):
            raise ValidationError(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        if not (0 <= self.holdout_fraction < 1):
            raise ValidationError("holdout_fraction must be in [0, 1)")

    def lr_at_epoch(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay_factor ** (epoch // self.lr_decay_every)


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    loss_g: float
    loss_d: float
    loss_mse: float
    loss_t60: float
    heldout_mse: float
    heldout_t60_error: float

    FIELDS = ("epoch", "lr", "loss_g", "loss_d", "loss_mse", "loss_t60",
              "heldout_mse", "heldout_t60_error")

    def row(self) -> list:
        return [getattr(self, name) for name in self.FIELDS]


@dataclass
class TrainResult:
    model: GanModel
    metrics: list = field(default_factory=list)


def write_metrics_csv(path, metrics: list) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EpochMetrics.FIELDS)
        for m in metrics:
            writer.writerow(m.row())


def _holdout_metrics(model, embeddings, references, targets, sample_rate):
    if embeddings.shape[0] == 0:
        return float("nan"), float("nan")
    generated = model.generator.forward(embeddings, training=False)
    mse, _ = mse_loss(generated, references)
    rirs = [Rir(samples=g, sample_rate=sample_rate) for g in np.asarray(generated, dtype=np.float64)]
    try:
        result = t60_error(rirs, targets)
        t60 = result.mean_abs_error
    except Exception:
        t60 = float("nan")
    return float(mse), float(t60)


def train(
    model: GanModel,
    embeddings: np.ndarray,
    references: np.ndarray,
    targets_t60: np.ndarray,
    cfg: TrainConfig,
    sample_rate: int,
    progress=None,
) -> TrainResult:
    """Train the pair on (embedding, reference waveform, target T60) triples.

    Deterministic for a fixed config seed under single-threaded execution.
    On a non-finite loss the model is restored to the end of the previous
    epoch and TrainingDivergedError (carrying the metrics so far) is raised.
    """
    embeddings = np.asarray(embeddings, dtype=model.dtype)
    references = np.asarray(references, dtype=model.dtype)
    targets_t60 = np.asarray(targets_t60, dtype=np.float64)
    n_items = embeddings.shape[0]
    if references.shape[0] != n_items or targets_t60.shape[0] != n_items:
        raise ValidationError("embeddings, references, and targets must align")
    if references.shape[1] != model.config.rir_length:
        raise ValidationError(
            f"references have length {references.shape[1]}, model expects "
            f"{model.config.rir_length}"
        )

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n_items)
    n_holdout = int(round(cfg.holdout_fraction * n_items))
    holdout, trainset = order[:n_holdout], order[n_holdout:]
    if trainset.size < cfg.batch_size:
        raise ValidationError(
            f"training split of {trainset.size} items cannot fill batches of {cfg.batch_size}"
        )

    opt_g = RMSprop(model.generator.parameters(), cfg.learning_rate,
                    cfg.rmsprop_rho, cfg.rmsprop_eps)
    opt_d = RMSprop(model.discriminator.parameters(), cfg.learning_rate,
                    cfg.rmsprop_rho, cfg.rmsprop_eps)

    metrics: list[EpochMetrics] = []
    last_good = model.snapshot()
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at_epoch(epoch)
        opt_g.lr = lr
        opt_d.lr = lr
        perm = rng.permutation(trainset)
        n_batches = trainset.size // cfg.batch_size
        sums = np.zeros(4)  # loss_g, j_d, mse, t60
        try:
            for b in range(n_batches):
                idx = perm[b * cfg.batch_size : (b + 1) * cfg.batch_size]
                emb = embeddings[idx]
                real = references[idx]
                targets = targets_t60[idx]

                fake = model.generator.forward(emb, training=True)

                # discriminator ascent: separate real and generated passes so
                # batch statistics stay composition-consistent; gradients of
                # the two objective terms accumulate across the passes
                model.discriminator.zero_grads()
                scores_real = model.discriminator.forward(real, emb, training=True)
                model.discriminator.backward((-d_mean_log(scores_real)).astype(model.dtype))
                scores_fake_d = model.discriminator.forward(fake, emb, training=True)
                model.discriminator.backward(
                    (-d_mean_log_one_minus(scores_fake_d)).astype(model.dtype)
                )
                j_d, _, _ = discriminator_objective(scores_real, scores_fake_d)
                opt_d.step(model.discriminator.gradients())

                # generator descent against the updated discriminator
                model.discriminator.zero_grads()
                model.generator.zero_grads()
                scores_fake = model.discriminator.forward(fake, emb, training=True)
                cgan, d_scores = cgan_generator_loss(scores_fake)
                d_fake_adv, _ = model.discriminator.backward(d_scores.astype(model.dtype))
                mse, d_mse = mse_loss(fake, real)
                t60, d_t60, _ = t60_loss_with_grad(
                    np.asarray(fake, dtype=np.float64), targets, sample_rate
                )
                loss_g = generator_objective(cgan, mse, t60, cfg.lambda_mse, cfg.lambda_t60)
                d_fake_total = (
                    d_fake_adv.astype(np.float64)
                    + cfg.lambda_mse * d_mse
                    + cfg.lambda_t60 * d_t60
                )
                model.generator.backward(d_fake_total.astype(model.dtype))
                opt_g.step(model.generator.gradients())

                sums += (loss_g, j_d, mse, t60)
        except TrainingDivergedError as exc:
            model.restore(last_good)
            exc.metrics = metrics
            raise

        heldout_mse, heldout_t60 = _holdout_metrics(
            model, embeddings[holdout], references[holdout], targets_t60[holdout], sample_rate
        )
        epoch_metrics = EpochMetrics(
            epoch=epoch,
            lr=lr,
            loss_g=sums[0] / n_batches,
            loss_d=sums[1] / n_batches,
            loss_mse=sums[2] / n_batches,
            loss_t60=sums[3] / n_batches,
            heldout_mse=heldout_mse,
            heldout_t60_error=heldout_t60,
        )
        metrics.append(epoch_metrics)
        last_good = model.snapshot()
        if progress is not None:
            progress(epoch_metrics)

    return TrainResult(model=model, metrics=metrics)
