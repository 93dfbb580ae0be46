"""GAN objectives with explicit gradients.

The generator minimizes

    L_G = mean log(1 - D(G(e))) + lambda_mse * MSE + lambda_t60 * T60 error

while the discriminator maximizes

    J_D = mean log D(real) + mean log(1 - D(fake)).

Scores are clamped away from {0, 1} before the logarithms.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingDivergedError, ValidationError

SCORE_EPS = 1e-7


def _clamp(scores: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(scores, dtype=np.float64), SCORE_EPS, 1.0 - SCORE_EPS)


def cgan_generator_loss(scores_fake: np.ndarray) -> tuple[float, np.ndarray]:
    """mean log(1 - D(fake)) and its gradient with respect to the scores."""
    s = _clamp(scores_fake)
    value = float(np.mean(np.log1p(-s)))
    grad = -1.0 / ((1.0 - s) * s.size)
    return value, grad


def mse_loss(generated: np.ndarray, reference: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared sample difference and its gradient on ``generated``."""
    generated = np.asarray(generated, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if generated.shape != reference.shape:
        raise ValidationError(
            f"shape mismatch: generated {generated.shape} vs reference {reference.shape}"
        )
    diff = generated - reference
    value = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size
    return value, grad


def d_mean_log(scores: np.ndarray) -> np.ndarray:
    """Gradient of mean log s with respect to the scores."""
    s = _clamp(scores)
    return 1.0 / (s * s.size)


def d_mean_log_one_minus(scores: np.ndarray) -> np.ndarray:
    """Gradient of mean log(1 - s) with respect to the scores."""
    s = _clamp(scores)
    return -1.0 / ((1.0 - s) * s.size)


def discriminator_objective(
    scores_real: np.ndarray, scores_fake: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """J_D = mean log D(real) + mean log(1 - D(fake)), with score gradients.

    The training loop maximizes this; the two gradient terms are separable
    (each depends only on its own score batch).
    """
    real = _clamp(scores_real)
    fake = _clamp(scores_fake)
    value = float(np.mean(np.log(real)) + np.mean(np.log1p(-fake)))
    return value, d_mean_log(scores_real), d_mean_log_one_minus(scores_fake)


def generator_objective(
    cgan: float, mse: float, t60: float, lambda_mse: float, lambda_t60: float
) -> float:
    """Weighted sum of the generator's loss components; rejects non-finite parts."""
    for name, value in (("cgan", cgan), ("mse", mse), ("t60", t60)):
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"generator loss component '{name}' became non-finite ({value})", component=name
            )
    return cgan + lambda_mse * mse + lambda_t60 * t60


class RMSprop:
    """Root-mean-square propagation over a named parameter dict."""

    def __init__(self, params: dict, lr: float = 8e-5, rho: float = 0.99, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self._avg_sq = {name: np.zeros_like(p, dtype=np.float64) for name, p in params.items()}

    def step(self, grads: dict) -> None:
        for name, param in self.params.items():
            g = grads[name].astype(np.float64)
            avg = self._avg_sq[name]
            avg *= self.rho
            avg += (1.0 - self.rho) * g * g
            param -= (self.lr * g / (np.sqrt(avg) + self.eps)).astype(param.dtype)
