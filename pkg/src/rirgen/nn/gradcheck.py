"""Finite-difference validation of hand-written backward passes."""

from __future__ import annotations

import numpy as np


def max_relative_error(analytic, numeric) -> float:
    """Worst elementwise relative disagreement between two gradients.

    The denominator is floored at a small fraction of the largest entry
    and at a small absolute scale, so elements whose true gradient is zero
    (a bias feeding a mean-subtracting layer, samples outside a fit
    window) compare rounding noise against that floor instead of against
    themselves.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"gradient shapes differ: {a.shape} vs {b.shape}")
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)), 1e-12)
    denom = np.maximum(np.abs(a) + np.abs(b), max(1e-3 * scale, 1e-8))
    return float(np.max(np.abs(a - b) / denom))


def finite_difference_grad(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``fn`` with respect to ``x``.

    ``x`` is mutated in place during probing and restored afterwards.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn()
        flat[i] = orig - h
        fm = fn()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def check_layer_gradients(layer, x: np.ndarray, h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error of a layer's analytic gradients vs central differences.

    Probes the scalar L = sum(forward(x) * R) for a fixed random projection
    R, covering the input gradient and every parameter gradient.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    y = layer.forward(x, training=True)
    projection = rng.standard_normal(y.shape)

    def objective() -> float:
        return float(np.sum(layer.forward(x, training=True) * projection))

    layer.zero_grads()
    dx = layer.backward(projection.copy())
    analytic = {"__input__": dx}
    analytic.update({name: g.copy() for name, g in layer.gradients().items()})

    worst = max_relative_error(dx, finite_difference_grad(objective, x, h))
    for name, param in layer.parameters().items():
        numeric = finite_difference_grad(objective, param, h)
        worst = max(worst, max_relative_error(analytic[name], numeric))
        # restore caches consumed by probing
        layer.forward(x, training=True)
        layer.zero_grads()
        layer.backward(projection.copy())
    return worst
