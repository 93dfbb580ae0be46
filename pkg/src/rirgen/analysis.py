"""Energy-decay analysis: Schroeder integration and reverberation time.

T60 comes from a least-squares line fitted to the backward-integrated
energy decay curve between its -5 dB and -25 dB crossings, extrapolated
to 60 dB. Finite impulse responses bend the raw curve downward near the
end (the integral runs out of signal), which biases the plain fit for
decays comparable to the signal length; ``estimate_t60`` therefore
iteratively adds the tail energy predicted by the current fit back into
the integral, and keeps the fit window clear of the compensated floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DecayRangeError, DegenerateSignalError, ValidationError
from .synthesis import Rir

DB_FLOOR = -120.0
LN10 = math.log(10.0)

DEFAULT_DECAY_RANGE = (-5.0, -25.0)
CROP_THRESHOLD_S = 0.25
_FLOOR_GUARD_DB = 2.0  # keep the fit this far above the compensated floor
_MIN_FIT_POINTS = 5


@dataclass
class EnergyDecayCurve:
    """Backward-integrated energy in dB, normalized to 0 dB at the start."""

    values_db: np.ndarray
    sample_rate: int


def _tail_energy(samples: np.ndarray) -> np.ndarray:
    energy = np.asarray(samples, dtype=np.float64) ** 2
    return np.cumsum(energy[::-1])[::-1]


def schroeder_edc(rir: Rir, db_floor: float = DB_FLOOR) -> EnergyDecayCurve:
    """Energy decay curve via Schroeder backward integration.

    EDC[n] = 10*log10(sum_{k>=n} h[k]^2 / total energy), clipped at
    ``db_floor``. Raises DegenerateSignalError on an all-zero input.
    """
    tail = _tail_energy(rir.samples)
    total = tail[0]
    if total <= 0:
        raise DegenerateSignalError("cannot compute a decay curve for an all-zero signal")
    ratio = np.maximum(tail / total, 10.0 ** (db_floor / 10.0))
    values = 10.0 * np.log10(ratio)
    values[0] = 0.0
    return EnergyDecayCurve(values_db=values, sample_rate=rir.sample_rate)


def _fit_window(edc_db: np.ndarray, upper_db: float, lower_db: float) -> tuple[int, int]:
    below_upper = np.nonzero(edc_db <= upper_db)[0]
    below_lower = np.nonzero(edc_db <= lower_db)[0]
    if below_upper.size == 0 or below_lower.size == 0:
        reached = float(edc_db.min())
        raise DecayRangeError(
            f"decay curve reaches only {reached:.1f} dB; need {lower_db:.1f} dB"
        )
    n1, n2 = int(below_upper[0]), int(below_lower[0])
    if n2 - n1 + 1 < _MIN_FIT_POINTS:
        raise DecayRangeError(
            f"only {n2 - n1 + 1} samples between {upper_db} dB and {lower_db} dB crossings"
        )
    return n1, n2


def _fit_line(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares (slope, intercept) of values against times."""
    t_mean = times.mean()
    v_mean = values.mean()
    ct = times - t_mean
    slope = float(np.dot(ct, values - v_mean) / np.dot(ct, ct))
    return slope, float(v_mean - slope * t_mean)


def estimate_t60(
    rir: Rir,
    decay_range: tuple[float, float] = DEFAULT_DECAY_RANGE,
    compensate: bool = True,
    max_iterations: int = 5,
) -> float:
    """Reverberation time in seconds from the energy decay curve.

    Fits a line between the ``decay_range`` crossings (default -5 to
    -25 dB) and extrapolates to 60 dB. With ``compensate`` the missing
    post-signal tail energy is estimated from the fit and folded back into
    the integral, repeating until stable; the lower fit bound then backs
    off to stay above the compensated curve's floor. Raises DecayRangeError
    when the curve never spans a usable window.
    """
    upper_db, lower_db = decay_range
    if not (0 > upper_db > lower_db):
        raise ValidationError(f"decay_range must satisfy 0 > upper > lower, got {decay_range}")

    tail = _tail_energy(rir.samples)
    total = tail[0]
    if total <= 0:
        raise DegenerateSignalError("cannot estimate T60 of an all-zero signal")

    fs = rir.sample_rate
    times = np.arange(tail.size, dtype=np.float64) / fs
    end_time = tail.size / fs

    # The raw curve must span the requested range at least once; the
    # compensated window may legitimately end shallower than lower_db.
    raw_db = 10.0 * np.log10(np.maximum(tail / total, 1e-30))
    _fit_window(raw_db, upper_db, lower_db)

    compensation = 0.0
    slope = None
    iterations = max_iterations if compensate else 1
    for _ in range(iterations):
        curve = 10.0 * np.log10(np.maximum((tail + compensation) / (total + compensation), 1e-30))
        lo = lower_db
        if compensate:
            lo = max(lower_db, float(curve[-1]) + _FLOOR_GUARD_DB)
        n1, n2 = _fit_window(curve, upper_db, lo)
        slope, intercept = _fit_line(times[n1 : n2 + 1], curve[n1 : n2 + 1])
        if slope >= 0:
            raise DecayRangeError(f"fitted decay slope {slope:.3g} dB/s is not a decay")
        if not compensate:
            break
        compensation = (total + compensation) * 10.0 ** ((intercept + slope * end_time) / 10.0)
    return -60.0 / slope


@dataclass
class T60ErrorResult:
    """Batch T60 error with per-item detail; failures are excluded from the mean."""

    mean_abs_error: float
    abs_errors: list
    estimates: list
    failures: list  # (index, message)

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def t60_error(rirs, targets, **estimator_kwargs) -> T60ErrorResult:
    """Mean absolute difference between estimated and target T60 over a batch."""
    rirs = list(rirs)
    targets = [float(t) for t in targets]
    if len(rirs) != len(targets) or not rirs:
        raise ValidationError(
            f"need equal non-empty batches, got {len(rirs)} RIRs and {len(targets)} targets"
        )
    abs_errors, estimates, failures = [], [], []
    for i, (rir, target) in enumerate(zip(rirs, targets)):
        try:
            est = estimate_t60(rir, **estimator_kwargs)
        except (DecayRangeError, DegenerateSignalError) as exc:
            failures.append((i, str(exc)))
            estimates.append(None)
            continue
        estimates.append(est)
        abs_errors.append(abs(est - target))
    if not abs_errors:
        raise DecayRangeError("T60 estimation failed for every item in the batch")
    return T60ErrorResult(
        mean_abs_error=float(np.mean(abs_errors)),
        abs_errors=abs_errors,
        estimates=estimates,
        failures=failures,
    )


def crop_at_t60(rir: Rir, t60: float, threshold: float = CROP_THRESHOLD_S) -> Rir:
    """Zero everything after the target T60 when T60 is below the threshold.

    Short-reverberation outputs carry trailing noise past their decay;
    zeroing (rather than truncating) preserves the fixed tensor length.
    Above the threshold the input is returned unchanged.
    """
    if t60 <= 0:
        raise ValidationError(f"t60 must be positive, got {t60}")
    if t60 >= threshold:
        return rir
    cut = int(round(t60 * rir.sample_rate))
    samples = rir.samples.copy()
    samples[cut:] = 0.0
    return Rir(samples=samples, sample_rate=rir.sample_rate, provenance=rir.provenance,
               info={**rir.info, "cropped_at_s": t60})


def t60_loss_with_grad(
    batch: np.ndarray,
    targets: np.ndarray,
    sample_rate: int,
    decay_range: tuple[float, float] = DEFAULT_DECAY_RANGE,
    windows: list | None = None,
) -> tuple[float, np.ndarray, list]:
    """Differentiable batch T60 error: mean |T60(r_i) - target_i|.

    The forward pass is the plain (uncompensated) fixed-window fit; the
    gradient flows through the backward energy integration and the
    closed-form least-squares slope, while the dB-crossing indices are held
    constant (straight-through). Returns (loss, d loss/d batch, windows);
    pass ``windows`` back in to re-evaluate with frozen indices. Items whose
    curve spans no usable window are skipped and contribute zero.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValidationError(f"batch must be 2-D (items, samples), got shape {batch.shape}")
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (batch.shape[0],):
        raise ValidationError(
            f"targets shape {targets.shape} does not match batch of {batch.shape[0]}"
        )
    upper_db, lower_db = decay_range

    n_items, n = batch.shape
    grad = np.zeros_like(batch)
    out_windows: list = [None] * n_items
    per_item: list[tuple[int, float, int, int, np.ndarray]] = []

    for i in range(n_items):
        tail = _tail_energy(batch[i])
        total = tail[0]
        if total <= 0:
            continue
        if windows is not None and windows[i] is not None:
            n1, n2 = windows[i]
        elif windows is not None:
            continue
        else:
            curve = 10.0 * np.log10(np.maximum(tail / total, 1e-30))
            try:
                n1, n2 = _fit_window(curve, upper_db, lower_db)
            except DecayRangeError:
                continue
        out_windows[i] = (n1, n2)
        per_item.append((i, total, n1, n2, tail))

    if not per_item:
        return 0.0, grad, out_windows

    loss = 0.0
    scale = 1.0 / len(per_item)
    for i, total, n1, n2, tail in per_item:
        idx = np.arange(n1, n2 + 1)
        times = idx / sample_rate
        seg = tail[n1 : n2 + 1]
        y = 10.0 / LN10 * (np.log(seg) - math.log(total))
        ct = times - times.mean()
        sxx = float(np.dot(ct, ct))
        slope = float(np.dot(ct, y - y.mean()) / sxx)
        t60 = -60.0 / slope
        err = t60 - targets[i]
        loss += abs(err) * scale

        # d|err|/dslope = sign(err) * 60 / slope^2; slope is linear in y with
        # coefficients ct/sxx; y depends on the suffix sums and the total.
        g_y = (math.copysign(1.0, err) * 60.0 / slope**2) * scale * ct / sxx
        d_tail = np.zeros(n)
        d_tail[idx] = g_y * (10.0 / LN10) / seg
        d_tail[0] -= g_y.sum() * (10.0 / LN10) / total
        # tail[k] = sum_{j>=k} e[j]  =>  dL/de[j] = sum_{k<=j} d_tail[k]
        grad[i] = 2.0 * batch[i] * np.cumsum(d_tail)

    return loss, grad, out_windows
