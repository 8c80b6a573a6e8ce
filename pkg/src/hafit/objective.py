"""Spectrogram and level losses between HI-processed and NH-reference signals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from hafit.signal_core import HANN_STFT, StftConfig, stft

DEFAULT_ALPHA = 5.0
SPEC_LOSS_FLOOR_DB = -200.0

_DB = 20.0 / np.log(10.0)


@dataclass(frozen=True)
class LossBreakdown:
    l_spec: float
    l_spl: float | None
    total: float
    alpha: float = DEFAULT_ALPHA

    @property
    def spl_applied(self) -> bool:
        return self.l_spl is not None and self.l_spl >= 0.0


def _check_lengths(y_p, y_r):
    if y_p.shape[-1] != y_r.shape[-1]:
        raise ValueError(f"length mismatch: {y_p.shape[-1]} vs {y_r.shape[-1]}")


def spec_loss(y_p: ArrayLike, y_r: ArrayLike, config: StftConfig = HANN_STFT) -> float:
    """20 log10 of the mean absolute complex STFT difference."""
    y_p = np.asarray(y_p, dtype=np.float64)
    y_r = np.asarray(y_r, dtype=np.float64)
    _check_lengths(y_p, y_r)
    diff = stft(y_p, config).frames - stft(y_r, config).frames
    mean_abs = np.mean(np.abs(diff))
    if mean_abs == 0.0:
        return SPEC_LOSS_FLOOR_DB
    return float(max(20.0 * np.log10(mean_abs), SPEC_LOSS_FLOOR_DB))


def spl_loss(y_p: ArrayLike, y_r: ArrayLike) -> float | None:
    """20 log10 of the RMS excess of `y_p` over `y_r`; None when not louder."""
    y_p = np.asarray(y_p, dtype=np.float64)
    y_r = np.asarray(y_r, dtype=np.float64)
    delta = np.sqrt(np.mean(y_p**2)) - np.sqrt(np.mean(y_r**2))
    if delta <= 0.0:
        return None
    return float(20.0 * np.log10(delta))


def combine(l_spec: float, l_spl: float | None, alpha: float = DEFAULT_ALPHA) -> LossBreakdown:
    """Add the level penalty only when it is present and non-negative."""
    if l_spl is not None and l_spl >= 0.0:
        total = l_spec + alpha * l_spl
    else:
        total = l_spec
    return LossBreakdown(float(l_spec), l_spl, float(total), alpha)


def total_loss(
    y_p: ArrayLike, y_r: ArrayLike, alpha: float = DEFAULT_ALPHA, config: StftConfig = HANN_STFT
) -> LossBreakdown:
    return combine(spec_loss(y_p, y_r, config), spl_loss(y_p, y_r), alpha)


def total_loss_jvp(
    y_p: ArrayLike,
    dy_p: ArrayLike,
    y_r: ArrayLike,
    alpha: float = DEFAULT_ALPHA,
    config: StftConfig = HANN_STFT,
) -> tuple[LossBreakdown, NDArray[np.float64]]:
    """Loss plus its directional derivatives along each row of `dy_p`."""
    y_p = np.asarray(y_p, dtype=np.float64)
    y_r = np.asarray(y_r, dtype=np.float64)
    dy_p = np.atleast_2d(np.asarray(dy_p, dtype=np.float64))
    _check_lengths(y_p, y_r)

    spec_p = stft(np.concatenate([y_p[None], dy_p]), config).frames
    diff = spec_p[0] - stft(y_r, config).frames
    d_diff = spec_p[1:]
    mag = np.abs(diff)
    mean_abs = mag.mean()
    if mean_abs == 0.0 or 20.0 * np.log10(mean_abs) <= SPEC_LOSS_FLOOR_DB:
        l_spec, d_spec = SPEC_LOSS_FLOOR_DB, np.zeros(len(dy_p))
    else:
        l_spec = float(20.0 * np.log10(mean_abs))
        safe = np.where(mag > 0, mag, 1.0)
        d_mag = np.where(mag > 0, np.real(np.conj(diff) * d_diff) / safe, 0.0)
        d_spec = _DB * d_mag.mean(axis=(-2, -1)) / mean_abs

    rms_p = np.sqrt(np.mean(y_p**2))
    delta = rms_p - np.sqrt(np.mean(y_r**2))
    l_spl = float(20.0 * np.log10(delta)) if delta > 0 else None
    loss = combine(l_spec, l_spl, alpha)
    grad = d_spec
    if loss.spl_applied:
        d_rms = np.mean(y_p * dy_p, axis=-1) / rms_p
        grad = grad + alpha * _DB * d_rms / delta
    return loss, grad
