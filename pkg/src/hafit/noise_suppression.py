"""Wiener-filter noise suppression front end.

Two-step noise reduction: a decision-directed a-priori SNR gives a first
Wiener gain, whose output is used to re-estimate the a-priori SNR for the
final gain. Noise power is initialised from the leading frames and then
tracked with a minima-controlled recursive average.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.ndimage import uniform_filter1d

from hafit.signal_core import SAMPLE_RATE, Spectrogram, StftConfig, istft, stft

NOISE_FLOOR = 1e-20


@dataclass(frozen=True)
class WienerConfig:
    frame_len: int = 1024
    hop: int = 256
    beta: float = 0.98
    gain_floor_db: float = -18.0
    noise_init_s: float = 0.12
    # minima-controlled tracking
    tracking_alpha: float = 0.95
    power_smoothing: float = 0.8
    presence_ratio: float = 5.0
    min_window_s: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.gain_floor_db >= 0.0:
            raise ValueError("gain floor must be below 0 dB")

    @property
    def stft_config(self) -> StftConfig:
        return StftConfig(self.frame_len, self.hop, "hann")

    @property
    def gain_floor(self) -> float:
        return 10.0 ** (self.gain_floor_db / 20.0)


def _init_frames(cfg: WienerConfig) -> int:
    # frames whose centre lies inside the noise-only lead-in
    return max(1, int(cfg.noise_init_s * SAMPLE_RATE / cfg.hop))


def estimate_noise_psd(s: Spectrogram, cfg: WienerConfig = WienerConfig()) -> NDArray[np.float64]:
    """Per-frame, per-bin noise power, shape ``(frames, bins)``."""
    if s.length < cfg.noise_init_s * SAMPLE_RATE:
        raise ValueError(
            f"utterance of {s.length} samples is shorter than the "
            f"{cfg.noise_init_s * 1000:.0f} ms noise initialisation window"
        )
    power = np.abs(s.frames) ** 2
    n_frames = power.shape[0]
    n_init = min(_init_frames(cfg), n_frames)
    noise = np.empty_like(power)
    lam = np.maximum(power[:n_init].mean(axis=0), NOISE_FLOOR)
    noise[:n_init] = lam

    window = max(1, int(cfg.min_window_s * SAMPLE_RATE / cfg.hop))
    smoothed = uniform_filter1d(power, 3, axis=1)
    tracked = smoothed[:n_init].mean(axis=0)
    s_min = np.maximum(tracked, NOISE_FLOOR)
    s_tmp = s_min.copy()
    a_s, a_d = cfg.power_smoothing, cfg.tracking_alpha
    for m in range(n_init, n_frames):
        tracked = a_s * tracked + (1.0 - a_s) * smoothed[m]
        s_min = np.minimum(s_min, tracked)
        s_tmp = np.minimum(s_tmp, tracked)
        if (m - n_init + 1) % window == 0:
            s_min = np.minimum(s_tmp, tracked)
            s_tmp = tracked.copy()
        speech = tracked > cfg.presence_ratio * np.maximum(s_min, NOISE_FLOOR)
        alpha = np.where(speech, 1.0, a_d)
        lam = alpha * lam + (1.0 - alpha) * power[m]
        noise[m] = np.maximum(lam, NOISE_FLOOR)
    return noise


def wiener_gains(s: Spectrogram, noise: NDArray[np.float64], cfg: WienerConfig = WienerConfig()) -> NDArray[np.float64]:
    power = np.abs(s.frames) ** 2
    gains = np.empty_like(power)
    prev_clean = np.zeros(power.shape[1])
    for m in range(power.shape[0]):
        lam = noise[m]
        post = power[m] / lam
        xi_dd = cfg.beta * prev_clean / lam + (1.0 - cfg.beta) * np.maximum(post - 1.0, 0.0)
        g_dd = xi_dd / (1.0 + xi_dd)
        xi_two_step = g_dd**2 * post
        g = np.maximum(xi_two_step / (1.0 + xi_two_step), cfg.gain_floor)
        gains[m] = g
        prev_clean = g**2 * power[m]
    return gains


def wiener_enhance(noisy: ArrayLike, cfg: WienerConfig = WienerConfig()) -> NDArray[np.float64]:
    """Suppress stationary noise; the output has the input's length."""
    x = np.asarray(noisy, dtype=np.float64)
    s = stft(x, cfg.stft_config)
    gains = wiener_gains(s, estimate_noise_psd(s, cfg), cfg)
    return istft(s.with_frames(s.frames * gains))
