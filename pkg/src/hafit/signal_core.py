"""Audio I/O, level calibration and the DSP primitives shared by every stage.

All array functions operate along the last axis and broadcast over any
leading axes, so a stack of signals (for example a primal signal plus its
tangents) can be pushed through a linear operator in one call.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft as sfft
from scipy import signal
from scipy.io import wavfile

SAMPLE_RATE = 44100
PRESENTATION_LEVEL_DB = 65.0


class RateMismatchError(ValueError):
    """Raised when audio is not sampled at 44.1 kHz."""


class UnsupportedEncodingError(ValueError):
    pass


class SilentSignalError(ValueError):
    """Raised when a level is requested for an all-zero signal."""


class ClippingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Waveform:
    """Mono audio at the fixed model sample rate."""

    samples: NDArray[np.float64]
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate != SAMPLE_RATE:
            raise RateMismatchError(
                f"expected {SAMPLE_RATE} Hz audio, got {self.sample_rate} Hz"
            )
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("Waveform samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("Waveform samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _full_sine_ref_rms(full_scale_spl: float) -> float:
    return (1.0 / np.sqrt(2.0)) * 10.0 ** (-full_scale_spl / 20.0)


@dataclass(frozen=True)
class Calibration:
    """Digital RMS that corresponds to 0 dB SPL.

    The default places a full-scale sinusoid (peak 1.0) at 100 dB SPL.
    """

    ref_rms: float = field(default_factory=lambda: _full_sine_ref_rms(100.0))

    def __post_init__(self):
        if not self.ref_rms > 0:
            raise ValueError("ref_rms must be positive")

    @classmethod
    def from_full_scale_spl(cls, spl_db: float) -> "Calibration":
        return cls(ref_rms=_full_sine_ref_rms(spl_db))


DEFAULT_CALIBRATION = Calibration()


# ---------------------------------------------------------------------------
# WAV I/O
# ---------------------------------------------------------------------------


def read_wav(path) -> Waveform:
    """Read a WAV file as mono full-scale floats.

    Stereo files are averaged to mono. No resampling is done: anything
    other than 44.1 kHz raises :class:`RateMismatchError`.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise UnsupportedEncodingError(f"{path}: {exc}") from exc
    if rate != SAMPLE_RATE:
        raise RateMismatchError(f"{path}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz")

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM is delivered left-justified in int32
        x = data.astype(np.float64) / 2.0**31
    elif data.dtype == np.float32 or data.dtype == np.float64:
        x = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(f"{path}: unsupported sample type {data.dtype}")

    if x.ndim == 2:
        x = x.mean(axis=1)
    return Waveform(x)


def write_wav(w: Waveform | ArrayLike, path, encoding: str = "pcm16") -> None:
    x = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot write non-finite samples")
    if encoding == "pcm16":
        if np.any(np.abs(x) > 1.0):
            warnings.warn(
                f"{path}: {np.sum(np.abs(x) > 1.0)} samples exceed full scale and were clipped",
                ClippingWarning,
                stacklevel=2,
            )
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, SAMPLE_RATE, q)
    elif encoding == "float32":
        wavfile.write(path, SAMPLE_RATE, x.astype(np.float32))
    else:
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")


# ---------------------------------------------------------------------------
# Levels
# ---------------------------------------------------------------------------


def rms(x: ArrayLike, axis: int = -1) -> NDArray[np.float64] | float:
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(np.mean(x**2, axis=axis))


def measure_spl(w: Waveform | ArrayLike, cal: Calibration = DEFAULT_CALIBRATION) -> float:
    level = rms(w)
    if level <= 0:
        raise SilentSignalError("level of an all-zero signal is undefined")
    return float(20.0 * np.log10(level / cal.ref_rms))


def normalize_spl(
    w: Waveform | ArrayLike,
    target: float = PRESENTATION_LEVEL_DB,
    cal: Calibration = DEFAULT_CALIBRATION,
) -> NDArray[np.float64]:
    """Scale `w` so that it plays back at `target` dB SPL."""
    x = np.asarray(w, dtype=np.float64)
    current = measure_spl(x, cal)
    return x * 10.0 ** ((target - current) / 20.0)


# ---------------------------------------------------------------------------
# FIR filtering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FIRFilter:
    """FIR taps plus the delay removed when applying them.

    ``taps`` may carry leading axes to represent a bank of filters of
    equal length.
    """

    taps: NDArray[np.float64]
    group_delay: int | None = None

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.shape[-1] % 2 != 1:
            raise ValueError(f"FIR filters must have an odd tap count, got {taps.shape[-1]}")
        object.__setattr__(self, "taps", taps)
        if self.group_delay is None:
            object.__setattr__(self, "group_delay", (taps.shape[-1] - 1) // 2)

    @property
    def numtaps(self) -> int:
        return self.taps.shape[-1]

    def is_linear_phase(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.taps, self.taps[..., ::-1], atol=atol))

    def response(self, freqs: ArrayLike) -> NDArray[np.complex128]:
        """Delay-compensated complex response at `freqs` (Hz)."""
        freqs = np.asarray(freqs, dtype=np.float64)
        n = np.arange(self.numtaps) - self.group_delay
        phase = np.exp(-2j * np.pi * np.multiply.outer(freqs, n) / SAMPLE_RATE)
        return phase @ self.taps.T if self.taps.ndim > 1 else phase @ self.taps


def fir_apply(x: ArrayLike, f: FIRFilter | ArrayLike) -> NDArray[np.float64]:
    """Linear convolution trimmed so the output is time-aligned with `x`.

    Leading axes of `x` and of the taps broadcast against each other.
    """
    if not isinstance(f, FIRFilter):
        f = FIRFilter(np.asarray(f, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    taps = f.taps
    ndim = max(x.ndim, taps.ndim)
    x_b = x.reshape((1,) * (ndim - x.ndim) + x.shape)
    t_b = taps.reshape((1,) * (ndim - taps.ndim) + taps.shape)
    if f.numtaps == 1:
        return x_b * t_b
    full = signal.fftconvolve(x_b, t_b, axes=-1)
    d = f.group_delay
    return full[..., d : d + n]


def design_highpass(cutoff: float = 80.0, numtaps: int = 1025, atten_db: float = 45.0) -> FIRFilter:
    beta = signal.kaiser_beta(atten_db)
    taps = signal.firwin(numtaps, cutoff, pass_zero=False, window=("kaiser", beta), fs=SAMPLE_RATE)
    return FIRFilter(taps)


_HIGHPASS_80 = design_highpass()


def highpass_80(w: Waveform | ArrayLike) -> NDArray[np.float64]:
    """Remove sub-80 Hz content with a delay-compensated linear-phase FIR."""
    return fir_apply(w, _HIGHPASS_80)


# ---------------------------------------------------------------------------
# STFT
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 1024
    hop: int = 256
    window_kind: str = "hann"

    def __post_init__(self):
        w = self.window_len
        if w <= 0 or w & (w - 1):
            raise ValueError(f"window_len must be a power of two, got {w}")
        if self.hop <= 0 or w % self.hop:
            raise ValueError(f"hop {self.hop} must divide window_len {w}")
        if self.window_kind not in ("hann", "hamming"):
            raise ValueError(f"unsupported window {self.window_kind!r}")
        if not signal.check_COLA(self.window(), w, w - self.hop):
            raise ValueError(
                f"{self.window_kind} window with hop {self.hop} does not satisfy COLA"
            )

    def window(self) -> NDArray[np.float64]:
        return signal.get_window(self.window_kind, self.window_len, fftbins=True)

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    def bin_freqs(self) -> NDArray[np.float64]:
        return np.arange(self.n_bins) * SAMPLE_RATE / self.window_len


HAMMING_STFT = StftConfig(window_kind="hamming")
HANN_STFT = StftConfig(window_kind="hann")


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT frames, indexed ``[..., frame, bin]``."""

    frames: NDArray[np.complex128]
    config: StftConfig
    length: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[-2]

    def with_frames(self, frames) -> "Spectrogram":
        if frames.shape[-2:] != self.frames.shape[-2:]:
            raise ValueError("frame/bin shape mismatch")
        return Spectrogram(frames, self.config, self.length)


def _frame_count(n: int, hop: int) -> int:
    return 1 + -(-n // hop)


def stft(w: ArrayLike, config: StftConfig = HANN_STFT) -> Spectrogram:
    """Centred STFT with zero padding; frames are ``[..., m, k]``."""
    x = np.asarray(w, dtype=np.float64)
    n = x.shape[-1]
    W, hop = config.window_len, config.hop
    m = _frame_count(n, hop)
    total = (m - 1) * hop + W
    pad = [(0, 0)] * (x.ndim - 1) + [(W // 2, total - n - W // 2)]
    xp = np.pad(x, pad)
    frames = np.lib.stride_tricks.sliding_window_view(xp, W, axis=-1)[..., ::hop, :]
    spec = sfft.rfft(frames * config.window(), axis=-1)
    return Spectrogram(spec, config, n)


def istft(s: Spectrogram) -> NDArray[np.float64]:
    """Weighted overlap-add inverse of :func:`stft`."""
    cfg = s.config
    W, hop = cfg.window_len, cfg.hop
    win = cfg.window()
    frames = sfft.irfft(s.frames, n=W, axis=-1) * win
    lead = frames.shape[:-2]
    m = frames.shape[-2]
    r = W // hop
    blocks = np.zeros(lead + (m + r - 1, hop))
    norm = np.zeros((m + r - 1, hop))
    wsq = (win**2).reshape(r, hop)
    for c in range(r):
        blocks[..., c : c + m, :] += frames[..., c * hop : (c + 1) * hop]
        norm[c : c + m] += wsq[c]
    out = blocks.reshape(lead + (-1,))
    norm = norm.reshape(-1)
    out = out / np.where(norm > 1e-12, norm, 1.0)
    return out[..., W // 2 : W // 2 + s.length]


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


def hilbert_envelope(w: ArrayLike) -> NDArray[np.float64]:
    """Magnitude of the analytic signal."""
    x = np.asarray(w, dtype=np.float64)
    if x.shape[-1] == 0:
        return x.copy()
    return np.abs(signal.hilbert(x, axis=-1))
