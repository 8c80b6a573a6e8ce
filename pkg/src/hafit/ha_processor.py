"""Linear-phase FIR hearing-aid processor driven by six insertion gains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal

from hafit.signal_core import SAMPLE_RATE, FIRFilter, fir_apply

ANCHOR_FREQS_HZ = (250.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0)
DEFAULT_TAPS = 4097
DEFAULT_GAIN_BOUNDS = (-10.0, 60.0)
FITTING_LABELS = ("N", "G", "Cn", "Cw", "custom")

_DB_TO_NEPER = np.log(10.0) / 20.0


@dataclass(frozen=True)
class Fitting:
    """Insertion gains (dB) at the six audiometric anchor frequencies."""

    gains_db: tuple[float, ...]
    label: str = "custom"
    bounds: tuple[float, float] = DEFAULT_GAIN_BOUNDS

    def __post_init__(self):
        gains = tuple(float(g) for g in np.asarray(self.gains_db, dtype=np.float64).ravel())
        if len(gains) != len(ANCHOR_FREQS_HZ):
            raise ValueError(f"a fitting needs {len(ANCHOR_FREQS_HZ)} gains, got {len(gains)}")
        if not all(np.isfinite(gains)):
            raise ValueError("fitting gains must be finite")
        lo, hi = self.bounds
        if any(g < lo or g > hi for g in gains):
            raise ValueError(f"gains {gains} outside bounds [{lo}, {hi}] dB")
        if self.label not in FITTING_LABELS:
            raise ValueError(f"unknown fitting label {self.label!r}")
        object.__setattr__(self, "gains_db", gains)

    @property
    def gains(self) -> NDArray[np.float64]:
        return np.array(self.gains_db)

    @classmethod
    def flat(cls, gain_db: float = 0.0, label: str = "custom") -> "Fitting":
        return cls((gain_db,) * len(ANCHOR_FREQS_HZ), label)

    def replace(self, gains_db=None, label=None) -> "Fitting":
        return Fitting(
            self.gains_db if gains_db is None else tuple(gains_db),
            self.label if label is None else label,
            self.bounds,
        )


def project_gains(gains: ArrayLike, bounds=DEFAULT_GAIN_BOUNDS) -> NDArray[np.float64]:
    return np.clip(np.asarray(gains, dtype=np.float64), *bounds)


def interpolate_gain_db(freqs: ArrayLike, gains_db: ArrayLike) -> NDArray[np.float64]:
    """dB gain at `freqs`: linear between anchors, held flat outside them."""
    return np.interp(np.asarray(freqs, dtype=np.float64), ANCHOR_FREQS_HZ, np.asarray(gains_db))


def _anchor_basis(freqs: NDArray[np.float64]) -> NDArray[np.float64]:
    # hat functions: interpolate_gain_db(f, g) == g @ basis
    return np.stack([np.interp(freqs, ANCHOR_FREQS_HZ, e) for e in np.eye(len(ANCHOR_FREQS_HZ))])


def _taps_from_response(magnitude: NDArray[np.float64], taps: int) -> NDArray[np.float64]:
    # zero-phase inverse DFT on the taps-length grid, centred and Hann windowed
    h = np.fft.irfft(magnitude, n=taps, axis=-1)
    h = np.roll(h, taps // 2, axis=-1)
    return h * signal.windows.hann(taps, sym=True)


def _grid(taps: int) -> NDArray[np.float64]:
    return np.fft.rfftfreq(taps, 1.0 / SAMPLE_RATE)


def design_fir(fitting: Fitting | ArrayLike, taps: int = DEFAULT_TAPS) -> FIRFilter:
    """Frequency-sampling design of the hearing-aid FIR."""
    if taps % 2 != 1:
        raise ValueError(f"taps must be odd, got {taps}")
    gains = fitting.gains if isinstance(fitting, Fitting) else np.asarray(fitting, np.float64)
    if gains.shape != (len(ANCHOR_FREQS_HZ),):
        raise ValueError("expected six gains")
    mag = 10.0 ** (interpolate_gain_db(_grid(taps), gains) / 20.0)
    return FIRFilter(_taps_from_response(mag, taps))


def design_fir_jacobian(gains_db: ArrayLike, taps: int = DEFAULT_TAPS) -> NDArray[np.float64]:
    """d(taps)/d(gains_db), shape ``(6, taps)``.

    The design is linear in the sampled magnitude, so each row is the FIR
    designed from ``magnitude * ln(10)/20 * basis_j``.
    """
    gains = np.asarray(gains_db, dtype=np.float64)
    freqs = _grid(taps)
    mag = 10.0 ** (interpolate_gain_db(freqs, gains) / 20.0)
    return _taps_from_response(_DB_TO_NEPER * mag * _anchor_basis(freqs), taps)


def process(w: ArrayLike, fitting: Fitting | ArrayLike, taps: int = DEFAULT_TAPS) -> NDArray[np.float64]:
    """Amplify `w` with the fitting's FIR (no compression)."""
    return fir_apply(w, design_fir(fitting, taps))


def process_jvp(
    w: ArrayLike, gains_db: ArrayLike, taps: int = DEFAULT_TAPS
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Processed signal and its derivative w.r.t. each gain, shape ``(6, n)``."""
    x = np.asarray(w, dtype=np.float64)
    y = fir_apply(x, design_fir(gains_db, taps))
    dy = fir_apply(x, FIRFilter(design_fir_jacobian(gains_db, taps)))
    return y, dy
