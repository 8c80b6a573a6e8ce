"""Differentiable hearing-loss simulator.

The chain is: source-to-cochlea transfer, spectral smearing on the power
spectrogram, loudness recruitment on a Gammatone filterbank, and the inverse
cochlea-to-source transfer. Every stage is either a fixed linear filter or a
pointwise smooth nonlinearity, so each one also has a forward-mode
(Jacobian-vector product) companion used for exact gradients.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft as sfft
from scipy import signal

from hafit.signal_core import (
    DEFAULT_CALIBRATION,
    HAMMING_STFT,
    SAMPLE_RATE,
    Calibration,
    FIRFilter,
    Spectrogram,
    StftConfig,
    fir_apply,
    istft,
    stft,
)

log = logging.getLogger(__name__)

AUDIOGRAM_FREQS_HZ = (250.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0)
MAX_LOUDNESS_DB = 105.0
ENVELOPE_FLOOR_DB = -120.0
# spectral cells quieter than a tone at this level count as empty when smearing
SMEARING_SOFTNESS_SPL_DB = 10.0
FILTERBANK_RANGE_HZ = (100.0, 16000.0)
GAMMATONE_ORDER = 4


class UnsupportedSeverityError(ValueError):
    """A channel hearing loss reaches the maximal loudness threshold."""


# ---------------------------------------------------------------------------
# Audiograms and severity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Audiogram:
    hl_db: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        hl = tuple(float(v) for v in np.asarray(self.hl_db, dtype=np.float64).ravel())
        if len(hl) != len(AUDIOGRAM_FREQS_HZ):
            raise ValueError(
                f"audiogram needs {len(AUDIOGRAM_FREQS_HZ)} thresholds, got {len(hl)}"
            )
        if any(not (0.0 <= v <= 120.0) for v in hl):
            raise ValueError(f"hearing loss values must lie in [0, 120] dB HL, got {hl}")
        object.__setattr__(self, "hl_db", hl)

    @property
    def levels(self) -> NDArray[np.float64]:
        return np.array(self.hl_db)

    @classmethod
    def normal(cls) -> "Audiogram":
        return cls((0.0,) * len(AUDIOGRAM_FREQS_HZ), "normal")

    def interpolate(self, freqs: ArrayLike) -> NDArray[np.float64]:
        """Hearing loss at `freqs`: linear in dB over log frequency, flat outside."""
        logf = np.log(np.asarray(freqs, dtype=np.float64))
        return np.interp(logf, np.log(AUDIOGRAM_FREQS_HZ), self.levels)


@dataclass(frozen=True)
class SeverityClass:
    name: str
    r_lower: float
    r_upper: float
    n_channels: int
    bandwidth_factor: float

    @property
    def widens(self) -> bool:
        return not (self.r_lower == 1.0 and self.r_upper == 1.0)


SEVERITIES = {
    "normal": SeverityClass("normal", 1.0, 1.0, 36, 1.0),
    "mild": SeverityClass("mild", 4.0, 2.0, 36, 1.0),
    "moderate": SeverityClass("moderate", 2.4, 1.6, 28, 2.0),
    "moderate_severe": SeverityClass("moderate_severe", 1.6, 1.1, 19, 3.0),
}


def classify_severity(a: Audiogram) -> SeverityClass:
    """Severity from the mean loss over 2, 4 and 6 kHz."""
    degree = float(np.mean(a.levels[3:]))
    if degree > 56.0:
        return SEVERITIES["moderate_severe"]
    if degree > 35.0:
        return SEVERITIES["moderate"]
    if degree > 15.0:
        return SEVERITIES["mild"]
    return SEVERITIES["normal"]


# ---------------------------------------------------------------------------
# Auditory filter shapes and smearing
# ---------------------------------------------------------------------------


def erb(fc: ArrayLike) -> NDArray[np.float64] | float:
    """Equivalent rectangular bandwidth in Hz."""
    fc = np.asarray(fc, dtype=np.float64)
    if np.any(fc <= 0):
        raise ValueError("centre frequency must be positive")
    out = 24.7 * (0.00437 * fc + 1.0)
    return float(out) if out.ndim == 0 else out


def erb_rate(f: ArrayLike) -> NDArray[np.float64]:
    return 21.4 * np.log10(0.00437 * np.asarray(f, dtype=np.float64) + 1.0)


def erb_space(lo: float, hi: float, n: int) -> NDArray[np.float64]:
    """`n` frequencies uniformly spaced on the ERB-rate scale."""
    e = np.linspace(erb_rate(lo), erb_rate(hi), n)
    return (10.0 ** (e / 21.4) - 1.0) / 0.00437


def auditory_filter_weight(g: ArrayLike, fc: ArrayLike, r: ArrayLike = 1.0) -> NDArray[np.float64]:
    """Rounded-exponential intensity weight ``(1 + p g) exp(-p g)``."""
    g = np.asarray(g, dtype=np.float64)
    p = 4.0 * np.asarray(fc, dtype=np.float64) / (np.asarray(r, dtype=np.float64) * erb(fc))
    pg = p * g
    return (1.0 + pg) * np.exp(-pg)


def _auditory_filterbank(freqs: NDArray[np.float64], r_lower: float, r_upper: float) -> NDArray[np.float64]:
    # one row per filter centred on each bin; DC row centred half a bin up
    fc = np.maximum(freqs, freqs[1] / 2.0)[:, None]
    f = freqs[None, :]
    g = np.abs(f - fc) / fc
    r = np.where(f < fc, r_lower, r_upper)
    w = auditory_filter_weight(g, fc, r)
    return w / (24.7 * erb(fc) * (r_lower + r_upper) / 2.0)


@dataclass(frozen=True)
class SmearingMatrix:
    matrix: NDArray[np.float64]
    config: StftConfig
    r_lower: float
    r_upper: float
    condition_number: float


def build_smearing_matrix(
    severity: SeverityClass | tuple[float, float], config: StftConfig = HAMMING_STFT
) -> SmearingMatrix:
    """Normal-to-widened filterbank mapping ``inv(A_N) @ A_W`` on STFT bins."""
    if isinstance(severity, SeverityClass):
        r_lower, r_upper = severity.r_lower, severity.r_upper
    else:
        r_lower, r_upper = severity
    freqs = config.bin_freqs()
    a_normal = _auditory_filterbank(freqs, 1.0, 1.0)
    a_wide = _auditory_filterbank(freqs, r_lower, r_upper)
    cond = float(np.linalg.cond(a_normal))
    if cond < 1e12:
        m = np.linalg.solve(a_normal, a_wide)
    else:
        warnings.warn(f"normal filterbank is ill-conditioned (cond={cond:.3g}); using lstsq")
        m = np.linalg.lstsq(a_normal, a_wide, rcond=1e-10)[0]
    return SmearingMatrix(m, config, r_lower, r_upper, cond)


def _smear_frames(frames, m, tangents=None, softness=0.0):
    # `softness` is a cell power at the inaudible floor. It rounds the
    # rectifier on negative smeared power and regularizes the phase of
    # near-empty cells, whose angle is otherwise numerically arbitrary.
    power = np.abs(frames) ** 2
    smeared = power @ m.T
    root = np.sqrt(smeared**2 + softness**2)
    rect = 0.5 * (smeared + root)
    positive = rect > 0
    mag_out = np.sqrt(rect)
    den = np.sqrt(power + softness)
    nonzero = den > 0
    safe_den = np.where(nonzero, den, 1.0)
    phase = np.where(nonzero, frames / safe_den, 1.0)
    out = mag_out * phase
    if tangents is None:
        return out, None

    d_power = 2.0 * np.real(np.conj(frames) * tangents)
    d_smeared = d_power @ m.T
    slope = 0.5 * (1.0 + smeared / np.where(root > 0, root, 1.0))
    safe_out = np.where(positive, mag_out, 1.0)
    d_mag = np.where(positive, slope * d_smeared / (2.0 * safe_out), 0.0)
    d_den = d_power / (2.0 * safe_den)
    d_phase = np.where(nonzero, (tangents - phase * d_den) / safe_den, 0.0)
    return out, d_mag * phase + mag_out * d_phase


def smear(s: Spectrogram, m: SmearingMatrix, softness: float = 0.0) -> Spectrogram:
    """Smear the power spectrum of each frame; phases are kept.

    A positive `softness` (cell power) smooths the map near empty cells.
    """
    if s.frames.shape[-1] != m.matrix.shape[0]:
        raise ValueError(
            f"spectrogram has {s.frames.shape[-1]} bins, smearing matrix expects {m.matrix.shape[0]}"
        )
    return s.with_frames(_smear_frames(s.frames, m.matrix, softness=softness)[0])


# ---------------------------------------------------------------------------
# Gammatone filterbank and recruitment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammatoneFilterbank:
    """Delay-aligned 4th-order Gammatone bank.

    ``taps[i]`` holds channel i positioned so that every channel's envelope
    peak falls on sample ``delay``. ``smoothing`` holds the envelope
    low-pass filters, all centred on the same tap. ``synthesis_eq`` flattens
    the summed response of the bank.
    """

    center_freqs: NDArray[np.float64]
    bandwidths: NDArray[np.float64]
    amplitudes: NDArray[np.float64]
    taps: NDArray[np.float64]
    delay: int
    channel_hl: NDArray[np.float64]
    smoothing: FIRFilter
    synthesis_eq: FIRFilter
    bandwidth_factor: float = 1.0

    @property
    def n_channels(self) -> int:
        return self.center_freqs.shape[0]

    def channel_response(self, freqs: ArrayLike) -> NDArray[np.complex128]:
        """Complex response of each aligned channel, delay removed."""
        freqs = np.asarray(freqs, dtype=np.float64)
        k = np.arange(self.taps.shape[1]) - self.delay
        basis = np.exp(-2j * np.pi * np.multiply.outer(k, freqs) / SAMPLE_RATE)
        return self.taps @ basis


def _gammatone_envelope(t, b):
    return t ** (GAMMATONE_ORDER - 1) * np.exp(-2.0 * np.pi * b * t)


def _gammatone_channel(fc: float, b: float, floor_db: float = -60.0):
    peak_t = (GAMMATONE_ORDER - 1) / (2.0 * np.pi * b)
    # envelope falls below floor_db well within 40 peak-times
    t = np.arange(int(np.ceil(40 * peak_t * SAMPLE_RATE)) + 1) / SAMPLE_RATE
    env = _gammatone_envelope(t, b)
    peak = int(np.argmax(env))
    keep = np.nonzero(env >= env[peak] * 10.0 ** (floor_db / 20.0))[0][-1]
    t, env = t[: keep + 1], env[: keep + 1]
    h = env * np.cos(2.0 * np.pi * fc * (t - t[peak]))
    gain = np.abs(np.sum(h * np.exp(-2j * np.pi * fc * t)))
    return h / gain, peak, 1.0 / gain


def _smoothing_bank(cutoffs: NDArray[np.float64]) -> FIRFilter:
    lengths = [int(4 * SAMPLE_RATE / c) | 1 for c in cutoffs]
    width = max(lengths)
    bank = np.zeros((len(cutoffs), width))
    for i, (c, n) in enumerate(zip(cutoffs, lengths)):
        off = (width - n) // 2
        bank[i, off : off + n] = signal.firwin(n, c, window="hann", fs=SAMPLE_RATE)
    return FIRFilter(bank)


def _synthesis_equalizer(taps, delay, numtaps=4097, reg=0.05, band=FILTERBANK_RANGE_HZ):
    summed = taps.sum(axis=0)
    nfft = 1 << 16
    freqs = np.fft.rfftfreq(nfft, 1.0 / SAMPLE_RATE)
    h = np.fft.rfft(summed, nfft) * np.exp(2j * np.pi * freqs * delay / SAMPLE_RATE)
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    ref = np.median(np.abs(h[in_band]))
    inverse = np.conj(h) / (np.abs(h) ** 2 + (reg * ref) ** 2)
    grid = np.fft.rfftfreq(numtaps - 1, 1.0 / SAMPLE_RATE)
    sampled = np.interp(grid, freqs, inverse.real) + 1j * np.interp(grid, freqs, inverse.imag)
    eq = np.roll(np.fft.irfft(sampled, numtaps - 1), (numtaps - 1) // 2)
    eq = np.append(eq, eq[0]) * signal.windows.hann(numtaps, sym=True)
    return FIRFilter(eq)


def build_gammatone_filterbank(
    severity: SeverityClass,
    audiogram: Audiogram,
    freq_range: tuple[float, float] = FILTERBANK_RANGE_HZ,
) -> GammatoneFilterbank:
    fc = erb_space(freq_range[0], freq_range[1], severity.n_channels)
    bw = severity.bandwidth_factor * 1.019 * erb(fc)
    channels = [_gammatone_channel(f, b) for f, b in zip(fc, bw)]
    delay = max(peak for _, peak, _ in channels)
    width = max(delay - peak + len(h) for h, peak, _ in channels)
    taps = np.zeros((len(fc), width))
    for i, (h, peak, _) in enumerate(channels):
        taps[i, delay - peak : delay - peak + len(h)] = h
    amps = np.array([a for _, _, a in channels])
    smoothing = _smoothing_bank(np.minimum(bw, 500.0))
    return GammatoneFilterbank(
        center_freqs=fc,
        bandwidths=bw,
        amplitudes=amps,
        taps=taps,
        delay=delay,
        channel_hl=audiogram.interpolate(fc),
        smoothing=smoothing,
        synthesis_eq=_synthesis_equalizer(taps, delay),
        bandwidth_factor=severity.bandwidth_factor,
    )


@dataclass(frozen=True)
class RecruitmentParams:
    theta_db: float = MAX_LOUDNESS_DB
    calibration: Calibration = DEFAULT_CALIBRATION
    floor_db: float = ENVELOPE_FLOOR_DB

    @property
    def e_theta(self) -> float:
        return self.calibration.ref_rms * 10.0 ** (self.theta_db / 20.0)

    @property
    def floor(self) -> float:
        return self.e_theta * 10.0 ** (self.floor_db / 20.0)

    def exponents(self, channel_hl: ArrayLike) -> NDArray[np.float64]:
        hl = np.asarray(channel_hl, dtype=np.float64)
        if np.any(hl >= self.theta_db):
            raise UnsupportedSeverityError(
                f"channel hearing loss {hl.max():.1f} dB reaches theta={self.theta_db} dB"
            )
        return self.theta_db / (self.theta_db - hl) - 1.0


def _one_sided_spectrum(xs, n, taps_len):
    nfft = sfft.next_fast_len(n + taps_len - 1)
    half = nfft // 2 + 1
    one_sided = np.full(half, 2.0)
    one_sided[0] = 1.0
    if nfft % 2 == 0:
        one_sided[-1] = 1.0
    return sfft.rfft(xs, nfft, axis=-1) * one_sided, nfft


def _analytic_bank(X, nfft, taps, delay, n):
    """Aligned analytic channel signals, shape ``(channels, stack, n)``.

    `X` is the one-sided spectrum of the input stack from
    :func:`_one_sided_spectrum`.
    """
    half = X.shape[-1]
    H = sfft.rfft(taps, nfft, axis=-1)
    Z = np.zeros((taps.shape[0],) + X.shape[:-1] + (nfft,), dtype=np.complex128)
    Z[..., :half] = H[:, None, :] * X[None]
    return sfft.ifft(Z, axis=-1)[..., delay : delay + n]


def _recruit(xs, fb: GammatoneFilterbank, rp: RecruitmentParams, with_tangents: bool, chunk: int = 4):
    # xs[0] is the primal signal; xs[1:] are tangents when with_tangents
    n = xs.shape[-1]
    k = rp.exponents(fb.channel_hl)
    out = np.zeros_like(xs)
    X, nfft = _one_sided_spectrum(xs, n, fb.taps.shape[1])
    for start in range(0, fb.n_channels, chunk):
        sl = slice(start, start + chunk)
        a = _analytic_bank(X, nfft, fb.taps[sl], fb.delay, n)
        fine = a.real
        a0 = a[:, :1]
        env0 = np.abs(a0)
        if with_tangents:
            safe = np.where(env0 > 0, env0, 1.0)
            d_env = np.where(env0 > 0, np.real(np.conj(a0) * a[:, 1:]) / safe, 0.0)
            env = np.concatenate([env0, d_env], axis=1)
        else:
            env = env0
        lp = fb.smoothing.taps[sl][:, None, :]
        full = signal.fftconvolve(env, lp, axes=-1)
        d = fb.smoothing.group_delay
        env = full[..., d : d + n]

        # smooth lower bound: equals the floor at zero envelope, tends to the
        # envelope above it, and has no kink for the gradient to trip on
        raw = env[:, :1]
        root = np.sqrt(raw**2 + 4.0 * rp.floor**2)
        smooth0 = 0.5 * (raw + root)
        kk = k[sl][:, None, None]
        scale = (smooth0 / rp.e_theta) ** kk
        out[:1] += np.sum(scale * fine[:, :1], axis=0)
        if with_tangents:
            d_smooth = 0.5 * (1.0 + raw / root) * env[:, 1:]
            d_scale = kk * scale / smooth0 * d_smooth
            out[1:] += np.sum(d_scale * fine[:, :1] + scale * fine[:, 1:], axis=0)
    return fir_apply(out, fb.synthesis_eq)


def recruit(w: ArrayLike, fb: GammatoneFilterbank, rp: RecruitmentParams = RecruitmentParams()) -> NDArray[np.float64]:
    """Envelope-dependent channel scaling summed back to a waveform."""
    x = np.asarray(w, dtype=np.float64)
    lead = x.shape[:-1]
    flat = x.reshape((-1, x.shape[-1]))
    y = np.stack([_recruit(row[None], fb, rp, False)[0] for row in flat])
    return y.reshape(lead + (x.shape[-1],))


def recruit_jvp(w, dw, fb, rp=RecruitmentParams()):
    xs = np.concatenate([np.asarray(w, np.float64)[None], np.asarray(dw, np.float64)])
    ys = _recruit(xs, fb, rp, True)
    return ys[0], ys[1:]


# ---------------------------------------------------------------------------
# Ear transfer functions
# ---------------------------------------------------------------------------


def load_transfer_table(path=None, name: str | None = None) -> NDArray[np.float64]:
    """Rows of ``(frequency_hz, gain_db)`` from a text table."""
    if path is None:
        text = (resources.files("hafit") / "data" / name).read_text()
    else:
        text = Path(path).read_text()
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    table = np.array(rows, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] != 2:
        raise ValueError(f"transfer table must have two columns, got shape {table.shape}")
    if np.any(np.diff(table[:, 0]) <= 0):
        raise ValueError("transfer table frequencies must be strictly increasing")
    return table


def ear_transfer_table(free_field=None, middle_ear=None) -> NDArray[np.float64]:
    """Combined free-field-to-cochlea gain on the union of both frequency grids."""
    ff = free_field if free_field is not None else load_transfer_table(name="free_field_to_eardrum.txt")
    me = middle_ear if middle_ear is not None else load_transfer_table(name="middle_ear.txt")
    freqs = np.union1d(ff[:, 0], me[:, 0])
    gain = _interp_log(freqs, ff) + _interp_log(freqs, me)
    return np.column_stack([freqs, gain])


def _interp_log(freqs, table):
    return np.interp(np.log(freqs), np.log(table[:, 0]), table[:, 1])


def _design_from_table(table, numtaps):
    grid = np.fft.rfftfreq(numtaps, 1.0 / SAMPLE_RATE)
    gain_db = _interp_log(np.maximum(grid, table[0, 0]), table)
    h = np.roll(np.fft.irfft(10.0 ** (gain_db / 20.0), numtaps), numtaps // 2)
    return FIRFilter(h * signal.windows.hann(numtaps, sym=True))


@dataclass(frozen=True)
class EarTransfer:
    table: NDArray[np.float64]
    to_cochlea: FIRFilter
    to_source: FIRFilter

    @classmethod
    def build(cls, table=None, numtaps: int = 4097) -> "EarTransfer":
        table = ear_transfer_table() if table is None else np.asarray(table, dtype=np.float64)
        inverse = np.column_stack([table[:, 0], -table[:, 1]])
        return cls(table, _design_from_table(table, numtaps), _design_from_table(inverse, numtaps))


_DEFAULT_EAR = None


def default_ear() -> EarTransfer:
    global _DEFAULT_EAR
    if _DEFAULT_EAR is None:
        _DEFAULT_EAR = EarTransfer.build()
    return _DEFAULT_EAR


def source_to_cochlea(w: ArrayLike, ear: EarTransfer | None = None) -> NDArray[np.float64]:
    return fir_apply(w, (ear or default_ear()).to_cochlea)


def cochlea_to_source(w: ArrayLike, ear: EarTransfer | None = None) -> NDArray[np.float64]:
    return fir_apply(w, (ear or default_ear()).to_source)


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HearingLossModel:
    """Audiogram-specific simulator; build once, then call :meth:`simulate`."""

    audiogram: Audiogram
    severity: SeverityClass
    smearing: SmearingMatrix | None
    filterbank: GammatoneFilterbank
    recruitment: RecruitmentParams
    ear: EarTransfer = field(repr=False)
    padding: int = 2048

    @classmethod
    def build(
        cls,
        audiogram: Audiogram,
        severity: SeverityClass | str | None = None,
        calibration: Calibration = DEFAULT_CALIBRATION,
        smearing_config: StftConfig = HAMMING_STFT,
        ear: EarTransfer | None = None,
    ) -> "HearingLossModel":
        if severity is None:
            severity = classify_severity(audiogram)
        elif isinstance(severity, str):
            severity = SEVERITIES[severity]
        rp = RecruitmentParams(calibration=calibration)
        rp.exponents(audiogram.levels)
        smearing = build_smearing_matrix(severity, smearing_config) if severity.widens else None
        log.debug("building %s model for audiogram %s", severity.name, audiogram.name)
        return cls(
            audiogram=audiogram,
            severity=severity,
            smearing=smearing,
            filterbank=build_gammatone_filterbank(severity, audiogram),
            recruitment=rp,
            ear=ear or default_ear(),
        )

    def _run(self, xs, with_tangents):
        # zero padding keeps the long ear-filter tails inside the processed span
        n = xs.shape[-1]
        xs = np.pad(xs, [(0, 0), (self.padding, self.padding)])
        xs = fir_apply(xs, self.ear.to_cochlea)
        if self.smearing is not None:
            s = stft(xs, self.smearing.config)
            soft = self.smearing_softness
            if with_tangents:
                frames, d_frames = _smear_frames(s.frames[0], self.smearing.matrix, s.frames[1:], soft)
                frames = np.concatenate([frames[None], d_frames])
            else:
                frames = _smear_frames(s.frames, self.smearing.matrix, softness=soft)[0]
            xs = istft(s.with_frames(frames))
        xs = _recruit(xs, self.filterbank, self.recruitment, with_tangents)
        xs = fir_apply(xs, self.ear.to_source)
        return xs[:, self.padding : self.padding + n]

    @property
    def smearing_softness(self) -> float:
        """STFT-cell power of a tone at ``SMEARING_SOFTNESS_SPL_DB``."""
        if self.smearing is None:
            return 0.0
        level = self.recruitment.calibration.ref_rms * 10.0 ** (SMEARING_SOFTNESS_SPL_DB / 20.0)
        amp = level * np.sqrt(2.0) * self.smearing.config.window().sum() / 2.0
        return float(amp**2)

    def simulate(self, w: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(w, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("simulate expects a single waveform")
        return self._run(x[None], False)[0]

    def simulate_jvp(self, w: ArrayLike, dw: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Output and directional derivatives along each row of `dw`."""
        xs = np.concatenate([np.asarray(w, np.float64)[None], np.atleast_2d(np.asarray(dw, np.float64))])
        ys = self._run(xs, True)
        return ys[0], ys[1:]


def simulate(w: ArrayLike, audiogram: Audiogram, **kwargs) -> NDArray[np.float64]:
    """One-shot convenience wrapper; build a :class:`HearingLossModel` to reuse."""
    return HearingLossModel.build(audiogram, **kwargs).simulate(w)
