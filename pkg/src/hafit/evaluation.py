"""Objective evaluation: frequency-weighted segmental SNR, projected SNR and
fitting comparison reports."""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal

from hafit.ha_processor import Fitting
from hafit.hearing_loss import Audiogram
from hafit.noise_suppression import WienerConfig, wiener_enhance
from hafit.objective import spec_loss
from hafit.signal_core import PRESENTATION_LEVEL_DB, SAMPLE_RATE, SilentSignalError, normalize_spl
from hafit.synthetic import Utterance

SNR_CAP_DB = 100.0

# 25 critical bands: centre frequencies and bandwidths (Hz)
CRITICAL_BAND_CENTRES_HZ = (
    50.0, 120.0, 190.0, 260.0, 330.0, 400.0, 470.0, 540.0, 617.372, 703.378,
    798.717, 904.128, 1020.38, 1148.30, 1288.72, 1442.54, 1610.70, 1794.16,
    1993.93, 2211.08, 2446.71, 2701.97, 2978.04, 3276.17, 3597.63,
)
CRITICAL_BAND_WIDTHS_HZ = (
    70.0, 70.0, 70.0, 70.0, 70.0, 70.0, 70.0, 77.3724, 86.0056, 95.3398,
    105.411, 116.256, 127.914, 140.423, 153.823, 168.154, 183.457, 199.776,
    217.153, 235.631, 255.255, 276.072, 298.126, 321.465, 346.136,
)


@dataclass(frozen=True)
class FwsnrConfig:
    frame_ms: float = 25.0
    overlap: float = 0.4
    gamma: float = 0.2
    clip_db: tuple[float, float] = (-10.0, 35.0)
    # Gaussian band weights below this level (dB) are zeroed
    band_floor_db: float = -30.0
    # scale each frame's magnitude spectrum to unit area, so the score
    # compares spectral shape and ignores frame-by-frame level
    normalize_frames: bool = True

    @property
    def frame_len(self) -> int:
        return int(round(self.frame_ms * 1e-3 * SAMPLE_RATE))

    @property
    def hop(self) -> int:
        return max(1, int(round(self.frame_len * (1.0 - self.overlap))))

    @property
    def nfft(self) -> int:
        return 1 << int(np.ceil(np.log2(2 * self.frame_len)))


def critical_band_filters(cfg: FwsnrConfig = FwsnrConfig()) -> NDArray[np.float64]:
    """Gaussian critical-band weights over FFT bins, shape ``(25, nfft/2)``."""
    half = cfg.nfft // 2
    nyquist = SAMPLE_RATE / 2.0
    bw_min = CRITICAL_BAND_WIDTHS_HZ[0]
    j = np.arange(half)
    floor = np.exp(cfg.band_floor_db / (2.0 * 2.303))
    rows = []
    for fc, bw_hz in zip(CRITICAL_BAND_CENTRES_HZ, CRITICAL_BAND_WIDTHS_HZ):
        f0 = fc / nyquist * half
        bw = bw_hz / nyquist * half
        w = np.exp(-11.0 * ((j - np.floor(f0)) / bw) ** 2 + np.log(bw_min) - np.log(bw_hz))
        rows.append(np.where(w > floor, w, 0.0))
    return np.array(rows)


def _frame_magnitudes(x, cfg: FwsnrConfig):
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_len)[:: cfg.hop]
    win = signal.windows.hann(cfg.frame_len, sym=False)
    mag = np.abs(np.fft.rfft(frames * win, cfg.nfft, axis=-1))[:, : cfg.nfft // 2]
    if cfg.normalize_frames:
        area = mag.sum(axis=1, keepdims=True)
        mag = np.divide(mag, area, out=np.zeros_like(mag), where=area > 0)
    return mag


def fwsnr(reference: ArrayLike, processed: ArrayLike, cfg: FwsnrConfig = FwsnrConfig()) -> float:
    """Frequency-weighted segmental SNR in dB.

    Band SNRs are clipped to ``cfg.clip_db`` before the weighted average, so
    the result is bounded by the clip range. Frames where the reference has
    no energy in any band are skipped. With ``cfg.normalize_frames`` (the
    default) a processed frame that is a scaled copy of the reference frame
    scores the upper clip; set it to False for a level-sensitive score.
    """
    ref = np.asarray(reference, dtype=np.float64)
    proc = np.asarray(processed, dtype=np.float64)
    if ref.shape != proc.shape:
        raise ValueError(f"length mismatch: {ref.shape} vs {proc.shape}")
    if len(ref) < cfg.frame_len:
        raise ValueError("signal shorter than one analysis frame")
    bands = critical_band_filters(cfg)
    e_ref = _frame_magnitudes(ref, cfg) @ bands.T
    e_proc = _frame_magnitudes(proc, cfg) @ bands.T
    err = (e_ref - e_proc) ** 2
    # error-free bands sit at the upper clip
    with np.errstate(divide="ignore", invalid="ignore"):
        band_snr = np.where(err > 0, 10.0 * np.log10(e_ref**2 / err), np.inf)
    band_snr = np.clip(band_snr, *cfg.clip_db)
    weights = e_ref**cfg.gamma
    total = weights.sum(axis=1)
    active = total > 0
    if not np.any(active):
        raise SilentSignalError("reference signal is silent")
    per_frame = (weights[active] * band_snr[active]).sum(axis=1) / total[active]
    return float(per_frame.mean())


def snr(clean: ArrayLike, degraded: ArrayLike) -> float:
    """SNR after removing the least-squares projection of `degraded` on `clean`."""
    c = np.asarray(clean, dtype=np.float64)
    d = np.asarray(degraded, dtype=np.float64)
    if c.shape != d.shape:
        raise ValueError(f"length mismatch: {c.shape} vs {d.shape}")
    p_clean = np.mean(c**2)
    if p_clean == 0:
        raise SilentSignalError("clean signal is silent")
    alpha = np.dot(d, c) / np.dot(c, c)
    p_res = np.mean((d - alpha * c) ** 2)
    if p_res <= p_clean * 10.0 ** (-SNR_CAP_DB / 10.0):
        return SNR_CAP_DB
    return float(10.0 * np.log10(p_clean / p_res))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "audiogram", "noise", "fitting", "front_end", "fwsnr_mean", "lspec_mean", "snr_gain_mean", "n_utts",
)


@dataclass(frozen=True)
class EvalRow:
    audiogram: str
    noise: str
    fitting: str
    front_end: str
    fwsnr_mean: float
    lspec_mean: float
    snr_gain_mean: float
    n_utts: int
    utterance_digest: str = field(default="", compare=False)
    per_utterance: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.n_utts <= 0:
            raise ValueError("a report row needs at least one utterance")


def utterance_digest(ids: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(ids).encode()).hexdigest()[:16]


def condition_name(label: str, front_end: str) -> str:
    """Table-style condition name such as ``G+W``."""
    return label + ("+W" if front_end == "wiener" else "")


def evaluate_fitting(
    dataset: Sequence[Utterance],
    f: Fitting,
    a: Audiogram,
    front_end: str = "none",
    source: str = "noisy",
    problem=None,
    wiener: WienerConfig = WienerConfig(),
    fw_cfg: FwsnrConfig = FwsnrConfig(),
    noise: str | None = None,
) -> EvalRow:
    """Run every utterance through the aided pipeline and average the scores.

    `problem` may be a prebuilt :class:`hafit.optimizer.FittingProblem` for
    `a`, which saves rebuilding the hearing-loss models.
    """
    from hafit.optimizer import FittingProblem

    if len(dataset) == 0:
        raise ValueError("evaluation needs at least one utterance")
    if front_end not in ("none", "wiener"):
        raise ValueError(f"unknown front end {front_end!r}")
    problem = problem or FittingProblem(a)
    cal = problem.calibration
    scores, lspecs, gains = [], [], []
    for u in dataset:
        clean = normalize_spl(u.clean, PRESENTATION_LEVEL_DB, cal)
        degraded = np.asarray(u.clean if source == "clean" else u.noisy, np.float64)
        if front_end == "wiener":
            enhanced = wiener_enhance(degraded, wiener)
            gains.append(snr(u.clean, enhanced) - snr(u.clean, degraded))
            degraded = enhanced
        degraded = normalize_spl(degraded, PRESENTATION_LEVEL_DB, cal)
        ref = problem.reference(clean)
        out = problem.aided(f.gains, degraded)
        scores.append(fwsnr(ref, out, fw_cfg))
        lspecs.append(spec_loss(out / cal.ref_rms, ref / cal.ref_rms))
    noises = sorted({u.noise for u in dataset})
    return EvalRow(
        audiogram=a.name,
        noise=noise or ("+".join(noises) if source == "noisy" else "clean"),
        fitting=f.label,
        front_end=front_end,
        fwsnr_mean=float(np.mean(scores)),
        lspec_mean=float(np.mean(lspecs)),
        snr_gain_mean=float(np.mean(gains)) if gains else 0.0,
        n_utts=len(dataset),
        utterance_digest=utterance_digest([u.id for u in dataset]),
        per_utterance=tuple(scores),
    )


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    manifest_hash: str = ""

    def __post_init__(self):
        groups: dict[tuple[str, str], set[str]] = {}
        for r in self.rows:
            groups.setdefault((r.audiogram, r.noise), set()).add(r.utterance_digest)
        if any(len(g) > 1 for g in groups.values()):
            raise ValueError("rows compared within a condition use different utterance sets")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([
                r.audiogram, r.noise, r.fitting, r.front_end,
                f"{r.fwsnr_mean:.6f}", f"{r.lspec_mean:.6f}", f"{r.snr_gain_mean:.6f}", r.n_utts,
            ])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
