"""Deterministic speech-like signals and noises for desk-scale experiments.

No speech corpus ships with the package, so tests and demos use a
source-filter imitation of connected speech: a jittered glottal pulse
train shaped by vowel formants, syllabic amplitude envelopes, fricative
bursts, pauses and a silent lead-in (which the Wiener front end relies on
for its noise initialisation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import signal

from hafit.signal_core import (
    DEFAULT_CALIBRATION,
    PRESENTATION_LEVEL_DB,
    SAMPLE_RATE,
    Calibration,
    highpass_80,
    normalize_spl,
    rms,
)

# first three formants (Hz) of a handful of vowels
VOWEL_FORMANTS = (
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (300.0, 870.0, 2240.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
    (660.0, 1720.0, 2410.0),
)
NOISE_KINDS = ("white", "traffic", "kitchen", "babble")


def _resonator(x: NDArray[np.float64], fc: float, bw: float) -> NDArray[np.float64]:
    r = np.exp(-np.pi * bw / SAMPLE_RATE)
    theta = 2.0 * np.pi * fc / SAMPLE_RATE
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return signal.lfilter([1.0 - r], a, x)


def _voiced(n: int, rng: np.random.Generator, f0: float, formants) -> NDArray[np.float64]:
    t = np.arange(n) / SAMPLE_RATE
    contour = f0 * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(1.5, 3.0) * t + rng.uniform(0, 2 * np.pi)))
    contour *= 1.0 + 0.01 * rng.standard_normal(n).cumsum() / np.sqrt(n)
    phase = np.cumsum(contour) / SAMPLE_RATE
    pulses = np.diff(np.floor(phase), prepend=0.0)
    # spectral tilt of the glottal source
    source = signal.lfilter([1.0], [1.0, -0.97], pulses)
    out = np.zeros(n)
    for k, fc in enumerate(formants):
        out += _resonator(source, fc * rng.uniform(0.95, 1.05), 60.0 + 40.0 * k) * 0.6**k
    return out


def _fricative(n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    lo = rng.uniform(2500.0, 4500.0)
    sos = signal.butter(4, [lo, min(lo * 2.2, 12000.0)], "bandpass", fs=SAMPLE_RATE, output="sos")
    return signal.sosfilt(sos, rng.standard_normal(n))


def _ramp(n: int, attack: int) -> NDArray[np.float64]:
    env = np.ones(n)
    attack = max(1, min(attack, n // 2))
    ramp = np.sin(0.5 * np.pi * np.arange(attack) / attack) ** 2
    env[:attack] = ramp
    env[n - attack:] = ramp[::-1]
    return env


def speech_like(
    duration: float = 2.0,
    seed: int = 0,
    level_db: float = PRESENTATION_LEVEL_DB,
    lead_silence: float = 0.25,
    trail_silence: float = 0.15,
    f0: float | None = None,
    cal: Calibration = DEFAULT_CALIBRATION,
) -> NDArray[np.float64]:
    """A speech-like utterance of `duration` seconds normalized to `level_db`."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * SAMPLE_RATE))
    start = int(lead_silence * SAMPLE_RATE)
    stop = n - int(trail_silence * SAMPLE_RATE)
    if stop - start < int(0.1 * SAMPLE_RATE):
        raise ValueError("duration too short for the requested silences")
    f0 = rng.uniform(95.0, 210.0) if f0 is None else f0
    out = np.zeros(n)
    pos = start
    while pos < stop:
        seg = int(rng.uniform(0.12, 0.28) * SAMPLE_RATE)
        seg = min(seg, stop - pos)
        if seg < 256:
            break
        vowel = VOWEL_FORMANTS[rng.integers(len(VOWEL_FORMANTS))]
        v = _voiced(seg, rng, f0, vowel)
        out[pos:pos + seg] += v / (rms(v) + 1e-12) * _ramp(seg, seg // 4) * rng.uniform(0.6, 1.0)
        pos += seg
        if rng.random() < 0.5 and pos < stop:
            fr = min(int(rng.uniform(0.04, 0.1) * SAMPLE_RATE), stop - pos)
            if fr > 64:
                f = _fricative(fr, rng)
                out[pos:pos + fr] += f / (rms(f) + 1e-12) * _ramp(fr, fr // 3) * 0.3
                pos += fr
        pos += int(rng.uniform(0.02, 0.08 if rng.random() < 0.8 else 0.25) * SAMPLE_RATE)
    # the pulse source carries a large DC component; remove it the way
    # corpus loading conditions recorded speech
    return normalize_spl(highpass_80(out), level_db, cal)


def noise(kind: str, n: int, seed: int = 0) -> NDArray[np.float64]:
    """Unit-RMS noise of the given kind.

    ``traffic`` is low-frequency rumble, ``kitchen`` is high-frequency hiss
    with clatter transients, ``babble`` sums several talkers.
    """
    rng = np.random.default_rng(seed)
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "traffic":
        sos = signal.butter(2, 400.0, "lowpass", fs=SAMPLE_RATE, output="sos")
        x = signal.sosfilt(sos, rng.standard_normal(n))
        t = np.arange(n) / SAMPLE_RATE
        x *= 1.0 + 0.3 * np.sin(2 * np.pi * 0.3 * t + rng.uniform(0, 2 * np.pi))
    elif kind == "kitchen":
        sos = signal.butter(2, 2000.0, "highpass", fs=SAMPLE_RATE, output="sos")
        x = signal.sosfilt(sos, rng.standard_normal(n))
        for _ in range(max(1, n // SAMPLE_RATE * 3)):
            at = rng.integers(n)
            length = min(int(0.03 * SAMPLE_RATE), n - at)
            x[at:at + length] += 3.0 * rng.standard_normal(length) * np.exp(-np.arange(length) / 200.0)
    elif kind == "babble":
        d = n / SAMPLE_RATE
        x = sum(
            speech_like(d, seed=int(rng.integers(2**31)), lead_silence=0.0, trail_silence=0.0)
            for _ in range(6)
        )
    else:
        raise ValueError(f"unknown noise kind {kind!r}; choose from {NOISE_KINDS}")
    return x / rms(x)


def mix(clean: NDArray[np.float64], noise_: NDArray[np.float64], snr_db: float) -> NDArray[np.float64]:
    """Add `noise_` scaled so that the mixture has the requested SNR."""
    if len(noise_) != len(clean):
        raise ValueError("clean and noise lengths differ")
    scale = rms(clean) / (rms(noise_) * 10.0 ** (snr_db / 20.0))
    return clean + scale * noise_


@dataclass(frozen=True, eq=False)
class Utterance:
    """A clean/noisy pair at the presentation level."""

    id: str
    clean: NDArray[np.float64]
    noisy: NDArray[np.float64]
    noise: str = "unknown"
    snr_db: float | None = None

    def __post_init__(self):
        if len(self.clean) != len(self.noisy):
            raise ValueError(f"{self.id}: clean and noisy lengths differ")


def make_utterances(
    count: int,
    kind: str = "traffic",
    snr_db: float = 5.0,
    duration: float = 1.0,
    seed: int = 0,
    level_db: float = PRESENTATION_LEVEL_DB,
) -> list[Utterance]:
    """`count` synthetic pairs, each normalized to `level_db` after mixing.

    The mixture is high-passed at 80 Hz, matching how corpus pairs are loaded.
    """
    out = []
    for i in range(count):
        clean = speech_like(duration, seed=seed * 100003 + i, level_db=level_db)
        noisy = mix(clean, noise(kind, len(clean), seed=seed * 100003 + i + 7919), snr_db)
        noisy = normalize_spl(highpass_80(noisy), level_db)
        out.append(Utterance(f"syn{seed}_{i:04d}", clean, noisy, kind, snr_db))
    return out
