"""NAL-R baseline prescription and the standard audiograms N1, N2, N4."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from hafit.ha_processor import ANCHOR_FREQS_HZ, DEFAULT_GAIN_BOUNDS, Fitting
from hafit.hearing_loss import AUDIOGRAM_FREQS_HZ, Audiogram

STANDARD_AUDIOGRAMS = {
    "N1": (10.0, 10.0, 10.0, 15.0, 30.0, 40.0),
    "N2": (20.0, 20.0, 25.0, 35.0, 45.0, 50.0),
    "N4": (55.0, 55.0, 55.0, 65.0, 75.0, 80.0),
}

# frequency-specific NAL-R constants at 250, 500, 1k, 2k, 4k, 6k Hz
NAL_R_CORRECTIONS_DB = (-17.0, -8.0, 1.0, -1.0, -2.0, -2.0)


class MalformedAudiogramError(ValueError):
    pass


def standard_audiogram(name: str) -> Audiogram:
    try:
        return Audiogram(STANDARD_AUDIOGRAMS[name], name)
    except KeyError:
        raise KeyError(f"unknown standard audiogram {name!r}; choose from {sorted(STANDARD_AUDIOGRAMS)}") from None


def nal_r(a: Audiogram, clamp: bool = True) -> Fitting:
    """NAL-R insertion gains at the six anchor frequencies.

    ``gain(f) = X + 0.31 HL(f) + C(f)`` with ``X = 0.05 (HL500 + HL1k + HL2k)``.
    Negative gains are clamped to 0 dB when `clamp` is set.
    """
    hl = a.levels
    x = (hl[1] + hl[2] + hl[3]) / 20.0
    gains = x + 31.0 * hl / 100.0 + np.array(NAL_R_CORRECTIONS_DB)
    if clamp:
        gains = np.maximum(gains, 0.0)
    gains = np.clip(np.round(gains, 6), *DEFAULT_GAIN_BOUNDS)
    return Fitting(tuple(gains), "N")


def save_audiogram(a: Audiogram, path) -> None:
    payload = {"name": a.name, "frequencies_hz": list(AUDIOGRAM_FREQS_HZ), "hl_db": list(a.hl_db)}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_audiogram(path) -> Audiogram:
    """Read an audiogram JSON file with ``name``, ``frequencies_hz`` and ``hl_db``."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedAudiogramError(f"{path}: {exc}") from exc
    if not isinstance(payload, dict) or "hl_db" not in payload:
        raise MalformedAudiogramError(f"{path}: missing 'hl_db'")
    freqs = payload.get("frequencies_hz", list(AUDIOGRAM_FREQS_HZ))
    hl = payload["hl_db"]
    if len(hl) != len(AUDIOGRAM_FREQS_HZ) or len(freqs) != len(hl):
        raise MalformedAudiogramError(
            f"{path}: expected {len(AUDIOGRAM_FREQS_HZ)} thresholds, got {len(hl)}"
        )
    if not np.allclose(freqs, AUDIOGRAM_FREQS_HZ):
        raise MalformedAudiogramError(f"{path}: frequencies must be {list(AUDIOGRAM_FREQS_HZ)}")
    try:
        return Audiogram(tuple(hl), str(payload.get("name", Path(path).stem)))
    except ValueError as exc:
        raise MalformedAudiogramError(f"{path}: {exc}") from exc


def resolve_audiogram(spec: str) -> Audiogram:
    """A standard audiogram name or a path to an audiogram file."""
    if spec in STANDARD_AUDIOGRAMS:
        return standard_audiogram(spec)
    if spec.lower() == "normal":
        return Audiogram.normal()
    return load_audiogram(spec)


__all__ = [
    "ANCHOR_FREQS_HZ",
    "NAL_R_CORRECTIONS_DB",
    "STANDARD_AUDIOGRAMS",
    "MalformedAudiogramError",
    "load_audiogram",
    "nal_r",
    "resolve_audiogram",
    "save_audiogram",
    "standard_audiogram",
]
