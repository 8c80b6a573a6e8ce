"""Fitting files and run configuration (JSON with a schema version)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from hafit.ha_processor import ANCHOR_FREQS_HZ, Fitting
from hafit.optimizer import TrainConfig
from hafit.signal_core import Calibration, StftConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def fitting_to_dict(f: Fitting, provenance: dict | None = None) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "label": f.label,
        "frequencies_hz": list(ANCHOR_FREQS_HZ),
        "gains_db": list(f.gains_db),
        "bounds_db": list(f.bounds),
    }
    if provenance:
        payload["provenance"] = provenance
    return payload


def save_fitting(f: Fitting, path, provenance: dict | None = None) -> None:
    Path(path).write_text(json.dumps(fitting_to_dict(f, provenance), indent=2) + "\n")


def load_fitting(path) -> Fitting:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"fitting file not found: {path}")
    try:
        payload = json.loads(path.read_text())
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {payload.get('schema_version')!r}")
        if list(payload.get("frequencies_hz", ANCHOR_FREQS_HZ)) != list(ANCHOR_FREQS_HZ):
            raise ConfigError("fitting frequencies must be the six audiometric anchors")
        return Fitting(tuple(payload["gains_db"]), payload.get("label", "custom"), tuple(payload.get("bounds_db", (-10.0, 60.0))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs besides the manifest.

    Defaults reproduce the published training recipe; ``train`` holds the
    optimizer settings.
    """

    audiogram: str = "N2"
    noise: str | None = None
    front_end: str = "none"
    source: str = "noisy"
    train: TrainConfig = field(default_factory=TrainConfig)
    full_scale_spl: float = 100.0
    smearing_stft: tuple[int, int] = (1024, 256)
    loss_stft: tuple[int, int] = (1024, 256)
    output_dir: str = "runs"
    max_utterances: int | None = None

    def __post_init__(self):
        if self.front_end not in ("none", "wiener"):
            raise ConfigError(f"front_end must be 'none' or 'wiener', got {self.front_end!r}")
        if self.source not in ("clean", "noisy"):
            raise ConfigError(f"source must be 'clean' or 'noisy', got {self.source!r}")
        object.__setattr__(self, "smearing_stft", tuple(self.smearing_stft))
        object.__setattr__(self, "loss_stft", tuple(self.loss_stft))

    @property
    def calibration(self) -> Calibration:
        return Calibration.from_full_scale_spl(self.full_scale_spl)

    @property
    def smearing_config(self) -> StftConfig:
        return StftConfig(*self.smearing_stft, window_kind="hamming")

    @property
    def loss_config(self) -> StftConfig:
        return StftConfig(*self.loss_stft, window_kind="hann")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_dict()
        d["smearing_stft"] = list(self.smearing_stft)
        d["loss_stft"] = list(self.loss_stft)
        return {"schema_version": SCHEMA_VERSION, **d}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "RunConfig":
        payload = dict(payload)
        version = payload.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}")
        _reject_unknown(payload, {f.name for f in fields(cls)}, "config")
        train = payload.pop("train", {})
        _reject_unknown(train, {f.name for f in fields(TrainConfig)}, "train")
        if "gain_bounds" in train:
            train["gain_bounds"] = tuple(train["gain_bounds"])
        try:
            return cls(train=TrainConfig(**train), **payload)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(payload)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def override(self, **changes) -> "RunConfig":
        """Apply non-None overrides; keys prefixed ``train_`` go to TrainConfig."""
        top = {k: v for k, v in changes.items() if v is not None and not k.startswith("train_")}
        train = {k[len("train_"):]: v for k, v in changes.items() if v is not None and k.startswith("train_")}
        try:
            return replace(self, train=replace(self.train, **train), **top)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _reject_unknown(payload: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")
