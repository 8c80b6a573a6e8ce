"""Dataset manifests for pre-mixed clean/noisy corpora.

A corpus root holds ``clean/`` and ``noisy/`` directories of WAV files with
matching names. An optional ``meta.csv`` (columns ``id,noise,snr_db,split``)
supplies noise tags, mixing SNRs and split assignments; utterances missing
from it get noise ``unknown`` and a split derived from a hash of their id.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from hafit.signal_core import (
    DEFAULT_CALIBRATION,
    PRESENTATION_LEVEL_DB,
    Calibration,
    highpass_80,
    normalize_spl,
    read_wav,
)
from hafit.synthetic import Utterance

MANIFEST_SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
# clean and noisy lengths may differ by up to one analysis frame
LENGTH_TOLERANCE = 1024


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    clean: str
    noisy: str
    noise: str
    snr_db: float | None
    split: str
    n_samples: int
    clean_sha256: str
    noisy_sha256: str


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    entries: tuple[ManifestEntry, ...]
    hash: str

    def select(self, split: str | None = None, noise: str | None = None) -> list[ManifestEntry]:
        if split is not None and split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [
            e for e in self.entries
            if (split is None or e.split == split) and (noise is None or e.noise == noise)
        ]

    def to_json(self) -> str:
        payload = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "root": self.root,
            "hash": self.hash,
            "entries": [asdict(e) for e in self.entries],
        }
        return json.dumps(payload, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        payload = json.loads(Path(path).read_text())
        if payload.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise IngestError(f"{path}: unsupported manifest schema {payload.get('schema_version')!r}")
        entries = tuple(ManifestEntry(**e) for e in payload["entries"])
        digest = entries_hash(entries)
        if digest != payload["hash"]:
            raise IngestError(f"{path}: manifest hash does not match its entries")
        return cls(payload["root"], entries, digest)


def entries_hash(entries: Sequence[ManifestEntry]) -> str:
    blob = json.dumps([asdict(e) for e in sorted(entries, key=lambda e: e.id)], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def default_split(uid: str) -> str:
    bucket = int(hashlib.sha1(uid.encode()).hexdigest(), 16) % 10
    return "train" if bucket < 8 else ("val" if bucket == 8 else "test")


def _read_meta(root: Path) -> dict[str, dict]:
    path = root / "meta.csv"
    if not path.is_file():
        return {}
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    meta = {}
    for row in rows:
        split = row.get("split") or None
        if split is not None and split not in SPLITS:
            raise IngestError(f"{path}: unknown split {split!r} for {row['id']}")
        snr = row.get("snr_db")
        meta[row["id"]] = {
            "noise": row.get("noise") or "unknown",
            "snr_db": float(snr) if snr not in (None, "") else None,
            "split": split,
        }
    return meta


def ingest(root, manifest_out=None) -> DatasetManifest:
    """Pair, validate and hash a corpus; optionally write the manifest."""
    root = Path(root)
    clean_dir, noisy_dir = root / "clean", root / "noisy"
    if not clean_dir.is_dir() or not noisy_dir.is_dir():
        raise IngestError(f"{root}: expected clean/ and noisy/ subdirectories")
    clean = {p.stem: p for p in sorted(clean_dir.glob("*.wav"))}
    noisy = {p.stem: p for p in sorted(noisy_dir.glob("*.wav"))}
    orphans = sorted(set(clean) ^ set(noisy))
    if orphans:
        raise IngestError(f"orphan files without a partner: {', '.join(orphans)}")
    if not clean:
        raise IngestError(f"{root}: no WAV files found")
    meta = _read_meta(root)

    entries = []
    for uid in sorted(clean):
        c, n = read_wav(clean[uid]), read_wav(noisy[uid])
        if abs(len(c) - len(n)) > LENGTH_TOLERANCE:
            raise IngestError(f"{uid}: clean has {len(c)} samples, noisy has {len(n)}")
        info = meta.get(uid, {})
        entries.append(ManifestEntry(
            id=uid,
            clean=str(clean[uid].relative_to(root)),
            noisy=str(noisy[uid].relative_to(root)),
            noise=info.get("noise", "unknown"),
            snr_db=info.get("snr_db"),
            split=info.get("split") or default_split(uid),
            n_samples=min(len(c), len(n)),
            clean_sha256=_file_digest(clean[uid]),
            noisy_sha256=_file_digest(noisy[uid]),
        ))
    manifest = DatasetManifest(str(root), tuple(entries), entries_hash(entries))
    if manifest_out is not None:
        manifest.save(manifest_out)
    return manifest


def load_utterances(
    manifest: DatasetManifest,
    split: str | None = None,
    noise: str | None = None,
    limit: int | None = None,
    cal: Calibration = DEFAULT_CALIBRATION,
) -> list[Utterance]:
    """Read pairs, high-pass them at 80 Hz and present both at 65 dB SPL."""
    root = Path(manifest.root)
    out = []
    for e in manifest.select(split, noise)[:limit]:
        c = highpass_80(read_wav(root / e.clean))[: e.n_samples]
        n = highpass_80(read_wav(root / e.noisy))[: e.n_samples]
        out.append(Utterance(
            e.id,
            normalize_spl(c, PRESENTATION_LEVEL_DB, cal),
            normalize_spl(n, PRESENTATION_LEVEL_DB, cal),
            e.noise,
            e.snr_db,
        ))
    return out


def write_corpus(root, utterances: Sequence[Utterance], splits: Sequence[str] | None = None) -> None:
    """Write utterances as a corpus tree (float WAVs plus ``meta.csv``)."""
    from hafit.signal_core import write_wav

    root = Path(root)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    (root / "noisy").mkdir(parents=True, exist_ok=True)
    rows = []
    for i, u in enumerate(utterances):
        write_wav(np.asarray(u.clean), root / "clean" / f"{u.id}.wav", "float32")
        write_wav(np.asarray(u.noisy), root / "noisy" / f"{u.id}.wav", "float32")
        split = splits[i] if splits is not None else default_split(u.id)
        rows.append({"id": u.id, "noise": u.noise, "snr_db": "" if u.snr_db is None else u.snr_db, "split": split})
    with (root / "meta.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, ["id", "noise", "snr_db", "split"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
