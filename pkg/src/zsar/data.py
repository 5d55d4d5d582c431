"""Feature-file IO: a record-oriented binary container plus a JSON manifest.

Binary layout (little-endian):
    header: magic b"ZSVF", u32 version, u32 d_st, u32 frames, u32 vocab,
            u32 record count (24 bytes total)
    per record: d_st float32 spatio-temporal values, then frames*vocab
            float32 object probabilities.

The manifest maps video_id -> byte offset, label, split, and a CRC32 of the
record payload, and carries a SHA-256 of the whole binary file. Loading
checks, in order: expected length (truncation), whole-file checksum
(corruption), then magic/version — each failure is a distinct error.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (ChecksumError, InvalidDatasetError, ManifestVersionError,
                     TruncatedPayloadError)
from .video_embed import FeatureRecord

MAGIC = b"ZSVF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")
MANIFEST_FORMAT = "zsar-features"


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    offset: int
    crc32: int
    label: str | None = None
    split: str | None = None


@dataclass
class Manifest:
    feature_file: str
    d_st: int
    frames: int
    vocab_size: int
    payload_sha256: str
    entries: list[ManifestEntry]
    version: int = VERSION

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": self.version,
            "feature_file": self.feature_file,
            "d_st": self.d_st,
            "frames": self.frames,
            "vocab_size": self.vocab_size,
            "payload_sha256": self.payload_sha256,
            "records": [
                {"video_id": e.video_id, "offset": e.offset, "crc32": e.crc32,
                 "label": e.label, "split": e.split}
                for e in self.entries
            ],
        }

    @property
    def record_nbytes(self) -> int:
        return 4 * (self.d_st + self.frames * self.vocab_size)


def write_dataset(directory: str | Path, records: list[FeatureRecord],
                  splits: dict[str, str] | None = None,
                  name: str = "features") -> Path:
    """Write records and manifest into a directory; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if records:
        d_st = records[0].st_feature.shape[0]
        frames, vocab = records[0].frame_object_probs.shape
    else:
        d_st, frames, vocab = 0, 0, 0
    bin_path = directory / f"{name}.bin"
    entries = []
    with bin_path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, d_st, frames, vocab, len(records)))
        offset = _HEADER.size
        for rec in records:
            if rec.st_feature.shape[0] != d_st or rec.frame_object_probs.shape != (frames, vocab):
                raise InvalidDatasetError(
                    f"{rec.video_id}: shapes differ from the first record")
            payload = (np.asarray(rec.st_feature, dtype="<f4").tobytes()
                       + np.asarray(rec.frame_object_probs, dtype="<f4").tobytes())
            fh.write(payload)
            entries.append(ManifestEntry(
                video_id=rec.video_id, offset=offset,
                crc32=zlib.crc32(payload), label=rec.label,
                split=(splits or {}).get(rec.video_id)))
            offset += len(payload)
    sha = hashlib.sha256(bin_path.read_bytes()).hexdigest()
    manifest = Manifest(feature_file=bin_path.name, d_st=d_st, frames=frames,
                        vocab_size=vocab, payload_sha256=sha, entries=entries)
    manifest_path = directory / f"{name}.manifest.json"
    write_manifest(manifest, manifest_path)
    return manifest_path


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_manifest(path: str | Path) -> Manifest:
    """Parse and fully validate a manifest + feature file pair."""
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    if raw.get("format") != MANIFEST_FORMAT:
        raise ManifestVersionError(
            f"{path}: not a {MANIFEST_FORMAT} manifest")
    manifest = Manifest(
        feature_file=raw["feature_file"], d_st=raw["d_st"],
        frames=raw["frames"], vocab_size=raw["vocab_size"],
        payload_sha256=raw["payload_sha256"],
        entries=[ManifestEntry(r["video_id"], r["offset"], r["crc32"],
                               r.get("label"), r.get("split"))
                 for r in raw["records"]],
        version=raw["version"])

    bin_path = path.parent / manifest.feature_file
    if not bin_path.exists():
        raise TruncatedPayloadError(f"feature file missing: {bin_path}")
    data = bin_path.read_bytes()
    expected = _HEADER.size + len(manifest.entries) * manifest.record_nbytes
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"{bin_path}: {len(data)} bytes, expected {expected}")
    sha = hashlib.sha256(data).hexdigest()
    if sha != manifest.payload_sha256:
        raise ChecksumError(
            f"{bin_path}: sha256 {sha[:12]}... != manifest {manifest.payload_sha256[:12]}...")
    magic, version, d_st, frames, vocab, count = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION or manifest.version != VERSION:
        raise ManifestVersionError(
            f"{bin_path}: magic/version {magic!r}/{version} unsupported "
            f"(expected {MAGIC!r}/{VERSION})")
    if (d_st, frames, vocab) != (manifest.d_st, manifest.frames, manifest.vocab_size):
        raise InvalidDatasetError(
            f"{bin_path}: header dims {(d_st, frames, vocab)} disagree with manifest")
    if count != len(manifest.entries):
        raise InvalidDatasetError(
            f"{bin_path}: header count {count} != manifest records {len(manifest.entries)}")
    return manifest


class FeatureDataset:
    """Lazy reader over a validated manifest + binary file."""

    def __init__(self, manifest_path: str | Path):
        self.manifest_path = Path(manifest_path)
        self.manifest = load_manifest(self.manifest_path)
        self._data = (self.manifest_path.parent / self.manifest.feature_file).read_bytes()
        self._by_id = {e.video_id: e for e in self.manifest.entries}

    def __len__(self) -> int:
        return len(self.manifest.entries)

    def video_ids(self) -> list[str]:
        return [e.video_id for e in self.manifest.entries]

    def _read(self, entry: ManifestEntry) -> FeatureRecord:
        m = self.manifest
        end = entry.offset + m.record_nbytes
        payload = self._data[entry.offset:end]
        if len(payload) != m.record_nbytes:
            raise TruncatedPayloadError(
                f"{entry.video_id}: record at offset {entry.offset} out of bounds")
        if zlib.crc32(payload) != entry.crc32:
            raise ChecksumError(
                f"{entry.video_id}: record checksum mismatch at offset {entry.offset}")
        st = np.frombuffer(payload, dtype="<f4", count=m.d_st).astype(np.float64)
        probs = np.frombuffer(payload, dtype="<f4", offset=4 * m.d_st).astype(
            np.float64).reshape(m.frames, m.vocab_size)
        return FeatureRecord(video_id=entry.video_id, st_feature=st,
                             frame_object_probs=probs, label=entry.label)

    def get(self, video_id: str) -> FeatureRecord:
        if video_id not in self._by_id:
            raise InvalidDatasetError(f"unknown video id {video_id!r}")
        return self._read(self._by_id[video_id])

    def __iter__(self):
        for entry in self.manifest.entries:
            yield self._read(entry)

    def records(self, split: str | None = None,
                labels: set[str] | None = None) -> list[FeatureRecord]:
        out = []
        for entry in self.manifest.entries:
            if split is not None and entry.split != split:
                continue
            if labels is not None and entry.label not in labels:
                continue
            out.append(self._read(entry))
        return out

    def verify(self) -> None:
        """Touch every record so offset/CRC integrity is fully checked."""
        for entry in self.manifest.entries:
            self._read(entry)
