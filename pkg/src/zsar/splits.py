"""Benchmark split construction: derive genuinely-new classes from two
taxonomy generations, then partition them into validation/test sets across
several independently seeded splits.

A class in the newer taxonomy counts as new only if its name is absent from
the older taxonomy AND it shares less than a threshold fraction of videos
with any old class (renames keep their videos, so video overlap is the
disambiguating cue). Split files are canonical JSON: identical inputs yield
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, MalformedInputError, SplitLeakageError

SPLIT_FORMAT = "zsar-split"
SPLIT_VERSION = 1


@dataclass
class ClassCatalog:
    """Two taxonomy generations plus video-level overlap evidence."""

    old_classes: list[str]
    new_classes: list[str]
    new_class_videos: dict[str, list[str]] = field(default_factory=dict)
    old_video_labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.old_classes)) != len(self.old_classes):
            raise MalformedInputError("duplicate names in old taxonomy")
        if len(set(self.new_classes)) != len(self.new_classes):
            raise MalformedInputError("duplicate names in new taxonomy")

    def to_dict(self) -> dict:
        return {
            "old_classes": self.old_classes,
            "new_classes": self.new_classes,
            "new_class_videos": self.new_class_videos,
            "old_video_labels": self.old_video_labels,
        }

    @classmethod
    def from_json(cls, path: str | Path) -> "ClassCatalog":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(raw["old_classes"], raw["new_classes"],
                   raw.get("new_class_videos", {}),
                   raw.get("old_video_labels", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


def derive_new_classes(catalog: ClassCatalog,
                       overlap_threshold: float = 0.5) -> list[str]:
    """Names in the new taxonomy that are genuinely new, sorted."""
    if not catalog.old_classes or not catalog.new_classes:
        raise MalformedInputError("both taxonomies must be non-empty")
    old_names = set(catalog.old_classes)
    result = []
    for name in catalog.new_classes:
        if name in old_names:
            continue
        videos = catalog.new_class_videos.get(name, [])
        if videos:
            shared = sum(1 for v in videos if v in catalog.old_video_labels)
            if shared / len(videos) >= overlap_threshold:
                continue
        result.append(name)
    return sorted(result)


@dataclass
class SplitSpec:
    """One seeded partition of class names."""

    seed: int
    split_index: int
    seen: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        self.seen = tuple(self.seen)
        self.val = tuple(self.val)
        self.test = tuple(self.test)
        self.check_leakage()

    def check_leakage(self) -> None:
        seen, val, test = set(self.seen), set(self.val), set(self.test)
        if val & test:
            raise SplitLeakageError(
                f"val/test overlap: {sorted(val & test)[:5]}")
        leaked = seen & (val | test)
        if leaked:
            raise SplitLeakageError(
                f"seen classes leak into unseen sets: {sorted(leaked)[:5]}")

    def to_dict(self) -> dict:
        return {
            "format": SPLIT_FORMAT,
            "version": SPLIT_VERSION,
            "seed": self.seed,
            "split_index": self.split_index,
            "seen": list(self.seen),
            "val": list(self.val),
            "test": list(self.test),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if raw.get("format") != SPLIT_FORMAT or raw.get("version") != SPLIT_VERSION:
            raise MalformedInputError(f"{path}: not a v{SPLIT_VERSION} split file")
        return cls(seed=raw["seed"], split_index=raw["split_index"],
                   seen=raw["seen"], val=raw["val"], test=raw["test"])


def build_splits(new_classes: list[str], seen_classes: list[str],
                 n_splits: int = 3, n_val: int = 60, n_test: int = 160,
                 seeds: list[int] | None = None) -> list[SplitSpec]:
    """Uniformly shuffle the new classes per seed, then cut val/test."""
    if n_val + n_test > len(new_classes):
        raise InvalidArgumentError(
            f"need {n_val}+{n_test} classes, have {len(new_classes)}")
    if seeds is None:
        seeds = [1000 + i for i in range(n_splits)]
    if len(seeds) != n_splits:
        raise InvalidArgumentError("one seed per split required")
    base = sorted(new_classes)
    specs = []
    for i, seed in enumerate(seeds, start=1):
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(base))
        shuffled = [base[j] for j in order]
        specs.append(SplitSpec(
            seed=seed, split_index=i,
            seen=tuple(sorted(seen_classes)),
            val=tuple(shuffled[:n_val]),
            test=tuple(shuffled[n_val:n_val + n_test])))
    return specs
