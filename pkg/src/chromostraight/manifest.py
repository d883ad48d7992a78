"""Run configuration and sample manifests.

A manifest is a JSON file listing every sample in a dataset; the run
configuration mirrors the CLI flags.  Both reject unknown keys so
typos fail loudly instead of silently using defaults.  Every random
choice in a run is derived from (run seed, sample id), which keeps
parallel and serial runs bit-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunConfig:
    patch_h: int = 8
    patch_w: int = 16
    mask_ratio: float = 0.70
    threshold_t: float = 18.0
    prune_ratio: float = 0.1
    grid_rows: int = 16
    canvas_h: int = 128
    canvas_w: int = 32
    seed: int = 0
    synth_variants: int = 5
    gap_threshold: float = 6.0
    noise_stddev: float = 25.0
    workers: int = 1

    def __post_init__(self):
        if self.canvas_h % self.grid_rows != 0:
            raise ValueError(
                f"canvas height {self.canvas_h} not divisible into "
                f"{self.grid_rows} grid rows")
        if self.canvas_h % self.patch_h != 0:
            raise ValueError("canvas height must be a multiple of patch height")
        if self.patch_w > self.canvas_w:
            raise ValueError("patch width exceeds canvas width")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask ratio {self.mask_ratio} outside [0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **overrides)


@dataclass
class SampleRecord:
    """One dataset sample as stored in a manifest."""

    id: str
    image_path: str
    split: str | None = None
    group_id: str | None = None
    kind: str = "real"
    axis: list[list[int]] | None = None
    mask_indices: list[int] | None = None
    seed: int | None = None
    fold: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if self.kind not in ("real", "synthetic"):
            raise ValueError(f"unknown sample kind {self.kind!r}")

    @property
    def group(self) -> str:
        """Grouping key: synthetic variants inherit their source's id."""
        return self.group_id or self.id


def load_manifest(path: str | os.PathLike) -> tuple[list[SampleRecord], dict]:
    """Read a manifest; returns (records, extra top-level metadata)."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, list):
        entries, extra = data, {}
    else:
        entries = data.get("samples", [])
        extra = {k: v for k, v in data.items() if k != "samples"}
    known = {f.name for f in dataclasses.fields(SampleRecord)}
    records = []
    for entry in entries:
        unknown = set(entry) - known
        if unknown:
            raise ValueError(
                f"unknown manifest keys {sorted(unknown)} in sample "
                f"{entry.get('id', '?')!r}")
        records.append(SampleRecord(**entry))
    ids = [rec.id for rec in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sample ids in manifest")
    return records, extra


def save_manifest(records: list[SampleRecord], path: str | os.PathLike,
                  extra: dict | None = None) -> None:
    payload = dict(extra or {})
    payload["samples"] = [
        {k: v for k, v in dataclasses.asdict(rec).items() if v is not None}
        for rec in records
    ]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def sample_seed(run_seed: int, sample_id: str, purpose: str = "") -> int:
    """Stable per-sample seed; identical across platforms and runs."""
    digest = hashlib.sha256(
        f"{run_seed}:{purpose}:{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def assign_folds(records: list[SampleRecord], n_folds: int = 5,
                 seed: int = 0) -> dict[str, int]:
    """Deal groups round-robin onto folds after a seeded shuffle.

    Every sample of a group (a source chromosome and its synthetic
    variants) lands in the same fold by construction.
    """
    if n_folds < 1:
        raise ValueError("need at least one fold")
    groups = sorted({rec.group for rec in records})
    rng = np.random.default_rng([seed, len(groups)])
    order = list(rng.permutation(len(groups)))
    return {groups[g]: i % n_folds for i, g in enumerate(order)}
