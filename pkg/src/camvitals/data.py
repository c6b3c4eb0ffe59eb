"""On-disk training dataset: one tensor container per window plus a manifest.

Each window file holds four tensors — motion (T, 36, 36, 3), appearance
(T, 36, 36, 3) raw standardized frames, bvp (T,), resp (T,) — and the
manifest JSON lists the files, frame rate, window length, and an optional
train/val split by index.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import vtf

SCHEMA_VERSION = 1
_WINDOW_KEYS = ("motion", "appearance", "bvp", "resp")


@dataclass
class TrainingSet:
    """In-memory window dataset shared by every architecture."""

    motion: np.ndarray       # (N, T, H, W, 3)
    appearance: np.ndarray   # (N, T, H, W, 3)
    bvp: np.ndarray          # (N, T)
    resp: np.ndarray         # (N, T)
    fps: float
    window_len: int

    def __len__(self) -> int:
        return len(self.motion)

    def subset(self, indices) -> "TrainingSet":
        idx = np.asarray(indices, dtype=int)
        return TrainingSet(self.motion[idx], self.appearance[idx],
                           self.bvp[idx], self.resp[idx], self.fps, self.window_len)


def save_dataset(out_dir, dataset: TrainingSet, split: dict | None = None) -> str:
    """Write per-window containers plus the manifest; returns manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    windows_dir = os.path.join(out_dir, "windows")
    os.makedirs(windows_dir, exist_ok=True)
    files = []
    for i in range(len(dataset)):
        rel = os.path.join("windows", f"w_{i:05d}.vtf")
        vtf.write_tensors(os.path.join(out_dir, rel), {
            "motion": dataset.motion[i],
            "appearance": dataset.appearance[i],
            "bvp": dataset.bvp[i],
            "resp": dataset.resp[i],
        })
        files.append(rel)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "fps": dataset.fps,
        "window_len": dataset.window_len,
        "windows": files,
    }
    if split is not None:
        manifest["split"] = {k: [int(i) for i in v] for k, v in split.items()}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def load_dataset(manifest_path, split: str | None = None) -> TrainingSet:
    """Load a window dataset; ``split`` selects a named index subset."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key in ("fps", "window_len", "windows"):
        if key not in manifest:
            raise ValueError(f"dataset manifest is missing required field: {key}")
    base = os.path.dirname(os.path.abspath(manifest_path))
    files = manifest["windows"]
    if split is not None:
        splits = manifest.get("split", {})
        if split not in splits:
            raise ValueError(f"manifest has no split named {split!r}")
        files = [manifest["windows"][i] for i in splits[split]]
    if not files:
        raise ValueError("dataset manifest lists no windows")
    parts = {key: [] for key in _WINDOW_KEYS}
    for rel in files:
        tensors = vtf.read_tensors(os.path.join(base, rel))
        for key in _WINDOW_KEYS:
            if key not in tensors:
                raise ValueError(f"window file {rel} is missing tensor {key!r}")
            parts[key].append(tensors[key])
    return TrainingSet(
        motion=np.stack(parts["motion"]),
        appearance=np.stack(parts["appearance"]),
        bvp=np.stack(parts["bvp"]),
        resp=np.stack(parts["resp"]),
        fps=float(manifest["fps"]),
        window_len=int(manifest["window_len"]),
    )
