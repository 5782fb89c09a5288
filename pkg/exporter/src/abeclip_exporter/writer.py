"""Bundle writer for the export pipeline.

Implements the bundle directory layout consumed by the scoring engine:
``manifest.json`` plus a single ``vectors.bin`` blob of little-endian
float32 rows. Deliberately independent of the scoring package's own writer
so round-trip tests exercise the file format instead of shared code.

Bundles are written atomically: everything lands in a ``<name>.tmp``
directory that is renamed into place once complete.
"""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DTYPE = "f32le"
BLOB_NAME = "vectors.bin"


class BundleWriter:
    def __init__(self, root, kind: str, dim: int):
        self.root = Path(root)
        self.kind = kind
        self.dim = int(dim)
        self.items: list[dict] = []
        self._chunks: list[bytes] = []
        self._offset = 0

    def vector_ref(self, rows) -> dict:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.shape[1] != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {rows.shape[1]}")
        if not np.isfinite(rows).all():
            raise ValueError("refusing to write non-finite vectors")
        if np.any(np.linalg.norm(rows, axis=1) == 0.0):
            raise ValueError("refusing to write zero-norm vectors")
        raw = rows.astype("<f4").tobytes()
        ref = {"file": BLOB_NAME, "byte_offset": self._offset}
        self._chunks.append(raw)
        self._offset += len(raw)
        return ref

    def add_item(self, item: dict) -> None:
        self.items.append(item)

    def write(self, extra_manifest: dict | None = None) -> Path:
        staging = self.root.with_name(self.root.name + ".tmp")
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        (staging / BLOB_NAME).write_bytes(b"".join(self._chunks))
        manifest = {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "dim": self.dim,
            "dtype": DTYPE,
            "items": self.items,
        }
        if extra_manifest:
            manifest.update(extra_manifest)
        (staging / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n", "utf-8"
        )
        if self.root.exists():
            shutil.rmtree(self.root)
        os.replace(staging, self.root)
        return self.root
