"""Reader and writer for embedding bundle directories.

A bundle is a directory holding ``manifest.json`` plus raw blob files of
little-endian float32 vectors stored contiguously row-major. The manifest
carries ``format_version`` (1), ``kind`` (one of image / text / concept_pool
/ phrase_table), ``dim``, ``dtype`` ("f32le") and an ``items`` array whose
record shape depends on the kind:

    image:        {id, n_patches, cls: {file, byte_offset},
                   patches: {file, byte_offset}, patch_grid?}
    text:         {id, caption, tokens: {file, byte_offset},
                   eot: {file, byte_offset}, token_texts, char_spans,
                   content_mask}
    concept_pool: {concept, vec: {file, byte_offset}}
    phrase_table: {attribute, object, vec: {file, byte_offset}}

Byte ranges are validated against blob sizes before any vector is read, and
every vector is checked finite and non-zero at load time so degenerate
exports fail here rather than mid-scoring. Values are promoted to float64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .embeddings import ImageEmbedding, TextEncoding
from .errors import BundleFormatError
from .refinement import ConceptPool, PhraseEmbeddingTable

FORMAT_VERSION = 1
DTYPE = "f32le"
KINDS = ("image", "text", "concept_pool", "phrase_table")

_MANIFEST = "manifest.json"
_BLOB = "vectors.bin"


class _BlobReader:
    """Validated random access into a bundle's blob files."""

    def __init__(self, root: Path):
        self.root = root
        self._cache: dict[str, bytes] = {}

    def _blob(self, name: str) -> bytes:
        if name not in self._cache:
            path = self.root / name
            if not path.is_file():
                raise BundleFormatError(f"{self.root}: blob file {name!r} not found")
            self._cache[name] = path.read_bytes()
        return self._cache[name]

    def read(self, ref, count: int, dim: int, what: str) -> np.ndarray:
        try:
            name = ref["file"]
            offset = int(ref["byte_offset"])
        except (TypeError, KeyError, ValueError) as exc:
            raise BundleFormatError(f"{self.root}: bad blob reference for {what}: {ref!r}") from exc
        blob = self._blob(name)
        nbytes = count * dim * 4
        if offset < 0 or offset + nbytes > len(blob):
            raise BundleFormatError(
                f"{self.root}: {what} byte range [{offset}, {offset + nbytes}) "
                f"outside blob {name!r} of {len(blob)} bytes"
            )
        flat = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset)
        return flat.reshape(count, dim).astype(np.float64)


def _load_manifest(path, kind: str) -> tuple[dict, Path]:
    root = Path(path)
    manifest_path = root / _MANIFEST
    if not manifest_path.is_file():
        raise BundleFormatError(f"{root}: no {_MANIFEST}")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"{manifest_path}: malformed JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleFormatError(f"{root}: unsupported format_version {version!r}")
    if manifest.get("dtype") != DTYPE:
        raise BundleFormatError(f"{root}: unsupported dtype {manifest.get('dtype')!r}")
    actual_kind = manifest.get("kind")
    if actual_kind not in KINDS:
        raise BundleFormatError(f"{root}: unknown kind {actual_kind!r}")
    if actual_kind != kind:
        raise BundleFormatError(f"{root}: expected kind {kind!r}, found {actual_kind!r}")
    dim = manifest.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise BundleFormatError(f"{root}: dim must be a positive integer, got {dim!r}")
    if not isinstance(manifest.get("items"), list):
        raise BundleFormatError(f"{root}: items must be a list")
    return manifest, root


def load_image_bundle(path) -> dict[str, ImageEmbedding]:
    """Load an image bundle into ImageEmbeddings keyed by id."""
    manifest, root = _load_manifest(path, "image")
    dim = manifest["dim"]
    blobs = _BlobReader(root)
    out: dict[str, ImageEmbedding] = {}
    for item in manifest["items"]:
        try:
            image_id = str(item["id"])
            n_patches = int(item["n_patches"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleFormatError(f"{root}: bad image item {item!r}") from exc
        if n_patches < 1:
            raise BundleFormatError(f"{root}: image {image_id!r} declares {n_patches} patches")
        if image_id in out:
            raise BundleFormatError(f"{root}: duplicate image id {image_id!r}")
        cls = blobs.read(item["cls"], 1, dim, f"image {image_id!r} cls")[0]
        patches = blobs.read(item["patches"], n_patches, dim, f"image {image_id!r} patches")
        grid = item.get("patch_grid")
        try:
            out[image_id] = ImageEmbedding(
                id=image_id,
                cls=cls,
                patches=patches,
                patch_grid=tuple(grid) if grid is not None else None,
            )
        except Exception as exc:
            if isinstance(exc, BundleFormatError):
                raise
            raise BundleFormatError(f"{root}: image {image_id!r}: {exc}") from exc
    return out


def load_text_bundle(path) -> dict[str, TextEncoding]:
    """Load a text bundle into TextEncodings keyed by id."""
    manifest, root = _load_manifest(path, "text")
    dim = manifest["dim"]
    blobs = _BlobReader(root)
    out: dict[str, TextEncoding] = {}
    for item in manifest["items"]:
        try:
            text_id = str(item["id"])
            caption = str(item["caption"])
            token_texts = list(item["token_texts"])
            char_spans = [(int(s), int(e)) for s, e in item["char_spans"]]
            content_mask = [bool(b) for b in item["content_mask"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleFormatError(f"{root}: bad text item {item!r}") from exc
        m = len(token_texts)
        if not (len(char_spans) == len(content_mask) == m) or m < 1:
            raise BundleFormatError(
                f"{root}: text {text_id!r} metadata counts disagree "
                f"({m}/{len(char_spans)}/{len(content_mask)})"
            )
        if text_id in out:
            raise BundleFormatError(f"{root}: duplicate text id {text_id!r}")
        tokens = blobs.read(item["tokens"], m, dim, f"text {text_id!r} tokens")
        eot = blobs.read(item["eot"], 1, dim, f"text {text_id!r} eot")[0]
        try:
            out[text_id] = TextEncoding(
                id=text_id,
                caption=caption,
                eot=eot,
                tokens=tokens,
                token_texts=tuple(token_texts),
                char_spans=tuple(char_spans),
                content_mask=np.array(content_mask, dtype=bool),
            )
        except Exception as exc:
            if isinstance(exc, BundleFormatError):
                raise
            raise BundleFormatError(f"{root}: text {text_id!r}: {exc}") from exc
    return out


def load_concept_pool(path) -> ConceptPool:
    """Load a concept_pool bundle."""
    manifest, root = _load_manifest(path, "concept_pool")
    dim = manifest["dim"]
    blobs = _BlobReader(root)
    concepts: list[str] = []
    vectors: list[np.ndarray] = []
    for item in manifest["items"]:
        try:
            concept = str(item["concept"])
        except (KeyError, TypeError) as exc:
            raise BundleFormatError(f"{root}: bad concept item {item!r}") from exc
        concepts.append(concept)
        vectors.append(blobs.read(item["vec"], 1, dim, f"concept {concept!r}")[0])
    if not concepts:
        raise BundleFormatError(f"{root}: concept pool has no items")
    try:
        return ConceptPool(concepts=tuple(concepts), base_embeddings=np.stack(vectors))
    except Exception as exc:
        if isinstance(exc, BundleFormatError):
            raise
        raise BundleFormatError(f"{root}: {exc}") from exc


def load_phrase_table(path) -> PhraseEmbeddingTable:
    """Load a phrase_table bundle."""
    manifest, root = _load_manifest(path, "phrase_table")
    dim = manifest["dim"]
    blobs = _BlobReader(root)
    entries: dict[tuple[str, str], np.ndarray] = {}
    for item in manifest["items"]:
        attribute = item.get("attribute", None)
        if attribute is None:
            # Reserved by the format; blank-attribute embeddings belong in
            # the concept pool, so a null attribute here is an export bug.
            raise BundleFormatError(
                f"{root}: phrase item {item!r} has null attribute; "
                "blank entries belong in the concept pool"
            )
        try:
            obj = str(item["object"])
        except (KeyError, TypeError) as exc:
            raise BundleFormatError(f"{root}: bad phrase item {item!r}") from exc
        key = (str(attribute), obj)
        if key in entries:
            raise BundleFormatError(f"{root}: duplicate phrase entry {key!r}")
        entries[key] = blobs.read(item["vec"], 1, dim, f"phrase {key!r}")[0]
    try:
        return PhraseEmbeddingTable(entries)
    except Exception as exc:
        if isinstance(exc, BundleFormatError):
            raise
        raise BundleFormatError(f"{root}: {exc}") from exc


class BundleWriter:
    """Incrementally writes one bundle directory.

    Mostly used to build test fixtures and synthetic benchmarks; the real
    export pipeline has its own independent writer so that round-trip tests
    exercise the format, not shared code.
    """

    def __init__(self, root, kind: str, dim: int):
        if kind not in KINDS:
            raise ValueError(f"unknown bundle kind {kind!r}")
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.root = Path(root)
        self.kind = kind
        self.dim = dim
        self.items: list[dict] = []
        self._chunks: list[bytes] = []
        self._offset = 0

    def _append_vectors(self, arr: np.ndarray, count: int) -> dict:
        arr = np.asarray(arr, dtype=np.float64).reshape(count, self.dim)
        raw = arr.astype("<f4").tobytes()
        ref = {"file": _BLOB, "byte_offset": self._offset}
        self._chunks.append(raw)
        self._offset += len(raw)
        return ref

    def add_image(self, image: ImageEmbedding) -> None:
        item = {
            "id": image.id,
            "n_patches": image.n_patches,
            "cls": self._append_vectors(image.cls, 1),
            "patches": self._append_vectors(image.patches, image.n_patches),
        }
        if image.patch_grid is not None:
            item["patch_grid"] = list(image.patch_grid)
        self.items.append(item)

    def add_text(self, text: TextEncoding) -> None:
        self.items.append(
            {
                "id": text.id,
                "caption": text.caption,
                "tokens": self._append_vectors(text.tokens, text.n_tokens),
                "eot": self._append_vectors(text.eot, 1),
                "token_texts": list(text.token_texts),
                "char_spans": [list(span) for span in text.char_spans],
                "content_mask": [bool(b) for b in text.content_mask],
            }
        )

    def add_concept(self, concept: str, vec) -> None:
        self.items.append({"concept": concept, "vec": self._append_vectors(vec, 1)})

    def add_phrase(self, attribute: str, obj: str, vec) -> None:
        self.items.append(
            {"attribute": attribute, "object": obj, "vec": self._append_vectors(vec, 1)}
        )

    def write(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / _BLOB).write_bytes(b"".join(self._chunks))
        manifest = {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "dim": self.dim,
            "dtype": DTYPE,
            "items": self.items,
        }
        (self.root / _MANIFEST).write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n", "utf-8"
        )
        return self.root


def write_image_bundle(root, images, dim: int) -> Path:
    writer = BundleWriter(root, "image", dim)
    for image in images:
        writer.add_image(image)
    return writer.write()


def write_text_bundle(root, texts, dim: int) -> Path:
    writer = BundleWriter(root, "text", dim)
    for text in texts:
        writer.add_text(text)
    return writer.write()


def write_concept_pool(root, pool: ConceptPool) -> Path:
    writer = BundleWriter(root, "concept_pool", pool.dim)
    for concept in pool.concepts:
        writer.add_concept(concept, pool.base_embedding(concept))
    return writer.write()


def write_phrase_table(root, table: PhraseEmbeddingTable, dim: int) -> Path:
    writer = BundleWriter(root, "phrase_table", dim)
    for attribute, obj in sorted(table.keys()):
        writer.add_phrase(attribute, obj, table.get(attribute, obj))
    return writer.write()
