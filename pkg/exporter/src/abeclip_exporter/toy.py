"""Deterministic stand-in encoder.

Produces embeddings that behave like a tiny contextual encoder without any
model weights: every token has a hash-seeded base direction, contextual
mixing folds in neighboring tokens and position, and image patches hash
their pixel block. Identical inputs always produce identical bytes, which
is what the export pipeline's tests need; nothing about these vectors is
semantically meaningful.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

_WORD_RE = re.compile(r"[A-Za-z0-9]+")

MAX_TOKENS = 77  # matches the CLIP-family text window
SUBWORD_LEN = 4

START_TOKEN = "<|start|>"
END_TOKEN = "<|end|>"

_CONTEXT_MIX = 0.35
_POSITION_MIX = 0.15


@dataclass
class TokenizedText:
    token_texts: list[str]
    char_spans: list[tuple[int, int]]
    content_mask: list[bool]
    truncated: bool


def _seeded_unit(dim: int, *parts: str) -> np.ndarray:
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    vec = np.random.Generator(np.random.PCG64(seed)).standard_normal(dim)
    return vec / np.linalg.norm(vec)


def tokenize(caption: str) -> TokenizedText:
    """Word split plus fixed-width subword chunking, with char offsets."""
    pieces: list[tuple[str, int, int]] = []
    for match in _WORD_RE.finditer(caption):
        word, start = match.group(0), match.start()
        for i in range(0, len(word), SUBWORD_LEN):
            chunk = word[i : i + SUBWORD_LEN]
            pieces.append((chunk, start + i, start + i + len(chunk)))
    budget = MAX_TOKENS - 2
    truncated = len(pieces) > budget
    pieces = pieces[:budget]

    token_texts = [START_TOKEN] + [p[0] for p in pieces] + [END_TOKEN]
    char_spans = [(0, 0)] + [(p[1], p[2]) for p in pieces] + [(0, 0)]
    content_mask = [False] + [True] * len(pieces) + [False]
    return TokenizedText(token_texts, char_spans, content_mask, truncated)


class ToyEncoder:
    """Hash-based text/image encoder with a fixed shared dimension."""

    def __init__(self, dim: int = 64, patch_grid: int = 7):
        if dim < 8:
            raise ValueError("dim must be at least 8")
        self.dim = dim
        self.patch_grid = patch_grid

    # -- text ----------------------------------------------------------

    def _token_vectors(self, tokens: TokenizedText) -> np.ndarray:
        bases = [_seeded_unit(self.dim, "tok", t.lower()) for t in tokens.token_texts]
        out = []
        for i, base in enumerate(bases):
            neighbors = []
            if i > 0:
                neighbors.append(bases[i - 1])
            if i + 1 < len(bases):
                neighbors.append(bases[i + 1])
            context = np.mean(neighbors, axis=0)
            position = _seeded_unit(self.dim, "pos", str(i))
            out.append(base + _CONTEXT_MIX * context + _POSITION_MIX * position)
        return np.stack(out)

    def encode_text(self, caption: str):
        """Token matrix, global vector, and token metadata for one caption."""
        if not caption.strip():
            raise ValueError("caption is empty")
        tokens = tokenize(caption)
        vectors = self._token_vectors(tokens)
        content = vectors[np.asarray(tokens.content_mask)]
        if len(content) == 0:
            raise ValueError(f"caption has no encodable words: {caption!r}")
        eot = content.mean(axis=0) + _seeded_unit(self.dim, "eot-bias")
        return vectors, eot, tokens

    def encode_phrase(self, attribute: str | None, obj: str) -> np.ndarray:
        """Mean embedding of the object's subword tokens inside the phrase.

        A ``None`` attribute encodes the bare object, which keeps this path
        byte-identical with concept-pool entries for the same concept.
        """
        phrase = obj if attribute is None else f"{attribute} {obj}"
        tokens = tokenize(phrase)
        vectors = self._token_vectors(tokens)
        obj_start = phrase.index(obj, 0 if attribute is None else len(attribute))
        span = (obj_start, obj_start + len(obj))
        rows = [
            vectors[i]
            for i, (s, e) in enumerate(tokens.char_spans)
            if tokens.content_mask[i] and s < span[1] and span[0] < e
        ]
        if not rows:
            raise ValueError(f"object {obj!r} not found in encoded phrase {phrase!r}")
        return np.mean(rows, axis=0)

    # -- images --------------------------------------------------------

    def encode_image(self, path):
        """Per-patch hash vectors plus a global vector; grid is fixed."""
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            side = self.patch_grid * 8
            rgb = rgb.resize((side, side), Image.BILINEAR)
            pixels = np.asarray(rgb, dtype=np.uint8)
        patches = []
        for row in range(self.patch_grid):
            for col in range(self.patch_grid):
                block = pixels[row * 8 : (row + 1) * 8, col * 8 : (col + 1) * 8]
                digest = hashlib.sha256(block.tobytes()).hexdigest()
                base = _seeded_unit(self.dim, "patch", digest)
                brightness = float(block.mean()) / 255.0
                patches.append(base + brightness * _seeded_unit(self.dim, "bright"))
        patches = np.stack(patches)
        cls = patches.mean(axis=0) + _seeded_unit(self.dim, "cls-bias")
        return cls, patches, (self.patch_grid, self.patch_grid)
