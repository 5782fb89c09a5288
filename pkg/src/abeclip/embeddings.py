"""Embedding data model and cosine-similarity primitives.

Holds one image's global + patch vectors, one caption's global + token
vectors, and the token-by-patch cosine matrix everything downstream reads.
All vectors are promoted to float64 on construction so score arithmetic is
independent of how bundles store them on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVectorError, DimensionMismatchError, ValidationError

Span = tuple[int, int]

COSINE_TOL = 1e-6


def _as_readonly_f64(arr, name: str, ndim: int) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValidationError(f"{name} contains non-finite values")
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    return out


def _check_no_zero_rows(mat: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(mat, axis=-1)
    if np.any(norms == 0.0):
        idx = int(np.argmin(norms))
        raise DegenerateVectorError(f"{name} contains a zero-norm vector at row {idx}")


@dataclass(frozen=True)
class ImageEmbedding:
    """One image: a global vector plus per-patch vectors, all of dimension d."""

    id: str
    cls: np.ndarray
    patches: np.ndarray
    patch_grid: tuple[int, int] | None = None

    def __post_init__(self):
        cls = _as_readonly_f64(self.cls, "cls", 1)
        patches = _as_readonly_f64(self.patches, "patches", 2)
        if patches.shape[0] < 1 or patches.shape[1] < 1:
            raise ValidationError(f"patches must be non-empty, got shape {patches.shape}")
        if cls.shape[0] != patches.shape[1]:
            raise DimensionMismatchError(
                f"cls has dim {cls.shape[0]} but patches have dim {patches.shape[1]}"
            )
        _check_no_zero_rows(cls[None, :], "cls")
        _check_no_zero_rows(patches, "patches")
        if self.patch_grid is not None:
            rows, cols = self.patch_grid
            if rows * cols != patches.shape[0]:
                raise ValidationError(
                    f"patch_grid {self.patch_grid} does not cover {patches.shape[0]} patches"
                )
        object.__setattr__(self, "cls", cls)
        object.__setattr__(self, "patches", patches)

    @property
    def n_patches(self) -> int:
        return self.patches.shape[0]

    @property
    def dim(self) -> int:
        return self.patches.shape[1]


@dataclass(frozen=True)
class TextEncoding:
    """One caption: a global vector plus per-token vectors and token metadata.

    ``content_mask`` marks the tokens that carry caption text; special and
    padding tokens stay in place (so indices line up with exporter metadata)
    but are skipped by score aggregation. Char spans are half-open intervals
    into ``caption`` and are empty exactly for non-content tokens.
    """

    id: str
    caption: str
    eot: np.ndarray
    tokens: np.ndarray
    token_texts: tuple[str, ...]
    char_spans: tuple[Span, ...]
    content_mask: np.ndarray

    def __post_init__(self):
        eot = _as_readonly_f64(self.eot, "eot", 1)
        tokens = _as_readonly_f64(self.tokens, "tokens", 2)
        m = tokens.shape[0]
        if m < 1:
            raise ValidationError("a text encoding needs at least one token")
        if eot.shape[0] != tokens.shape[1]:
            raise DimensionMismatchError(
                f"eot has dim {eot.shape[0]} but tokens have dim {tokens.shape[1]}"
            )
        _check_no_zero_rows(eot[None, :], "eot")
        _check_no_zero_rows(tokens, "tokens")

        texts = tuple(self.token_texts)
        spans = tuple((int(s), int(e)) for s, e in self.char_spans)
        mask = np.asarray(self.content_mask, dtype=bool)
        mask.setflags(write=False)
        if not (len(texts) == len(spans) == mask.shape[0] == m):
            raise ValidationError(
                f"token metadata lengths {len(texts)}/{len(spans)}/{mask.shape[0]} "
                f"do not match {m} token rows"
            )
        if not mask.any():
            raise ValidationError("at least one content token is required")

        n = len(self.caption)
        prev_end = -1
        for i, (s, e) in enumerate(spans):
            if mask[i]:
                if not (0 <= s < e <= n):
                    raise ValidationError(
                        f"content token {i} has char span [{s},{e}) outside caption of length {n}"
                    )
                if s < prev_end:
                    raise ValidationError(
                        f"content token {i} char span [{s},{e}) overlaps the previous one"
                    )
                prev_end = e
            elif s != e:
                raise ValidationError(f"non-content token {i} must carry an empty char span")

        object.__setattr__(self, "eot", eot)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "token_texts", texts)
        object.__setattr__(self, "char_spans", spans)
        object.__setattr__(self, "content_mask", mask)

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    def with_tokens(self, tokens: np.ndarray) -> "TextEncoding":
        """Copy of this encoding with the token matrix replaced."""
        return TextEncoding(
            id=self.id,
            caption=self.caption,
            eot=self.eot,
            tokens=tokens,
            token_texts=self.token_texts,
            char_spans=self.char_spans,
            content_mask=self.content_mask,
        )


@dataclass(frozen=True)
class SimilarityMatrix:
    """Token-by-patch cosine similarities, shape (M, N)."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _as_readonly_f64(self.values, "values", 2)
        if np.any(np.abs(values) > 1.0 + COSINE_TOL):
            worst = float(np.max(np.abs(values)))
            raise ValidationError(f"similarity entries must lie in [-1, 1], got |{worst}|")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def cosine(u, v) -> float:
    """Cosine similarity of two equal-length vectors.

    Raises ``DegenerateVectorError`` on zero-norm input rather than returning
    a silent 0 or NaN.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise DimensionMismatchError(f"cosine needs equal-length vectors, got {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine is undefined for zero-norm vectors")
    return float(np.dot(u, v) / (nu * nv))


def similarity_matrix(text: TextEncoding, image: ImageEmbedding) -> SimilarityMatrix:
    """Cosine of every token row against every patch row.

    Rows for masked tokens are computed too; downstream aggregation decides
    what to keep via the content mask.
    """
    if text.dim != image.dim:
        raise DimensionMismatchError(
            f"text dim {text.dim} does not match image dim {image.dim}"
        )
    t = text.tokens / np.linalg.norm(text.tokens, axis=1, keepdims=True)
    p = image.patches / np.linalg.norm(image.patches, axis=1, keepdims=True)
    return SimilarityMatrix(values=t @ p.T)
