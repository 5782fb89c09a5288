"""Token-to-patch pooling: per-token top-K patch selection and aggregation.

Selection is deterministic (ties go to the lowest patch index) and the
means are exactly rounded via ``math.fsum``, so results do not depend on
summation order or platform reduction tricks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import SimilarityMatrix


@dataclass(frozen=True)
class AlignmentParams:
    """Top-K patch count used when pooling one token's similarities."""

    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class TokenAlignment:
    """One token's selected patches and pooled score."""

    token_index: int
    patch_indices: tuple[int, ...]
    token_score: float


def _check_k(k: int, n: int) -> None:
    # Never clamp silently: an out-of-range K would corrupt parameter sweeps.
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")


def topk_indices(row, k: int) -> tuple[int, ...]:
    """Indices of the K largest values, ties broken by lowest index first."""
    row = np.asarray(row, dtype=np.float64)
    _check_k(k, row.shape[0])
    order = np.argsort(-row, kind="stable")
    return tuple(int(i) for i in order[:k])


def token_score(row, k: int) -> float:
    """Mean similarity over the token's top-K patches."""
    row = np.asarray(row, dtype=np.float64)
    idx = topk_indices(row, k)
    return math.fsum(float(row[i]) for i in idx) / k


def align_tokens(sim: SimilarityMatrix, mask, k: int) -> list[TokenAlignment]:
    """Per-token alignment records for every unmasked token."""
    values = sim.values
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != values.shape[0]:
        raise ValueError(
            f"mask length {mask.shape[0]} does not match {values.shape[0]} token rows"
        )
    _check_k(k, values.shape[1])
    out = []
    for i in np.flatnonzero(mask):
        idx = topk_indices(values[i], k)
        score = math.fsum(float(values[i][j]) for j in idx) / k
        out.append(TokenAlignment(token_index=int(i), patch_indices=idx, token_score=score))
    return out


def aggregate_score(sim: SimilarityMatrix, mask, k: int) -> float:
    """Mean of token scores over unmasked tokens."""
    alignments = align_tokens(sim, mask, k)
    if not alignments:
        raise ValueError("no unmasked tokens to aggregate")
    return math.fsum(a.token_score for a in alignments) / len(alignments)
