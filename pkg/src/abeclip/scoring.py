"""Per-pair score computation: base, refined, binding difference, fusion.

One image-text pair yields six numbers: the pooled token-patch score before
and after refinement, the absolute gap between them (a refinement-effect
signal), their sum as the local score, the plain global cosine, and the
omega-weighted fusion of local and global. The local score is deliberately
unclamped and may exceed 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .alignment import aggregate_score
from .captions import CaptionStructure
from .embeddings import ImageEmbedding, TextEncoding, cosine, similarity_matrix
from .refinement import ConceptPool, PhraseEmbeddingTable, RefinementParams, refine_encoding


@dataclass(frozen=True)
class ScoreParams:
    """Everything score_pair needs besides the data itself."""

    omega: float = 0.3
    k: int = 5
    p: int = 5
    include_special_tokens: bool = False

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must be in [0, 1], got {self.omega}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")

    @property
    def refinement(self) -> RefinementParams:
        return RefinementParams(p=self.p)


@dataclass(frozen=True)
class ScoreReport:
    """All score components for one image-text pair."""

    image_id: str
    text_id: str
    s_base: float
    s_refine: float
    delta: float
    s_local: float
    s_global: float
    s_final: float
    params: ScoreParams = field(compare=False)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "text_id": self.text_id,
            "s_base": self.s_base,
            "s_refine": self.s_refine,
            "delta": self.delta,
            "s_local": self.s_local,
            "s_global": self.s_global,
            "s_final": self.s_final,
            "omega": self.params.omega,
            "k": self.params.k,
            "p": self.params.p,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def binding_difference(s_refine: float, s_base: float) -> float:
    """Absolute gap between refined and base local scores."""
    return abs(s_refine - s_base)


def global_score(text: TextEncoding, image: ImageEmbedding) -> float:
    """Plain global cosine between the caption and image summary vectors."""
    return cosine(text.eot, image.cls)


def final_score(s_local: float, s_global: float, omega: float) -> float:
    """Blend local and global scores; omega=1 is global only, omega=0 local only."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must be in [0, 1], got {omega}")
    return (1.0 - omega) * s_local + omega * s_global


def _score_mask(text: TextEncoding, include_special_tokens: bool) -> np.ndarray:
    if include_special_tokens:
        return np.ones(text.n_tokens, dtype=bool)
    return text.content_mask


def score_pair(
    image: ImageEmbedding,
    text: TextEncoding,
    structure: CaptionStructure,
    pool: ConceptPool,
    table: PhraseEmbeddingTable,
    params: ScoreParams,
) -> ScoreReport:
    """Score one image-text pair end to end.

    The caption structure must already be resolved against ``text``. Missing
    phrase-table entries abort the pair with an error naming every missing
    key; no partial refinement is applied.
    """
    mask = _score_mask(text, params.include_special_tokens)

    s_base = aggregate_score(similarity_matrix(text, image), mask, params.k)

    refined = refine_encoding(text, structure, pool, table, params.refinement)
    if refined is text:
        s_refine = s_base
    else:
        s_refine = aggregate_score(similarity_matrix(refined, image), mask, params.k)

    delta = binding_difference(s_refine, s_base)
    s_local = s_refine + delta
    s_global = global_score(text, image)
    s_final = final_score(s_local, s_global, params.omega)

    return ScoreReport(
        image_id=image.id,
        text_id=text.id,
        s_base=s_base,
        s_refine=s_refine,
        delta=delta,
        s_local=s_local,
        s_global=s_global,
        s_final=s_final,
        params=params,
    )
