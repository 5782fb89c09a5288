"""Binding-vector refinement of attribute and object token embeddings.

For each attribute-object pair in a caption, the object's nearest concepts
are looked up in a pool, phrase embeddings with and without the attribute
are contrasted into positive/negative binding vectors, and the pair's token
embeddings are rewritten in place: object tokens move toward their own
attribute and away from the other pairs' attributes, attribute tokens gain
the (original) object direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .captions import CaptionStructure
from .embeddings import TextEncoding, _as_readonly_f64, _check_no_zero_rows
from .errors import DimensionMismatchError, MissingPhraseEntriesError, ValidationError

PhraseKey = tuple[str, str]


@dataclass(frozen=True)
class ConceptPool:
    """Concept vocabulary with one blank-context base embedding per concept."""

    concepts: tuple[str, ...]
    base_embeddings: np.ndarray

    def __post_init__(self):
        base = _as_readonly_f64(self.base_embeddings, "base_embeddings", 2)
        concepts = tuple(self.concepts)
        if len(concepts) != base.shape[0]:
            raise ValidationError(
                f"{len(concepts)} concepts but {base.shape[0]} base embeddings"
            )
        if len(set(concepts)) != len(concepts):
            raise ValidationError("concept names must be unique")
        if not concepts:
            raise ValidationError("concept pool is empty")
        _check_no_zero_rows(base, "base_embeddings")
        object.__setattr__(self, "concepts", concepts)
        object.__setattr__(self, "base_embeddings", base)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(concepts)})

    @property
    def dim(self) -> int:
        return self.base_embeddings.shape[1]

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, concept: str) -> bool:
        return concept in self._index

    def base_embedding(self, concept: str) -> np.ndarray:
        try:
            return self.base_embeddings[self._index[concept]]
        except KeyError:
            raise KeyError(f"concept {concept!r} not in pool") from None


class PhraseEmbeddingTable:
    """Object-token embeddings keyed by (attribute, object) phrase."""

    def __init__(self, entries: dict[PhraseKey, np.ndarray]):
        self._entries: dict[PhraseKey, np.ndarray] = {}
        dim = None
        for key, vec in entries.items():
            arr = _as_readonly_f64(vec, f"phrase entry {key!r}", 1)
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DimensionMismatchError(
                    f"phrase entry {key!r} has dim {arr.shape[0]}, expected {dim}"
                )
            self._entries[(str(key[0]), str(key[1]))] = arr

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: PhraseKey) -> bool:
        return key in self._entries

    def keys(self):
        return self._entries.keys()

    def get(self, attribute: str, obj: str) -> np.ndarray:
        try:
            return self._entries[(attribute, obj)]
        except KeyError:
            raise MissingPhraseEntriesError([(attribute, obj)]) from None

    def missing(self, keys) -> list[PhraseKey]:
        return sorted({k for k in keys if k not in self._entries})


@dataclass(frozen=True)
class RefinementParams:
    """Neighbor count used when sampling the concept pool."""

    p: int = 5

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")


@dataclass(frozen=True)
class BindingVectors:
    positive: np.ndarray
    negative: np.ndarray


def nearest_concepts(object_vec, pool: ConceptPool, p: int) -> list[str]:
    """The P pool concepts most cosine-similar to the query vector.

    Ties resolve in pool order, so results are reproducible across runs. A
    zero-norm query (possible when opposed subword vectors average out) ties
    every concept and therefore returns the pool-order prefix.
    """
    if not 1 <= p <= len(pool):
        raise ValueError(f"p must be in [1, {len(pool)}], got {p}")
    q = np.asarray(object_vec, dtype=np.float64)
    if q.shape != (pool.dim,):
        raise DimensionMismatchError(
            f"query has shape {q.shape}, pool dim is {pool.dim}"
        )
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        return list(pool.concepts[:p])
    base = pool.base_embeddings
    sims = (base @ q) / (np.linalg.norm(base, axis=1) * norm)
    order = np.argsort(-sims, kind="stable")
    return [pool.concepts[int(i)] for i in order[:p]]


def binding_vector(
    attributes,
    neighbors,
    table: PhraseEmbeddingTable,
    pool: ConceptPool,
) -> np.ndarray:
    """Mean attribute direction estimated over the neighbor concepts.

    For one attribute this is the mean over neighbors of
    ``phrase(attribute, concept) - base(concept)``; for several attributes
    (the negative set) the per-attribute vectors are averaged. An empty
    attribute list yields the zero vector.
    """
    attributes = list(attributes)
    if not attributes:
        return np.zeros(pool.dim, dtype=np.float64)
    neighbors = list(neighbors)
    if not neighbors:
        raise ValidationError("binding_vector needs at least one neighbor concept")
    missing = table.missing((a, c) for a in attributes for c in neighbors)
    if missing:
        raise MissingPhraseEntriesError(missing)
    per_attribute = []
    for attribute in attributes:
        diffs = [table.get(attribute, c) - pool.base_embedding(c) for c in neighbors]
        per_attribute.append(np.mean(diffs, axis=0))
    return np.mean(per_attribute, axis=0)


def refine_object(t_k, b_pos, b_neg) -> np.ndarray:
    """Shift an object embedding toward its attribute and away from the others."""
    t_k = np.asarray(t_k, dtype=np.float64)
    b_pos = np.asarray(b_pos, dtype=np.float64)
    b_neg = np.asarray(b_neg, dtype=np.float64)
    if not (t_k.shape == b_pos.shape == b_neg.shape):
        raise DimensionMismatchError(
            f"shapes differ: {t_k.shape}, {b_pos.shape}, {b_neg.shape}"
        )
    return t_k + b_pos - b_neg


def refine_attribute(t_a, t_k) -> np.ndarray:
    """Add the (pre-refinement) object embedding onto an attribute embedding."""
    t_a = np.asarray(t_a, dtype=np.float64)
    t_k = np.asarray(t_k, dtype=np.float64)
    if t_a.shape != t_k.shape:
        raise DimensionMismatchError(f"shapes differ: {t_a.shape}, {t_k.shape}")
    return t_a + t_k


def pair_binding_vectors(
    structure: CaptionStructure,
    index: int,
    object_query: np.ndarray,
    pool: ConceptPool,
    table: PhraseEmbeddingTable,
    params: RefinementParams,
) -> tuple[BindingVectors, list[str]]:
    """Binding vectors for one pair, plus the neighbor concepts used."""
    neighbors = nearest_concepts(object_query, pool, params.p)
    pair = structure.pairs[index]
    b_pos = binding_vector([pair.attribute], neighbors, table, pool)
    b_neg = binding_vector(structure.negative_attributes(index), neighbors, table, pool)
    return BindingVectors(positive=b_pos, negative=b_neg), neighbors


def refine_encoding(
    text: TextEncoding,
    structure: CaptionStructure,
    pool: ConceptPool,
    table: PhraseEmbeddingTable,
    params: RefinementParams,
) -> TextEncoding:
    """Rewrite attribute/object span tokens; everything else stays bitwise equal.

    All updates are computed from the original token matrix. Spans touched
    by more than one pair are overwritten in pair order. With no pairs the
    input encoding is returned unchanged.
    """
    if not structure.pairs:
        return text
    if structure.caption != text.caption:
        raise ValidationError(
            f"{structure.caption_id}: structure does not belong to encoding {text.id!r}"
        )
    if not structure.resolved:
        raise ValidationError(
            f"{structure.caption_id}: token spans must be resolved before refinement"
        )
    original = text.tokens
    refined = original.copy()
    for index, pair in enumerate(structure.pairs):
        o_lo, o_hi = pair.obj_token_span
        a_lo, a_hi = pair.attr_token_span
        object_mean = original[o_lo:o_hi].mean(axis=0)
        vectors, _ = pair_binding_vectors(structure, index, object_mean, pool, table, params)
        shift = vectors.positive - vectors.negative
        refined[o_lo:o_hi] = original[o_lo:o_hi] + shift
        refined[a_lo:a_hi] = original[a_lo:a_hi] + object_mean
    return text.with_tokens(refined)


def phrase_requests(
    structures,
    texts,
    pool: ConceptPool,
    params: RefinementParams,
) -> list[PhraseKey]:
    """Every (attribute, neighbor-concept) key the given captions will need.

    ``texts`` maps caption ids to encodings; neighbor sets are computed from
    the same object span means scoring will use, so the resulting table
    covers scoring exactly. Keys are deduplicated in first-need order.
    Blank-attribute entries live in the pool and are not requested.
    """
    from .captions import resolve_token_spans

    seen: dict[PhraseKey, None] = {}
    for structure in structures:
        if not structure.pairs:
            continue
        try:
            text = texts[structure.caption_id]
        except KeyError:
            raise ValidationError(
                f"no text encoding for caption {structure.caption_id!r}"
            ) from None
        if not structure.resolved:
            structure = resolve_token_spans(structure, text)
        for index, pair in enumerate(structure.pairs):
            o_lo, o_hi = pair.obj_token_span
            object_mean = text.tokens[o_lo:o_hi].mean(axis=0)
            neighbors = nearest_concepts(object_mean, pool, params.p)
            wanted = [pair.attribute, *structure.negative_attributes(index)]
            for attribute in wanted:
                for concept in neighbors:
                    seen.setdefault((attribute, concept))
    return list(seen.keys())


def emit_phrase_requests(
    structures,
    texts,
    pool: ConceptPool,
    params: RefinementParams,
    path,
) -> int:
    """Write the request keys as JSON-lines ``{attribute, object}``; returns count."""
    keys = phrase_requests(structures, texts, pool, params)
    with open(path, "w", encoding="utf-8") as fh:
        for attribute, obj in keys:
            fh.write(json.dumps({"attribute": attribute, "object": obj}) + "\n")
    return len(keys)


def load_phrase_requests(path) -> list[PhraseKey]:
    """Read a request file back into (attribute, object) keys."""
    keys: list[PhraseKey] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                keys.append((str(rec["attribute"]), str(rec["object"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad request line: {exc}") from exc
    return keys
