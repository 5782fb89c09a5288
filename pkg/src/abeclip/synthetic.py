"""Synthetic planted-binding benchmark generator.

Builds a fully self-contained dataset of attribute-swap cases where the
correct binding is planted geometrically: every attribute token is
cosine-close only to the patches of the object it modifies, and the negative
caption swaps the two attributes. Used by the acceptance suite and handy for
smoke-testing a full pipeline without any model exports.

Construction: objects and attributes get orthonormal directions u_i and w_j.
An image showing (a1, o1) and (a2, o2) has one patch group near u_o1 + w_a1
and one near u_o2 + w_a2 plus background patches. Caption tokens are
contextual: an attribute token carries w_a + u_o for the object it modifies,
an object token carries u_o. The phrase table shifts every phrase embedding
by a fixed multiple of the attribute direction, so binding vectors recover
attribute directions exactly. In the shuffled control the patch groups
depict attributes unrelated to the caption, which removes the planted signal
and leaves accuracy to noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import (
    write_concept_pool,
    write_image_bundle,
    write_phrase_table,
    write_text_bundle,
)
from .embeddings import ImageEmbedding, TextEncoding
from .refinement import ConceptPool, PhraseEmbeddingTable

OBJECTS = (
    "cube", "sphere", "cylinder", "cone", "car", "scooter", "table", "chair",
    "bottle", "lamp", "book", "shirt", "ball", "box", "bowl", "vase",
    "truck", "bike", "shoe", "clock",
)
ATTRIBUTES = (
    "red", "blue", "green", "yellow", "orange", "purple", "pink", "brown",
    "black", "white", "gray", "golden", "silver", "wooden", "metal",
    "plastic", "glass", "leather", "striped", "fluffy",
)

DIM = 48
_FILLER_AXIS = 40
_BACKGROUND_AXIS = 41
_GLOBAL_AXIS = 42

PATCHES_PER_GROUP = 4
BACKGROUND_PATCHES = 4
PATCH_NOISE = 0.05
GLOBAL_NOISE = 1e-3
ATTRIBUTE_SHIFT = 0.5


@dataclass(frozen=True)
class SyntheticPaths:
    root: Path
    images: Path
    texts: Path
    pool: Path
    table: Path
    cases: Path
    pairs: Path


def _object_axis(index: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[index] = 1.0
    return v


def _attribute_axis(index: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[len(OBJECTS) + index] = 1.0
    return v


def _unit(index: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[index] = 1.0
    return v


def _noisy(direction: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    return direction + scale * rng.standard_normal(DIM)


def build_concept_pool() -> ConceptPool:
    base = np.stack([_object_axis(i) for i in range(len(OBJECTS))])
    return ConceptPool(concepts=OBJECTS, base_embeddings=base)


def build_phrase_table() -> PhraseEmbeddingTable:
    entries = {}
    for oi, obj in enumerate(OBJECTS):
        for ai, attribute in enumerate(ATTRIBUTES):
            entries[(attribute, obj)] = (
                _object_axis(oi) + ATTRIBUTE_SHIFT * _attribute_axis(ai)
            )
    return PhraseEmbeddingTable(entries)


def _caption_tokens(a1: int, o1: int, a2: int, o2: int):
    """Caption text, word list, and per-token embedding/span/mask arrays."""
    words = [
        ("the", None),
        (ATTRIBUTES[a1], _attribute_axis(a1) + _object_axis(o1)),
        (OBJECTS[o1], _object_axis(o1)),
        ("and", None),
        ("the", None),
        (ATTRIBUTES[a2], _attribute_axis(a2) + _object_axis(o2)),
        (OBJECTS[o2], _object_axis(o2)),
    ]
    caption = " ".join(w for w, _ in words)
    filler = _unit(_FILLER_AXIS) + 0.5 * _unit(_BACKGROUND_AXIS)

    token_texts = ["<s>"]
    vectors = [filler]
    spans = [(0, 0)]
    mask = [False]
    cursor = 0
    for word, vec in words:
        start = caption.index(word, cursor)
        cursor = start + len(word)
        token_texts.append(word)
        vectors.append(filler if vec is None else vec)
        spans.append((start, cursor))
        mask.append(True)
    token_texts.append("</s>")
    vectors.append(filler)
    spans.append((0, 0))
    mask.append(False)
    return caption, words, np.stack(vectors), spans, mask


def _make_text(text_id: str, a1: int, o1: int, a2: int, o2: int, rng) -> TextEncoding:
    caption, words, tokens, spans, mask = _caption_tokens(a1, o1, a2, o2)
    eot = _noisy(_unit(_GLOBAL_AXIS), rng, GLOBAL_NOISE)
    return TextEncoding(
        id=text_id,
        caption=caption,
        eot=eot,
        tokens=tokens,
        token_texts=tuple(["<s>"] + [w for w, _ in words] + ["</s>"]),
        char_spans=tuple(spans),
        content_mask=np.array(mask),
    )


def _make_image(image_id: str, groups, rng) -> ImageEmbedding:
    """groups: [(object_index, attribute_index), ...] shown in the image."""
    patches = []
    for oi, ai in groups:
        center = _object_axis(oi) + _attribute_axis(ai)
        for _ in range(PATCHES_PER_GROUP):
            patches.append(_noisy(center, rng, PATCH_NOISE))
    background = _unit(_BACKGROUND_AXIS)
    for _ in range(BACKGROUND_PATCHES):
        patches.append(_noisy(background, rng, PATCH_NOISE))
    cls = _noisy(_unit(_GLOBAL_AXIS), rng, GLOBAL_NOISE)
    return ImageEmbedding(id=image_id, cls=cls, patches=np.stack(patches))


def _pair_records(text: TextEncoding) -> list[dict]:
    # token layout: <s> the A1 O1 and the A2 O2 </s>
    records = []
    for attr_idx, obj_idx in ((2, 3), (6, 7)):
        records.append(
            {
                "attribute": text.token_texts[attr_idx],
                "object": text.token_texts[obj_idx],
                "attr_char_span": list(text.char_spans[attr_idx]),
                "obj_char_span": list(text.char_spans[obj_idx]),
            }
        )
    return records


def generate(
    root,
    n_cases: int = 100,
    seed: int = 7,
    control: bool = False,
) -> SyntheticPaths:
    """Write bundles, a pairs file, and a case file under ``root``.

    With ``control=True`` the image patch groups depict attributes drawn at
    random instead of the caption's, which destroys the planted binding
    signal while keeping everything else identical in distribution.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)

    images: list[ImageEmbedding] = []
    texts: list[TextEncoding] = []
    cases: list[dict] = []
    pair_lines: list[dict] = []

    for case_index in range(n_cases):
        o1, o2 = rng.choice(len(OBJECTS), size=2, replace=False)
        a1, a2 = rng.choice(len(ATTRIBUTES), size=2, replace=False)
        o1, o2, a1, a2 = int(o1), int(o2), int(a1), int(a2)

        if control:
            others = [i for i in range(len(ATTRIBUTES)) if i not in (a1, a2)]
            shown = rng.choice(others, size=2, replace=False)
            groups = [(o1, int(shown[0])), (o2, int(shown[1]))]
        else:
            groups = [(o1, a1), (o2, a2)]

        image_id = f"img{case_index:04d}"
        pos_id = f"txt{case_index:04d}p"
        neg_id = f"txt{case_index:04d}n"
        images.append(_make_image(image_id, groups, rng))
        pos = _make_text(pos_id, a1, o1, a2, o2, rng)
        neg = _make_text(neg_id, a2, o1, a1, o2, rng)
        texts.extend([pos, neg])
        cases.append(
            {
                "image_id": image_id,
                "positive_text_id": pos_id,
                "negative_text_id": neg_id,
            }
        )
        for text in (pos, neg):
            pair_lines.append(
                {
                    "caption_id": text.id,
                    "caption": text.caption,
                    "pairs": _pair_records(text),
                }
            )

    paths = SyntheticPaths(
        root=root,
        images=root / "images",
        texts=root / "texts",
        pool=root / "pool",
        table=root / "table",
        cases=root / "cases.jsonl",
        pairs=root / "pairs.jsonl",
    )
    root.mkdir(parents=True, exist_ok=True)
    write_image_bundle(paths.images, images, DIM)
    write_text_bundle(paths.texts, texts, DIM)
    write_concept_pool(paths.pool, build_concept_pool())
    write_phrase_table(paths.table, build_phrase_table(), DIM)
    with open(paths.cases, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case) + "\n")
    with open(paths.pairs, "w", encoding="utf-8") as fh:
        for line in pair_lines:
            fh.write(json.dumps(line) + "\n")
    return paths
