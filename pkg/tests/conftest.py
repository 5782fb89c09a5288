import numpy as np
import pytest

from abeclip import (
    AttrObjPair,
    CaptionStructure,
    ConceptPool,
    ImageEmbedding,
    PhraseEmbeddingTable,
    ScoreParams,
    TextEncoding,
)


def make_text(tokens, token_texts=None, caption=None, mask=None, eot=(1.0, 0.0), text_id="t0"):
    """Build a TextEncoding with auto-generated word spans for short fixtures."""
    tokens = np.asarray(tokens, dtype=float)
    m = tokens.shape[0]
    if token_texts is None:
        token_texts = [f"w{i}" for i in range(m)]
    if caption is None:
        caption = " ".join(token_texts)
    if mask is None:
        mask = [True] * m
    spans = []
    cursor = 0
    for text, is_content in zip(token_texts, mask):
        if not is_content:
            spans.append((0, 0))
            continue
        start = caption.index(text, cursor)
        cursor = start + len(text)
        spans.append((start, cursor))
    eot_arr = np.zeros(tokens.shape[1])
    eot_arr[: len(eot)] = eot
    return TextEncoding(
        id=text_id,
        caption=caption,
        eot=eot_arr,
        tokens=tokens,
        token_texts=tuple(token_texts),
        char_spans=tuple(spans),
        content_mask=np.array(mask),
    )


@pytest.fixture
def trace_fixture():
    """The 2-d fixture whose report was derived by hand (see docs/hand_trace.md)."""
    image = ImageEmbedding(
        id="img", cls=np.array([3.0, 4.0]), patches=np.array([[1.0, 0.0], [0.0, 1.0]])
    )
    text = make_text(
        tokens=[[1.0, 1.0], [0.0, 2.0]],
        token_texts=["red", "cube"],
        caption="red cube",
        eot=(4.0, 3.0),
        text_id="txt",
    )
    structure = CaptionStructure(
        caption_id="txt",
        caption="red cube",
        pairs=(
            AttrObjPair(
                attribute="red",
                object="cube",
                attr_char_span=(0, 3),
                obj_char_span=(4, 8),
                attr_token_span=(0, 1),
                obj_token_span=(1, 2),
            ),
        ),
    )
    pool = ConceptPool(
        concepts=("cube", "ball"),
        base_embeddings=np.array([[0.0, 1.0], [1.0, 0.0]]),
    )
    table = PhraseEmbeddingTable(
        {
            ("red", "cube"): np.array([0.4, 1.2]),
            ("red", "ball"): np.array([1.0, 0.6]),
        }
    )
    params = ScoreParams(omega=0.3, k=1, p=2)
    return image, text, structure, pool, table, params


# Frozen output of the independent exact-arithmetic trace (sympy, 20 digits).
TRACE_EXPECTED = {
    "s_base": 0.85355339059327376220,
    "s_refine": 0.97261452814769671277,
    "delta": 0.11906113755442295057,
    "s_local": 1.0916756657021196633,
    "s_global": 0.96,
    "s_final": 1.0521729659914837643,
}


@pytest.fixture
def two_pair_fixture():
    """Five tokens, two attribute-object pairs, hand-set 3-concept pool."""
    text = make_text(
        tokens=[[2.0, 0.0], [0.0, 2.0], [1.0, 1.0], [2.0, 2.0], [4.0, 0.0]],
        token_texts=["red", "cube", "and", "blue", "ball"],
        caption="red cube and blue ball",
    )
    structure = CaptionStructure(
        caption_id="t0",
        caption="red cube and blue ball",
        pairs=(
            AttrObjPair(
                attribute="red",
                object="cube",
                attr_char_span=(0, 3),
                obj_char_span=(4, 8),
                attr_token_span=(0, 1),
                obj_token_span=(1, 2),
            ),
            AttrObjPair(
                attribute="blue",
                object="ball",
                attr_char_span=(13, 17),
                obj_char_span=(18, 22),
                attr_token_span=(3, 4),
                obj_token_span=(4, 5),
            ),
        ),
    )
    pool = ConceptPool(
        concepts=("cube", "ball", "box"),
        base_embeddings=np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]),
    )
    table = PhraseEmbeddingTable(
        {
            ("red", "cube"): np.array([0.1, 1.3]),
            ("red", "box"): np.array([1.3, 1.1]),
            ("red", "ball"): np.array([1.4, 0.2]),
            ("blue", "cube"): np.array([-0.2, 1.1]),
            ("blue", "box"): np.array([0.9, 1.5]),
            ("blue", "ball"): np.array([0.8, 0.4]),
        }
    )
    return text, structure, pool, table
