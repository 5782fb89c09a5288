"""Attribute-object pair extraction and token-span resolution.

Captions arrive either pre-parsed (a JSON-lines pairs file, the primary
path) or get a lexicon-driven heuristic parse as a fallback. Either way the
word-level char spans are then mapped onto the subword tokens of a
TextEncoding before refinement can run.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .embeddings import Span, TextEncoding
from .errors import CaptionMismatchError, PairsFileError, ValidationError

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[A-Za-z]+")

# Function words that terminate a noun run in the heuristic extractor.
_STOPWORDS = frozenset(
    """a an the and or of on in at by with near under over is are was were be
    been to for from as it its his her their this that these those there here
    very some each while""".split()
)


@dataclass(frozen=True)
class AttrObjPair:
    """One attribute-object pair with char spans and (optionally) token spans."""

    attribute: str
    object: str
    attr_char_span: Span
    obj_char_span: Span
    attr_token_span: Span | None = None
    obj_token_span: Span | None = None

    @property
    def resolved(self) -> bool:
        return self.attr_token_span is not None and self.obj_token_span is not None


@dataclass(frozen=True)
class CaptionStructure:
    """All attribute-object pairs extracted from one caption."""

    caption_id: str
    caption: str
    pairs: tuple[AttrObjPair, ...]
    dropped_pairs: int = 0

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def resolved(self) -> bool:
        return all(p.resolved for p in self.pairs)

    def negative_attributes(self, index: int) -> tuple[str, ...]:
        """Attributes of all other pairs, deduplicated, minus this pair's own.

        Order follows first appearance across the pair list so downstream
        arithmetic is deterministic.
        """
        own = self.pairs[index].attribute
        seen: list[str] = []
        for j, pair in enumerate(self.pairs):
            if j == index or pair.attribute == own:
                continue
            if pair.attribute not in seen:
                seen.append(pair.attribute)
        return tuple(seen)


def _check_char_span(span, caption: str, what: str, caption_id: str) -> Span:
    try:
        s, e = int(span[0]), int(span[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise PairsFileError(f"{caption_id}: {what} span {span!r} is not an [s, e) pair") from exc
    if not (0 <= s < e <= len(caption)):
        raise PairsFileError(
            f"{caption_id}: {what} span [{s},{e}) outside caption of length {len(caption)}"
        )
    return (s, e)


def load_pairs_file(path) -> dict[str, CaptionStructure]:
    """Load a JSON-lines pairs file into CaptionStructures keyed by caption id.

    Each record is ``{caption_id, caption, pairs: [{attribute, object,
    attr_char_span, obj_char_span}]}``. Char spans are validated against the
    caption; token spans stay unresolved.
    """
    out: dict[str, CaptionStructure] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PairsFileError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                caption_id = rec["caption_id"]
                caption = rec["caption"]
                raw_pairs = rec["pairs"]
            except KeyError as exc:
                raise PairsFileError(f"{path}:{lineno}: missing field {exc}") from exc
            pairs = []
            for raw in raw_pairs:
                attribute = raw["attribute"]
                obj = raw["object"]
                if attribute == obj:
                    raise PairsFileError(
                        f"{caption_id}: attribute equals object string {attribute!r}"
                    )
                pairs.append(
                    AttrObjPair(
                        attribute=attribute,
                        object=obj,
                        attr_char_span=_check_char_span(
                            raw["attr_char_span"], caption, "attribute", caption_id
                        ),
                        obj_char_span=_check_char_span(
                            raw["obj_char_span"], caption, "object", caption_id
                        ),
                    )
                )
            if caption_id in out:
                raise PairsFileError(f"{path}:{lineno}: duplicate caption_id {caption_id!r}")
            out[caption_id] = CaptionStructure(
                caption_id=caption_id, caption=caption, pairs=tuple(pairs)
            )
    return out


def load_lexicon(path=None) -> frozenset[str]:
    """Attribute word list: one word per line, ``#`` comments allowed.

    Without a path, the lexicon shipped with the package (colors, sizes,
    materials, common surface states) is used.
    """
    if path is None:
        text = resources.files("abeclip.data").joinpath("attributes.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


def extract_pairs_heuristic(
    caption: str,
    lexicon: frozenset[str] | set[str],
    caption_id: str = "",
    max_object_words: int = 3,
) -> CaptionStructure:
    """Fallback extractor: lexicon attribute word followed by a noun run.

    A noun run is up to ``max_object_words`` consecutive alphabetic words
    that are neither attributes nor stopwords. Matches are taken left to
    right, first match wins, and matched words are not reused.
    """
    words = [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(caption)]
    pairs: list[AttrObjPair] = []
    i = 0
    while i < len(words):
        text, start, end = words[i]
        if text.lower() not in lexicon:
            i += 1
            continue
        run: list[tuple[str, int, int]] = []
        j = i + 1
        while j < len(words) and len(run) < max_object_words:
            w = words[j][0].lower()
            if w in lexicon or w in _STOPWORDS:
                break
            run.append(words[j])
            j += 1
        if not run:
            i += 1
            continue
        obj_start, obj_end = run[0][1], run[-1][2]
        pairs.append(
            AttrObjPair(
                attribute=caption[start:end],
                object=caption[obj_start:obj_end],
                attr_char_span=(start, end),
                obj_char_span=(obj_start, obj_end),
            )
        )
        i = j
    return CaptionStructure(caption_id=caption_id, caption=caption, pairs=tuple(pairs))


def _covering_token_span(char_span: Span, text: TextEncoding) -> Span | None:
    """Minimal token interval covering all content tokens that intersect the span."""
    s, e = char_span
    hit = [
        i
        for i, (ts, te) in enumerate(text.char_spans)
        if text.content_mask[i] and ts < e and s < te
    ]
    if not hit:
        return None
    lo, hi = hit[0], hit[-1] + 1
    if not all(text.content_mask[lo:hi]):
        raise ValidationError(
            f"token span [{lo},{hi}) for chars [{s},{e}) crosses a non-content token"
        )
    return (lo, hi)


def resolve_token_spans(structure: CaptionStructure, text: TextEncoding) -> CaptionStructure:
    """Map each pair's char spans onto subword token spans of ``text``.

    Pairs whose words fall outside the encoded window (truncation) are
    dropped and counted in ``dropped_pairs``. Re-resolving is a no-op.
    """
    if structure.caption != text.caption:
        raise CaptionMismatchError(
            f"structure caption {structure.caption!r} != encoding caption {text.caption!r}"
        )
    resolved: list[AttrObjPair] = []
    dropped = 0
    for pair in structure.pairs:
        attr_span = _covering_token_span(pair.attr_char_span, text)
        obj_span = _covering_token_span(pair.obj_char_span, text)
        if attr_span is None or obj_span is None:
            dropped += 1
            continue
        if max(attr_span[0], obj_span[0]) < min(attr_span[1], obj_span[1]):
            raise ValidationError(
                f"{structure.caption_id}: attribute tokens {attr_span} overlap "
                f"object tokens {obj_span}"
            )
        resolved.append(replace(pair, attr_token_span=attr_span, obj_token_span=obj_span))
    if dropped:
        logger.warning(
            "%s: dropped %d pair(s) outside the encoded token window",
            structure.caption_id,
            dropped,
        )
    return CaptionStructure(
        caption_id=structure.caption_id,
        caption=structure.caption,
        pairs=tuple(resolved),
        dropped_pairs=structure.dropped_pairs + dropped,
    )
