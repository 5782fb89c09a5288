"""Attribute-object pair extraction from captions.

Two parser backends share one output shape (records in the scoring
engine's pairs-file schema):

* ``stanza``: dependency parsing; adjectival modifiers that look like
  attributes (per the lexicon) attach to their noun head, while remaining
  premodifiers of that head are folded into the object phrase, so
  "a green vintage car" yields ("green", "vintage car").
* ``lexicon``: a dependency-free scan (attribute word followed by a short
  noun run). This is the fallback wherever stanza or its models are
  unavailable, and the default for tests.

Per-caption parser failures degrade to an empty pair list with a warning
rather than aborting a whole export.
"""

from __future__ import annotations

import logging
import re

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[A-Za-z]+")

STOPWORDS = frozenset(
    """a an the and or of on in at by with near under over is are was were be
    been to for from as it its his her their this that these those there here
    very some each while""".split()
)

DEFAULT_ATTRIBUTES = frozenset(
    """red blue green yellow orange purple pink brown black white gray grey
    golden silver beige tan maroon navy teal turquoise violet crimson
    big small large tiny huge little tall short long wide narrow thick thin
    giant miniature wooden metal metallic plastic glass leather rubber paper
    stone brick concrete ceramic wool cotton silk fur furry steel iron
    wet dry dirty clean shiny rusty broken open closed empty full hot cold
    old new young fresh rotten striped spotted checkered fluffy smooth
    rough""".split()
)


def _record(caption, attribute_span, object_span):
    return {
        "attribute": caption[slice(*attribute_span)],
        "object": caption[slice(*object_span)],
        "attr_char_span": list(attribute_span),
        "obj_char_span": list(object_span),
    }


class LexiconParser:
    """Attribute word followed by up to three non-attribute content words."""

    def __init__(self, attributes=DEFAULT_ATTRIBUTES, max_object_words: int = 3):
        self.attributes = frozenset(w.lower() for w in attributes)
        self.max_object_words = max_object_words

    def parse(self, caption: str) -> list[dict]:
        words = [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(caption)]
        records = []
        i = 0
        while i < len(words):
            text, start, end = words[i]
            if text.lower() not in self.attributes:
                i += 1
                continue
            run = []
            j = i + 1
            while j < len(words) and len(run) < self.max_object_words:
                lowered = words[j][0].lower()
                if lowered in self.attributes or lowered in STOPWORDS:
                    break
                run.append(words[j])
                j += 1
            if run:
                records.append(_record(caption, (start, end), (run[0][1], run[-1][2])))
                i = j
            else:
                i += 1
        return records


class StanzaParser:
    """Dependency-parse backend; needs the stanza package and English models."""

    def __init__(self, attributes=DEFAULT_ATTRIBUTES):
        try:
            import stanza
        except ImportError as exc:
            raise RuntimeError(
                "stanza is not installed; install abeclip-exporter[parse] or use "
                "the lexicon parser"
            ) from exc
        self.attributes = frozenset(w.lower() for w in attributes)
        self._pipeline = stanza.Pipeline(
            lang="en",
            processors="tokenize,pos,lemma,depparse",
            verbose=False,
        )

    def parse(self, caption: str) -> list[dict]:
        doc = self._pipeline(caption)
        records = []
        for sentence in doc.sentences:
            words = sentence.words
            for word in words:
                if word.deprel != "amod" or word.text.lower() not in self.attributes:
                    continue
                head = words[word.head - 1]
                if head.upos not in ("NOUN", "PROPN"):
                    continue
                # fold non-attribute premodifiers of the head into the object
                object_words = [
                    w
                    for w in words
                    if w.head == head.id
                    and w.id > word.id
                    and w.id < head.id
                    and w.deprel in ("amod", "compound", "flat")
                    and w.text.lower() not in self.attributes
                ]
                object_words.append(head)
                start = min(w.start_char for w in object_words)
                end = max(w.end_char for w in object_words)
                records.append(
                    _record(caption, (word.start_char, word.end_char), (start, end))
                )
        records.sort(key=lambda r: r["attr_char_span"][0])
        return records


def make_parser(name: str, attributes=DEFAULT_ATTRIBUTES):
    if name == "lexicon":
        return LexiconParser(attributes)
    if name == "stanza":
        return StanzaParser(attributes)
    if name == "auto":
        try:
            return StanzaParser(attributes)
        except Exception as exc:
            logger.warning("stanza unavailable (%s); falling back to lexicon parser", exc)
            return LexiconParser(attributes)
    raise ValueError(f"unknown parser {name!r}")


def parse_caption_safe(parser, caption_id: str, caption: str) -> list[dict]:
    try:
        return parser.parse(caption)
    except Exception as exc:
        logger.warning("parser failed on caption %s (%s); emitting no pairs", caption_id, exc)
        return []
