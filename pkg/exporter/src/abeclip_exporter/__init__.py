"""Embedding and caption-structure export pipeline for the abeclip engine."""

from .jobs import (
    ExportJob,
    export_concept_pool,
    export_images,
    export_texts,
    fulfill_requests,
    parse_captions,
    read_captions,
    read_list,
)
from .parsing import LexiconParser, make_parser
from .toy import ToyEncoder, tokenize

__version__ = "0.1.0"
