"""Training-free attribute-binding rescoring for CLIP-family embeddings.

Given pre-exported image patch/global vectors and caption token/global
vectors, this package recomputes image-text similarity by aligning tokens to
patches, refining attribute and object token embeddings through binding
vectors estimated from a concept pool, and fusing the local and global
scores. It also ships the benchmark harness used to evaluate the scores.
"""

from .alignment import AlignmentParams, TokenAlignment, aggregate_score, token_score, topk_indices
from .bench import (
    BenchResult,
    PairwiseCase,
    RetrievalSet,
    Scorer,
    pairwise_accuracy,
    retrieval_recall,
    sweep,
)
from .bundle import (
    load_concept_pool,
    load_image_bundle,
    load_phrase_table,
    load_text_bundle,
    write_concept_pool,
    write_image_bundle,
    write_phrase_table,
    write_text_bundle,
)
from .captions import (
    AttrObjPair,
    CaptionStructure,
    extract_pairs_heuristic,
    load_lexicon,
    load_pairs_file,
    resolve_token_spans,
)
from .embeddings import ImageEmbedding, SimilarityMatrix, TextEncoding, cosine, similarity_matrix
from .errors import (
    AbeClipError,
    BundleFormatError,
    CaptionMismatchError,
    DegenerateVectorError,
    DimensionMismatchError,
    MissingPhraseEntriesError,
    PairsFileError,
    ValidationError,
)
from .refinement import (
    BindingVectors,
    ConceptPool,
    PhraseEmbeddingTable,
    RefinementParams,
    binding_vector,
    emit_phrase_requests,
    nearest_concepts,
    refine_attribute,
    refine_encoding,
    refine_object,
)
from .scoring import (
    ScoreParams,
    ScoreReport,
    binding_difference,
    final_score,
    global_score,
    score_pair,
)

__version__ = "0.1.0"
