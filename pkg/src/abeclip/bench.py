"""Benchmark protocols: pairwise accuracy, retrieval recall, parameter sweeps.

The harness is dataset-agnostic: cases and retrieval sets are JSON-lines
files whose ids reference loaded bundles. Scoring is pure per item, so cases
are scattered across a thread pool and reduced in input order; results never
depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .captions import CaptionStructure, resolve_token_spans
from .embeddings import ImageEmbedding, TextEncoding
from .errors import ValidationError
from .refinement import ConceptPool, PhraseEmbeddingTable
from .scoring import ScoreParams, ScoreReport, final_score, score_pair

logger = logging.getLogger(__name__)

MODES = ("global-only", "base-local", "refined", "full")

_MODE_FIELD = {
    "global-only": "s_global",
    "base-local": "s_base",
    "refined": "s_refine",
    "full": "s_final",
}

RESULT_COLUMNS = (
    "metric",
    "mode",
    "k",
    "p",
    "omega",
    "include_special_tokens",
    "value",
    "correct",
    "total",
)


@dataclass(frozen=True)
class PairwiseCase:
    image_id: str
    positive_text_id: str
    negative_text_id: str

    def __post_init__(self):
        if self.positive_text_id == self.negative_text_id:
            raise ValidationError(
                f"case for image {self.image_id!r} has identical positive and negative ids"
            )


@dataclass(frozen=True)
class RetrievalSet:
    queries: tuple[str, ...]
    gallery: tuple[str, ...]
    gold: dict[str, frozenset[str]]

    def __post_init__(self):
        gallery = frozenset(self.gallery)
        if not gallery:
            raise ValidationError("retrieval gallery is empty")
        for text_id in self.queries:
            hits = self.gold.get(text_id, frozenset()) & gallery
            if not hits:
                raise ValidationError(
                    f"query {text_id!r} has no ground-truth image in the gallery"
                )


@dataclass
class BenchResult:
    metric: str
    value: float
    correct: int
    total: int
    params: dict
    items: list[dict] = field(repr=False, default_factory=list)

    def row(self) -> dict:
        out = {
            "metric": self.metric,
            "mode": self.params.get("mode", ""),
            "k": self.params.get("k", ""),
            "p": self.params.get("p", ""),
            "omega": self.params.get("omega", ""),
            "include_special_tokens": self.params.get("include_special_tokens", ""),
            "value": repr(self.value),
            "correct": self.correct,
            "total": self.total,
        }
        return out


class Scorer:
    """Bundles loaded resources with score parameters and resolves ids."""

    def __init__(
        self,
        images: dict[str, ImageEmbedding],
        texts: dict[str, TextEncoding],
        structures: dict[str, CaptionStructure],
        pool: ConceptPool,
        table: PhraseEmbeddingTable,
        params: ScoreParams,
    ):
        self.images = images
        self.texts = texts
        self.pool = pool
        self.table = table
        self.params = params
        self._structures: dict[str, CaptionStructure] = {}
        missing = 0
        for text_id, text in texts.items():
            structure = structures.get(text_id)
            if structure is None:
                missing += 1
                structure = CaptionStructure(
                    caption_id=text_id, caption=text.caption, pairs=()
                )
            elif not structure.resolved:
                structure = resolve_token_spans(structure, text)
            self._structures[text_id] = structure
        if missing:
            logger.info("%d caption(s) without parsed pairs score unrefined", missing)

    def with_params(self, params: ScoreParams) -> "Scorer":
        clone = object.__new__(Scorer)
        clone.images = self.images
        clone.texts = self.texts
        clone.pool = self.pool
        clone.table = self.table
        clone.params = params
        clone._structures = self._structures
        return clone

    def structure(self, text_id: str) -> CaptionStructure:
        return self._structures[text_id]

    def report(self, image_id: str, text_id: str) -> ScoreReport:
        try:
            image = self.images[image_id]
        except KeyError:
            raise ValidationError(f"unknown image id {image_id!r}") from None
        try:
            text = self.texts[text_id]
        except KeyError:
            raise ValidationError(f"unknown text id {text_id!r}") from None
        return score_pair(
            image, text, self._structures[text_id], self.pool, self.table, self.params
        )


def _map_cases(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def pairwise_accuracy(
    cases,
    scorer: Scorer,
    mode: str = "full",
    workers: int = 1,
) -> BenchResult:
    """Fraction of cases where the positive caption outscores the negative.

    Ties count as incorrect. The mode picks which score field decides:
    global-only, base-local, refined, or full.
    """
    if mode not in _MODE_FIELD:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    field_name = _MODE_FIELD[mode]
    cases = list(cases)
    if not cases:
        raise ValidationError("no pairwise cases to evaluate")

    def run(case: PairwiseCase) -> dict:
        pos = scorer.report(case.image_id, case.positive_text_id)
        neg = scorer.report(case.image_id, case.negative_text_id)
        pos_score = getattr(pos, field_name)
        neg_score = getattr(neg, field_name)
        margin = pos_score - neg_score
        return {
            "image_id": case.image_id,
            "positive_text_id": case.positive_text_id,
            "negative_text_id": case.negative_text_id,
            "positive_score": pos_score,
            "negative_score": neg_score,
            "margin": margin,
            "correct": margin > 0.0,
        }

    items = _map_cases(run, cases, workers)
    correct = sum(1 for it in items if it["correct"])
    params = {"mode": mode, **_params_dict(scorer.params)}
    return BenchResult(
        metric="pairwise_accuracy",
        value=correct / len(items),
        correct=correct,
        total=len(items),
        params=params,
        items=items,
    )


def retrieval_recall(
    retrieval: RetrievalSet,
    scorer: Scorer,
    ks,
    workers: int = 1,
) -> list[BenchResult]:
    """Recall@K over the gallery ranking induced by the fused score.

    Galleries are ranked per query by descending score with ties broken by
    image id, so rankings are reproducible.
    """
    ks = [int(k) for k in ks]
    if not ks:
        raise ValidationError("no K values given")
    if sorted(ks) != ks:
        raise ValidationError("K values must be sorted ascending")
    if ks[0] < 1 or ks[-1] > len(retrieval.gallery):
        raise ValidationError(
            f"K values must lie in [1, {len(retrieval.gallery)}], got {ks}"
        )

    def run(text_id: str) -> dict:
        scored = [
            (scorer.report(image_id, text_id).s_final, image_id)
            for image_id in retrieval.gallery
        ]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        ranking = [image_id for _, image_id in scored]
        gold = retrieval.gold[text_id]
        rank = next(i for i, image_id in enumerate(ranking) if image_id in gold)
        return {"text_id": text_id, "gold_rank": rank, "top": ranking[: ks[-1]]}

    items = _map_cases(run, list(retrieval.queries), workers)
    results = []
    for k in ks:
        correct = sum(1 for it in items if it["gold_rank"] < k)
        results.append(
            BenchResult(
                metric=f"recall@{k}",
                value=correct / len(items),
                correct=correct,
                total=len(items),
                params={"mode": "full", **_params_dict(scorer.params)},
                items=items if k == ks[-1] else [],
            )
        )
    return results


def sweep(
    cases,
    scorer: Scorer,
    k_values,
    omega_values,
    workers: int = 1,
) -> list[BenchResult]:
    """Full-factorial K x omega grid of full-mode pairwise accuracy.

    Component scores are computed once per K; each omega cell only re-fuses
    s_local and s_global, so the grid costs little more than a K sweep.
    """
    k_values = [int(k) for k in k_values]
    omega_values = [float(w) for w in omega_values]
    if not k_values or not omega_values:
        raise ValidationError("sweep grids must be non-empty")
    cases = list(cases)
    results: list[BenchResult] = []
    for k in k_values:
        base_params = ScoreParams(
            omega=scorer.params.omega,
            k=k,
            p=scorer.params.p,
            include_special_tokens=scorer.params.include_special_tokens,
        )
        k_scorer = scorer.with_params(base_params)

        def run(case: PairwiseCase) -> tuple[ScoreReport, ScoreReport]:
            return (
                k_scorer.report(case.image_id, case.positive_text_id),
                k_scorer.report(case.image_id, case.negative_text_id),
            )

        reports = _map_cases(run, cases, workers)
        for omega in omega_values:
            items = []
            correct = 0
            for case, (pos, neg) in zip(cases, reports):
                pos_score = final_score(pos.s_local, pos.s_global, omega)
                neg_score = final_score(neg.s_local, neg.s_global, omega)
                margin = pos_score - neg_score
                win = margin > 0.0
                correct += win
                items.append(
                    {
                        "image_id": case.image_id,
                        "positive_text_id": case.positive_text_id,
                        "negative_text_id": case.negative_text_id,
                        "margin": margin,
                        "correct": win,
                    }
                )
            params = _params_dict(base_params)
            params.update({"mode": "full", "omega": omega})
            results.append(
                BenchResult(
                    metric="pairwise_accuracy",
                    value=correct / len(items),
                    correct=correct,
                    total=len(items),
                    params=params,
                    items=items,
                )
            )
    return results


def _params_dict(params: ScoreParams) -> dict:
    return {
        "omega": params.omega,
        "k": params.k,
        "p": params.p,
        "include_special_tokens": params.include_special_tokens,
    }


def load_cases(path) -> list[PairwiseCase]:
    """JSON-lines ``{image_id, positive_text_id, negative_text_id}``."""
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                cases.append(
                    PairwiseCase(
                        image_id=str(rec["image_id"]),
                        positive_text_id=str(rec["positive_text_id"]),
                        negative_text_id=str(rec["negative_text_id"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad case line: {exc}") from exc
    return cases


def load_retrieval_set(queries_path, gallery_path) -> RetrievalSet:
    """Queries: JSON-lines ``{text_id, gold_image_ids}``; gallery: one id per line."""
    queries: list[str] = []
    gold: dict[str, frozenset[str]] = {}
    with open(queries_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                text_id = str(rec["text_id"])
                gold_ids = frozenset(str(i) for i in rec["gold_image_ids"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{queries_path}:{lineno}: bad query line: {exc}") from exc
            queries.append(text_id)
            gold[text_id] = gold_ids
    gallery: list[str] = []
    for line in Path(gallery_path).read_text("utf-8").splitlines():
        image_id = line.split("#", 1)[0].strip()
        if image_id:
            gallery.append(image_id)
    return RetrievalSet(queries=tuple(queries), gallery=tuple(gallery), gold=gold)


def write_results_csv(path, results, timestamp: str | None = None) -> None:
    """Summary CSV, one row per result; optional timestamp column."""
    columns = list(RESULT_COLUMNS) + (["generated_at"] if timestamp else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for result in results:
            row = result.row()
            if timestamp:
                row["generated_at"] = timestamp
            writer.writerow(row)


def write_items_jsonl(path, results) -> None:
    """Per-item records for every result, one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            for item in result.items:
                record = {"metric": result.metric, "mode": result.params.get("mode", "")}
                record.update(item)
                fh.write(json.dumps(record, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value)!r}")
