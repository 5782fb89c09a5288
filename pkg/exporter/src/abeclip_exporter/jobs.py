"""Export jobs: everything the scoring engine consumes comes from here.

Each job reads plain input files (image paths, caption lists, concept
lists, request files), runs the chosen encoder backend, and writes bundle
directories or JSON-lines files in the scoring engine's formats.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .parsing import make_parser, parse_caption_safe
from .toy import ToyEncoder
from .writer import BundleWriter

logger = logging.getLogger(__name__)


@dataclass
class ExportJob:
    backend: str = "toy"
    model_id: str | None = None
    space: str = "post"
    dim: int = 64
    patch_grid: int = 7
    device: str = "cpu"
    parser: str = "auto"
    _encoder: object = field(default=None, repr=False)

    def encoder(self):
        if self._encoder is None:
            if self.backend == "toy":
                self._encoder = ToyEncoder(dim=self.dim, patch_grid=self.patch_grid)
            elif self.backend == "hf-clip":
                if not self.model_id:
                    raise ValueError("hf-clip backend needs --model")
                from .hf_clip import HFClipEncoder

                self._encoder = HFClipEncoder(self.model_id, space=self.space, device=self.device)
                self.dim = self._encoder.dim
            else:
                raise ValueError(f"unknown backend {self.backend!r}")
        return self._encoder

    def provenance(self) -> dict:
        meta = {"backend": self.backend, "space": self.space}
        if self.model_id:
            meta["model_id"] = self.model_id
        return {"exporter": meta}


def read_captions(path) -> list[tuple[str, str]]:
    """Caption file: JSON lines ``{id, caption}`` or plain text, one per line."""
    items: list[tuple[str, str]] = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines()):
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            rec = json.loads(line)
            items.append((str(rec["id"]), str(rec["caption"])))
        else:
            items.append((f"cap{lineno:05d}", line))
    if not items:
        raise ValueError(f"{path}: no captions found")
    return items


def read_list(path) -> list[str]:
    """One entry per line, ``#`` comments allowed."""
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        entry = line.split("#", 1)[0].strip()
        if entry:
            out.append(entry)
    return out


def export_images(job: ExportJob, image_paths, out_dir) -> Path:
    """One bundle item per image: global vector plus all patch vectors."""
    encoder = job.encoder()
    writer = BundleWriter(out_dir, "image", job.dim)
    for path in image_paths:
        path = Path(path)
        cls, patches, grid = encoder.encode_image(path)
        item = {
            "id": path.stem,
            "n_patches": int(patches.shape[0]),
            "cls": writer.vector_ref(cls),
            "patches": writer.vector_ref(patches),
        }
        if grid is not None:
            item["patch_grid"] = list(grid)
        writer.add_item(item)
    return writer.write(job.provenance())


def export_texts(job: ExportJob, captions, out_dir) -> Path:
    """One bundle item per caption with token vectors and offset metadata."""
    encoder = job.encoder()
    writer = BundleWriter(out_dir, "text", job.dim)
    truncated = 0
    for text_id, caption in captions:
        vectors, eot, meta = encoder.encode_text(caption)
        if meta.truncated:
            truncated += 1
            logger.warning("caption %s truncated to the encoder window", text_id)
        writer.add_item(
            {
                "id": text_id,
                "caption": caption,
                "tokens": writer.vector_ref(vectors),
                "eot": writer.vector_ref(eot),
                "token_texts": list(meta.token_texts),
                "char_spans": [list(span) for span in meta.char_spans],
                "content_mask": list(meta.content_mask),
            }
        )
    if truncated:
        logger.warning("%d caption(s) were truncated", truncated)
    return writer.write(job.provenance())


def export_concept_pool(job: ExportJob, concepts, out_dir) -> Path:
    """Blank-context embedding for every concept, one item per line."""
    encoder = job.encoder()
    writer = BundleWriter(out_dir, "concept_pool", job.dim)
    failures = []
    for concept in concepts:
        try:
            vec = encoder.encode_phrase(None, concept)
        except Exception as exc:
            failures.append(f"{concept!r}: {exc}")
            continue
        writer.add_item({"concept": concept, "vec": writer.vector_ref(vec)})
    if failures:
        raise RuntimeError("failed to encode concept(s): " + "; ".join(failures))
    return writer.write(job.provenance())


def fulfill_requests(job: ExportJob, request_path, out_dir) -> Path:
    """Phrase-table bundle whose keys exactly cover the request file."""
    encoder = job.encoder()
    keys: list[tuple[str, str]] = []
    seen = set()
    with open(request_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (str(rec["attribute"]), str(rec["object"]))
            if key not in seen:
                seen.add(key)
                keys.append(key)
    writer = BundleWriter(out_dir, "phrase_table", job.dim)
    for attribute, obj in keys:
        vec = encoder.encode_phrase(attribute, obj)
        writer.add_item(
            {"attribute": attribute, "object": obj, "vec": writer.vector_ref(vec)}
        )
    return writer.write(job.provenance())


def parse_captions(job: ExportJob, captions, out_path) -> Path:
    """Pairs file for the scoring engine, one JSON line per caption."""
    parser = make_parser(job.parser)
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        for caption_id, caption in captions:
            records = parse_caption_safe(parser, caption_id, caption)
            fh.write(
                json.dumps(
                    {"caption_id": caption_id, "caption": caption, "pairs": records}
                )
                + "\n"
            )
    return out_path
