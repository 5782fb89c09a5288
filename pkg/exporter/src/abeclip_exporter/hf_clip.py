"""Encoder backend for CLIP-family checkpoints via transformers.

Exports token/patch embeddings from the last transformer layer after the
final layer norm ("pre" space) or additionally pushed through the model's
projection into the shared contrastive space ("post", the default: it is
the space the global vectors live in, so tokens and patches stay directly
comparable with them).

Everything here imports torch/transformers lazily so the rest of the
exporter works on machines without them.
"""

from __future__ import annotations

import numpy as np

_IMPORT_HINT = (
    "the hf-clip backend needs torch and transformers installed and a local or "
    "downloadable checkpoint; install with `pip install abeclip-exporter[hf]`"
)


class HFClipEncoder:
    def __init__(self, model_id: str, space: str = "post", device: str = "cpu"):
        if space not in ("pre", "post"):
            raise ValueError(f"space must be 'pre' or 'post', got {space!r}")
        try:
            import torch
            from transformers import CLIPImageProcessor, CLIPModel, CLIPTokenizerFast
        except ImportError as exc:
            raise RuntimeError(_IMPORT_HINT) from exc
        self._torch = torch
        self.space = space
        self.device = device
        self.model = CLIPModel.from_pretrained(model_id).to(device).eval()
        self.tokenizer = CLIPTokenizerFast.from_pretrained(model_id)
        self.processor = CLIPImageProcessor.from_pretrained(model_id)
        self.dim = (
            self.model.config.projection_dim
            if space == "post"
            else self.model.config.text_config.hidden_size
        )
        if space == "pre" and (
            self.model.config.text_config.hidden_size
            != self.model.config.vision_config.hidden_size
        ):
            raise ValueError(
                "pre-projection text and vision widths differ for this checkpoint; "
                "use space='post' so both sides share one dimension"
            )

    def encode_text(self, caption: str):
        torch = self._torch
        enc = self.tokenizer(
            caption,
            return_offsets_mapping=True,
            return_tensors="pt",
            truncation=True,
        )
        offsets = enc.pop("offset_mapping")[0].tolist()
        special = self.tokenizer.get_special_tokens_mask(
            enc["input_ids"][0].tolist(), already_has_special_tokens=True
        )
        with torch.no_grad():
            out = self.model.text_model(
                input_ids=enc["input_ids"].to(self.device),
                attention_mask=enc["attention_mask"].to(self.device),
            )
            hidden = out.last_hidden_state[0]  # final layer norm already applied
            eot = out.pooler_output[0]
            if self.space == "post":
                hidden = self.model.text_projection(hidden)
                eot = self.model.text_projection(eot)
        token_texts = self.tokenizer.convert_ids_to_tokens(enc["input_ids"][0].tolist())

        from .toy import TokenizedText

        spans = []
        mask = []
        for (start, end), is_special in zip(offsets, special):
            if is_special or start == end:
                spans.append((0, 0))
                mask.append(False)
            else:
                spans.append((int(start), int(end)))
                mask.append(True)
        meta = TokenizedText(
            token_texts=token_texts,
            char_spans=spans,
            content_mask=mask,
            truncated=len(self.tokenizer(caption)["input_ids"]) > len(token_texts),
        )
        return hidden.cpu().numpy().astype(np.float64), eot.cpu().numpy().astype(np.float64), meta

    def encode_phrase(self, attribute: str | None, obj: str) -> np.ndarray:
        phrase = obj if attribute is None else f"{attribute} {obj}"
        tokens, _, meta = self.encode_text(phrase)
        obj_start = phrase.index(obj, 0 if attribute is None else len(attribute))
        span = (obj_start, obj_start + len(obj))
        rows = [
            tokens[i]
            for i, (s, e) in enumerate(meta.char_spans)
            if meta.content_mask[i] and s < span[1] and span[0] < e
        ]
        if not rows:
            raise ValueError(f"object {obj!r} not covered by tokens of {phrase!r}")
        return np.mean(rows, axis=0)

    def encode_image(self, path):
        torch = self._torch
        from PIL import Image

        with Image.open(path) as img:
            inputs = self.processor(images=img.convert("RGB"), return_tensors="pt")
        with torch.no_grad():
            out = self.model.vision_model(pixel_values=inputs["pixel_values"].to(self.device))
            hidden = self.model.vision_model.post_layernorm(out.last_hidden_state[0])
            cls, patches = hidden[0], hidden[1:]
            if self.space == "post":
                cls = self.model.visual_projection(cls)
                patches = self.model.visual_projection(patches)
        n = patches.shape[0]
        side = int(round(n ** 0.5))
        grid = (side, side) if side * side == n else None
        return (
            cls.cpu().numpy().astype(np.float64),
            patches.cpu().numpy().astype(np.float64),
            grid,
        )
