import numpy as np
import pytest

from abeclip_exporter.toy import MAX_TOKENS, ToyEncoder, tokenize


class TestTokenizer:
    def test_offsets_index_caption(self):
        caption = "A blue scooter near a green vintage car"
        tokens = tokenize(caption)
        for (s, e), text, content in zip(
            tokens.char_spans, tokens.token_texts, tokens.content_mask
        ):
            if content:
                assert caption[s:e] == text

    def test_long_words_split_into_subwords(self):
        tokens = tokenize("vintage")
        content = [t for t, c in zip(tokens.token_texts, tokens.content_mask) if c]
        assert content == ["vint", "age"]

    def test_specials_masked_with_empty_spans(self):
        tokens = tokenize("hi")
        assert tokens.content_mask[0] is False and tokens.content_mask[-1] is False
        assert tokens.char_spans[0] == (0, 0) and tokens.char_spans[-1] == (0, 0)

    def test_truncation_flagged(self):
        caption = " ".join(f"word{i}" for i in range(120))
        tokens = tokenize(caption)
        assert tokens.truncated
        assert len(tokens.token_texts) == MAX_TOKENS

    def test_short_caption_not_truncated(self):
        assert tokenize("a red cube").truncated is False


class TestToyEncoder:
    def test_text_deterministic(self):
        a = ToyEncoder(dim=32)
        b = ToyEncoder(dim=32)
        va, ea, _ = a.encode_text("a red cube")
        vb, eb, _ = b.encode_text("a red cube")
        np.testing.assert_array_equal(va, vb)
        np.testing.assert_array_equal(ea, eb)

    def test_empty_caption_rejected(self):
        with pytest.raises(ValueError):
            ToyEncoder(dim=32).encode_text("   ")

    def test_blank_attribute_phrase_matches_concept_encoding(self):
        enc = ToyEncoder(dim=32)
        np.testing.assert_array_equal(
            enc.encode_phrase(None, "bicycle"), enc.encode_phrase(None, "bicycle")
        )

    def test_attribute_context_changes_object_embedding(self):
        enc = ToyEncoder(dim=32)
        blank = enc.encode_phrase(None, "car")
        red = enc.encode_phrase("red", "car")
        assert not np.array_equal(blank, red)

    def test_image_grid(self, image_files):
        enc = ToyEncoder(dim=32, patch_grid=3)
        cls, patches, grid = enc.encode_image(image_files[0])
        assert patches.shape == (9, 32)
        assert cls.shape == (32,)
        assert grid == (3, 3)

    def test_image_deterministic(self, image_files):
        enc = ToyEncoder(dim=32, patch_grid=3)
        a = enc.encode_image(image_files[0])
        b = enc.encode_image(image_files[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_different_images_differ(self, image_files):
        enc = ToyEncoder(dim=32, patch_grid=3)
        a = enc.encode_image(image_files[0])[1]
        b = enc.encode_image(image_files[1])[1]
        assert not np.array_equal(a, b)
