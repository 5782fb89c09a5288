import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def image_files(tmp_path):
    """Ten small deterministic PNGs with distinct content."""
    rng = np.random.default_rng(17)
    paths = []
    for i in range(10):
        pixels = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        pixels[: 8 + i] //= 2  # make each image visibly different
        path = tmp_path / f"photo{i:02d}.png"
        Image.fromarray(pixels, "RGB").save(path)
        paths.append(path)
    return paths


CAPTIONS = [
    ("cap00", "A yellow cylinder and a red cube."),
    ("cap01", "A blue scooter is parked near a curb in front of a green vintage car"),
    ("cap02", "a dog runs across wet grass"),
    ("cap03", "the wooden chair and the shiny lamp"),
    ("cap04", "two people walking along the shore"),
    ("cap05", "a silver truck parked beside a brown fence"),
    ("cap06", "the striped shirt hangs above a leather shoe"),
    ("cap07", "an empty bowl next to a full bottle"),
    ("cap08", "a tiny clock on a huge table"),
    ("cap09", "fresh bread cooling on a metal tray"),
]


@pytest.fixture
def captions():
    return list(CAPTIONS)
