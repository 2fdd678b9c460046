import pytest
from PIL import Image


def paint(path, rgb, size=(24, 24)):
    Image.new("RGB", size, rgb).save(path)


@pytest.fixture(scope="session")
def red_blue_root(tmp_path_factory):
    """2 classes x 10 solid-color images (slightly jittered so rows are not
    all identical), the round-trip acceptance fixture."""
    root = tmp_path_factory.mktemp("redblue")
    for name, base in (("blue", (20, 30, 200)), ("red", (210, 40, 30))):
        d = root / name
        d.mkdir()
        for k in range(10):
            jitter = tuple(min(255, c + 3 * k) for c in base)
            paint(d / f"img_{k:02d}.png", jitter)
    return root
