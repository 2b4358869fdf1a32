"""Synthetic 28x28 digit dataset, rendered from system fonts with random
geometry. A stand-in for environments where the classic handwritten-digit
IDX files are not on disk; it exercises the identical pipeline and file
formats. Deterministic for a fixed seed."""

import glob
import os

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

from .idx import write_idx_images, write_idx_labels

_FONT_DIRS = (
    "/usr/share/fonts/truetype/dejavu",
    "/usr/share/fonts/truetype",
)


def _find_fonts():
    found = []
    for base in _FONT_DIRS:
        found += sorted(glob.glob(os.path.join(base, "DejaVu*.ttf")))
        if found:
            break
    if not found:
        try:
            import matplotlib

            base = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data/fonts/ttf")
            found = sorted(glob.glob(os.path.join(base, "DejaVu*.ttf")))
        except ImportError:
            pass
    if not found:
        raise RuntimeError("no DejaVu fonts found for the synthetic digit renderer")
    # skip the condensed/display faces; keep visually distinct weights
    keep = [f for f in found if "Display" not in f and "Condensed" not in f]
    return keep or found


_FONT_CACHE = {}


def _font(path, size):
    key = (path, size)
    if key not in _FONT_CACHE:
        _FONT_CACHE[key] = ImageFont.truetype(path, size)
    return _FONT_CACHE[key]


def render_digit(digit, rng, fonts):
    """One 28x28 uint8 glyph: random face, size, rotation, offset and a
    touch of blur/noise so the classes overlap a little."""
    canvas = Image.new("L", (56, 56), 0)
    draw = ImageDraw.Draw(canvas)
    font = _font(fonts[rng.integers(len(fonts))], int(rng.integers(34, 46)))
    bbox = draw.textbbox((0, 0), str(digit), font=font)
    w, h = bbox[2] - bbox[0], bbox[3] - bbox[1]
    dx = (56 - w) / 2 - bbox[0] + rng.uniform(-3, 3)
    dy = (56 - h) / 2 - bbox[1] + rng.uniform(-3, 3)
    draw.text((dx, dy), str(digit), fill=255, font=font)
    canvas = canvas.rotate(rng.uniform(-14, 14), resample=Image.BILINEAR, fillcolor=0)
    canvas = canvas.filter(ImageFilter.GaussianBlur(radius=rng.uniform(0.4, 1.1)))
    small = canvas.resize((28, 28), resample=Image.BILINEAR)
    arr = np.asarray(small, dtype=np.float64)
    if arr.max() > 0:
        arr = arr * (255.0 / arr.max())
    arr += rng.normal(0.0, 6.0, size=arr.shape)
    return np.clip(arr, 0, 255).astype(np.uint8)


def make_digits(n, seed=1):
    """(images uint8 (n,28,28), labels uint8 (n,)) with labels cycling
    0..9 in shuffled order."""
    rng = np.random.default_rng(seed)
    fonts = _find_fonts()
    labels = np.tile(np.arange(10, dtype=np.uint8), n // 10 + 1)[:n]
    rng.shuffle(labels)
    images = np.stack([render_digit(int(d), rng, fonts) for d in labels])
    return images, labels


def write_digits_idx(out_dir, train_count, test_count, seed=1):
    """Write train/test IDX pairs in the classic file layout; returns the
    four paths."""
    os.makedirs(out_dir, exist_ok=True)
    images, labels = make_digits(train_count + test_count, seed)
    paths = {
        "train_images": os.path.join(out_dir, "train-images-idx3-ubyte"),
        "train_labels": os.path.join(out_dir, "train-labels-idx1-ubyte"),
        "test_images": os.path.join(out_dir, "t10k-images-idx3-ubyte"),
        "test_labels": os.path.join(out_dir, "t10k-labels-idx1-ubyte"),
    }
    write_idx_images(paths["train_images"], images[:train_count])
    write_idx_labels(paths["train_labels"], labels[:train_count])
    write_idx_images(paths["test_images"], images[train_count:])
    write_idx_labels(paths["test_labels"], labels[train_count:])
    return paths
