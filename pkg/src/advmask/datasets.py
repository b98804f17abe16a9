"""Synthetic glyph dataset and dataset-directory I/O.

The classifier in this package is trained on generated images: ten
geometric glyph classes drawn over a smooth background, with the glyph
fill and one background patch carrying strong pixel noise. The noisy
regions give every image areas of high local entropy (so entropy-masked
attacks have somewhere to hide) while the smooth remainder stays well
below the masking threshold.

On disk a dataset is a directory with one subdirectory per class label,
each containing PGM/PPM files; class indices follow the sorted
subdirectory names.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .image import Image, load_image, save_image

__all__ = [
    "make_textured_dataset",
    "save_dataset_dir",
    "load_dataset_dir",
    "CLASS_NAMES",
]

CLASS_NAMES = (
    "hbar",
    "vbar",
    "disk",
    "ring",
    "box",
    "triangle",
    "cross",
    "plus",
    "rails",
    "corner",
)


def _glyph_mask(label, size, cy, cx, s, yy, xx):
    dy, dx = yy - cy, xx - cx
    r = np.hypot(dy, dx)
    if label == 0:  # horizontal bar
        return (np.abs(dy) <= 3 * s) & (np.abs(dx) <= 10 * s)
    if label == 1:  # vertical bar
        return (np.abs(dx) <= 3 * s) & (np.abs(dy) <= 10 * s)
    if label == 2:  # filled disk
        return r <= 8 * s
    if label == 3:  # ring
        return (r >= 5 * s) & (r <= 9 * s)
    if label == 4:  # square outline
        cheb = np.maximum(np.abs(dy), np.abs(dx))
        return (cheb >= 6 * s) & (cheb <= 9 * s)
    if label == 5:  # filled triangle
        return (dy >= -8 * s) & (dy <= 8 * s) & (dx >= -8 * s) & (dx <= dy)
    if label == 6:  # X
        near = (np.abs(dy) <= 9 * s) & (np.abs(dx) <= 9 * s)
        return near & ((np.abs(dx - dy) <= 2.5 * s) | (np.abs(dx + dy) <= 2.5 * s))
    if label == 7:  # plus
        return ((np.abs(dx) <= 2.5 * s) & (np.abs(dy) <= 9 * s)) | (
            (np.abs(dy) <= 2.5 * s) & (np.abs(dx) <= 9 * s)
        )
    if label == 8:  # two horizontal rails
        return (np.abs(dx) <= 9 * s) & (
            (np.abs(dy - 5 * s) <= 2 * s) | (np.abs(dy + 5 * s) <= 2 * s)
        )
    if label == 9:  # corner L
        return ((dx >= -9 * s) & (dx <= -4 * s) & (np.abs(dy) <= 9 * s)) | (
            (dy >= 4 * s) & (dy <= 9 * s) & (np.abs(dx) <= 9 * s)
        )
    raise ValueError(f"unknown label {label}")


def _render(label, size, rng):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    base = rng.uniform(0.3, 0.6)
    ramp = rng.uniform(-0.08, 0.08)
    img = base + ramp * (yy / size - 0.5)

    # one noisy elliptical patch so part of the background is high-entropy
    pcy, pcx = rng.uniform(0.2 * size, 0.8 * size, 2)
    pa, pb = rng.uniform(0.25 * size, 0.5 * size, 2)
    patch = ((yy - pcy) / pa) ** 2 + ((xx - pcx) / pb) ** 2 <= 1.0
    img = np.where(patch, img + rng.uniform(-0.22, 0.22, (size, size)), img)

    # glyph: contrasting, noise-filled
    cy = size / 2 + rng.uniform(-2, 2)
    cx = size / 2 + rng.uniform(-2, 2)
    s = (size / 28.0) * rng.uniform(0.85, 1.15)
    mask = _glyph_mask(label, size, cy, cx, s, yy, xx)
    contrast = rng.uniform(0.3, 0.42) * (1 if base < 0.47 else -1)
    fill = base + contrast + rng.uniform(-0.18, 0.18, (size, size))
    img = np.where(mask, fill, img)

    return np.clip(img, 0.0, 1.0)[:, :, None]


def make_textured_dataset(n_per_class: int, size: int = 28, seed: int = 0):
    """Generate (images, labels) arrays; deterministic per seed."""
    rng = np.random.default_rng(seed)
    n = n_per_class * len(CLASS_NAMES)
    xs = np.empty((n, size, size, 1), dtype=np.float64)
    ys = np.empty(n, dtype=np.int64)
    i = 0
    for label in range(len(CLASS_NAMES)):
        for _ in range(n_per_class):
            xs[i] = _render(label, size, rng)
            ys[i] = label
            i += 1
    order = rng.permutation(n)
    return xs[order], ys[order]


def save_dataset_dir(xs, ys, out_dir, class_names=CLASS_NAMES) -> None:
    """Write one `<label>/<index>.pgm` file per sample."""
    out = Path(out_dir)
    counters = {}
    for x, y in zip(xs, ys):
        name = class_names[int(y)]
        sub = out / name
        sub.mkdir(parents=True, exist_ok=True)
        k = counters.get(name, 0)
        counters[name] = k + 1
        save_image(Image(np.asarray(x, dtype=np.float64)), sub / f"{k:05d}.pgm")


def load_dataset_dir(path):
    """Load a class-per-subdirectory dataset.

    Returns (images array, labels array, class names in index order).
    """
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"no class subdirectories in {root}")
    xs, ys = [], []
    for label, sub in enumerate(class_dirs):
        files = sorted(
            f for f in sub.iterdir()
            if f.suffix.lower() in (".pgm", ".ppm", ".png")
        )
        for f in files:
            xs.append(load_image(f).data)
            ys.append(label)
    if not xs:
        raise ValueError(f"no image files under {root}")
    return np.stack(xs), np.asarray(ys, dtype=np.int64), [d.name for d in class_dirs]
