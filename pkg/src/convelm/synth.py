"""Procedural segment-glyph image generator.

A deterministic stand-in for scanned-digit corpora: each class is a
fixed pattern of seven display segments, rendered with jittered box
size, position, stroke width and intensity, then box-blurred and
speckled. Ten digit classes, plus ten letter shapes for a 20-class
set whose glyphs are visually closer together (useful for stressing
non-iid partitioning).

Everything is driven by numpy Generators, so identical seeds give
identical datasets on any platform.
"""
import numpy as np

from .data import Dataset

# segments: a=top, b=top-right, c=bottom-right, d=bottom,
#           e=bottom-left, f=top-left, g=middle
DIGIT_SEGS = {
    0: "abcdef", 1: "bc", 2: "abged", 3: "abgcd", 4: "fgbc",
    5: "afgcd", 6: "afgedc", 7: "abc", 8: "abcdefg", 9: "abcfgd",
}

# letter shapes A b C d E F G H i J on the same display
LETTER_SEGS = {
    10: "abcefg", 11: "cdefg", 12: "adef", 13: "bcdeg",
    14: "adefg", 15: "aefg", 16: "acdef", 17: "bcefg",
    18: "c", 19: "bcde",
}

GLYPH_SEGS = {**DIGIT_SEGS, **LETTER_SEGS}


def render_glyph(cls, rng, side=28):
    """Draw one glyph on a side x side canvas, values in [0, 1]."""
    segs = GLYPH_SEGS[cls]
    img = np.zeros((side, side), dtype=np.float64)
    # glyph box around 16 tall by 10 wide at side 28, jittered; the
    # box scales with the canvas but the bounds reduce to the same
    # integers at side 28, keeping that stream unchanged
    scale = side / 28.0
    h_lo = max(2, round(13 * scale))
    w_lo = max(2, round(8 * scale))
    t_lo = max(1, round(2 * scale))
    h = rng.integers(h_lo, max(h_lo + 1, round(18 * scale)))
    w = rng.integers(w_lo, max(w_lo + 1, round(12 * scale)))
    t = rng.integers(t_lo, max(t_lo + 1, round(4 * scale)))  # stroke thickness
    margin = max(1, round(2 * scale))
    top = rng.integers(margin, side - h - margin)
    left = rng.integers(margin, side - w - margin)
    mid = top + h // 2
    bot = top + h
    right = left + w
    inten = rng.uniform(0.65, 1.0)

    def hseg(y, x0, x1):
        img[max(y - t // 2, 0):y + (t + 1) // 2, x0:x1] = inten

    def vseg(x, y0, y1):
        img[y0:y1, max(x - t // 2, 0):x + (t + 1) // 2] = inten

    if "a" in segs:
        hseg(top, left, right)
    if "g" in segs:
        hseg(mid, left, right)
    if "d" in segs:
        hseg(bot, left, right)
    if "f" in segs:
        vseg(left, top, mid)
    if "b" in segs:
        vseg(right, top, mid)
    if "e" in segs:
        vseg(left, mid, bot)
    if "c" in segs:
        vseg(right, mid, bot)

    # soften edges with a 3x3 box blur, applied once or twice
    for _ in range(rng.integers(1, 3)):
        p = np.pad(img, 1)
        img = sum(p[i:i + side, j:j + side] for i in range(3) for j in range(3)) / 9.0

    img = img + rng.normal(0, 0.08, img.shape)
    return np.clip(img, 0, 1)


def make_dataset(m, seed, num_classes=10, side=28):
    """Render m labeled glyphs with labels drawn uniformly over the classes."""
    if not 1 <= num_classes <= len(GLYPH_SEGS):
        raise ValueError(f"num_classes must be in [1, {len(GLYPH_SEGS)}]")
    rng = np.random.default_rng([seed])
    labels = rng.integers(0, num_classes, size=m)
    images = np.empty((m, 1, side, side), dtype=np.float32)
    for i, c in enumerate(labels):
        images[i, 0] = render_glyph(int(c), rng, side)
    return Dataset(images, labels.astype(np.int64))
