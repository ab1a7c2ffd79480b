"""Deterministic grayscale rasterizer for puzzle panels.

White background, black outline, interior gray level set by the fill
attribute. Shapes are regular polygons (or a circle) centered on their
slot, with radius proportional to the size attribute and an optional
+-1 px center jitter drawn from the caller's rng.
"""

from __future__ import annotations

import numpy as np

__all__ = ["rasterize", "fill_gray"]

_VERTEX_COUNT = {0: 3, 1: 4, 2: 5, 3: 6}  # triangle, square, pentagon, hexagon
_STROKE = 0.7  # half-width of the outline, in pixels


def fill_gray(fill_level: int) -> int:
    """Interior gray value; strictly darker as the level rises."""
    return int(round(255 * (5 - fill_level) / 5))


def _slot_geometry(config: str, size_px: int) -> tuple[list[tuple[float, float]], float]:
    if config == "center":
        half = size_px / 2.0
        return [(half, half)], half
    q = size_px / 4.0
    centers = [(q, q), (q, 3 * q), (3 * q, q), (3 * q, 3 * q)]  # bit i = slot i
    return centers, q


def _draw_shape(canvas, yy, xx, cy, cx, radius, shape, gray):
    if shape == 4:  # circle
        d = np.hypot(yy - cy, xx - cx)
        interior = d < radius - _STROKE
        stroke = np.abs(d - radius) <= _STROKE
    else:
        k = _VERTEX_COUNT[shape]
        angles = -np.pi / 2 + 2 * np.pi * np.arange(k) / k
        vy = cy + radius * np.sin(angles)
        vx = cx + radius * np.cos(angles)
        inside_pos = np.ones_like(yy, dtype=bool)
        inside_neg = np.ones_like(yy, dtype=bool)
        dist = np.full_like(yy, np.inf, dtype=np.float64)
        for i in range(k):
            py, px = vy[i], vx[i]
            qy, qx = vy[(i + 1) % k], vx[(i + 1) % k]
            ey, ex = qy - py, qx - px
            # Convex polygon: inside is where the edge cross products keep
            # one sign (either orientation).
            cross = ex * (yy - py) - ey * (xx - px)
            inside_pos &= cross >= 0
            inside_neg &= cross <= 0
            t = np.clip(((yy - py) * ey + (xx - px) * ex) / (ey * ey + ex * ex), 0.0, 1.0)
            dist = np.minimum(dist, np.hypot(yy - (py + t * ey), xx - (px + t * ex)))
        interior = (inside_pos | inside_neg) & (dist > _STROKE)
        stroke = dist <= _STROKE
    canvas[interior] = gray
    canvas[stroke] = 0


def rasterize(
    attrs,
    image_size: int,
    config: str,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Render one panel to a (image_size, image_size) uint8 array."""
    if image_size < 16:
        raise ValueError(f"image_size must be >= 16, got {image_size}")
    centers, slot_half = _slot_geometry(config, image_size)
    radius = slot_half * (0.25 + 0.135 * attrs.size)
    gray = fill_gray(attrs.fill)
    canvas = np.full((image_size, image_size), 255, dtype=np.uint8)
    yy, xx = np.mgrid[0:image_size, 0:image_size].astype(np.float64) + 0.5
    for slot in range(len(centers)):
        if not (attrs.mask >> slot) & 1:
            continue
        cy, cx = centers[slot]
        if rng is not None:
            cy += float(rng.integers(-1, 2))
            cx += float(rng.integers(-1, 2))
        _draw_shape(canvas, yy, xx, cy, cx, radius, attrs.shape, gray)
    return canvas
