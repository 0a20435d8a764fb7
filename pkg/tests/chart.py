"""Deterministic edge-dense synthetic test image for training experiments.

Bicubic interpolation struggles on this content (crisp bars, square-wave
gratings, disk rims at low-resolution-recoverable frequencies), which is
exactly where a trained upscaler shows its advantage.  All structure tiles
quasi-uniformly, so any quadrant is statistically like the rest.
"""
import numpy as np

from safmn.imaging.resize import bicubic_resize


def make_chart(size: int = 256, seed: int = 0) -> np.ndarray:
    """Render a (3, size, size) float RGB image in [0, 1]."""
    ss = size * 2
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(ss), np.arange(ss), indexing="ij")
    yn, xn = yy / ss, xx / ss
    img = np.zeros((3, ss, ss))
    for c in range(3):
        img[c] = 0.45 + 0.15 * np.sin(2 * np.pi * (1.3 * xn + 0.5 * c + 0.2)) * np.cos(
            2 * np.pi * (0.9 * yn - 0.3 * c)
        )
    # square-wave gratings in rotated discs, final-resolution period 8..16 px
    for _ in range(10):
        th = rng.uniform(0, np.pi)
        period = rng.uniform(8, 16)
        f = size / period
        ph = rng.uniform(0, 2 * np.pi)
        wave = (np.sin(2 * np.pi * f * (xn * np.cos(th) + yn * np.sin(th)) + ph) > 0).astype(float)
        cy, cx, r = rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.08, 0.18)
        m = (xn - cx) ** 2 + (yn - cy) ** 2 < r * r
        lo, hi = rng.uniform(0.05, 0.35), rng.uniform(0.65, 0.95)
        col = lo + (hi - lo) * wave
        ch = rng.integers(0, 3)
        for c in range(3):
            w_ = 1.0 if c == ch else 0.55
            img[c] = np.where(m, w_ * col + (1 - w_) * img[c], img[c])
    # glyph-like bar clusters on a 16x16 grid
    cell = ss // 16
    for gy in range(16):
        for gx in range(16):
            if rng.random() < 0.45:
                continue
            col = rng.uniform(0.0, 1.0, size=3)
            oy, ox = gy * cell, gx * cell
            for _ in range(int(rng.integers(1, 4))):
                horiz = rng.random() < 0.5
                t = int(rng.integers(4, min(9, max(5, cell - 2))))
                if horiz:
                    y0 = oy + int(rng.integers(0, max(1, cell - t)))
                    x0 = ox + int(rng.integers(0, cell // 2))
                    x1 = ox + int(rng.integers(cell // 2, cell))
                    for c in range(3):
                        img[c][y0 : y0 + t, x0:x1] = col[c]
                else:
                    x0 = ox + int(rng.integers(0, max(1, cell - t)))
                    y0 = oy + int(rng.integers(0, cell // 2))
                    y1 = oy + int(rng.integers(cell // 2, cell))
                    for c in range(3):
                        img[c][y0:y1, x0 : x0 + t] = col[c]
    # scattered crisp disks
    for _ in range(40):
        cy, cx = rng.uniform(0, 1), rng.uniform(0, 1)
        r = rng.uniform(0.008, 0.03)
        col = rng.uniform(0, 1, 3)
        m = (xn - cx) ** 2 + (yn - cy) ** 2 < r * r
        for c in range(3):
            img[c] = np.where(m, col[c], img[c])
    img = np.clip(img, 0, 1)
    return np.clip(bicubic_resize(img, size, size), 0, 1)
