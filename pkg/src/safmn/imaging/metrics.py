"""Y-channel image quality metrics (PSNR, SSIM).

Both metrics work on the BT.601 studio-range luma plane, the convention used
throughout the SR literature; inputs are ImageBuffers and an optional border
crop (in pixels, applied on every side) excludes boundary artifacts.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError
from .png import ImageBuffer

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def rgb_to_y(planes: np.ndarray) -> np.ndarray:
    """BT.601 studio-range luma from (3, h, w) RGB planes in [0, 1].

    Output spans [16, 235]: Y = 16 + 65.481 R + 128.553 G + 24.966 B.
    """
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise DimensionError(f"rgb_to_y expects (3, h, w) planes, got {planes.shape}")
    r, g, b = planes
    return 16.0 + 65.481 * r + 128.553 * g + 24.966 * b


def _y_pair(a: ImageBuffer, b: ImageBuffer, border_crop: int) -> tuple[np.ndarray, np.ndarray]:
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionError(
            f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    if border_crop < 0:
        raise DimensionError(f"border_crop must be >= 0, got {border_crop}")
    ya = rgb_to_y(a.to_planes())
    yb = rgb_to_y(b.to_planes())
    if border_crop:
        if 2 * border_crop >= min(ya.shape):
            raise DimensionError(f"border_crop {border_crop} consumes the whole image")
        ya = ya[border_crop:-border_crop, border_crop:-border_crop]
        yb = yb[border_crop:-border_crop, border_crop:-border_crop]
    return ya, yb


def psnr_from_y_planes(ya: np.ndarray, yb: np.ndarray) -> float:
    """10 log10(255^2 / MSE) between two luma planes (inf when equal)."""
    if ya.shape != yb.shape:
        raise DimensionError(f"plane shapes differ: {ya.shape} vs {yb.shape}")
    mse = float(np.mean((np.asarray(ya, dtype=np.float64) - yb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE**2 / mse)


def psnr_y(a: ImageBuffer, b: ImageBuffer, border_crop: int = 0) -> float:
    """Peak signal-to-noise ratio on the luma plane, in dB (inf when equal)."""
    ya, yb = _y_pair(a, b, border_crop)
    return psnr_from_y_planes(ya, yb)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    v = sliding_window_view(x, g.size, axis=0) @ g
    return sliding_window_view(v, g.size, axis=1) @ g


def ssim_y(a: ImageBuffer, b: ImageBuffer, border_crop: int = 0) -> float:
    """Mean local SSIM on the luma plane (11x11 Gaussian window, sigma 1.5)."""
    ya, yb = _y_pair(a, b, border_crop)
    if min(ya.shape) < SSIM_WINDOW:
        raise DimensionError(
            f"image {ya.shape[1]}x{ya.shape[0]} after crop is smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    g = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    mu_a = _filter_valid(ya, g)
    mu_b = _filter_valid(yb, g)
    var_a = _filter_valid(ya * ya, g) - mu_a * mu_a
    var_b = _filter_valid(yb * yb, g) - mu_b * mu_b
    cov = _filter_valid(ya * yb, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
