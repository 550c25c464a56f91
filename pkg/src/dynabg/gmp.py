"""Gaussian max-pooling.

Each pixel is replaced by its *stable value*: the intensity ``u`` in
``0..255`` maximizing ``sum_{u' in window} N(u'; u, sigma)`` over a square
window centred on the pixel. The search runs over the whole intensity
range, not just the values present in the window.

Scores are evaluated as ``counts @ K`` where ``counts`` is the window's
256-bin histogram and ``K[a, u] = conditional_prob(a, u, sigma)``, so a
window of any size costs one 256x256 product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._parallel import pmap
from .imaging import Frame, FrameSequence

LEVELS = 256
# Scores within this relative distance of the maximum count as tied; the
# smallest such intensity wins. Keeps the result independent of summation order.
TIE_RTOL = 1e-12
_CHUNK = 1 << 14


@dataclass(frozen=True)
class PoolingConfig:
    window_size: int = 5
    sigma: float = 10.0

    def __post_init__(self):
        if not isinstance(self.window_size, (int, np.integer)) or self.window_size < 1:
            raise ValueError("window must be a positive integer")
        if self.window_size % 2 == 0:
            raise ValueError("window must be odd")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive")


def conditional_prob(u_prime, u, sigma: float):
    """Gaussian likelihood of observing ``u_prime`` given stable value ``u``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d = np.asarray(u_prime, dtype=float) - np.asarray(u, dtype=float)
    out = np.exp(-d * d / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)
    return float(out) if out.ndim == 0 else out


def kernel_table(sigma: float) -> np.ndarray:
    """``K[a, u]`` for all intensity pairs."""
    levels = np.arange(LEVELS, dtype=float)
    return conditional_prob(levels[:, None], levels[None, :], sigma)


def _argmax_lowest(scores: np.ndarray) -> np.ndarray:
    best = scores.max(axis=-1, keepdims=True)
    return np.argmax(scores >= best * (1.0 - TIE_RTOL), axis=-1)


def _histograms(windows: np.ndarray) -> np.ndarray:
    """Per-row 256-bin histograms of an ``(p, k)`` integer array."""
    p = windows.shape[0]
    idx = windows.astype(np.int64) + (np.arange(p, dtype=np.int64) * LEVELS)[:, None]
    return np.bincount(idx.ravel(), minlength=p * LEVELS).reshape(p, LEVELS).astype(float)


def window_scores(window, sigma: float) -> np.ndarray:
    """Posterior score of every candidate intensity for one window."""
    w = np.asarray(window).ravel()
    if w.size == 0:
        raise ValueError("empty window")
    if w.min() < 0 or w.max() > 255 or np.any(w != np.round(w)):
        raise ValueError("window values must be integers in [0, 255]")
    return _histograms(w[None, :]) @ kernel_table(sigma)


def stable_value(window, sigma: float = 10.0) -> int:
    """Stable value of a window (any shape; only the multiset matters).

    Ties go to the smallest intensity.
    """
    return int(_argmax_lowest(window_scores(window, sigma))[0])


def pool_array(data: np.ndarray, config: PoolingConfig, kernel: np.ndarray | None = None) -> np.ndarray:
    """Pool a ``(h, w)`` uint8 array; edges are replicated."""
    if config.window_size == 1:
        return np.array(data, dtype=np.uint8)
    K = kernel_table(config.sigma) if kernel is None else kernel
    r = config.window_size // 2
    padded = np.pad(np.asarray(data, dtype=np.uint8), r, mode="edge")
    h, w = data.shape
    windows = sliding_window_view(padded, (config.window_size, config.window_size))
    windows = windows.reshape(h * w, -1)
    out = np.empty(h * w, dtype=np.uint8)
    for start in range(0, h * w, _CHUNK):
        stop = min(start + _CHUNK, h * w)
        scores = _histograms(windows[start:stop]) @ K
        out[start:stop] = _argmax_lowest(scores)
    return out.reshape(h, w)


def pool_frame(frame: Frame, config: PoolingConfig = PoolingConfig()) -> Frame:
    return Frame(pool_array(frame.data, config))


def pool_sequence(seq: FrameSequence, config: PoolingConfig = PoolingConfig(),
                  workers: int | None = None) -> FrameSequence:
    """Pool every frame independently; order preserved."""
    K = kernel_table(config.sigma)
    pooled = pmap(lambda f: Frame(pool_array(f.data, config, K)), seq.frames, workers)
    return FrameSequence(pooled, min_length=1)
