"""Frames, frame sequences and the column-stacked pixel matrix.

A frame is stored as a ``(height, width)`` uint8 array. Flattening is
row-major everywhere: pixel ``j`` of a frame sits at row ``j // width``,
column ``j % width``. Group partitions and masks rely on this order.
"""

from __future__ import annotations

import fnmatch
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImagingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """An 8-bit grayscale raster. ``data`` has shape ``(height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.size == 0:
            raise ImagingError(f"frame must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 255:
                raise ImagingError("frame intensities must lie in [0, 255]")
            if not np.all(arr == np.round(arr)):
                raise ImagingError("frame intensities must be integers")
        arr = np.array(arr, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))


@dataclass(frozen=True, init=False)
class FrameSequence:
    frames: tuple[Frame, ...]

    def __init__(self, frames: Iterable[Frame], min_length: int = 2):
        frames = tuple(f if isinstance(f, Frame) else Frame(f) for f in frames)
        if len(frames) < min_length:
            raise ImagingError(f"sequence needs at least {min_length} frames, got {len(frames)}")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if f.shape != shape:
                raise ImagingError(
                    f"frame {i} has size {f.width}x{f.height}, expected {shape[1]}x{shape[0]}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i) -> Frame:
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def as_array(self) -> np.ndarray:
        """``(N, height, width)`` uint8 stack."""
        return np.stack([f.data for f in self.frames])


def to_grayscale(r, g, b):
    """BT.601 luma, rounded half-up and clamped to [0, 255].

    Works elementwise on scalars or arrays.
    """
    y = LUMA_WEIGHTS[0] * np.asarray(r, dtype=float) \
        + LUMA_WEIGHTS[1] * np.asarray(g, dtype=float) \
        + LUMA_WEIGHTS[2] * np.asarray(b, dtype=float)
    # floor(y + 0.5) instead of np.round: banker's rounding would send 0.5 down
    out = np.clip(np.floor(y + 0.5), 0, 255)
    if out.ndim == 0:
        return int(out)
    return out.astype(np.uint8)


def downscale(data: np.ndarray, factor: int) -> np.ndarray:
    """Box-filter downscale by an integer factor; trailing rows/cols that
    do not fill a whole block are dropped."""
    if factor < 1:
        raise ImagingError("downscale factor must be >= 1")
    if factor == 1:
        return data
    h = data.shape[0] // factor
    w = data.shape[1] // factor
    if h == 0 or w == 0:
        raise ImagingError(f"downscale factor {factor} too large for {data.shape[1]}x{data.shape[0]} frame")
    blocks = data[: h * factor, : w * factor].astype(float).reshape(h, factor, w, factor)
    return np.clip(np.floor(blocks.mean(axis=(1, 3)) + 0.5), 0, 255).astype(np.uint8)


def upsample(frame: Frame, factor: int, width: int, height: int) -> Frame:
    """Nearest-neighbour inverse of ``downscale`` back to ``width x height``;
    the dropped trailing rows/cols copy the last block."""
    if factor < 1:
        raise ImagingError("upsample factor must be >= 1")
    big = np.repeat(np.repeat(frame.data, factor, axis=0), factor, axis=1)
    if big.shape[0] > height or big.shape[1] > width:
        raise ImagingError(f"{frame.width}x{frame.height} x{factor} exceeds {width}x{height}")
    big = np.pad(big, ((0, height - big.shape[0]), (0, width - big.shape[1])), mode="edge")
    return Frame(big)


def read_frame(path, downscale_factor: int = 1) -> Frame:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "P", "1"):
                arr = np.asarray(im.convert("L"))
            elif im.mode in ("I;16", "I", "F"):
                raise ImagingError(f"{path.name}: unsupported {im.mode} image (need 8-bit)")
            else:
                rgb = np.asarray(im.convert("RGB"))
                arr = to_grayscale(rgb[..., 0], rgb[..., 1], rgb[..., 2])
    except ImagingError:
        raise
    except Exception as exc:  # PIL raises a zoo of types for bad files
        raise ImagingError(f"cannot decode {path.name}: {exc}") from exc
    return Frame(downscale(np.asarray(arr, dtype=np.uint8), downscale_factor))


IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def load_sequence(directory, pattern: str = "*", downscale_factor: int = 1,
                  min_length: int = 2, images_only: bool = False) -> FrameSequence:
    """Read every file in ``directory`` matching ``pattern``, in
    lexicographic filename order. ``images_only`` skips files without an
    image suffix (reports, text files)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ImagingError(f"not a directory: {directory}")
    names = sorted(n for n in os.listdir(directory)
                   if fnmatch.fnmatch(n, pattern) and (directory / n).is_file()
                   and (not images_only or Path(n).suffix.lower() in IMAGE_SUFFIXES))
    if not names:
        raise ImagingError(f"no frames matching {pattern!r} in {directory}")
    frames = []
    for name in names:
        f = read_frame(directory / name, downscale_factor)
        if frames and f.shape != frames[0].shape:
            raise ImagingError(
                f"{name}: size {f.width}x{f.height} differs from "
                f"{names[0]}: {frames[0].width}x{frames[0].height}"
            )
        frames.append(f)
    return FrameSequence(frames, min_length=min_length)


def write_frame(frame: Frame, path) -> None:
    """Write as PNG or binary PGM depending on the suffix."""
    path = Path(path)
    Image.fromarray(np.asarray(frame.data)).save(path)


def stack(seq: FrameSequence | Sequence[Frame]) -> np.ndarray:
    """Column-stack frames into an ``m x n`` float64 matrix, ``m = w*h``."""
    frames = seq.frames if isinstance(seq, FrameSequence) else tuple(seq)
    return np.stack([f.flat() for f in frames], axis=1).astype(np.float64)


def unstack(M: np.ndarray, width: int, height: int, min_length: int = 1) -> FrameSequence:
    """Inverse of :func:`stack`; entries are clamped to [0, 255] and rounded."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != width * height:
        raise ImagingError(f"matrix with {M.shape[0] if M.ndim == 2 else '?'} rows "
                           f"cannot hold {width}x{height} frames")
    vals = np.clip(np.floor(np.clip(M, 0, 255) + 0.5), 0, 255).astype(np.uint8)
    return FrameSequence((Frame(vals[:, k].reshape(height, width)) for k in range(M.shape[1])),
                         min_length=min_length)
