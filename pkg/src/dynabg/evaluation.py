"""Confusion counts, recall/precision/F-measure and a synthetic scene generator.

Ground truth follows the CDNET labelling: 0 static, 50 shadow (counted as
background), 85 outside the region of interest, 170 unknown motion,
255 moving. Pixels labelled 85 or 170 are ignored.

Naming: ``fn`` counts foreground pixels classified as background. Some
write-ups call this quantity TN; recall is ``tp / (tp + fn)`` either way.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .imaging import Frame, FrameSequence, ImagingError, read_frame

GT_BACKGROUND = (0, 50)
GT_FOREGROUND = 255
GT_IGNORED = (85, 170)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0
    evaluated: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fn + other.fn, self.fp + other.fp,
                               self.tn + other.tn, self.evaluated + other.evaluated)

    def scaled(self, c: int) -> "ConfusionCounts":
        return ConfusionCounts(*(c * v for v in (self.tp, self.fn, self.fp, self.tn, self.evaluated)))


@dataclass(frozen=True)
class MetricReport:
    recall: float
    precision: float
    f_measure: float
    counts: ConfusionCounts | None = None
    # names of ratios that were 0/0 and reported as 0
    degenerate: tuple[str, ...] = ()


def compare(mask: Frame, gt: Frame, roi: Frame | None = None) -> ConfusionCounts:
    """Count one frame. ``mask`` is foreground where nonzero; ``roi`` (if
    given) restricts evaluation to its nonzero pixels."""
    m = np.asarray(mask.data if isinstance(mask, Frame) else mask)
    g = np.asarray(gt.data if isinstance(gt, Frame) else gt)
    if m.shape != g.shape:
        raise ValueError(f"mask is {m.shape[1]}x{m.shape[0]} but ground truth is {g.shape[1]}x{g.shape[0]}")
    valid = ~np.isin(g, GT_IGNORED)
    if roi is not None:
        r = np.asarray(roi.data if isinstance(roi, Frame) else roi)
        if r.shape != g.shape:
            raise ValueError("ROI size differs from ground truth")
        valid &= r > 0
    fg = (g == GT_FOREGROUND) & valid
    bg = valid & ~fg
    det = m > 0
    return ConfusionCounts(
        tp=int(np.count_nonzero(fg & det)),
        fn=int(np.count_nonzero(fg & ~det)),
        fp=int(np.count_nonzero(bg & det)),
        tn=int(np.count_nonzero(bg & ~det)),
        evaluated=int(np.count_nonzero(valid)),
    )


def f_measure(recall: float, precision: float) -> float:
    s = recall + precision
    return 2.0 * recall * precision / s if s > 0 else 0.0


def metrics(counts: ConfusionCounts) -> MetricReport:
    degenerate = []
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if recall + precision == 0:
        degenerate.append("f_measure")
    return MetricReport(recall, precision, f_measure(recall, precision), counts, tuple(degenerate))


def read_temporal_roi(path) -> tuple[int, int] | None:
    path = Path(path)
    if not path.is_file():
        return None
    first, last = (int(x) for x in path.read_text().split()[:2])
    return first, last


def _gt_path(gt_dir: Path, frame_number: int) -> Path | None:
    for ext in (".png", ".bmp", ".jpg", ".pgm"):
        p = gt_dir / f"gt{frame_number:06d}{ext}"
        if p.is_file():
            return p
    return None


def evaluate_sequence(masks: FrameSequence | Sequence[Frame], gt_dir, roi: Frame | None = None,
                      first_frame: int = 1, temporal_roi: tuple[int, int] | None = None) -> MetricReport:
    """Micro-averaged metrics over a video.

    Mask ``i`` is compared with ``gt_dir/gt%06d.png`` for frame number
    ``first_frame + i``. Frames outside ``temporal_roi`` (inclusive,
    1-based; read from ``temporalROI.txt`` next to ``gt_dir`` when not
    given) are skipped.
    """
    gt_dir = Path(gt_dir)
    if not gt_dir.is_dir():
        raise ImagingError(f"ground-truth directory not found: {gt_dir}")
    if temporal_roi is None:
        temporal_roi = read_temporal_roi(gt_dir.parent / "temporalROI.txt")
    frames = masks.frames if isinstance(masks, FrameSequence) else list(masks)
    total = ConfusionCounts()
    for i, mask in enumerate(frames):
        num = first_frame + i
        if temporal_roi and not (temporal_roi[0] <= num <= temporal_roi[1]):
            continue
        p = _gt_path(gt_dir, num)
        if p is None:
            raise ImagingError(f"missing ground truth for frame {num} in {gt_dir}")
        gt = read_frame(p)
        if gt.shape != mask.shape:
            raise ImagingError(f"frame {num}: mask is {mask.width}x{mask.height}, "
                               f"{p.name} is {gt.width}x{gt.height}")
        total = total + compare(mask, gt, roi)
    return metrics(total)


def write_reports(rows: dict[str, MetricReport], csv_path=None, json_path=None) -> None:
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["video", "recall", "precision", "fmeasure"])
            for video, r in rows.items():
                w.writerow([video, f"{r.recall:.6f}", f"{r.precision:.6f}", f"{r.f_measure:.6f}"])
    if json_path is not None:
        payload = {v: {"recall": r.recall, "precision": r.precision, "fmeasure": r.f_measure,
                       "counts": asdict(r.counts) if r.counts else None,
                       "degenerate": list(r.degenerate)}
                   for v, r in rows.items()}
        Path(json_path).write_text(json.dumps(payload, indent=2))


# --- synthetic scenes -------------------------------------------------------

BACKGROUND_KINDS = ("static", "wave", "snow")


@dataclass(frozen=True)
class SceneConfig:
    """A uniform square moving in a straight line over a background.

    ``wave`` adds a sinusoidal ripple travelling along x over the bottom
    ``wave_band`` fraction of the frame. Its spatial period is
    ``wave_period`` px; row ``y`` advances at
    ``wave_speed * (1 + wave_perspective * (y / (height - 1) - 0.5))``
    px/frame, so with ``wave_perspective=0`` every background pixel
    oscillates with period ``wave_period / wave_speed`` frames. Rows moving
    at different speeds make the ripple high-rank. ``wave_jitter`` adds a
    per-frame random phase offset (radians). ``wave_crest > 1`` keeps only
    the positive half-wave raised to that power, giving thin bright crests
    (glints) instead of a plain sinusoid. ``snow`` adds bright flecks
    that live for ``snow_life`` frames.
    """

    width: int = 64
    height: int = 64
    frames: int = 30
    object_size: int = 16
    object_start: tuple[float, float] = (4.0, 8.0)
    velocity: tuple[float, float] = (1.4, 0.8)
    object_intensity: int = 200
    kind: str = "static"
    wave_amplitude: float = 40.0
    wave_period: float = 6.0
    wave_speed: float = 1.0
    wave_perspective: float = 0.5
    wave_band: float = 1.0
    wave_jitter: float = 0.0
    wave_crest: float = 8.0
    snow_rate: float = 0.01
    snow_life: int = 2
    snow_intensity: int = 240
    noise_sigma: float = 0.0
    background_blocks: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BACKGROUND_KINDS:
            raise ValueError(f"kind must be one of {BACKGROUND_KINDS}")
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise ValueError("width, height and frames must be positive")
        if not 1 <= self.object_size <= min(self.width, self.height):
            raise ValueError("object_size must fit in the frame")
        if self.wave_period <= 0:
            raise ValueError("wave_period must be positive")
        if self.wave_crest < 1:
            raise ValueError("wave_crest must be >= 1")
        if not 0 <= self.wave_band <= 1:
            raise ValueError("wave_band must lie in [0, 1]")
        if self.noise_sigma < 0 or not 0 <= self.snow_rate <= 1:
            raise ValueError("noise_sigma must be >= 0 and snow_rate in [0, 1]")
        for k in range(self.frames):
            x, y = self.object_position(k)
            if x < 0 or y < 0 or x + self.object_size > self.width or y + self.object_size > self.height:
                raise ValueError(f"object leaves the frame at frame {k} (top-left at x={x}, y={y})")

    def object_position(self, k: int) -> tuple[int, int]:
        x = math.floor(self.object_start[0] + self.velocity[0] * k + 0.5)
        y = math.floor(self.object_start[1] + self.velocity[1] * k + 0.5)
        return x, y


def _base_background(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Smooth gradient plus a few flat rectangles."""
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width].astype(float)
    bg = 70.0 + 40.0 * xx / max(cfg.width - 1, 1) + 15.0 * yy / max(cfg.height - 1, 1)
    for _ in range(cfg.background_blocks):
        w = int(rng.integers(cfg.width // 8 + 1, cfg.width // 3 + 2))
        h = int(rng.integers(cfg.height // 8 + 1, cfg.height // 3 + 2))
        x0 = int(rng.integers(0, max(cfg.width - w, 1)))
        y0 = int(rng.integers(0, max(cfg.height - h, 1)))
        bg[y0:y0 + h, x0:x0 + w] = float(rng.integers(40, 140))
    return bg


def synth_scene(cfg: SceneConfig) -> tuple[FrameSequence, FrameSequence]:
    """Frames and ground-truth masks (255 on the square, 0 elsewhere)."""
    rng = np.random.default_rng(cfg.seed)
    base = _base_background(cfg, rng)
    xx = np.arange(cfg.width, dtype=float)[None, :]
    yy = np.arange(cfg.height, dtype=float)[:, None]
    phases = rng.uniform(-1, 1, cfg.frames) * cfg.wave_jitter
    rel_row = yy / max(cfg.height - 1, 1) - 0.5
    row_speed = cfg.wave_speed * (1.0 + cfg.wave_perspective * rel_row)
    water = yy >= cfg.height * (1.0 - cfg.wave_band)
    flakes = np.zeros((cfg.height, cfg.width), dtype=int)
    frames, gts = [], []
    for k in range(cfg.frames):
        img = base.copy()
        if cfg.kind == "wave":
            arg = 2 * np.pi * (xx - row_speed * k) / cfg.wave_period + phases[k]
            ripple = np.sin(arg)
            if cfg.wave_crest != 1:
                ripple = np.maximum(ripple, 0.0) ** cfg.wave_crest
            img = img + np.where(water, cfg.wave_amplitude * ripple, 0.0)
        if cfg.noise_sigma > 0:
            img = img + rng.normal(0, cfg.noise_sigma, img.shape)
        x, y = cfg.object_position(k)
        s = cfg.object_size
        img[y:y + s, x:x + s] = cfg.object_intensity
        gt = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
        gt[y:y + s, x:x + s] = 255
        if cfg.kind == "snow":
            flakes = np.maximum(flakes - 1, 0)
            new = rng.random(flakes.shape) < cfg.snow_rate
            flakes[new] = cfg.snow_life
            img[flakes > 0] = cfg.snow_intensity
        frames.append(Frame(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)))
        gts.append(Frame(gt))
    return FrameSequence(frames, min_length=1), FrameSequence(gts, min_length=1)


def write_scene(frames: FrameSequence, gts: FrameSequence, out_dir, config: SceneConfig | None = None) -> Path:
    """CDNET layout: ``input/in%06d.png``, ``groundtruth/gt%06d.png`` and
    ``temporalROI.txt`` covering every frame."""
    from .imaging import write_frame

    out = Path(out_dir)
    (out / "input").mkdir(parents=True, exist_ok=True)
    (out / "groundtruth").mkdir(parents=True, exist_ok=True)
    for i, (f, g) in enumerate(zip(frames, gts), start=1):
        write_frame(f, out / "input" / f"in{i:06d}.png")
        write_frame(g, out / "groundtruth" / f"gt{i:06d}.png")
    (out / "temporalROI.txt").write_text(f"1 {len(frames)}\n")
    if config is not None:
        (out / "scene.json").write_text(json.dumps(asdict(config), indent=2))
    return out
