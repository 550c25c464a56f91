"""End-to-end moving object detection.

``sc-rpca-stable``: pool every frame, segment the pooled video, stack,
solve SC-RPCA, then mark entries of E with ``|E| > epsilon`` as
foreground. The two ablations swap the solver for classic RPCA and
optionally skip pooling.
"""

from __future__ import annotations

import time
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gmp import PoolingConfig, pool_sequence
from .imaging import Frame, FrameSequence, stack
from .partition import GroupPartition
from .segmentation import SegmentationConfig, segment_video
from .solver import Decomposition, SolverConfig, WEIGHT_MODES, solve_rpca, solve_sc_rpca

MODES = ("rpca-pixel", "rpca-stable", "sc-rpca-stable")
DEFAULT_EPSILON = 1e-6 * 255


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@dataclass(frozen=True)
class DetectionConfig:
    pooling: PoolingConfig = field(default_factory=PoolingConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    epsilon: float = DEFAULT_EPSILON
    weight_mode: str = "sqrt"
    mode: str = "sc-rpca-stable"
    # used when solver.lam is None: lam = lambda_scale / sqrt(max(m, n))
    lambda_scale: float = 2.25

    def __post_init__(self):
        if not self.lambda_scale > 0:
            raise ValueError("lambda scale must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight-mode must be one of {WEIGHT_MODES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True, eq=False)
class DetectionResult:
    masks: FrameSequence
    decomposition: Decomposition
    partition: GroupPartition | None
    features: FrameSequence  # the frames actually decomposed (pooled or raw)
    timings: dict[str, float]


def binarize(E, epsilon: float, width: int, height: int) -> FrameSequence:
    """Foreground (255) where ``|E| > epsilon``, one mask per column."""
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != width * height:
        raise ValueError(f"E has shape {E.shape}, expected {width * height} rows")
    if not np.all(np.isfinite(E)):
        raise ValueError("E has non-finite entries")
    fg = np.abs(E) > epsilon
    return FrameSequence(
        (Frame(np.where(fg[:, k], 255, 0).astype(np.uint8).reshape(height, width))
         for k in range(E.shape[1])),
        min_length=1,
    )


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def detect(seq: FrameSequence, config: DetectionConfig = DetectionConfig(),
           workers: int | None = None, callback=None,
           partition: GroupPartition | None = None) -> DetectionResult:
    """Run the pipeline selected by ``config.mode``.

    A precomputed ``partition`` (e.g. read from a ``segment`` run) replaces
    the segmentation stage in ``sc-rpca-stable`` mode; other modes ignore it.
    """
    if len(seq) < 2:
        raise StageError("input", ValueError("detection needs at least 2 frames"))
    timings = {}
    t = time.perf_counter()
    if config.mode == "rpca-pixel":
        features = seq
    else:
        features = _stage("pooling", pool_sequence, seq, config.pooling, workers)
    timings["pooling"] = time.perf_counter() - t

    t = time.perf_counter()
    if config.mode != "sc-rpca-stable":
        partition = None
    elif partition is None:
        partition = _stage("segmentation", segment_video, features, config.segmentation, workers)
    else:
        _stage("segmentation", partition.check_shape, (seq.width * seq.height, len(seq)))
    timings["segmentation"] = time.perf_counter() - t

    D = stack(features)
    solver = config.solver
    if solver.lam is None:
        solver = replace(solver, lam=config.lambda_scale / math.sqrt(max(D.shape)))
    t = time.perf_counter()
    if partition is None:
        dec = _stage("solver", solve_rpca, D, solver, callback)
    else:
        dec = _stage("solver", solve_sc_rpca, D, partition, solver, config.weight_mode, callback)
    timings["solver"] = time.perf_counter() - t

    masks = binarize(dec.E, config.epsilon, seq.width, seq.height)
    return DetectionResult(masks, dec, partition, features, timings)
