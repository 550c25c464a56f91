"""Video segmentation producing the group partition for SC-RPCA.

Three stages:

1. ``oversegment``: SLIC-style local k-means in (x, y, intensity) with a
   connectivity pass, giving small 4-connected superpixels.
2. ``segment_frame``: greedy agglomerative merging of spatially adjacent
   superpixels on (mean, standard deviation) of intensity.
3. ``link_frames``: greedy merging of subregion groups across adjacent
   frames whose centroids are closer than a threshold.

Region features are kept as sufficient statistics (count, sum, sum of
squares) so merged features are exact.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._parallel import pmap
from .imaging import Frame, FrameSequence
from .partition import GroupPartition, PartitionError, partition_stats  # noqa: F401


@dataclass(frozen=True)
class SegmentationConfig:
    target_count: int = 200
    compactness: float = 10.0
    merge_threshold: float = 12.0
    center_threshold: float = 20.0
    similarity_threshold: float = 8.0
    slic_iterations: int = 10

    def __post_init__(self):
        if int(self.target_count) != self.target_count or self.target_count < 1:
            raise ValueError("superpixels must be a positive integer")
        if not self.compactness > 0:
            raise ValueError("compactness must be positive")
        if self.merge_threshold < 0:
            raise ValueError("merge-threshold must be nonnegative")
        if self.center_threshold < 0:
            raise ValueError("center-threshold must be nonnegative")
        if self.similarity_threshold < 0:
            raise ValueError("similarity-threshold must be nonnegative")


@dataclass(frozen=True, eq=False)
class _Region:
    pixel_indices: np.ndarray  # sorted flat indices, read-only
    frame_shape: tuple[int, int]
    count: int
    total: float
    total_sq: float
    sum_x: float
    sum_y: float

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.sum_x / self.count, self.sum_y / self.count)

    @property
    def mean_intensity(self) -> float:
        return self.total / self.count

    @property
    def variance(self) -> float:
        m = self.total / self.count
        return max(self.total_sq / self.count - m * m, 0.0)


class Superpixel(_Region):
    pass


@dataclass(frozen=True, eq=False)
class Subregion(_Region):
    frame_index: int = 0

    @property
    def feature(self) -> tuple[float, float]:
        return (self.mean_intensity, self.variance)


def _stats(count, total, total_sq):
    mean = total / count
    return mean, math.sqrt(max(total_sq / count - mean * mean, 0.0))


def feature_distance(a, b) -> float:
    """Euclidean distance of (mean, std) for two regions or stat triples.

    The standard deviation keeps both coordinates in intensity units.
    """
    if isinstance(a, _Region):
        a = (a.count, a.total, a.total_sq)
    if isinstance(b, _Region):
        b = (b.count, b.total, b.total_sq)
    ma, sa = _stats(*a)
    mb, sb = _stats(*b)
    return math.hypot(ma - mb, sa - sb)


def _make_region(cls, idx: np.ndarray, values: np.ndarray, shape, **extra):
    idx = np.sort(np.asarray(idx, dtype=np.int64))
    idx.setflags(write=False)
    v = values[idx]
    h, w = shape
    return cls(pixel_indices=idx, frame_shape=(h, w), count=int(idx.size),
               total=float(v.sum()), total_sq=float((v * v).sum()),
               sum_x=float((idx % w).sum()), sum_y=float((idx // w).sum()), **extra)


def _grid_edges(labels: np.ndarray):
    """Pairs of 4-neighbour flat indices (right and down neighbours)."""
    h, w = labels.shape
    ids = np.arange(h * w).reshape(h, w)
    a = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    b = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    return a, b


def _components(labels: np.ndarray) -> np.ndarray:
    """Relabel so each 4-connected piece of each label gets its own id."""
    n = labels.size
    a, b = _grid_edges(labels)
    flat = labels.ravel()
    same = flat[a] == flat[b]
    g = coo_matrix((np.ones(same.sum()), (a[same], b[same])), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    return comp.reshape(labels.shape)


def _region_adjacency(labels: np.ndarray) -> set[tuple[int, int]]:
    a, b = _grid_edges(labels)
    flat = labels.ravel()
    la, lb = flat[a], flat[b]
    diff = la != lb
    lo = np.minimum(la[diff], lb[diff])
    hi = np.maximum(la[diff], lb[diff])
    return set(zip(lo.tolist(), hi.tolist()))


def _grid_shape(target: int, h: int, w: int) -> tuple[int, int]:
    nx = min(w, max(1, round(math.sqrt(target * w / h))))
    ny = min(h, max(1, round(target / nx)))
    return ny, nx


def _slic_labels(img: np.ndarray, target: int, compactness: float, iterations: int) -> np.ndarray:
    h, w = img.shape
    ny, nx = _grid_shape(target, h, w)
    step = math.sqrt(h * w / (ny * nx))
    cy = (np.arange(ny) + 0.5) * h / ny
    cx = (np.arange(nx) + 0.5) * w / nx
    cy, cx = (g.ravel() for g in np.meshgrid(cy, cx, indexing="ij"))

    # nudge seeds off edges to the lowest-gradient pixel in a 3x3 neighbourhood
    gy, gx = np.gradient(img)
    grad = gx * gx + gy * gy
    for i in range(len(cy)):
        y0, x0 = min(int(cy[i]), h - 1), min(int(cx[i]), w - 1)
        ys = slice(max(y0 - 1, 0), min(y0 + 2, h))
        xs = slice(max(x0 - 1, 0), min(x0 + 2, w))
        sub = grad[ys, xs]
        dy, dx = np.unravel_index(np.argmin(sub), sub.shape)
        cy[i], cx[i] = ys.start + dy, xs.start + dx
    ci = img[cy.astype(int), cx.astype(int)].astype(float)

    py, px = (g.ravel().astype(float) for g in np.indices((h, w)))
    pv = img.ravel()
    # each pixel only competes for the seeds of its own and the 8 surrounding grid cells
    cell_y = np.minimum((py * ny / h).astype(int), ny - 1)
    cell_x = np.minimum((px * nx / w).astype(int), nx - 1)
    offs = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    cand = np.stack([np.clip(cell_y + a, 0, ny - 1) * nx + np.clip(cell_x + b, 0, nx - 1)
                     for a, b in offs], axis=1)
    spatial_w = (compactness / step) ** 2
    labels = np.zeros(h * w, dtype=np.int64)
    rows = np.arange(h * w)
    k = len(cy)
    for it in range(iterations):
        dy = py[:, None] - cy[cand]
        dx = px[:, None] - cx[cand]
        di = pv[:, None] - ci[cand]
        d = di * di + spatial_w * (dx * dx + dy * dy)
        new = cand[rows, np.argmin(d, axis=1)]
        if it > 0 and np.array_equal(new, labels):
            break
        labels = new
        cnt = np.bincount(labels, minlength=k)
        ok = cnt > 0
        cy[ok] = np.bincount(labels, weights=py, minlength=k)[ok] / cnt[ok]
        cx[ok] = np.bincount(labels, weights=px, minlength=k)[ok] / cnt[ok]
        ci[ok] = np.bincount(labels, weights=pv, minlength=k)[ok] / cnt[ok]
    return labels.reshape(h, w)


def _absorb_small(labels: np.ndarray, img: np.ndarray, min_size: int) -> np.ndarray:
    """Merge components smaller than ``min_size`` into the neighbour with
    the closest mean intensity. Neighbour ties go to the lowest id."""
    flat = labels.ravel()
    k = int(flat.max()) + 1
    size = np.bincount(flat, minlength=k).astype(float)
    total = np.bincount(flat, weights=img.ravel(), minlength=k)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    nbrs: dict[int, set[int]] = {i: set() for i in range(k)}
    for a, b in _region_adjacency(labels):
        nbrs[a].add(b)
        nbrs[b].add(a)
    heap = [(size[i], i) for i in range(k) if size[i] < min_size]
    heapq.heapify(heap)
    while heap:
        s, i = heapq.heappop(heap)
        if find(i) != i or size[i] != s or size[i] >= min_size or not nbrs[i]:
            continue
        mean_i = total[i] / size[i]
        j = min(nbrs[i], key=lambda q: (abs(total[q] / size[q] - mean_i), q))
        parent[i] = j
        size[j] += size[i]
        total[j] += total[i]
        for q in nbrs[i]:
            nbrs[q].discard(i)
            if q != j:
                nbrs[q].add(j)
                nbrs[j].add(q)
        nbrs[j].discard(j)
        nbrs[i] = set()
        if size[j] < min_size:
            heapq.heappush(heap, (size[j], j))
    roots = np.array([find(i) for i in range(k)])
    return roots[flat].reshape(labels.shape)


def oversegment(frame: Frame, target_count: int = 200, compactness: float = 10.0,
                iterations: int = 10) -> list[Superpixel]:
    """Split a frame into roughly ``target_count`` 4-connected superpixels.

    Superpixels are returned in order of their first pixel (row-major).
    """
    img = np.asarray(frame.data, dtype=float)
    h, w = img.shape
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    if target_count > h * w:
        raise ValueError(f"target_count {target_count} exceeds pixel count {h * w}")
    if not compactness > 0:
        raise ValueError("compactness must be positive")
    if target_count == 1:
        labels = np.zeros((h, w), dtype=np.int64)
    else:
        labels = _components(_slic_labels(img, target_count, compactness, iterations))
        min_size = max(1, int(h * w / target_count / 4))
        labels = _absorb_small(labels, img, min_size)
    labels = GroupPartition.from_labels(labels).labels
    values = img.ravel()
    order = np.argsort(labels.ravel(), kind="stable")
    bounds = np.cumsum(np.bincount(labels.ravel()))[:-1]
    return [_make_region(Superpixel, idx, values, (h, w)) for idx in np.split(order, bounds)]


def _label_map(regions: Sequence[_Region]) -> np.ndarray:
    shape = regions[0].frame_shape
    lab = np.full(shape[0] * shape[1], -1, dtype=np.int64)
    for i, r in enumerate(regions):
        if r.frame_shape != shape:
            raise PartitionError("regions come from frames of different sizes")
        if np.any(lab[r.pixel_indices] >= 0):
            raise PartitionError(f"region {i} overlaps an earlier region")
        lab[r.pixel_indices] = i
    if np.any(lab < 0):
        raise PartitionError("regions do not cover the frame")
    return lab.reshape(shape)


class _Merger:
    """Greedy pairwise merging over a fixed adjacency graph.

    Always merges the adjacent pair with the smallest feature distance,
    ties broken by the lowest ``(a, b)`` id pair; the merged node keeps the
    lower id. Stops when the best distance is not below ``threshold``.
    """

    def __init__(self, stats, edges, threshold):
        self.stats = {i: tuple(s) for i, s in enumerate(stats)}
        self.parent = list(range(len(stats)))
        self.nbrs: dict[int, set[int]] = {i: set() for i in range(len(stats))}
        for a, b in edges:
            if a != b:
                self.nbrs[a].add(b)
                self.nbrs[b].add(a)
        self.threshold = threshold
        self.version = [0] * len(stats)
        self.heap = []
        for a in self.nbrs:
            for b in self.nbrs[a]:
                if a < b:
                    self._push(a, b)

    def _push(self, a, b):
        a, b = min(a, b), max(a, b)
        d = feature_distance(self.stats[a], self.stats[b])
        if d < self.threshold:
            heapq.heappush(self.heap, (d, a, b, self.version[a], self.version[b]))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def run(self, history: list | None = None):
        alive = len(self.stats)
        if history is not None:
            history.append(alive)
        while self.heap:
            d, a, b, va, vb = heapq.heappop(self.heap)
            if va != self.version[a] or vb != self.version[b]:
                continue
            # a < b; b folds into a
            self.parent[b] = a
            sa, sb = self.stats.pop(a), self.stats.pop(b)
            self.stats[a] = tuple(x + y for x, y in zip(sa, sb))
            self.version[a] += 1
            self.version[b] += 1
            for q in self.nbrs.pop(b):
                self.nbrs[q].discard(b)
                if q != a:
                    self.nbrs[q].add(a)
                    self.nbrs[a].add(q)
            for q in self.nbrs[a]:
                self._push(a, q)
            alive -= 1
            if history is not None:
                history.append(alive)
        return [self.find(i) for i in range(len(self.parent))]


def segment_frame(superpixels: Sequence[Superpixel], merge_threshold: float = 12.0,
                  frame_index: int = 0) -> list[Subregion]:
    """Merge adjacent superpixels into subregions."""
    if not superpixels:
        raise PartitionError("no superpixels")
    lab = _label_map(superpixels)
    stats = [(s.count, s.total, s.total_sq) for s in superpixels]
    roots = _Merger(stats, _region_adjacency(lab), merge_threshold).run()
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        groups.setdefault(r, []).append(i)
    out = []
    for members in groups.values():
        parts = [superpixels[i] for i in members]
        idx = np.sort(np.concatenate([p.pixel_indices for p in parts]))
        idx.setflags(write=False)
        out.append(Subregion(
            pixel_indices=idx, frame_shape=parts[0].frame_shape,
            count=sum(p.count for p in parts), total=sum(p.total for p in parts),
            total_sq=sum(p.total_sq for p in parts), sum_x=sum(p.sum_x for p in parts),
            sum_y=sum(p.sum_y for p in parts), frame_index=frame_index))
    out.sort(key=lambda r: r.pixel_indices[0])
    return out


def link_frames(per_frame_subregions: Sequence[Sequence[Subregion]], center_threshold: float = 20.0,
                similarity_threshold: float = 8.0, history: list | None = None) -> GroupPartition:
    """Merge subregions across adjacent frames into groups.

    Two subregions are adjacent when their frames are consecutive and their
    centroids are closer than ``center_threshold``. Group counts after each
    merge are appended to ``history`` when given.
    """
    if not per_frame_subregions:
        raise PartitionError("no frames")
    n = len(per_frame_subregions)
    nodes: list[Subregion] = []
    offsets = []
    for k, regions in enumerate(per_frame_subregions):
        _label_map(regions)
        offsets.append(len(nodes))
        nodes.extend(regions)
    shape = nodes[0].frame_shape
    m = shape[0] * shape[1]

    edges = []
    for k in range(n - 1):
        a_nodes = range(offsets[k], offsets[k] + len(per_frame_subregions[k]))
        b_nodes = range(offsets[k + 1], offsets[k + 1] + len(per_frame_subregions[k + 1]))
        ca = np.array([nodes[i].centroid for i in a_nodes])
        cb = np.array([nodes[i].centroid for i in b_nodes])
        dist = np.hypot(ca[:, None, 0] - cb[None, :, 0], ca[:, None, 1] - cb[None, :, 1])
        for i, j in zip(*np.nonzero(dist < center_threshold)):
            edges.append((a_nodes[i], b_nodes[j]))

    stats = [(r.count, r.total, r.total_sq) for r in nodes]
    roots = _Merger(stats, edges, similarity_threshold).run(history)

    labels = np.empty((m, n), dtype=np.int64)
    node = 0
    for k, regions in enumerate(per_frame_subregions):
        for r in regions:
            labels[r.pixel_indices, k] = roots[node]
            node += 1
    return GroupPartition.from_labels(labels)


def _frame_subregions(frame: Frame, k: int, config: SegmentationConfig) -> list[Subregion]:
    sp = oversegment(frame, min(config.target_count, frame.width * frame.height),
                     config.compactness, config.slic_iterations)
    return segment_frame(sp, config.merge_threshold, frame_index=k)


def segment_video(seq: FrameSequence, config: SegmentationConfig = SegmentationConfig(),
                  workers: int | None = None, history: list | None = None) -> GroupPartition:
    """Superpixels, per-frame merging, then cross-frame linking."""
    per_frame = pmap(lambda kf: _frame_subregions(kf[1], kf[0], config),
                     list(enumerate(seq.frames)), workers)
    return link_frames(per_frame, config.center_threshold, config.similarity_threshold, history)
