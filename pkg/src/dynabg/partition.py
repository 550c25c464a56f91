"""Group partitions of the entries of an ``m x n`` matrix.

Stored as a label map: ``labels[j, k]`` is the group id of entry ``(j, k)``
(pixel ``j``, frame ``k``). Ids are ``0..G-1`` with every id used, so a
label map is disjoint and covering by construction.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np


class PartitionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GroupPartition:
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2 or lab.size == 0:
            raise PartitionError(f"labels must be a non-empty 2-D array, got shape {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            raise PartitionError("labels must be integers")
        if lab.min() < 0:
            raise PartitionError("negative group id")
        lab = np.array(lab, dtype=np.int64)
        sizes = np.bincount(lab.ravel())
        if np.any(sizes == 0):
            raise PartitionError(f"group ids are not contiguous: id {int(np.argmin(sizes))} is empty")
        lab.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "_sizes", sizes)

    @classmethod
    def from_labels(cls, labels) -> "GroupPartition":
        """Accept arbitrary integer ids; relabel to ``0..G-1`` in order of
        first appearance (row-major scan)."""
        lab = np.asarray(labels)
        _, first, inv = np.unique(lab.ravel(), return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return cls(order[inv].reshape(lab.shape))

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[tuple[int, int]]], shape: tuple[int, int]) -> "GroupPartition":
        m, n = shape
        lab = np.full((m, n), -1, dtype=np.int64)
        for gid, group in enumerate(groups):
            entries = list(group)
            if not entries:
                raise PartitionError(f"group {gid} is empty")
            for j, k in entries:
                if not (0 <= j < m and 0 <= k < n):
                    raise PartitionError(f"entry ({j}, {k}) outside {m}x{n}")
                if lab[j, k] >= 0:
                    raise PartitionError(f"entry ({j}, {k}) in groups {lab[j, k]} and {gid}")
                lab[j, k] = gid
        if np.any(lab < 0):
            j, k = np.argwhere(lab < 0)[0]
            raise PartitionError(f"entry ({j}, {k}) not covered")
        return cls(lab)

    @classmethod
    def singletons(cls, m: int, n: int) -> "GroupPartition":
        return cls(np.arange(m * n, dtype=np.int64).reshape(m, n))

    @classmethod
    def columns(cls, m: int, n: int) -> "GroupPartition":
        return cls(np.broadcast_to(np.arange(n, dtype=np.int64), (m, n)).copy())

    @classmethod
    def whole(cls, m: int, n: int) -> "GroupPartition":
        return cls(np.zeros((m, n), dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def n_groups(self) -> int:
        return len(self._sizes)

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes

    def groups(self) -> list[set[tuple[int, int]]]:
        """Explicit ``(j, k)`` sets; fine for small matrices only."""
        out = [set() for _ in range(self.n_groups)]
        for (j, k), g in np.ndenumerate(self.labels):
            out[g].add((j, k))
        return out

    def check_shape(self, shape) -> None:
        if tuple(shape) != self.shape:
            raise PartitionError(f"partition covers a {self.shape[0]}x{self.shape[1]} matrix, "
                                 f"got {shape[0]}x{shape[1]}")

    def __eq__(self, other):
        if not isinstance(other, GroupPartition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def write(self, path) -> None:
        """One line per entry: ``j k group_id``."""
        m, n = self.shape
        jj, kk = np.indices((m, n))
        rows = np.column_stack([jj.ravel(), kk.ravel(), self.labels.ravel()])
        np.savetxt(path, rows, fmt="%d", header=f"{m} {n} {self.n_groups}")

    @classmethod
    def read(cls, path) -> "GroupPartition":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline()
        try:
            m, n, _ = (int(x) for x in header.lstrip("#").split())
        except ValueError:
            raise PartitionError(f"{path.name}: missing 'm n groups' header") from None
        rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
        if rows.shape != (m * n, 3):
            raise PartitionError(f"{path.name}: expected {m * n} rows of 'j k group_id'")
        lab = np.full((m, n), -1, dtype=np.int64)
        lab[rows[:, 0], rows[:, 1]] = rows[:, 2]
        if np.any(lab < 0):
            raise PartitionError(f"{path.name}: not every entry is assigned")
        return cls.from_labels(lab)


def partition_stats(C: GroupPartition) -> dict:
    """Group count and a histogram ``{size: number of groups}``."""
    hist = Counter(int(s) for s in C.sizes)
    return {
        "groups": C.n_groups,
        "entries": int(C.sizes.sum()),
        "size_histogram": dict(sorted(hist.items())),
        "largest": int(C.sizes.max()),
        "smallest": int(C.sizes.min()),
    }
