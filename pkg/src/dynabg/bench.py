"""Seeded exact-recovery instances and a timing table for the solvers."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .partition import GroupPartition
from .solver import SolverConfig, solve_rpca, solve_sc_rpca


@dataclass(frozen=True, eq=False)
class RecoveryInstance:
    D: np.ndarray
    A0: np.ndarray
    E0: np.ndarray
    partition: GroupPartition | None
    active_groups: tuple[int, ...] = ()


def low_rank(m: int, n: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))


def random_partition(m: int, n: int, groups: int, rng: np.random.Generator) -> GroupPartition:
    """Every entry gets a uniform random group id; ids are made contiguous."""
    lab = rng.integers(0, groups, size=(m, n))
    lab[np.unravel_index(rng.permutation(m * n)[:groups], (m, n))] = np.arange(groups)
    return GroupPartition(lab)


def sparse_instance(m: int = 200, n: int = 50, rank: int = 2, density: float = 0.05,
                    magnitude: float = 50.0, seed: int = 0) -> RecoveryInstance:
    """Rank-``rank`` A0 plus entries of size ``magnitude`` with random signs."""
    rng = np.random.default_rng(seed)
    A0 = low_rank(m, n, rank, rng)
    E0 = np.zeros((m, n))
    support = rng.random((m, n)) < density
    E0[support] = magnitude * rng.choice([-1.0, 1.0], size=int(support.sum()))
    return RecoveryInstance(A0 + E0, A0, E0, None)


def group_instance(m: int = 200, n: int = 50, rank: int = 2, groups: int = 50, active: int = 3,
                   magnitude: float = 50.0, seed: int = 0) -> RecoveryInstance:
    """Rank-``rank`` A0 plus Gaussian E0 supported on ``active`` random groups."""
    rng = np.random.default_rng(seed)
    A0 = low_rank(m, n, rank, rng)
    C = random_partition(m, n, groups, rng)
    chosen = tuple(int(g) for g in np.sort(rng.choice(groups, size=active, replace=False)))
    on = np.isin(C.labels, chosen)
    E0 = np.where(on, magnitude * rng.standard_normal((m, n)), 0.0)
    return RecoveryInstance(A0 + E0, A0, E0, C, chosen)


def relative_error(X, X0) -> float:
    return float(np.linalg.norm(X - X0) / np.linalg.norm(X0))


def run_bench(repeats: int = 1, seed: int = 0, config: SolverConfig = SolverConfig()) -> list[dict]:
    """Solve the two standard instances ``repeats`` times each."""
    rows = []
    for r in range(repeats):
        for name, inst in (("rpca", sparse_instance(seed=seed + r)),
                           ("sc-rpca", group_instance(seed=seed + r))):
            t = time.perf_counter()
            if inst.partition is None:
                dec = solve_rpca(inst.D, config)
            else:
                dec = solve_sc_rpca(inst.D, inst.partition, config)
            rows.append({
                "solver": name,
                "seed": seed + r,
                "shape": list(inst.D.shape),
                "iterations": dec.iterations,
                "seconds": time.perf_counter() - t,
                "residual": dec.final_residual,
                "error_A": relative_error(dec.A, inst.A0),
                "error_E": relative_error(dec.E, inst.E0),
                "rank": dec.rank,
                "converged": dec.converged,
            })
    return rows
