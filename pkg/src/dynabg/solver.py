"""Low-rank plus sparse decomposition by inexact ALM.

Two models share one loop:

* classic RPCA:  min ||A||_* + lam ||E||_1            s.t. D = A + E
* SC-RPCA:       min ||A||_* + lam ||E||_{C(2,1)}     s.t. D = A + E

with ``||E||_{C(2,1)} = sum_i sqrt(|C_i| * sum_{(j,k) in C_i} E_jk^2)``.
Each iteration does an SVT step on A, a proximal step on E, a multiplier
ascent step and a geometric penalty increase.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.linalg

from .partition import GroupPartition, PartitionError

WeightMode = Literal["sqrt", "linear"]
WEIGHT_MODES = ("sqrt", "linear")


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """ALM parameters. ``lam=None`` means ``1/sqrt(max(m, n))``."""

    lam: float | None = None
    mu0: float = 1e-6
    rho: float = 1.1
    tol: float = 1e-7
    max_iter: int = 1000
    mu_cap: float = 1e10

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.rho > 1:
            raise ValueError("rho must be greater than 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max-iter must be a positive integer")
        if not self.mu_cap >= self.mu0:
            raise ValueError("mu_cap must be at least mu0")

    def lam_for(self, shape) -> float:
        return self.lam if self.lam is not None else 1.0 / math.sqrt(max(shape))


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


@dataclass(frozen=True, eq=False)
class Decomposition:
    A: np.ndarray
    E: np.ndarray
    Y: np.ndarray
    iterations: int
    final_residual: float
    objective: float
    converged: bool
    rank: int
    lam: float
    # (iteration, relative residual, objective, rank of A)
    trace: list = field(default_factory=list, repr=False)

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,residual,objective,rank\n")
            for it, res, obj, r in self.trace:
                fh.write(f"{it},{res:.6e},{obj:.10e},{r}\n")


def _check_finite(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def svd_economy(M) -> SvdResult:
    """Thin SVD ``M = U diag(S) V^T`` with ``r = min(m, n)``."""
    M = _check_finite(M)
    try:
        U, S, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but sturdier
        U, S, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
    return SvdResult(U, S, Vt.T)


def _svt(M: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    res = svd_economy(M)
    s = res.S - tau
    r = int(np.count_nonzero(s > 0))
    X = (res.U[:, :r] * s[:r]) @ res.V[:, :r].T
    return X, s[:r]


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding, the prox of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    return _svt(_check_finite(M), tau)[0]


def l1_shrink(M, t: float) -> np.ndarray:
    """Entrywise soft threshold, the prox of ``t * ||.||_1``."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    M = np.asarray(M, dtype=np.float64)
    return np.sign(M) * np.maximum(np.abs(M) - t, 0.0)


def _group_weights(C: GroupPartition, weight_mode: str) -> np.ndarray:
    if weight_mode == "sqrt":
        return np.sqrt(C.sizes.astype(float))
    if weight_mode == "linear":
        return C.sizes.astype(float)
    raise ValueError(f"weight mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")


def group_norms(M, C: GroupPartition) -> np.ndarray:
    """Euclidean norm of ``M`` restricted to each group."""
    M = np.asarray(M, dtype=np.float64)
    C.check_shape(M.shape)
    return np.sqrt(np.bincount(C.labels.ravel(), weights=(M * M).ravel(), minlength=C.n_groups))


def weighted_group_norm(E, C: GroupPartition, weight_mode: WeightMode = "sqrt") -> float:
    """``sum_i w_i ||E_{C_i}||_2`` with ``w_i = sqrt|C_i|`` or ``|C_i|``."""
    return float(np.dot(_group_weights(C, weight_mode), group_norms(E, C)))


def generalized_l21_norm(E, C: GroupPartition) -> float:
    """``sum_i sqrt(|C_i| * sum_{(j,k) in C_i} E_jk^2)``."""
    E = np.asarray(E, dtype=np.float64)
    C.check_shape(E.shape)
    sumsq = np.bincount(C.labels.ravel(), weights=(E * E).ravel(), minlength=C.n_groups)
    return float(np.sum(np.sqrt(C.sizes * sumsq)))


def group_shrink(M, C: GroupPartition, lam: float, mu: float,
                 weight_mode: WeightMode = "sqrt") -> np.ndarray:
    """Block soft threshold over the groups of ``C``.

    Group ``i`` is scaled by ``(||M_i|| - t_i) / ||M_i||`` when its norm
    exceeds ``t_i`` and set to exactly zero otherwise, where
    ``t_i = lam * sqrt|C_i| / mu`` (``sqrt``, the prox of the generalized
    l2,1 norm) or ``lam * |C_i| / mu`` (``linear``).
    """
    if not (lam > 0 and mu > 0):
        raise ValueError("lambda and mu must be positive")
    M = np.asarray(M, dtype=np.float64)
    t = lam * _group_weights(C, weight_mode) / mu
    norms = group_norms(M, C)
    keep = norms > t
    scale = np.zeros_like(norms)
    scale[keep] = (norms[keep] - t[keep]) / norms[keep]
    per_entry = scale[C.labels]
    return np.where(per_entry > 0, M * per_entry, 0.0)


IterationCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray, float], None]


def _ialm(D, config: SolverConfig, lam: float, prox_E, penalty, callback) -> Decomposition:
    A = np.zeros_like(D)
    E = np.zeros_like(D)
    Y = np.zeros_like(D)
    mu = config.mu0
    norm_D = np.linalg.norm(D)
    trace = []
    res_rel = 0.0
    nuclear = 0.0
    rank = 0
    converged = False
    it = 0
    for it in range(1, int(config.max_iter) + 1):
        A, s = _svt(D - E + Y / mu, 1.0 / mu)
        nuclear = float(s.sum())
        rank = len(s)
        E = prox_E(D - A + Y / mu, mu)
        R = D - A - E
        Y = Y + mu * R
        res_abs = np.linalg.norm(R)
        res_rel = res_abs / norm_D if norm_D > 0 else res_abs
        trace.append((it, float(res_rel), nuclear + lam * penalty(E), rank))
        if callback is not None:
            callback(it, A, E, Y, mu)
        mu = min(config.rho * mu, config.mu_cap)
        if res_abs <= config.tol * norm_D:
            converged = True
            break
    if not converged:
        warnings.warn(f"ALM stopped after {it} iterations with relative residual {res_rel:.3e} "
                      f"> tol {config.tol:.1e}", ConvergenceWarning, stacklevel=3)
    return Decomposition(A=A, E=E, Y=Y, iterations=it, final_residual=float(res_rel),
                         objective=nuclear + lam * penalty(E), converged=converged,
                         rank=rank, lam=lam, trace=trace)


def solve_rpca(D, config: SolverConfig = SolverConfig(),
               callback: IterationCallback | None = None) -> Decomposition:
    """Classic RPCA with an l1 penalty on E.

    ``callback(iteration, A, E, Y, mu)`` runs after every iteration (before
    the penalty update) and must not modify the arrays.
    """
    D = _check_finite(D)
    lam = config.lam_for(D.shape)
    return _ialm(D, config, lam,
                 prox_E=lambda M, mu: l1_shrink(M, lam / mu),
                 penalty=lambda E: float(np.abs(E).sum()),
                 callback=callback)


def solve_sc_rpca(D, C: GroupPartition, config: SolverConfig = SolverConfig(),
                  weight_mode: WeightMode = "sqrt",
                  callback: IterationCallback | None = None) -> Decomposition:
    """Segmentation-constrained RPCA: group-weighted l2,1 penalty on E.

    The reported objective uses the group norm matching ``weight_mode``
    (the generalized l2,1 norm for ``sqrt``).
    """
    D = _check_finite(D)
    if not isinstance(C, GroupPartition):
        raise PartitionError("C must be a GroupPartition")
    C.check_shape(D.shape)
    _group_weights(C, weight_mode)
    lam = config.lam_for(D.shape)
    return _ialm(D, config, lam,
                 prox_E=lambda M, mu: group_shrink(M, C, lam, mu, weight_mode),
                 penalty=lambda E: weighted_group_norm(E, C, weight_mode),
                 callback=callback)
