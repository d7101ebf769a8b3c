"""Dense symmetric linear algebra used by the M step.

Weighted scatter matrices, full and truncated descending eigensolves, and the
small-sample Gram path that decomposes an n_eff x n_eff inner-product matrix
instead of the p x p scatter.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from src.errors import DegenerateClusterError, InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray  # descending
    vectors: np.ndarray  # p x m, column j pairs with values[j]
    deficient: np.ndarray = field(default=None)  # True where the pair lies beyond the rank

    def __post_init__(self):
        if self.deficient is None:
            object.__setattr__(self, "deficient", np.zeros(self.values.shape[0], dtype=bool))

    @property
    def m(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class CenteredDesign:
    rows: np.ndarray  # n_eff x p, rows sqrt(w_j) (x_j - mu)
    weight_total: float

    @property
    def n_eff(self) -> int:
        return int(self.rows.shape[0])

    @property
    def trace(self) -> float:
        """Trace of the scatter the design stands for."""
        return float(np.sum(self.rows * self.rows) / self.weight_total)


def as_sym_matrix(matrix: np.ndarray) -> np.ndarray:
    S = np.asarray(matrix, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidInputError("matrix has non-finite entries")
    return 0.5 * (S + S.T)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def weighted_scatter(data: np.ndarray, weights: np.ndarray, mean: np.ndarray) -> np.ndarray:
    X = np.asarray(data, dtype=float)
    w = np.asarray(weights, dtype=float)
    mu = np.asarray(mean, dtype=float)
    if mu.shape != (X.shape[1],):
        raise InvalidInputError(f"mean has shape {mu.shape}, expected ({X.shape[1]},)")
    total = float(w.sum())
    if not total > 0.0:
        raise DegenerateClusterError(-1, total)
    centered = X - mu
    S = (centered * w[:, None]).T @ centered / total
    return 0.5 * (S + S.T)


def eig_desc(S: np.ndarray) -> EigenPairs:
    S = as_sym_matrix(S)
    values, vectors = linalg.eigh(S)
    return EigenPairs(values=values[::-1].copy(), vectors=_fix_signs(vectors[:, ::-1].copy()))


def top_eig(S: np.ndarray, m: int) -> EigenPairs:
    S = as_sym_matrix(S)
    p = S.shape[0]
    if not 1 <= m <= p:
        raise InvalidInputError(f"requested {m} eigenpairs of a {p}x{p} matrix")
    if m == p:
        return eig_desc(S)
    values, vectors = linalg.eigh(S, subset_by_index=[p - m, p - 1])
    return EigenPairs(values=values[::-1].copy(), vectors=_fix_signs(vectors[:, ::-1].copy()))


def centered_design(data: np.ndarray, weights: np.ndarray, mean: np.ndarray) -> CenteredDesign:
    X = np.asarray(data, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = float(w.sum())
    if not total > 0.0:
        raise DegenerateClusterError(-1, total)
    keep = w > 0.0
    rows = np.sqrt(w[keep])[:, None] * (X[keep] - np.asarray(mean, dtype=float))
    return CenteredDesign(rows=rows, weight_total=total)


def gram_top_eig(design: CenteredDesign, m: int) -> EigenPairs:
    """Top-m eigenpairs of rows^t rows / w from the n_eff x n_eff Gram matrix."""
    Y = design.rows
    n_eff, p = Y.shape
    if not 1 <= m <= min(n_eff, p):
        raise InvalidInputError(f"requested {m} eigenpairs from a {n_eff}x{p} design")
    G = Y @ Y.T / design.weight_total
    G = 0.5 * (G + G.T)
    values, U = linalg.eigh(G, subset_by_index=[n_eff - m, n_eff - 1])
    values = values[::-1].copy()
    U = U[:, ::-1]

    scale = max(float(values[0]), 0.0)
    tol = max(n_eff, p) * np.finfo(float).eps * scale
    deficient = values <= tol
    values[deficient] = 0.0

    vectors = np.zeros((p, m))
    good = ~deficient
    if np.any(good):
        mapped = Y.T @ U[:, good]
        mapped /= np.linalg.norm(mapped, axis=0)
        vectors[:, good] = mapped
    n_missing = int(deficient.sum())
    if n_missing:
        if np.any(good):
            complement = linalg.null_space(vectors[:, good].T)
        else:
            complement = np.eye(p)
        vectors[:, deficient] = complement[:, :n_missing]
        logger.debug(f"Gram path: {n_missing} of {m} requested pairs beyond the design rank")
    return EigenPairs(values=values, vectors=_fix_signs(vectors), deficient=deficient)


def prefers_gram(weight_total: float, p: int, threshold: Optional[int] = None) -> bool:
    """True when the effective sample count falls below the Gram threshold (default p)."""
    limit = p if threshold is None else threshold
    return math.ceil(weight_total - 1e-9) < limit
