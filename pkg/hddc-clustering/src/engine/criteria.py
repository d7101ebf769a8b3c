"""Cattell scree test and the BIC criterion."""
import math
from typing import Optional

import numpy as np

from src.errors import InvalidInputError


def scree_dimension(eigenvalues, threshold: float, d_min: int = 1, d_max: Optional[int] = None) -> int:
    """Largest index whose normalized eigenvalue gap reaches the threshold.

    Gaps are divided by the largest gap so the threshold is scale free. The
    result is clamped to [d_min, d_max]; a flat spectrum gives d_min.
    """
    values = np.asarray(eigenvalues, dtype=float)
    if values.ndim != 1 or values.shape[0] < 2:
        raise InvalidInputError("the scree test needs at least two eigenvalues")
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"scree threshold {threshold} outside (0, 1)")
    upper = values.shape[0] - 1 if d_max is None else d_max
    if upper < d_min:
        raise InvalidInputError(f"empty dimension range [{d_min}, {upper}]")

    gaps = -np.diff(values)
    largest = float(gaps.max())
    if largest <= 0.0:
        return d_min
    breaks = np.flatnonzero(gaps / largest >= threshold)
    d = int(breaks[-1]) + 1
    return min(max(d, d_min), upper)


def bic(loglik: float, nu: int, n: int) -> float:
    if n < 1:
        raise InvalidInputError("BIC needs n >= 1")
    return -2.0 * loglik + nu * math.log(n)
