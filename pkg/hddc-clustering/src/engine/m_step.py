"""M step of the subspace mixture models.

Proportions and means come first, then one of three covariance estimators:
free orientations (one eigen-decomposition per class), a common orientation
(fixed point on the matrix M) or a common covariance (eigen-decomposition of
the within-class scatter W).
"""
import math
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import linalg as sla

from src.engine.criteria import scree_dimension
from src.errors import DegenerateClusterError, InvalidInputError
from src.state.shared_state import (
    AStructure,
    BStructure,
    DataMatrix,
    DimPolicy,
    DimPolicyKind,
    EmConfig,
    Family,
    MixtureParams,
    ModelKind,
)
from src.tools.linalg import (
    EigenPairs,
    centered_design,
    eig_desc,
    gram_top_eig,
    prefers_gram,
    top_eig,
    weighted_scatter,
)

logger = logging.getLogger(__name__)

SHARED_A = (AStructure.GLOBAL, AStructure.PER_DIM_SHARED)


@dataclass(frozen=True)
class ClassMoments:
    counts: np.ndarray  # n_i = sum_j t_ij
    proportions: np.ndarray
    means: np.ndarray


@dataclass(frozen=True)
class ClassSpectrum:
    values: np.ndarray  # descending; zeros past the design rank
    vectors: np.ndarray
    trace: float
    gram: bool


@dataclass(frozen=True)
class _InnerResult:
    objective: float
    orientation: np.ndarray
    a: np.ndarray
    b: np.ndarray
    converged: bool
    iterations: int


def class_moments(resp: np.ndarray, X: np.ndarray, min_weight: float) -> ClassMoments:
    counts = resp.sum(axis=0)
    for i, weight in enumerate(counts):
        if not weight > 0.0 or weight < min_weight:
            raise DegenerateClusterError(i, float(weight))
    proportions = counts / counts.sum()
    means = (resp.T @ X) / counts[:, None]
    return ClassMoments(counts=counts, proportions=proportions, means=means)


def pooled_scatter(X: np.ndarray, resp: np.ndarray, moments: ClassMoments) -> List[np.ndarray]:
    """Per-class scatters W_i and, last, W = sum_i pi_i W_i."""
    scatters = [weighted_scatter(X, resp[:, i], moments.means[i]) for i in range(resp.shape[1])]
    W = sum(pi * Wi for pi, Wi in zip(moments.proportions, scatters))
    return scatters + [0.5 * (W + W.T)]


def _pad_pairs(pairs: EigenPairs, need: int, p: int) -> EigenPairs:
    missing = need - pairs.m
    if missing <= 0:
        return pairs
    complement = sla.null_space(pairs.vectors.T)[:, :missing]
    return EigenPairs(
        values=np.concatenate([pairs.values, np.zeros(missing)]),
        vectors=np.hstack([pairs.vectors, complement]),
        deficient=np.concatenate([pairs.deficient, np.ones(missing, dtype=bool)]),
    )


def class_spectrum(X: np.ndarray, weights: np.ndarray, mean: np.ndarray, need: Optional[int],
                   gram_threshold: Optional[int]) -> ClassSpectrum:
    """Leading eigenpairs of W_i; the whole spectrum when need is None."""
    p = X.shape[1]
    if prefers_gram(float(weights.sum()), p, gram_threshold):
        design = centered_design(X, weights, mean)
        pairs = gram_top_eig(design, min(design.n_eff, p))
        if need is not None:
            pairs = _pad_pairs(pairs, need, p)
        return ClassSpectrum(pairs.values, pairs.vectors, design.trace, gram=True)

    W = weighted_scatter(X, weights, mean)
    pairs = eig_desc(W) if need is None else top_eig(W, need)
    return ClassSpectrum(pairs.values, pairs.vectors, float(np.trace(W)), gram=False)


def _fixed_dims(policy: DimPolicy, model: ModelKind, k: int, p: int) -> Optional[List[int]]:
    if policy.kind == DimPolicyKind.SCREE:
        return None
    if policy.kind == DimPolicyKind.SCREE_COMMON_VIA_BIC:
        raise InvalidInputError("the common-dimension BIC search runs in select; fit needs a concrete policy")
    if policy.kind == DimPolicyKind.FIXED_COMMON:
        dims = [policy.d] * k
    else:
        dims = list(policy.dims)
        if len(dims) != k:
            raise InvalidInputError(f"{len(dims)} intrinsic dimensions given for {k} components")
        if model.common_dimension and len(set(dims)) != 1:
            raise InvalidInputError(f"{model.name} needs one common dimension, got {dims}")
    if any(d > p - 1 for d in dims):
        raise InvalidInputError(f"intrinsic dimensions {dims} exceed p-1={p - 1}")
    return dims


def dimension_cap(policy: DimPolicy, p: int, weight: float) -> int:
    upper = p - 1 if policy.d_max is None else min(policy.d_max, p - 1)
    return max(1, min(upper, math.ceil(weight - 1e-9) - 1))


def _scree(values: np.ndarray, policy: DimPolicy, cap: int) -> int:
    if cap <= 1:
        return 1
    return scree_dimension(values, policy.threshold, min(policy.d_min, cap), cap)


def _clamp_b(b: np.ndarray, floor: float) -> np.ndarray:
    return np.maximum(b, floor)


def _clamp_a(a: List[np.ndarray], b: np.ndarray, shared: bool) -> List[np.ndarray]:
    if shared:
        floor = float(b.max())
        return [np.maximum(ai, floor) for ai in a]
    return [np.maximum(ai, bi) for ai, bi in zip(a, b)]


def _free_orientation(X, resp, moments, model, policy, cfg) -> MixtureParams:
    k, p = resp.shape[1], X.shape[1]
    fixed = _fixed_dims(policy, model, k, p)
    spectra = [
        class_spectrum(X, resp[:, i], moments.means[i], None if fixed is None else fixed[i], cfg.gram_threshold)
        for i in range(k)
    ]

    if fixed is not None:
        dims = fixed
    else:
        caps = [dimension_cap(policy, p, w) for w in moments.counts]
        if model.common_dimension:
            W = pooled_scatter(X, resp, moments)[-1]
            d = _scree(eig_desc(W).values, policy, min(caps))
            dims = [d] * k
        else:
            dims = [_scree(s.values, policy, cap) for s, cap in zip(spectra, caps)]

    pi = moments.proportions
    dims_arr = np.asarray(dims, dtype=float)
    top = [s.values[:d].copy() for s, d in zip(spectra, dims)]
    top_sums = np.array([t.sum() for t in top])
    traces = np.array([s.trace for s in spectra])

    if model.b_structure == BStructure.PER_CLASS:
        b = (traces - top_sums) / (p - dims_arr)
    else:
        xi = float(pi @ dims_arr)
        b = np.full(k, (pi @ traces - pi @ top_sums) / (p - xi))
    b = _clamp_b(b, cfg.b_floor)

    if model.a_structure == AStructure.PER_CLASS_PER_DIM:
        a = top
    elif model.a_structure == AStructure.PER_DIM_SHARED:
        shared = sum(w * t for w, t in zip(pi, top))
        a = [shared.copy() for _ in range(k)]
    elif model.a_structure == AStructure.PER_CLASS:
        a = [np.full(d, top_sums[i] / d) for i, d in enumerate(dims)]
    else:
        value = float(pi @ top_sums) / float(pi @ dims_arr)
        a = [np.full(d, value) for d in dims]
    a = _clamp_a(a, b, model.a_structure in SHARED_A)

    return MixtureParams(
        proportions=pi,
        means=moments.means,
        dims=dims,
        orientations=[s.vectors[:, :d].copy() for s, d in zip(spectra, dims)],
        a=a,
        b=b,
        diagnostics={"gram": [s.gram for s in spectra]},
    )


def _common_d(policy: DimPolicy, model: ModelKind, W: np.ndarray, counts: np.ndarray, k: int, p: int) -> int:
    fixed = _fixed_dims(policy, model, k, p)
    if fixed is not None:
        return fixed[0]
    cap = min(dimension_cap(policy, p, w) for w in counts)
    return _scree(eig_desc(W).values, policy, cap)


def _orientation_variances(model, s, traces, pi, d, p, b_floor):
    k = s.shape[0]
    if model.a_structure == AStructure.PER_CLASS:
        a = s / d
    else:
        a = np.full(k, float(pi @ s) / d)
    if model.b_structure == BStructure.PER_CLASS:
        b = (traces - s) / (p - d)
    else:
        b = np.full(k, float(pi @ (traces - s)) / (p - d))
    b = _clamp_b(b, b_floor)
    floor = b.max() if model.a_structure in SHARED_A else b
    return np.maximum(a, floor), b


def orientation_objective(counts, s, traces, a, b, d, p) -> float:
    """-2 x expected complete-data log-likelihood, up to constants."""
    return float(np.sum(counts * (d * np.log(a) + (p - d) * np.log(b) + s / a + (traces - s) / b)))


def _orientation_fixed_point(scatters, traces, moments, Q, model, d, p, cfg) -> _InnerResult:
    counts, pi = moments.counts, moments.proportions
    best = None
    previous = None
    converged = False
    iterations = 0
    for iterations in range(1, cfg.inner_max_iters + 1):
        s = np.array([np.sum((Wi @ Q) * Q) for Wi in scatters])
        a, b = _orientation_variances(model, s, traces, pi, d, p, cfg.b_floor)
        objective = orientation_objective(counts, s, traces, a, b, d, p)
        if best is None or objective < best[0]:
            best = (objective, Q, a, b)

        current = np.concatenate([a, b])
        if previous is not None and np.max(np.abs(current - previous)) < cfg.inner_tol:
            converged = True
            break
        previous = current

        M = sum(n_i * (1.0 / b_i - 1.0 / a_i) * Wi for n_i, a_i, b_i, Wi in zip(counts, a, b, scatters))
        Q = top_eig(M, d).vectors
    objective, Q, a, b = best
    return _InnerResult(objective, Q, a, b, converged, iterations)


def _common_orientation(X, resp, moments, model, policy, cfg, previous) -> MixtureParams:
    k, p = resp.shape[1], X.shape[1]
    *scatters, W = pooled_scatter(X, resp, moments)
    d = _common_d(policy, model, W, moments.counts, k, p)
    traces = np.array([np.trace(Wi) for Wi in scatters])

    starts = [top_eig(W, d).vectors]
    # warm start from the previous orientation keeps the EM trace monotone
    if previous is not None and previous.k == k and previous.dims[0] == d:
        starts.append(previous.orientations[0])
    results = [_orientation_fixed_point(scatters, traces, moments, Q0, model, d, p, cfg) for Q0 in starts]
    best = min(results, key=lambda r: r.objective)
    if not best.converged:
        logger.debug(f"Common orientation fixed point stopped after {best.iterations} iterations")

    return MixtureParams(
        proportions=moments.proportions,
        means=moments.means,
        dims=[d] * k,
        orientations=[best.orientation.copy() for _ in range(k)],
        a=[np.full(d, value) for value in best.a],
        b=best.b,
        diagnostics={"inner_converged": best.converged, "inner_iterations": best.iterations},
    )


def _common_covariance(X, resp, moments, model, policy, cfg) -> MixtureParams:
    k, p = resp.shape[1], X.shape[1]
    W = pooled_scatter(X, resp, moments)[-1]
    d = _common_d(policy, model, W, moments.counts, k, p)
    pairs = top_eig(W, d)
    b = max(float(np.trace(W) - pairs.values.sum()) / (p - d), cfg.b_floor)
    if model.a_structure == AStructure.PER_DIM_SHARED:
        a = pairs.values.copy()
    else:
        a = np.full(d, float(pairs.values.mean()))
    a = np.maximum(a, b)
    Q = pairs.vectors
    return MixtureParams(
        proportions=moments.proportions,
        means=moments.means,
        dims=[d] * k,
        orientations=[Q.copy() for _ in range(k)],
        a=[a.copy() for _ in range(k)],
        b=np.full(k, b),
    )


def check_responsibilities(resp: np.ndarray, n: int) -> np.ndarray:
    t = np.asarray(resp, dtype=float)
    if t.ndim != 2 or t.shape[0] != n:
        raise InvalidInputError(f"responsibilities have shape {t.shape}, expected ({n}, k)")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("responsibilities contain non-finite entries")
    return t


def m_step(resp: np.ndarray, data, model: ModelKind, dim_policy: DimPolicy, cfg: EmConfig,
           previous: Optional[MixtureParams] = None) -> MixtureParams:
    X = DataMatrix.coerce(data)
    t = check_responsibilities(resp, X.shape[0])
    if model.is_baseline:
        raise InvalidInputError(f"{model.name} is fitted by the baseline M step")
    moments = class_moments(t, X, cfg.resolved_min_weight(X.shape[0]))

    if model.family == Family.FREE_ORIENTATION:
        return _free_orientation(X, t, moments, model, dim_policy, cfg)
    if model.family == Family.COMMON_ORIENTATION:
        return _common_orientation(X, t, moments, model, dim_policy, cfg, previous)
    return _common_covariance(X, t, moments, model, dim_policy, cfg)
