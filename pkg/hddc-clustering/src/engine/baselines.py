"""Reference Gaussian mixtures: Full, Com, Diag and Sphe covariance structures.

They share the restart shell of the subspace EM. Dense densities go through a
Cholesky factor; Full and Com add a ridge of ridge_scale * trace(W)/p.
"""
import math
import logging
from typing import List, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from src.engine.criteria import bic
from src.engine.em import LOG_2PI, converged, run_restarts
from src.engine.m_step import check_responsibilities, class_moments, pooled_scatter
from src.errors import InvalidInputError, NumericalError
from src.state.shared_state import (
    BaselineKind,
    BaselineParams,
    DataMatrix,
    EmConfig,
    FitReport,
    MixtureParams,
)
from src.tools.linalg import eig_desc, weighted_scatter
from src.tools.model_family import baseline_model, baseline_param_count

logger = logging.getLogger(__name__)


def _ridge(S: np.ndarray, scale: float) -> np.ndarray:
    p = S.shape[0]
    if scale <= 0.0:
        return S
    return S + scale * np.trace(S) / p * np.eye(p)


def baseline_m_step(resp: np.ndarray, data, kind: BaselineKind, cfg: EmConfig) -> BaselineParams:
    X = DataMatrix.coerce(data)
    t = check_responsibilities(resp, X.shape[0])
    moments = class_moments(t, X, cfg.resolved_min_weight(X.shape[0]))
    k, p = t.shape[1], X.shape[1]
    common = dict(kind=kind, proportions=moments.proportions, means=moments.means)

    if kind == BaselineKind.COM:
        W = pooled_scatter(X, t, moments)[-1]
        shared = _ridge(W, cfg.ridge_scale)
        return BaselineParams(covariances=[shared] * k, **common)

    scatters = [weighted_scatter(X, t[:, i], moments.means[i]) for i in range(k)]
    if kind == BaselineKind.FULL:
        return BaselineParams(covariances=[_ridge(W, cfg.ridge_scale) for W in scatters], **common)
    if kind == BaselineKind.DIAG:
        variances = np.array([np.maximum(np.diag(W), cfg.b_floor) for W in scatters])
        return BaselineParams(variances=variances, **common)
    variances = np.array([max(np.trace(W) / p, cfg.b_floor) for W in scatters])
    return BaselineParams(variances=variances, **common)


def _log_density(X: np.ndarray, params: BaselineParams, i: int) -> np.ndarray:
    """log(pi_i phi(x; mu_i, Sigma_i)) for every row."""
    p = X.shape[1]
    centered = X - params.means[i]
    if params.kind in (BaselineKind.FULL, BaselineKind.COM):
        try:
            factor, lower = linalg.cho_factor(params.covariances[i], lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"covariance of component {i} is not positive definite") from exc
        solved = linalg.solve_triangular(factor, centered.T, lower=lower)
        mahalanobis = np.sum(solved * solved, axis=0)
        log_det = 2.0 * float(np.log(np.diag(factor)).sum())
    elif params.kind == BaselineKind.DIAG:
        var = params.variances[i]
        mahalanobis = np.sum(centered * centered / var, axis=1)
        log_det = float(np.log(var).sum())
    else:
        var = float(params.variances[i])
        mahalanobis = np.sum(centered * centered, axis=1) / var
        log_det = p * math.log(var)
    return math.log(params.proportions[i]) - 0.5 * (p * LOG_2PI + log_det + mahalanobis)


def baseline_e_step(params: BaselineParams, data) -> Tuple[np.ndarray, float]:
    X = DataMatrix.coerce(data)
    if X.shape[1] != params.means.shape[1]:
        raise InvalidInputError(f"data has {X.shape[1]} columns, model has {params.means.shape[1]}")
    k = params.proportions.shape[0]
    L = np.column_stack([_log_density(X, params, i) for i in range(k)])
    if not np.all(np.isfinite(L)):
        raise NumericalError(f"{params.kind.value} densities are not finite")
    norm = logsumexp(L, axis=1)
    return np.exp(L - norm[:, None]), float(norm.sum())


def to_mixture_params(params: BaselineParams, b_floor: float = 1e-10) -> MixtureParams:
    """Express a baseline fit as a subspace mixture with d_i = p - 1."""
    p = params.means.shape[1]
    orientations: List[np.ndarray] = []
    a: List[np.ndarray] = []
    b = np.empty(params.proportions.shape[0])
    for i in range(params.proportions.shape[0]):
        pairs = eig_desc(params.covariance(i))
        b[i] = max(float(pairs.values[-1]), b_floor)
        a.append(np.maximum(pairs.values[: p - 1], b[i]))
        orientations.append(pairs.vectors[:, : p - 1].copy())
    return MixtureParams(
        proportions=params.proportions.copy(),
        means=params.means.copy(),
        dims=[p - 1] * params.proportions.shape[0],
        orientations=orientations,
        a=a,
        b=b,
        diagnostics={"baseline": params.kind.value},
    )


def _baseline_run(X: np.ndarray, kind: BaselineKind, cfg: EmConfig, resp: np.ndarray):
    params = None
    trace: List[float] = []
    for iteration in range(1, cfg.max_iters + 1):
        params = baseline_m_step(resp, X, kind, cfg)
        resp, loglik = baseline_e_step(params, X)
        trace.append(loglik)
        if converged(trace, cfg.rel_tol):
            return params, resp, trace, True, iteration
    return params, resp, trace, False, cfg.max_iters


def fit_baseline(data, k: int, kind: BaselineKind, cfg: EmConfig = None) -> FitReport:
    cfg = cfg or EmConfig()
    X = DataMatrix.coerce(data)
    n, p = X.shape
    if n < k:
        raise InvalidInputError(f"cannot fit {k} components to {n} observations")
    model = baseline_model(kind)
    restart, (params, resp, trace, done, n_iters) = run_restarts(
        X, k, cfg, f"{model.name} k={k}", lambda resp0: _baseline_run(X, kind, cfg, resp0)
    )
    nu = baseline_param_count(kind, k, p)
    return FitReport(
        params=to_mixture_params(params, cfg.b_floor),
        model=model,
        loglik_trace=trace,
        n_iters=n_iters,
        converged=done,
        bic=bic(trace[-1], nu, n),
        nu=nu,
        assignments=np.argmax(resp, axis=1),
        responsibilities=resp,
        restart_index=restart,
        seed=cfg.seed,
        baseline_params=params,
    )
