"""EM for the subspace mixture models.

The E step never builds a covariance matrix: each component is scored with
the cost function K_i(x) = -2 log(pi_i phi(x; theta_i)) - p log(2 pi), which
only needs the retained orientation columns, a_i and b_i.
"""
import math
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from src.engine.criteria import bic
from src.engine.m_step import m_step
from src.errors import DegenerateClusterError, FitFailedError, InvalidInputError, NumericalError
from src.state.shared_state import (
    DataMatrix,
    DimPolicy,
    EmConfig,
    FitReport,
    InitKind,
    MixtureParams,
    ModelKind,
)
from src.tools.model_family import ParamCountInputs, param_count

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def _component_cost(X: np.ndarray, params: MixtureParams, i: int) -> np.ndarray:
    p = X.shape[1]
    d = params.dims[i]
    a = params.a[i]
    b = float(params.b[i])
    centered = X - params.means[i]
    z = centered @ params.orientations[i]
    zz = z * z
    distance = np.einsum("ij,ij->i", centered, centered)
    return (
        (zz / a).sum(axis=1)
        + (distance - zz.sum(axis=1)) / b
        + float(np.log(a).sum())
        + (p - d) * math.log(b)
        - 2.0 * math.log(params.proportions[i])
    )


def _check_dimension(params: MixtureParams, X: np.ndarray) -> None:
    if X.shape[1] != params.p:
        raise InvalidInputError(f"data has {X.shape[1]} columns but the model was fitted in p={params.p}")


def cost_K(params: MixtureParams, component: int, x) -> float:
    X = np.asarray(x, dtype=float).reshape(1, -1)
    _check_dimension(params, X)
    return float(_component_cost(X, params, component)[0])


def cost_matrix(params: MixtureParams, data) -> np.ndarray:
    """n x k matrix of K_i(x_j)."""
    X = DataMatrix.coerce(data)
    _check_dimension(params, X)
    K = np.empty((X.shape[0], params.k))
    for i in range(params.k):
        K[:, i] = _component_cost(X, params, i)
        if not np.all(np.isfinite(K[:, i])):
            raise NumericalError(f"cost of component {i} is not finite")
    return K


def _posterior(K: np.ndarray, p: int) -> Tuple[np.ndarray, float]:
    log_weights = -0.5 * K
    norm = logsumexp(log_weights, axis=1)
    resp = np.exp(log_weights - norm[:, None])
    loglik = float(norm.sum() - K.shape[0] * 0.5 * p * LOG_2PI)
    return resp, loglik


def e_step(params: MixtureParams, data) -> Tuple[np.ndarray, float]:
    K = cost_matrix(params, data)
    return _posterior(K, params.p)


def log_likelihood(params: MixtureParams, data) -> float:
    return e_step(params, data)[1]


def predict(params: MixtureParams, data) -> Tuple[np.ndarray, np.ndarray]:
    """Hard assignments (lowest index on ties) and posteriors."""
    K = cost_matrix(params, data)
    resp, _ = _posterior(K, params.p)
    return np.argmin(K, axis=1), resp


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([seed, restart])


def _random_partition(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    labels = rng.integers(0, k, size=n)
    labels[rng.permutation(n)[:k]] = np.arange(k)
    return labels


def init_responsibilities(data, k: int, cfg: EmConfig, restart: int = 0) -> np.ndarray:
    X = DataMatrix.coerce(data)
    n = X.shape[0]
    if n < k:
        raise InvalidInputError(f"cannot split {n} observations into {k} components")
    rng = restart_rng(cfg.seed, restart)

    labels = None
    if cfg.init_kind == InitKind.KMEANS_SEEDED and k > 1:
        kmeans = KMeans(
            n_clusters=k,
            n_init=1,
            max_iter=cfg.kmeans_iters,
            random_state=int(rng.integers(0, 2**31 - 1)),
        )
        labels = kmeans.fit_predict(X)
        if np.unique(labels).shape[0] < k:
            logger.debug("k-means left an empty component; using a random partition")
            labels = None
    if labels is None:
        labels = _random_partition(n, k, rng)

    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    return resp


def converged(trace: List[float], rel_tol: float) -> bool:
    if len(trace) < 2:
        return False
    return abs(trace[-1] - trace[-2]) <= rel_tol * abs(trace[-1])


def run_restarts(X: np.ndarray, k: int, cfg: EmConfig, label: str,
                 attempt: Callable[[np.ndarray], Tuple]) -> Tuple[int, Tuple]:
    """Run every restart and keep the best final log-likelihood.

    `attempt(resp0)` returns (params, resp, trace, converged, n_iters, ...).
    Degenerate or numerically broken restarts are skipped.
    """
    best_index, best = -1, None
    failures = []
    for restart in range(cfg.n_restarts):
        resp0 = init_responsibilities(X, k, cfg, restart)
        try:
            outcome = attempt(resp0)
        except (DegenerateClusterError, NumericalError) as exc:
            logger.warning(f"{label} restart {restart} abandoned: {exc}")
            failures.append(f"restart {restart}: {exc}")
            continue
        final = outcome[2][-1]
        if best is None or final > best[2][-1]:
            best_index, best = restart, outcome
    if best is None:
        raise FitFailedError(f"all {cfg.n_restarts} restarts of {label} failed; last: {failures[-1]}")
    logger.info(
        f"{label}: restart {best_index} won with loglik {best[2][-1]:.6f} "
        f"({len(failures)} of {cfg.n_restarts} restarts failed)"
    )
    return best_index, best


def _em_run(X: np.ndarray, model: ModelKind, dim_policy: DimPolicy, cfg: EmConfig, resp: np.ndarray):
    params: Optional[MixtureParams] = None
    trace: List[float] = []
    for iteration in range(1, cfg.max_iters + 1):
        params = m_step(resp, X, model, dim_policy, cfg, previous=params)
        resp, loglik = e_step(params, X)
        trace.append(loglik)
        if converged(trace, cfg.rel_tol):
            return params, resp, trace, True, iteration
    return params, resp, trace, False, cfg.max_iters


def fit(data, k: int, model: ModelKind, dim_policy: DimPolicy, cfg: Optional[EmConfig] = None) -> FitReport:
    cfg = cfg or EmConfig()
    if model.is_baseline:
        from src.engine.baselines import fit_baseline
        return fit_baseline(data, k, model.baseline_kind, cfg)

    X = DataMatrix.coerce(data)
    n, p = X.shape
    if p < 2:
        raise InvalidInputError("HDDC needs at least two variables")
    if n < k:
        raise InvalidInputError(f"cannot fit {k} components to {n} observations")

    label = f"{model.name} k={k} {dim_policy.describe()}"
    restart, (params, resp, trace, done, n_iters) = run_restarts(
        X, k, cfg, label, lambda resp0: _em_run(X, model, dim_policy, cfg, resp0)
    )
    nu = param_count(model, ParamCountInputs(k=k, p=p, dims=params.dims))
    return FitReport(
        params=params,
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
        diagnostics=dict(params.diagnostics),
    )
