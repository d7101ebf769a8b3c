"""Model catalog, parameter counts and parameter validation."""
import re
import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.errors import InvalidInputError
from src.state.shared_state import (
    ADMISSIBLE,
    AStructure,
    BStructure,
    BaselineKind,
    DStructure,
    Family,
    MixtureParams,
    ModelKind,
    ValidationReport,
)

logger = logging.getLogger(__name__)

# Common-orientation models that need the FG algorithm; recognised by name, never built.
FG_RESERVED_NAMES = [
    "[a_ij b_i Q d_i]",
    "[a_ij b Q d_i]",
    "[a_i b_i Q d_i]",
    "[a_i b Q d_i]",
    "[a b_i Q d_i]",
    "[a b Q d_i]",
    "[a_ij b_i Q d]",
    "[a_j b_i Q d]",
    "[a_ij b Q d]",
]


class ParamCountInputs(BaseModel):
    k: int = Field(ge=1)
    p: int = Field(ge=1)
    dims: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_dims(self):
        if self.dims is not None:
            if len(self.dims) != self.k:
                raise ValueError(f"expected {self.k} dimensions, got {len(self.dims)}")
            if any(not 1 <= d <= self.p - 1 for d in self.dims):
                raise ValueError(f"dimensions must lie in [1, {self.p - 1}]")
        return self


def _build_catalog() -> List[ModelKind]:
    catalog = []
    for family in (Family.FREE_ORIENTATION, Family.COMMON_ORIENTATION, Family.COMMON_COVARIANCE):
        for a, b, d in ADMISSIBLE[family]:
            catalog.append(ModelKind(family=family, a_structure=a, b_structure=b, d_structure=d))
    for kind in (BaselineKind.FULL, BaselineKind.COM, BaselineKind.DIAG, BaselineKind.SPHE):
        catalog.append(ModelKind(family=Family.BASELINE, baseline_kind=kind))
    return catalog


CATALOG = _build_catalog()


def _squash(name: str) -> str:
    return re.sub(r"\s+", "", name)


_BY_NAME = {_squash(model.name): model for model in CATALOG}
_RESERVED = {_squash(name) for name in FG_RESERVED_NAMES}


def enumerate_models(family: Optional[Family] = None) -> List[ModelKind]:
    if family is None:
        return list(CATALOG)
    return [model for model in CATALOG if model.family == family]


def parse_model(name: str) -> ModelKind:
    """Exact-match lookup; whitespace inside the brackets is ignored."""
    key = _squash(name)
    if key in _BY_NAME:
        return _BY_NAME[key]
    if key in _RESERVED:
        raise InvalidInputError(f"{name} needs the FG algorithm and is not supported")
    raise InvalidInputError(f"unknown model name {name!r}")


def baseline_model(kind: BaselineKind) -> ModelKind:
    return ModelKind(family=Family.BASELINE, baseline_kind=kind)


def baseline_param_count(kind: BaselineKind, k: int, p: int) -> int:
    rho = k * p + k - 1
    if kind == BaselineKind.FULL:
        return rho + k * p * (p + 1) // 2
    if kind == BaselineKind.COM:
        return rho + p * (p + 1) // 2
    if kind == BaselineKind.DIAG:
        return rho + k * p
    return rho + k


def _orientation_count(d: int, p: int) -> int:
    # d[p - (d+1)/2], always an integer
    return d * p - d * (d + 1) // 2


def param_count(model: ModelKind, inputs: ParamCountInputs) -> int:
    k, p = inputs.k, inputs.p
    if model.is_baseline:
        return baseline_param_count(model.baseline_kind, k, p)
    if inputs.dims is None:
        raise InvalidInputError(f"{model.name} needs intrinsic dimensions to count parameters")
    dims = list(inputs.dims)
    if model.common_dimension and len(set(dims)) != 1:
        raise InvalidInputError(f"{model.name} has a common dimension but got dims {dims}")

    rho = k * p + k - 1
    a, b = model.a_structure, model.b_structure

    if model.family == Family.FREE_ORIENTATION and model.d_structure == DStructure.PER_CLASS:
        tau_bar = sum(_orientation_count(d, p) for d in dims)
        D = sum(dims)
        extra = {
            (AStructure.PER_CLASS_PER_DIM, BStructure.PER_CLASS): 2 * k + D,
            (AStructure.PER_CLASS_PER_DIM, BStructure.GLOBAL): k + D + 1,
            (AStructure.PER_CLASS, BStructure.PER_CLASS): 3 * k,
            (AStructure.GLOBAL, BStructure.PER_CLASS): 2 * k + 1,
            (AStructure.PER_CLASS, BStructure.GLOBAL): 2 * k + 1,
            (AStructure.GLOBAL, BStructure.GLOBAL): k + 2,
        }[(a, b)]
        return rho + tau_bar + extra

    d = dims[0]
    tau = _orientation_count(d, p)
    if model.family == Family.FREE_ORIENTATION:
        return rho + {
            (AStructure.PER_CLASS_PER_DIM, BStructure.PER_CLASS): k * (tau + d + 1) + 1,
            (AStructure.PER_DIM_SHARED, BStructure.PER_CLASS): k * (tau + 1) + d + 1,
            (AStructure.PER_CLASS_PER_DIM, BStructure.GLOBAL): k * (tau + d) + 2,
            (AStructure.PER_DIM_SHARED, BStructure.GLOBAL): k * tau + d + 2,
            (AStructure.PER_CLASS, BStructure.PER_CLASS): k * (tau + 2) + 1,
            (AStructure.GLOBAL, BStructure.PER_CLASS): k * (tau + 1) + 2,
            (AStructure.PER_CLASS, BStructure.GLOBAL): k * (tau + 1) + 2,
            (AStructure.GLOBAL, BStructure.GLOBAL): k * tau + 3,
        }[(a, b)]
    if model.family == Family.COMMON_ORIENTATION:
        return rho + tau + {
            (AStructure.PER_CLASS, BStructure.PER_CLASS): 2 * k + 1,
            (AStructure.GLOBAL, BStructure.PER_CLASS): k + 2,
            (AStructure.PER_CLASS, BStructure.GLOBAL): k + 2,
        }[(a, b)]
    return rho + tau + {
        (AStructure.PER_DIM_SHARED, BStructure.GLOBAL): d + 2,
        (AStructure.GLOBAL, BStructure.GLOBAL): 3,
    }[(a, b)]


def _all_equal(values) -> bool:
    first = values[0]
    return all(np.array_equal(first, other) for other in values[1:])


def validate_params(params: MixtureParams, model: ModelKind) -> ValidationReport:
    report = ValidationReport(model=model.name)
    issues = report.violations
    k, p = params.k, params.p

    if params.means.shape != (k, p):
        issues.append(f"means have shape {params.means.shape}, expected ({k}, {p})")
    if len(params.dims) != k or len(params.orientations) != k or len(params.a) != k or params.b.shape != (k,):
        issues.append("per-component lists do not all have k entries")
        return report

    pi = params.proportions
    if abs(float(pi.sum()) - 1.0) > 1e-12:
        issues.append(f"proportions sum to {pi.sum():.15g}")
    if np.any(pi <= 0.0) or np.any(pi > 1.0):
        issues.append("proportion outside (0, 1]")

    for i in range(k):
        d, Q, a, b = params.dims[i], params.orientations[i], params.a[i], params.b[i]
        if not 1 <= d <= p - 1:
            issues.append(f"component {i}: dimension {d} outside [1, {p - 1}]")
        if Q.shape != (p, d):
            issues.append(f"component {i}: orientation shape {Q.shape}, expected ({p}, {d})")
        elif np.max(np.abs(Q.T @ Q - np.eye(d))) > 1e-10:
            issues.append(f"component {i}: orientation columns not orthonormal")
        if a.shape != (d,):
            issues.append(f"component {i}: a has shape {a.shape}, expected ({d},)")
        if not b > 0.0:
            issues.append(f"component {i}: b must be positive")
        if np.any(a < b):
            issues.append(f"component {i}: a below b")
        if np.any(np.diff(a) > 0.0):
            issues.append(f"component {i}: a not descending")
        if not np.all(np.isfinite(params.means[i])):
            issues.append(f"component {i}: mean not finite")

    if model.is_baseline or issues:
        return report

    if model.b_structure == BStructure.GLOBAL and not _all_equal(list(params.b)):
        issues.append("global b with unequal b_i")
    if model.d_structure == DStructure.COMMON and len(set(params.dims)) != 1:
        issues.append("common d with unequal d_i")
    if model.a_structure == AStructure.PER_CLASS:
        if any(not np.all(a == a[0]) for a in params.a):
            issues.append("a_i not constant within a class")
    if model.a_structure == AStructure.GLOBAL:
        if len({float(x) for a in params.a for x in a}) != 1:
            issues.append("global a with unequal values")
    if model.a_structure == AStructure.PER_DIM_SHARED and not _all_equal(params.a):
        issues.append("shared a_j differ between classes")
    if model.family in (Family.COMMON_ORIENTATION, Family.COMMON_COVARIANCE):
        if not _all_equal(params.orientations):
            issues.append("common orientation with unequal Q_i")
    if model.family == Family.COMMON_COVARIANCE and not _all_equal(params.a):
        issues.append("common covariance with unequal a")
    return report
