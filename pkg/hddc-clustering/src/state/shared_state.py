from dataclasses import dataclass
from enum import Enum
from typing import TypedDict, List, Dict, Optional, Any, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import (
    MAX_ITERS,
    REL_TOL,
    INNER_MAX_ITERS,
    INNER_TOL,
    MIN_COMPONENT_FRACTION,
    B_FLOOR,
    RIDGE_SCALE,
    N_RESTARTS,
    INIT_KIND,
    KMEANS_ITERS,
    DEFAULT_SEED,
    GRAM_THRESHOLD,
)
from src.errors import InvalidInputError


# Model catalog value types
class Family(str, Enum):
    FREE_ORIENTATION = "FreeOrientation"
    COMMON_ORIENTATION = "CommonOrientation"
    COMMON_COVARIANCE = "CommonCovariance"
    BASELINE = "Baseline"


class AStructure(str, Enum):
    PER_CLASS_PER_DIM = "a_ij"
    PER_DIM_SHARED = "a_j"
    PER_CLASS = "a_i"
    GLOBAL = "a"


class BStructure(str, Enum):
    PER_CLASS = "b_i"
    GLOBAL = "b"


class DStructure(str, Enum):
    PER_CLASS = "d_i"
    COMMON = "d"


class BaselineKind(str, Enum):
    FULL = "Full"
    COM = "Com"
    DIAG = "Diag"
    SPHE = "Sphe"


A, B, D = AStructure, BStructure, DStructure

# Admissible (a, b, d) combinations per family, in catalog order
ADMISSIBLE = {
    Family.FREE_ORIENTATION: [
        (A.PER_CLASS_PER_DIM, B.PER_CLASS, D.PER_CLASS),
        (A.PER_CLASS_PER_DIM, B.GLOBAL, D.PER_CLASS),
        (A.PER_CLASS, B.PER_CLASS, D.PER_CLASS),
        (A.GLOBAL, B.PER_CLASS, D.PER_CLASS),
        (A.PER_CLASS, B.GLOBAL, D.PER_CLASS),
        (A.GLOBAL, B.GLOBAL, D.PER_CLASS),
        (A.PER_CLASS_PER_DIM, B.PER_CLASS, D.COMMON),
        (A.PER_DIM_SHARED, B.PER_CLASS, D.COMMON),
        (A.PER_CLASS_PER_DIM, B.GLOBAL, D.COMMON),
        (A.PER_DIM_SHARED, B.GLOBAL, D.COMMON),
        (A.PER_CLASS, B.PER_CLASS, D.COMMON),
        (A.GLOBAL, B.PER_CLASS, D.COMMON),
        (A.PER_CLASS, B.GLOBAL, D.COMMON),
        (A.GLOBAL, B.GLOBAL, D.COMMON),
    ],
    Family.COMMON_ORIENTATION: [
        (A.PER_CLASS, B.PER_CLASS, D.COMMON),
        (A.GLOBAL, B.PER_CLASS, D.COMMON),
        (A.PER_CLASS, B.GLOBAL, D.COMMON),
    ],
    Family.COMMON_COVARIANCE: [
        (A.PER_DIM_SHARED, B.GLOBAL, D.COMMON),
        (A.GLOBAL, B.GLOBAL, D.COMMON),
    ],
}


@dataclass(frozen=True)
class ModelKind:
    family: Family
    a_structure: Optional[AStructure] = None
    b_structure: Optional[BStructure] = None
    d_structure: Optional[DStructure] = None
    baseline_kind: Optional[BaselineKind] = None

    def __post_init__(self):
        if self.family == Family.BASELINE:
            if self.baseline_kind is None:
                raise InvalidInputError("baseline models need a baseline kind")
            if any(s is not None for s in (self.a_structure, self.b_structure, self.d_structure)):
                raise InvalidInputError("baseline models carry no a/b/d structure")
            return
        if self.baseline_kind is not None:
            raise InvalidInputError("only baseline models carry a baseline kind")
        combo = (self.a_structure, self.b_structure, self.d_structure)
        if combo not in ADMISSIBLE[self.family]:
            raise InvalidInputError(
                f"{self._render(combo)} is not an admissible {self.family.value} model"
            )

    def _render(self, combo) -> str:
        a, b, d = combo
        q = "Q_i" if self.family == Family.FREE_ORIENTATION else "Q"
        tokens = [getattr(a, "value", "?"), getattr(b, "value", "?"), q, getattr(d, "value", "?")]
        return "[" + " ".join(tokens) + "]"

    @property
    def name(self) -> str:
        if self.is_baseline:
            return f"{self.baseline_kind.value}-GMM"
        return self._render((self.a_structure, self.b_structure, self.d_structure))

    @property
    def is_baseline(self) -> bool:
        return self.family == Family.BASELINE

    @property
    def common_dimension(self) -> bool:
        return self.d_structure == DStructure.COMMON

    def __str__(self) -> str:
        return self.name


class InitKind(str, Enum):
    RANDOM_PARTITION = "random"
    KMEANS_SEEDED = "kmeans"


class DimPolicyKind(str, Enum):
    FIXED_PER_CLASS = "fixed"
    FIXED_COMMON = "fixed-common"
    SCREE = "scree"
    SCREE_COMMON_VIA_BIC = "common-bic"


# Data containers
class DataMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    columns: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check_shape(self):
        if self.values.ndim != 2:
            raise ValueError("data must be a 2-D matrix")
        if self.labels is not None and len(self.labels) != self.values.shape[0]:
            raise ValueError("labels must have one entry per row")
        return self

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def p(self) -> int:
        return int(self.values.shape[1])

    @staticmethod
    def coerce(data: Union["DataMatrix", np.ndarray]) -> np.ndarray:
        values = data.values if isinstance(data, DataMatrix) else data
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise InvalidInputError("data must be a 2-D matrix")
        return values


class EmConfig(BaseModel):
    max_iters: int = Field(default=MAX_ITERS, gt=0)
    rel_tol: float = Field(default=REL_TOL, gt=0)
    inner_max_iters: int = Field(default=INNER_MAX_ITERS, gt=0)
    inner_tol: float = Field(default=INNER_TOL, gt=0)
    min_component_weight: Optional[float] = Field(default=None, ge=0, description="None means 1e-6*n")
    b_floor: float = Field(default=B_FLOOR, gt=0)
    ridge_scale: float = Field(default=RIDGE_SCALE, ge=0, description="Full/Com ridge as a fraction of trace/p")
    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    n_restarts: int = Field(default=N_RESTARTS, gt=0)
    init_kind: InitKind = InitKind(INIT_KIND)
    kmeans_iters: int = Field(default=KMEANS_ITERS, gt=0)
    gram_threshold: Optional[int] = Field(default=GRAM_THRESHOLD, ge=1)

    def resolved_min_weight(self, n: int) -> float:
        if self.min_component_weight is not None:
            return self.min_component_weight
        return MIN_COMPONENT_FRACTION * n


class DimPolicy(BaseModel):
    kind: DimPolicyKind
    dims: Optional[List[int]] = None
    d: Optional[int] = Field(default=None, ge=1)
    threshold: Optional[float] = Field(default=None, gt=0, lt=1)
    d_min: int = Field(default=1, ge=1)
    d_max: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == DimPolicyKind.FIXED_PER_CLASS and not self.dims:
            raise ValueError("fixed per-class policy needs dims")
        if self.dims is not None and any(d < 1 for d in self.dims):
            raise ValueError("intrinsic dimensions must be >= 1")
        if self.kind == DimPolicyKind.FIXED_COMMON and self.d is None:
            raise ValueError("fixed common policy needs d")
        if self.kind == DimPolicyKind.SCREE and self.threshold is None:
            raise ValueError("scree policy needs a threshold")
        if self.d_max is not None and self.d_max < self.d_min:
            raise ValueError("d_max must be >= d_min")
        return self

    @classmethod
    def fixed_per_class(cls, dims: List[int]) -> "DimPolicy":
        return cls(kind=DimPolicyKind.FIXED_PER_CLASS, dims=list(dims))

    @classmethod
    def fixed_common(cls, d: int) -> "DimPolicy":
        return cls(kind=DimPolicyKind.FIXED_COMMON, d=d)

    @classmethod
    def scree(cls, threshold: float, d_max: Optional[int] = None) -> "DimPolicy":
        return cls(kind=DimPolicyKind.SCREE, threshold=threshold, d_max=d_max)

    @classmethod
    def common_via_bic(cls, d_max: Optional[int] = None) -> "DimPolicy":
        return cls(kind=DimPolicyKind.SCREE_COMMON_VIA_BIC, d_max=d_max)

    def describe(self) -> str:
        if self.kind == DimPolicyKind.SCREE:
            return f"scree(t={self.threshold:g})"
        if self.kind == DimPolicyKind.FIXED_COMMON:
            return f"d={self.d}"
        if self.kind == DimPolicyKind.FIXED_PER_CLASS:
            return "dims=" + ",".join(str(d) for d in self.dims)
        return "common-bic"


# Fitted parameters
class MixtureParams(BaseModel):
    """Subspace-Gaussian mixture parameters.

    Component i has covariance Q_i diag(a_i) Q_i^t + b_i (I - Q_i Q_i^t); only the
    d_i retained orientation columns are stored.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    proportions: np.ndarray
    means: np.ndarray
    dims: List[int]
    orientations: List[np.ndarray]
    a: List[np.ndarray]
    b: np.ndarray
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @property
    def k(self) -> int:
        return int(self.proportions.shape[0])

    @property
    def p(self) -> int:
        return int(self.means.shape[1])


class BaselineParams(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: BaselineKind
    proportions: np.ndarray
    means: np.ndarray
    covariances: Optional[List[np.ndarray]] = None  # Full: per component, Com: shared matrix repeated
    variances: Optional[np.ndarray] = None  # Diag: k x p, Sphe: k

    def covariance(self, i: int) -> np.ndarray:
        p = self.means.shape[1]
        if self.kind in (BaselineKind.FULL, BaselineKind.COM):
            return self.covariances[i]
        if self.kind == BaselineKind.DIAG:
            return np.diag(self.variances[i])
        return self.variances[i] * np.eye(p)


class FitReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: MixtureParams
    model: ModelKind
    loglik_trace: List[float]
    n_iters: int
    converged: bool
    bic: float
    nu: int
    assignments: np.ndarray
    responsibilities: np.ndarray
    restart_index: int
    seed: int
    baseline_params: Optional[BaselineParams] = None
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    @property
    def dims(self) -> List[int]:
        return list(self.params.dims)


class ValidationReport(BaseModel):
    model: str
    violations: List[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


# Selection
class SelectionGrid(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    models: List[ModelKind] = Field(min_length=1)
    k_range: Tuple[int, int]
    thresholds: List[float] = Field(min_length=1)
    common_via_bic: bool = Field(default=False, description="common-d models search d by BIC instead of scree")
    common_dims: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_grid(self):
        k_min, k_max = self.k_range
        if k_min < 1 or k_max < k_min:
            raise ValueError(f"invalid k range {k_min}..{k_max}")
        if any(not 0.0 < t < 1.0 for t in self.thresholds):
            raise ValueError("thresholds must lie in (0, 1)")
        if self.common_dims is not None and any(d < 1 for d in self.common_dims):
            raise ValueError("common dimensions must be >= 1")
        return self

    @property
    def ks(self) -> List[int]:
        return list(range(self.k_range[0], self.k_range[1] + 1))


class SelectionRow(BaseModel):
    model: str
    k: int
    threshold: Optional[float] = None
    dims: List[int] = Field(default_factory=list)
    loglik: Optional[float] = None
    nu: Optional[int] = None
    bic: Optional[float] = None
    status: str = "ok"
    message: str = ""


class SelectionReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    rows: List[SelectionRow]
    winner: int
    best_fit: Optional[FitReport] = Field(default=None, exclude=True)

    @property
    def winner_row(self) -> SelectionRow:
        return self.rows[self.winner]


# Simulation specs
class ClassSpec(BaseModel):
    proportion: float = Field(ge=0.0, le=1.0)
    dim: int = Field(ge=1)
    a: List[float] = Field(min_length=1, description="one value, or one per subspace dimension")
    b: float = Field(gt=0.0)
    mean_radius: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _check_class(self):
        if len(self.a) not in (1, self.dim):
            raise ValueError(f"a must have 1 or {self.dim} entries")
        if min(self.a) <= self.b:
            raise ValueError("subspace variances must exceed the noise level b")
        return self

    def a_vector(self) -> np.ndarray:
        values = np.asarray(self.a, dtype=float)
        if values.size == 1:
            values = np.full(self.dim, values[0])
        return np.sort(values)[::-1]


class SimSpec(BaseModel):
    k: int = Field(ge=1)
    p: int = Field(ge=2)
    n: int = Field(ge=1)
    classes: List[ClassSpec]
    shared_orientation: bool = False
    mean_radius: Optional[float] = Field(default=None, ge=0.0, description="None means sqrt(b) per class")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_spec(self):
        if len(self.classes) != self.k:
            raise ValueError(f"expected {self.k} class sections, got {len(self.classes)}")
        total = sum(c.proportion for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"class proportions sum to {total}, not 1")
        for c in self.classes:
            if c.dim > self.p - 1:
                raise ValueError(f"class dimension {c.dim} exceeds p-1={self.p - 1}")
        if self.shared_orientation and len({c.dim for c in self.classes}) > 1:
            raise ValueError("a shared orientation needs equal class dimensions")
        return self


class FullRankSpec(BaseModel):
    k: int = Field(ge=1)
    p: int = Field(ge=2)
    n: int = Field(ge=1)
    condition_number: float = Field(ge=1.0)
    proportions: Optional[List[float]] = None
    mean_radius: Optional[float] = Field(default=None, ge=0.0, description="None means sqrt(condition_number)")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_spec(self):
        if self.proportions is not None:
            if len(self.proportions) != self.k or abs(sum(self.proportions) - 1.0) > 1e-9:
                raise ValueError("proportions must have k entries summing to 1")
        return self


class SimulatedData(DataMatrix):
    truth: Optional[MixtureParams] = None
    covariances: Optional[List[np.ndarray]] = None


# Evaluation
class ConfusionMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    counts: np.ndarray
    true_labels: List[Any]
    pred_labels: List[Any]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class RecognitionResult(BaseModel):
    rate: float = Field(ge=0.0, le=1.0)
    matching: Dict[Any, Any] = Field(description="predicted label -> true label")
    correct: int
    n: int


# Benchmark pipeline
class MethodSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    label: str
    model: ModelKind
    k: int = Field(ge=1)
    dim_policy: Optional[DimPolicy] = None
    thresholds: Optional[List[float]] = None
    k_range: Optional[Tuple[int, int]] = None
    n_restarts: int = Field(default=N_RESTARTS, gt=0)


class BenchmarkState(TypedDict):
    # Input
    suite: str
    seed: int
    replications: int
    restarts: int
    quick: bool
    output_dir: str

    # Simulation stage
    jobs: List[Dict]

    # Fitting stage
    fits: List[Dict]

    # Evaluation stage
    tables: Dict[str, List[Dict]]
    plots: Dict[str, List[Dict]]

    # Report stage
    artifacts: List[str]
    markdown_report: str

    # Error handling
    errors: List[str]
    status: str  # pending, simulated, fitted, evaluated, completed, error
    exit_code: int  # of the first failing stage, 0 while none failed
