import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from src.config import MODEL_FILE_VERSION, OUTPUT_DIR
from src.errors import DataReadError, InvalidInputError
from src.state.shared_state import FitReport, MixtureParams, ModelKind
from src.tools.model_family import parse_model


def ensure_output_dir(path: Optional[Union[str, Path]] = None) -> Path:
    output_dir = Path(path) if path else OUTPUT_DIR
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def _json_default(value: Any):
    """Serialize numpy scalars/arrays and pydantic models for JSON persistence."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, BaseModel):
        return value.model_dump()
    if isinstance(value, Path):
        return str(value)
    return str(value)


def serialize_payload(payload: Any) -> Any:
    return json.loads(json.dumps(payload, default=_json_default))


def persist_json_output(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(serialize_payload(payload), handle, indent=2)
    return path


# Model files
class ComponentRecord(BaseModel):
    proportion: float
    mean: List[float]
    dim: int = Field(ge=1)
    orientation: List[float] = Field(description="p x dim matrix, column-major")
    a: List[float]
    b: float


class FitRecord(BaseModel):
    loglik: Optional[float] = None
    bic: Optional[float] = None
    nu: Optional[int] = None
    seed: Optional[int] = None
    n_iters: Optional[int] = None
    converged: Optional[bool] = None


class ModelFile(BaseModel):
    format_version: int
    model: str
    k: int = Field(ge=1)
    p: int = Field(ge=2)
    components: List[ComponentRecord]
    fit: FitRecord = Field(default_factory=FitRecord)


def model_file_from_params(params: MixtureParams, model: ModelKind, report: Optional[FitReport] = None) -> ModelFile:
    components = [
        ComponentRecord(
            proportion=float(params.proportions[i]),
            mean=[float(v) for v in params.means[i]],
            dim=int(params.dims[i]),
            orientation=[float(v) for v in params.orientations[i].ravel(order="F")],
            a=[float(v) for v in params.a[i]],
            b=float(params.b[i]),
        )
        for i in range(params.k)
    ]
    fit = FitRecord()
    if report is not None:
        fit = FitRecord(
            loglik=float(report.loglik),
            bic=float(report.bic),
            nu=int(report.nu),
            seed=int(report.seed),
            n_iters=int(report.n_iters),
            converged=bool(report.converged),
        )
    return ModelFile(
        format_version=MODEL_FILE_VERSION,
        model=model.name,
        k=params.k,
        p=params.p,
        components=components,
        fit=fit,
    )


def save_model_file(path: Union[str, Path], report: FitReport) -> Path:
    """Write a fit as JSON; no timestamps, so equal fits give identical bytes."""
    document = model_file_from_params(report.params, report.model, report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document.model_dump(), indent=2) + "\n", encoding="utf-8")
    return path


def params_from_model_file(document: ModelFile) -> Tuple[MixtureParams, ModelKind]:
    if document.format_version != MODEL_FILE_VERSION:
        raise InvalidInputError(f"unsupported model file version {document.format_version}")
    if len(document.components) != document.k:
        raise InvalidInputError(f"model file lists {len(document.components)} components for k={document.k}")
    p = document.p
    orientations, a = [], []
    for i, c in enumerate(document.components):
        if len(c.mean) != p or len(c.orientation) != p * c.dim or len(c.a) != c.dim:
            raise InvalidInputError(f"component {i} of the model file has inconsistent sizes")
        orientations.append(np.asarray(c.orientation, dtype=float).reshape((p, c.dim), order="F"))
        a.append(np.asarray(c.a, dtype=float))
    params = MixtureParams(
        proportions=np.array([c.proportion for c in document.components]),
        means=np.array([c.mean for c in document.components], dtype=float),
        dims=[c.dim for c in document.components],
        orientations=orientations,
        a=a,
        b=np.array([c.b for c in document.components]),
    )
    return params, parse_model(document.model)


def load_model_file(path: Union[str, Path]) -> Tuple[MixtureParams, ModelKind, FitRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataReadError(f"cannot read model file {path}: {exc}") from exc
    try:
        document = ModelFile.model_validate_json(text)
    except ValidationError as exc:
        raise InvalidInputError(f"invalid model file {path}: {exc.errors()[0]['msg']}") from exc
    params, model = params_from_model_file(document)
    return params, model, document.fit


# Tabular outputs
def write_dataset_csv(path: Union[str, Path], values: np.ndarray, labels: Optional[Sequence] = None) -> Path:
    """Data columns x1..xp, then a trailing label column when labels are given."""
    frame = pd.DataFrame(values, columns=[f"x{j + 1}" for j in range(values.shape[1])])
    if labels is not None:
        frame["label"] = list(labels)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def write_predictions_csv(path: Union[str, Path], assignments: np.ndarray, posteriors: np.ndarray) -> Path:
    frame = pd.DataFrame({"assignment": assignments})
    for i in range(posteriors.shape[1]):
        frame[f"t{i}"] = posteriors[:, i]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def write_tsv(path: Union[str, Path], rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
    frame = pd.DataFrame(rows, columns=columns)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False)
    return path
