import re
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from src.config import CRABS_PATH
from src.errors import DataParseError, DataReadError, InvalidInputError
from src.state.shared_state import DataMatrix

logger = logging.getLogger(__name__)

CRABS_MEASUREMENTS = ["FL", "RW", "CL", "CW", "BD"]
CRABS_PER_CLASS = 50


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _label_index(label_col: Optional[str], header: Optional[List[str]], width: int) -> Optional[int]:
    if label_col is None:
        return None
    if label_col == "last":
        return width - 1
    if label_col.isdigit():
        index = int(label_col) - 1
        if not 0 <= index < width:
            raise InvalidInputError(f"label column {label_col} outside 1..{width}")
        return index
    if header is None or label_col not in header:
        raise InvalidInputError(f"no column named {label_col!r}")
    return header.index(label_col)


class DatasetReader:
    """Reads observation matrices from CSV files."""

    @staticmethod
    def read_csv(path: Union[str, Path], label_col: Optional[str] = None, standardize: bool = False) -> DataMatrix:
        """Comma separated, UTF-8, optional header detected from a non-numeric first row.

        label_col is "last", a 1-based column number or a header name.
        """
        try:
            frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, encoding="utf-8")
        except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
            raise DataReadError(f"cannot read {path}: {exc}") from exc
        except pd.errors.EmptyDataError as exc:
            raise DataParseError(f"{path} is empty") from exc
        except pd.errors.ParserError as exc:
            match = re.search(r"line (\d+)", str(exc))
            raise DataParseError(f"ragged row in {path}", row=int(match.group(1)) if match else None) from exc
        except UnicodeDecodeError as exc:
            raise DataParseError(f"{path} is not valid UTF-8") from exc

        missing = frame.isna().to_numpy()
        if missing.any():
            row, col = np.argwhere(missing)[0]
            raise DataParseError(f"ragged row in {path}", row=int(row) + 1, column=int(col) + 1)

        width = frame.shape[1]
        first = [cell.strip() for cell in frame.iloc[0]]
        guessed_label = width - 1 if label_col == "last" else None
        numeric_cells = [c for j, c in enumerate(first) if j != guessed_label]
        has_header = not all(_is_number(c) for c in numeric_cells) or (label_col not in (None, "last") and not label_col.isdigit())
        header = first if has_header else None
        body = frame.iloc[1:] if has_header else frame
        if body.shape[0] == 0:
            raise DataParseError(f"{path} has no data rows")

        label_index = _label_index(label_col, header, width)
        feature_cols = [j for j in range(width) if j != label_index]
        values = body.iloc[:, feature_cols].apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
        matrix = values.to_numpy(dtype=float)
        bad = ~np.isfinite(matrix)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataParseError(
                f"non-numeric cell {body.iloc[r, feature_cols[c]]!r} in {path}",
                row=int(r) + 1 + int(has_header),
                column=feature_cols[c] + 1,
            )

        labels = None
        if label_index is not None:
            labels = body.iloc[:, label_index].str.strip().to_numpy()
        if standardize:
            matrix = standardize_columns(matrix)
        columns = [header[j] for j in feature_cols] if header else None
        logger.info(f"Read {matrix.shape[0]} x {matrix.shape[1]} matrix from {path}")
        return DataMatrix(values=matrix, labels=labels, columns=columns)

    @staticmethod
    def read_crabs(path: Optional[Union[str, Path]] = None, standardize: bool = False) -> DataMatrix:
        """Leptograpsus crabs: 200 rows, five measurements, four species/sex classes."""
        path = Path(path or CRABS_PATH)
        if not path.is_file():
            raise DataReadError(f"crabs data not found at {path}; see data/CRABS_PROVENANCE.md")
        frame = pd.read_csv(path)
        expected = {"sp", "sex", *CRABS_MEASUREMENTS}
        if not expected.issubset(frame.columns):
            raise DataParseError(f"{path} lacks columns {sorted(expected - set(frame.columns))}")
        labels = (frame["sp"].astype(str) + frame["sex"].astype(str)).to_numpy()
        classes, counts = np.unique(labels, return_counts=True)
        if len(classes) != 4 or np.any(counts != CRABS_PER_CLASS):
            raise DataParseError(f"{path} should hold 4 classes of {CRABS_PER_CLASS}, found {dict(zip(classes, counts))}")
        matrix = frame[CRABS_MEASUREMENTS].to_numpy(dtype=float)
        if standardize:
            matrix = standardize_columns(matrix)
        return DataMatrix(values=matrix, labels=labels, columns=list(CRABS_MEASUREMENTS))


def standardize_columns(matrix: np.ndarray) -> np.ndarray:
    return StandardScaler().fit_transform(matrix)
