"""Hyper-parameter selection: BIC over models, k and the scree threshold.

Each grid cell is an independent fit. Cells run on a thread pool and the
report keeps grid order, so the winner does not depend on scheduling.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

from src.config import HDDC_THREADS, MAX_COMMON_DIM
from src.engine.criteria import bic, scree_dimension
from src.engine.em import fit
from src.errors import HddcError, InvalidInputError, SelectionFailedError
from src.state.shared_state import (
    DataMatrix,
    DimPolicy,
    EmConfig,
    FitReport,
    ModelKind,
    SelectionGrid,
    SelectionReport,
    SelectionRow,
)

logger = logging.getLogger(__name__)

__all__ = ["bic", "scree_dimension", "expand_grid", "select", "best_per_k", "GridCell"]


@dataclass(frozen=True)
class GridCell:
    model: ModelKind
    k: int
    policy: Optional[DimPolicy]
    threshold: Optional[float]


def expand_grid(grid: SelectionGrid, p: int) -> List[GridCell]:
    """Cells in grid order: model, then k, then threshold or common d."""
    cells = []
    candidate_dims = grid.common_dims or list(range(1, min(p - 1, MAX_COMMON_DIM) + 1))
    for model in grid.models:
        for k in grid.ks:
            if model.is_baseline:
                cells.append(GridCell(model, k, None, None))
            elif model.common_dimension and grid.common_via_bic:
                for d in candidate_dims:
                    if d <= p - 1:
                        cells.append(GridCell(model, k, DimPolicy.fixed_common(d), None))
            else:
                for t in grid.thresholds:
                    cells.append(GridCell(model, k, DimPolicy.scree(t), t))
    return cells


def _fit_cell(X, cell: GridCell, cfg: EmConfig):
    try:
        report = fit(X, cell.k, cell.model, cell.policy or DimPolicy.fixed_common(1), cfg)
    except HddcError as exc:
        logger.warning(f"Cell {cell.model.name} k={cell.k} t={cell.threshold} failed: {exc}")
        row = SelectionRow(model=cell.model.name, k=cell.k, threshold=cell.threshold,
                           status="failed", message=str(exc))
        return row, None
    row = SelectionRow(
        model=cell.model.name,
        k=cell.k,
        threshold=cell.threshold,
        dims=report.dims,
        loglik=report.loglik,
        nu=report.nu,
        bic=report.bic,
    )
    return row, report


def select(data, grid: SelectionGrid, cfg: Optional[EmConfig] = None, jobs: Optional[int] = None) -> SelectionReport:
    cfg = cfg or EmConfig()
    X = DataMatrix.coerce(data)
    n, p = X.shape
    if grid.k_range[1] > n:
        raise InvalidInputError(f"k range {grid.k_range} exceeds the {n} observations")
    cells = expand_grid(grid, p)
    if not cells:
        raise InvalidInputError("the selection grid expands to no cells")

    workers = max(1, min(jobs or HDDC_THREADS, len(cells)))
    logger.info(f"Selecting over {len(cells)} cells with {workers} worker(s)")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        outcomes = list(executor.map(lambda cell: _fit_cell(X, cell, cfg), cells))

    rows = [row for row, _ in outcomes]
    winner = None
    for index, (row, _) in enumerate(outcomes):
        if row.status != "ok":
            continue
        if winner is None or row.bic < rows[winner].bic:
            winner = index
    if winner is None:
        raise SelectionFailedError(f"all {len(cells)} selection cells failed")

    best: FitReport = outcomes[winner][1]
    logger.info(f"Selected {rows[winner].model} k={rows[winner].k} dims={rows[winner].dims} bic={rows[winner].bic:.3f}")
    return SelectionReport(rows=rows, winner=winner, best_fit=best)


def best_per_k(report: SelectionReport) -> List[SelectionRow]:
    """Lowest-BIC successful row for each k, in increasing k."""
    best = {}
    for row in report.rows:
        if row.status != "ok":
            continue
        if row.k not in best or row.bic < best[row.k].bic:
            best[row.k] = row
    return [best[k] for k in sorted(best)]
