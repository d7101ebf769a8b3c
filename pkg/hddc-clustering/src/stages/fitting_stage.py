import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Tuple

import numpy as np

from src.config import HDDC_THREADS
from src.engine.em import fit
from src.engine.selection import best_per_k, select
from src.errors import HddcError, exit_code_for
from src.monitoring.callbacks import monitor
from src.state.shared_state import BenchmarkState, EmConfig, MethodSpec, SelectionGrid
from src.tools.metrics import condition_ratio, covariance_condition_number, recognition_rate

logger = logging.getLogger(__name__)


def _condition(report) -> float:
    """Mean condition number of the fitted class covariances."""
    if report.baseline_params is not None:
        values = [covariance_condition_number(report.baseline_params.covariance(i)) for i in range(report.params.k)]
    else:
        values = [condition_ratio(report.params, i) for i in range(report.params.k)]
    return float(np.mean(values))


class FittingStage:
    """Stage 2: fit every (dataset, method) cell concurrently"""

    def __init__(self, jobs: int = HDDC_THREADS):
        self.name = "FittingStage"
        self.workers = max(1, jobs)

    def process(self, state: BenchmarkState) -> BenchmarkState:
        cells = [(job, method) for job in state.get("jobs", []) for method in job["methods"]]
        context = monitor.on_stage_start(self.name, {
            "cells": len(cells),
            "workers": self.workers
        })

        try:
            # selection cells run their grid sequentially inside this pool
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                fits = list(executor.map(lambda cell: self._run_cell(state, *cell), cells))

            for record in fits:
                if record["status"] != "ok":
                    state.setdefault("errors", []).append(
                        f"{record['method']} on dataset {record['job']}: {record['error']}"
                    )
            state["fits"] = fits
            if state.get("status") != "error":
                state["status"] = "fitted"
            monitor.on_stage_end(context, {
                "fits": len(fits),
                "failed": sum(1 for f in fits if f["status"] != "ok")
            })

        except Exception as e:
            monitor.on_stage_error(context, e)
            state.setdefault("errors", []).append(f"{self.name}: {str(e)}")
            state["exit_code"] = state.get("exit_code") or exit_code_for(e)
            state["fits"] = []
            state["status"] = "error"

        return state

    def _run_cell(self, state: BenchmarkState, job: Dict[str, Any], method: MethodSpec) -> Dict[str, Any]:
        data = job["data"]
        cfg = EmConfig(seed=state["seed"], n_restarts=method.n_restarts)
        record = {
            "job": job["id"],
            "x": job["x"],
            "replication": job["replication"],
            "method": method.label,
            "status": "ok",
            "error": "",
        }
        try:
            if method.k_range is not None:
                report, selection_rows = self._select(data.values, method, cfg)
                record["selection"] = selection_rows
            else:
                report = fit(data.values, method.k, method.model, method.dim_policy, cfg)
        except HddcError as exc:
            record.update(status="failed", error=str(exc))
            return record

        record.update(
            k=report.params.k,
            dims=report.dims,
            loglik=report.loglik,
            nu=report.nu,
            bic=report.bic,
            n_iters=report.n_iters,
            condition=_condition(report),
        )
        if data.labels is not None:
            record["recognition"] = recognition_rate(data.labels, report.assignments).rate
        return record

    def _select(self, values: np.ndarray, method: MethodSpec, cfg: EmConfig) -> Tuple[Any, List[Dict]]:
        grid = SelectionGrid(models=[method.model], k_range=method.k_range, thresholds=method.thresholds)
        report = select(values, grid, cfg, jobs=1)
        per_k = [
            {"k": row.k, "dims": row.dims, "t": row.threshold, "bic": row.bic}
            for row in best_per_k(report)
        ]
        return report.best_fit, per_k
