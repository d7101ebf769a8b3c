import logging
from typing import Any, Dict, List

import numpy as np

from src.errors import exit_code_for
from src.monitoring.callbacks import monitor
from src.state.shared_state import BenchmarkState
from src.utils.reporting import format_dims

logger = logging.getLogger(__name__)

CONDITION_CURVE_METHODS = ("HDDC [a_ij b_i Q_i d_i]", "Full-GMM")


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


def aggregate(fits: List[Dict[str, Any]], metric: str) -> List[Dict[str, Any]]:
    """Mean and spread of one metric per (x, method), in first-seen order."""
    groups: Dict[tuple, List[float]] = {}
    failures: Dict[tuple, int] = {}
    for record in fits:
        key = (record["x"], record["method"])
        groups.setdefault(key, [])
        failures.setdefault(key, 0)
        if record["status"] == "ok" and metric in record:
            groups[key].append(float(record[metric]))
        else:
            failures[key] += 1
    rows = []
    for (x, method), values in groups.items():
        rows.append({
            "x": x,
            "method": method,
            "mean": _mean(values),
            "std": float(np.std(values)) if values else float("nan"),
            "runs": len(values),
            "failed": failures[(x, method)],
        })
    return rows


def plot_points(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    return [{"x": row["x"], "method": row["method"], "y": row["mean"]} for row in rows]


class EvaluationStage:
    """Stage 3: aggregate fits into result tables and plot data"""

    def __init__(self):
        self.name = "EvaluationStage"

    def process(self, state: BenchmarkState) -> BenchmarkState:
        fits = state.get("fits") or []
        context = monitor.on_stage_start(self.name, {
            "suite": state["suite"],
            "fits": len(fits)
        })

        try:
            evaluator = getattr(self, "_evaluate_" + state["suite"].replace("-", "_"))
            tables, plots = evaluator(fits)
            state["tables"] = tables
            state["plots"] = plots
            if state.get("status") != "error":
                state["status"] = "evaluated"
            monitor.on_stage_end(context, {"tables": list(tables), "plots": list(plots)})

        except Exception as e:
            monitor.on_stage_error(context, e)
            state.setdefault("errors", []).append(f"{self.name}: {str(e)}")
            state["exit_code"] = state.get("exit_code") or exit_code_for(e)
            state["tables"] = {}
            state["plots"] = {}
            state["status"] = "error"

        return state

    def _evaluate_model_selection(self, fits):
        bic_rows = {(r["x"], r["method"]): r for r in aggregate(fits, "bic")}
        table = []
        for row in aggregate(fits, "recognition"):
            table.append({
                "generator": row["x"],
                "fitted": row["method"],
                "mean_bic": bic_rows[(row["x"], row["method"])]["mean"],
                "mean_recognition": row["mean"],
                "runs": row["runs"],
            })
        return {"model_selection": table}, {}

    def _evaluate_hyper_params(self, fits):
        winners, per_k, bic_curve = [], [], []
        for record in fits:
            if record["status"] != "ok":
                continue
            winners.append({
                "replication": record["replication"],
                "k": record["k"],
                "dims": format_dims(record["dims"]),
                "bic": record["bic"],
                "recognition": record.get("recognition", float("nan")),
            })
            for row in record.get("selection", []):
                per_k.append({
                    "replication": record["replication"],
                    "k": row["k"],
                    "dims": format_dims(row["dims"]),
                    "t": row["t"],
                    "bic": row["bic"],
                })
                bic_curve.append({"x": row["k"], "method": f"replication {record['replication']}", "y": row["bic"]})
        return {"hyper_params_winners": winners, "hyper_params_per_k": per_k}, {"bic_vs_k": bic_curve}

    def _evaluate_dimension_sweep(self, fits):
        rows = aggregate(fits, "recognition")
        bics = aggregate(fits, "bic")
        bic_means = {(r["x"], r["method"]): r["mean"] for r in bics}
        table = [{"p": r["x"], "method": r["method"], "mean_recognition": r["mean"], "std": r["std"],
                  "bic": bic_means[(r["x"], r["method"])], "runs": r["runs"]} for r in rows]
        return {"dimension_sweep": table}, {"recognition_vs_p": plot_points(rows), "bic_vs_p": plot_points(bics)}

    def _evaluate_full_rank(self, fits):
        recognition = aggregate(fits, "recognition")
        condition = aggregate(fits, "condition")
        conditions = {(r["x"], r["method"]): r["mean"] for r in condition}
        table = [{"n": r["x"], "method": r["method"], "mean_recognition": r["mean"],
                  "mean_condition": conditions[(r["x"], r["method"])], "runs": r["runs"]} for r in recognition]
        # condition curve: HDDC against the unconstrained baseline
        curve = [r for r in condition if r["method"] in CONDITION_CURVE_METHODS]
        plots = {"recognition_vs_n": plot_points(recognition), "condition_vs_n": plot_points(curve)}
        return {"full_rank": table}, plots

    def _evaluate_crabs(self, fits):
        table = []
        for record in fits:
            if record["status"] != "ok":
                table.append({"method": record["method"], "recognition": float("nan"), "dims": "", "bic": float("nan")})
                continue
            table.append({
                "method": record["method"],
                "recognition": record.get("recognition", float("nan")),
                "dims": format_dims(record["dims"]),
                "bic": record["bic"],
            })
        return {"crabs": table}, {}
