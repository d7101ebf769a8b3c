import logging
from typing import Dict, List

from src.config import (
    BENCHMARK_THRESHOLD,
    CRABS_RESTARTS,
    THRESHOLD_GRID,
)
from src.errors import exit_code_for
from src.monitoring.callbacks import monitor
from src.state.shared_state import (
    BaselineKind,
    BenchmarkState,
    DimPolicy,
    Family,
    FullRankSpec,
    MethodSpec,
)
from src.tools.data_io import DatasetReader
from src.tools.model_family import baseline_model, enumerate_models, parse_model
from src.tools.synthgen import hyper_param_spec, model_spec, simulate, simulate_full_rank

logger = logging.getLogger(__name__)

SUITES = ("model-selection", "hyper-params", "dimension-sweep", "full-rank", "crabs")

# Sizes per suite: (full, quick)
SUITE_SIZES = {
    "model-selection": ({"p": 100, "n": 1000}, {"p": 20, "n": 300}),
    "hyper-params": ({"p": 50, "n": 1000, "k_range": (2, 6)}, {"p": 20, "n": 300, "k_range": (2, 4)}),
    "dimension-sweep": ({"ps": [20, 40, 60, 80, 100], "n": 1000}, {"ps": [20, 40], "n": 300}),
    "full-rank": ({"p": 50, "ns": [150, 250, 500, 1000, 1500, 2000], "condition": 100.0},
                  {"p": 10, "ns": [150, 500], "condition": 100.0}),
}

HDDC_MAIN = "[a_i b_i Q_i d_i]"
HDDC_FULL_RANK = "[a_ij b_i Q_i d_i]"


def free_per_class_models():
    return [m for m in enumerate_models() if m.family == Family.FREE_ORIENTATION and not m.common_dimension]


def _baseline_methods(k: int, restarts: int, kinds) -> List[MethodSpec]:
    return [
        MethodSpec(label=baseline_model(kind).name, model=baseline_model(kind), k=k, n_restarts=restarts)
        for kind in kinds
    ]


def _hddc_method(name: str, k: int, restarts: int, threshold: float = BENCHMARK_THRESHOLD) -> MethodSpec:
    model = parse_model(name)
    return MethodSpec(
        label=f"HDDC {model.name}",
        model=model,
        k=k,
        dim_policy=DimPolicy.scree(threshold),
        n_restarts=restarts,
    )


class SimulationStage:
    """Stage 1: build the datasets and method plan for a benchmark suite"""

    def __init__(self):
        self.name = "SimulationStage"

    def process(self, state: BenchmarkState) -> BenchmarkState:
        context = monitor.on_stage_start(self.name, {
            "suite": state["suite"],
            "replications": state["replications"],
            "quick": state["quick"]
        })

        try:
            planner = getattr(self, "_plan_" + state["suite"].replace("-", "_"))
            jobs = planner(state)
            state["jobs"] = jobs
            state["status"] = "simulated"
            monitor.log_intermediate(self.name, "jobs_planned", f"{len(jobs)} datasets")
            monitor.on_stage_end(context, {"jobs": len(jobs)})

        except Exception as e:
            monitor.on_stage_error(context, e)
            state.setdefault("errors", []).append(f"{self.name}: {str(e)}")
            state["exit_code"] = state.get("exit_code") or exit_code_for(e)
            state["jobs"] = []
            state["status"] = "error"

        return state

    def _replications(self, state: BenchmarkState) -> int:
        return min(state["replications"], 2) if state["quick"] else state["replications"]

    def _sizes(self, state: BenchmarkState) -> Dict:
        full, quick = SUITE_SIZES[state["suite"]]
        return quick if state["quick"] else full

    def _plan_model_selection(self, state: BenchmarkState) -> List[Dict]:
        sizes = self._sizes(state)
        models = free_per_class_models()
        methods = [_hddc_method(m.name, 3, state["restarts"]) for m in models]
        jobs = []
        for generator in models:
            for r in range(self._replications(state)):
                spec = model_spec(generator, p=sizes["p"], n=sizes["n"], seed=state["seed"] + len(jobs))
                jobs.append({
                    "id": len(jobs),
                    "x": generator.name,
                    "replication": r,
                    "data": simulate(spec),
                    "methods": methods,
                })
        return jobs

    def _plan_hyper_params(self, state: BenchmarkState) -> List[Dict]:
        sizes = self._sizes(state)
        model = parse_model(HDDC_MAIN)
        thresholds = THRESHOLD_GRID[-3:] if state["quick"] else THRESHOLD_GRID
        method = MethodSpec(
            label=f"HDDC {model.name}",
            model=model,
            k=sizes["k_range"][0],
            thresholds=list(thresholds),
            k_range=sizes["k_range"],
            n_restarts=state["restarts"],
        )
        jobs = []
        for r in range(self._replications(state)):
            spec = hyper_param_spec(p=sizes["p"], n=sizes["n"], seed=state["seed"] + r)
            jobs.append({"id": len(jobs), "x": r, "replication": r, "data": simulate(spec), "methods": [method]})
        return jobs

    def _plan_dimension_sweep(self, state: BenchmarkState) -> List[Dict]:
        sizes = self._sizes(state)
        methods = [_hddc_method(HDDC_MAIN, 3, state["restarts"])] + _baseline_methods(
            3, state["restarts"], [BaselineKind.FULL, BaselineKind.COM, BaselineKind.DIAG, BaselineKind.SPHE]
        )
        jobs = []
        for p in sizes["ps"]:
            for r in range(self._replications(state)):
                spec = hyper_param_spec(p=p, n=sizes["n"], seed=state["seed"] + len(jobs))
                jobs.append({"id": len(jobs), "x": p, "replication": r, "data": simulate(spec), "methods": methods})
        return jobs

    def _plan_full_rank(self, state: BenchmarkState) -> List[Dict]:
        sizes = self._sizes(state)
        methods = [_hddc_method(HDDC_FULL_RANK, 3, state["restarts"])] + _baseline_methods(
            3, state["restarts"], [BaselineKind.FULL, BaselineKind.DIAG, BaselineKind.SPHE]
        )
        jobs = []
        for n in sizes["ns"]:
            for r in range(self._replications(state)):
                spec = FullRankSpec(k=3, p=sizes["p"], n=n, condition_number=sizes["condition"],
                                    seed=state["seed"] + len(jobs))
                jobs.append({
                    "id": len(jobs),
                    "x": n,
                    "replication": r,
                    "data": simulate_full_rank(spec),
                    "methods": methods,
                })
        return jobs

    def _plan_crabs(self, state: BenchmarkState) -> List[Dict]:
        restarts = state["restarts"] if state["quick"] else CRABS_RESTARTS
        methods = [_hddc_method(HDDC_MAIN, 4, restarts)] + _baseline_methods(4, restarts, [BaselineKind.SPHE])
        data = DatasetReader.read_crabs()
        return [{"id": 0, "x": "crabs", "replication": 0, "data": data, "methods": methods}]
