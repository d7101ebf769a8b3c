import logging
from pathlib import Path

from src.errors import exit_code_for
from src.monitoring.callbacks import monitor
from src.state.shared_state import BenchmarkState
from src.utils.persistence import ensure_output_dir, persist_json_output, write_tsv
from src.utils.reporting import PLOT_COLUMNS, build_benchmark_markdown_report

logger = logging.getLogger(__name__)


class ReportStage:
    """Stage 4: write result tables, plot data and the markdown report"""

    def __init__(self):
        self.name = "ReportStage"

    def process(self, state: BenchmarkState) -> BenchmarkState:
        context = monitor.on_stage_start(self.name, {
            "suite": state["suite"],
            "output_dir": state["output_dir"]
        })

        try:
            out_dir = ensure_output_dir(Path(state["output_dir"]))
            suite = state["suite"]
            artifacts = []
            for name, rows in (state.get("tables") or {}).items():
                artifacts.append(str(write_tsv(out_dir / f"{suite}_{name}.tsv", rows)))
            for name, rows in (state.get("plots") or {}).items():
                artifacts.append(str(write_tsv(out_dir / f"{suite}_{name}.plot.tsv", rows, PLOT_COLUMNS)))
            artifacts.append(str(persist_json_output(out_dir / f"{suite}_fits.json", state.get("fits") or [])))

            if state.get("status") != "error":
                state["status"] = "completed"
            state["markdown_report"] = build_benchmark_markdown_report(state, timings=monitor.stage_timings())
            report_path = out_dir / f"{suite}_report.md"
            report_path.write_text(state["markdown_report"], encoding="utf-8")
            artifacts.append(str(report_path))

            state["artifacts"] = artifacts
            monitor.on_stage_end(context, {"artifacts": len(artifacts)})

        except Exception as e:
            monitor.on_stage_error(context, e)
            state.setdefault("errors", []).append(f"{self.name}: {str(e)}")
            state["exit_code"] = state.get("exit_code") or exit_code_for(e)
            state["status"] = "error"

        return state
