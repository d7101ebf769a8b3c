from langgraph.graph import StateGraph, END
from src.config import BENCHMARK_REPLICATIONS, BENCHMARK_RESTARTS, DEFAULT_SEED, HDDC_THREADS, OUTPUT_DIR
from src.state.shared_state import BenchmarkState
from src.stages.simulation_stage import SUITES, SimulationStage
from src.stages.fitting_stage import FittingStage
from src.stages.evaluation_stage import EvaluationStage
from src.stages.report_stage import ReportStage
from src.errors import InvalidInputError
from src.monitoring.callbacks import monitor
from typing import Optional
import logging

logger = logging.getLogger(__name__)


def create_benchmark_workflow(jobs: int = HDDC_THREADS):
    """Create LangGraph workflow for a benchmark suite"""

    # Initialize stages
    simulation_stage = SimulationStage()
    fitting_stage = FittingStage(jobs)
    evaluation_stage = EvaluationStage()
    report_stage = ReportStage()

    # Create workflow graph
    workflow = StateGraph(BenchmarkState)

    # Add nodes
    workflow.add_node("simulate", simulation_stage.process)
    workflow.add_node("fit", fitting_stage.process)
    workflow.add_node("evaluate", evaluation_stage.process)
    workflow.add_node("report", report_stage.process)

    # Define edges (sequential flow)
    workflow.set_entry_point("simulate")
    workflow.add_edge("simulate", "fit")
    workflow.add_edge("fit", "evaluate")
    workflow.add_edge("evaluate", "report")
    workflow.add_edge("report", END)

    # Compile graph
    app = workflow.compile()

    logger.info("Benchmark workflow compiled successfully")
    return app


def run_benchmark(
    suite: str,
    seed: int = DEFAULT_SEED,
    replications: int = BENCHMARK_REPLICATIONS,
    restarts: int = BENCHMARK_RESTARTS,
    quick: bool = False,
    output_dir: Optional[str] = None,
    jobs: int = HDDC_THREADS,
):
    """Run one benchmark suite end to end"""
    if suite not in SUITES:
        raise InvalidInputError(f"unknown benchmark suite {suite!r}; expected one of {', '.join(SUITES)}")

    monitor.reset()

    # Initialize state
    initial_state: BenchmarkState = {
        'suite': suite,
        'seed': seed,
        'replications': replications,
        'restarts': restarts,
        'quick': quick,
        'output_dir': str(output_dir or OUTPUT_DIR),
        'jobs': [],
        'fits': [],
        'tables': {},
        'plots': {},
        'artifacts': [],
        'markdown_report': '',
        'errors': [],
        'status': 'pending',
        'exit_code': 0
    }

    # Create and run workflow
    app = create_benchmark_workflow(jobs)

    logger.info(f"Starting benchmark suite: {suite} (seed {seed}, {replications} replications)")

    try:
        result = app.invoke(initial_state)

        logger.info(f"Benchmark suite completed: {suite}")
        logger.info(f"Status: {result['status']}, Fits: {len(result['fits'])}, Errors: {len(result['errors'])}")

        return result

    except Exception as e:
        logger.error(f"Error in benchmark workflow: {str(e)}")
        initial_state['status'] = 'error'
        initial_state['errors'].append(f"Workflow error: {str(e)}")
        return initial_state
