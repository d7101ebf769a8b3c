import sys
import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from src.config import (
    BENCHMARK_REPLICATIONS,
    BENCHMARK_RESTARTS,
    BENCHMARK_THRESHOLD,
    DEFAULT_SEED,
    HDDC_THREADS,
    LOG_LEVEL,
    N_RESTARTS,
    OUTPUT_DIR,
    THRESHOLD_GRID,
)
from src.engine.em import fit, predict
from src.engine.selection import select
from src.errors import HddcError, InvalidInputError
from src.graph.workflow import run_benchmark
from src.stages.simulation_stage import SUITES
from src.state.shared_state import DimPolicy, EmConfig, SelectionGrid
from src.tools.data_io import DatasetReader
from src.tools.metrics import confusion_matrix, recognition_rate
from src.tools.model_family import parse_model
from src.tools.synthgen import generate, read_sim_spec
from src.utils.persistence import (
    load_model_file,
    save_model_file,
    write_dataset_csv,
    write_predictions_csv,
    write_tsv,
)
from src.utils.reporting import SELECTION_COLUMNS, confusion_rows, fit_summary_line, selection_rows

logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

DEFAULT_MODEL = "[a_i b_i Q_i d_i]"


def _int_list(raw: str):
    try:
        return [int(item) for item in raw.split(",") if item.strip()]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated integers, got {raw!r}")


def _float_list(raw: str):
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated numbers, got {raw!r}")


def parse_k_range(raw: str):
    """'2..6', '2-6' or a single '3'."""
    for sep in ("..", "-", ":"):
        if sep in raw:
            low, high = raw.split(sep, 1)
            break
    else:
        low = high = raw
    try:
        return int(low), int(high)
    except ValueError:
        raise InvalidInputError(f"invalid k range {raw!r}")


def build_dim_policy(kind: str, threshold: float, dims: str = None) -> DimPolicy:
    if kind == "scree":
        return DimPolicy.scree(threshold)
    if kind == "common-bic":
        return DimPolicy.common_via_bic()
    if not dims:
        raise InvalidInputError(f"--dim-policy {kind} needs --dims")
    values = _int_list(dims)
    if kind == "fixed-common":
        if len(values) != 1:
            raise InvalidInputError("--dim-policy fixed-common takes a single --dims value")
        return DimPolicy.fixed_common(values[0])
    return DimPolicy.fixed_per_class(values)


def _em_config(args) -> EmConfig:
    return EmConfig(seed=args.seed, n_restarts=args.restarts)


def _read(args):
    return DatasetReader.read_csv(args.input, label_col=args.label_col, standardize=args.standardize)


def cmd_fit(args) -> int:
    data = _read(args)
    model = parse_model(args.model)
    policy = build_dim_policy(args.dim_policy, args.threshold, args.dims)
    logger.info(f"Fitting {model.name} with k={args.k} to {data.n} x {data.p} data ({policy.describe()})")

    report = fit(data, args.k, model, policy, _em_config(args))
    print(fit_summary_line(report))

    if data.labels is not None:
        rate = recognition_rate(data.labels, report.assignments)
        logger.info(f"Recognition rate against the label column: {rate.rate:.4f}")
        if args.confusion:
            path = write_tsv(args.confusion, confusion_rows(confusion_matrix(data.labels, report.assignments)))
            logger.info(f"Confusion matrix saved to: {path}")
    elif args.confusion:
        raise InvalidInputError("--confusion needs a --label-col")
    if args.out:
        path = save_model_file(args.out, report)
        logger.info(f"Model file saved to: {path}")
    return 0


def cmd_select(args) -> int:
    data = _read(args)
    grid = SelectionGrid(
        models=[parse_model(name) for name in args.models],
        k_range=parse_k_range(args.k_range),
        thresholds=_float_list(args.thresholds) if args.thresholds else list(THRESHOLD_GRID),
        common_via_bic=args.common_bic,
    )
    report = select(data, grid, _em_config(args), jobs=args.jobs)

    rows = selection_rows(report)
    if args.out:
        path = write_tsv(args.out, rows, SELECTION_COLUMNS)
        logger.info(f"Selection table saved to: {path}")
    else:
        print("\t".join(SELECTION_COLUMNS))
        for row in rows:
            print("\t".join(str(row[c]) for c in SELECTION_COLUMNS))
    print(fit_summary_line(report.best_fit))
    return 0


def cmd_simulate(args) -> int:
    spec = read_sim_spec(args.spec)
    data = generate(spec, seed=args.seed)
    path = write_dataset_csv(args.out, data.values, data.labels)
    logger.info(f"Simulated {data.n} x {data.p} dataset saved to: {path}")
    return 0


def cmd_benchmark(args) -> int:
    result = run_benchmark(
        suite=args.suite,
        seed=args.seed,
        replications=args.replications,
        restarts=args.restarts,
        quick=args.quick,
        output_dir=args.out,
        jobs=args.jobs,
    )

    print("\n" + "=" * 80)
    print(f"BENCHMARK {args.suite.upper()} COMPLETE")
    print("=" * 80)
    print(f"Status: {result['status']}")
    print(f"Datasets: {len(result['jobs'])}")
    print(f"Fits: {len(result['fits'])}")
    for artifact in result.get('artifacts', []):
        print(f"  - {artifact}")
    if result.get('errors'):
        print(f"\nErrors: {len(result['errors'])}")
        for error in result['errors'][:10]:
            print(f"  - {error}")
    print("=" * 80 + "\n")

    if result['status'] != 'error':
        return 0
    return result.get('exit_code') or HddcError.exit_code


def cmd_predict(args) -> int:
    params, model, _ = load_model_file(args.model_file)
    data = _read(args)
    assignments, posteriors = predict(params, data)
    out = args.out or str(Path(OUTPUT_DIR) / "predictions.csv")
    path = write_predictions_csv(out, assignments, posteriors)
    logger.info(f"Predictions from {model.name} saved to: {path}")
    return 0


def _add_data_args(parser):
    parser.add_argument('input', help='CSV file, comma-separated, optional header')
    parser.add_argument('--label-col', help="Label column: 'last', a 1-based index or a header name")
    parser.add_argument('--standardize', action='store_true', help='Scale every column to zero mean, unit variance')


def _add_em_args(parser, restarts: int = N_RESTARTS):
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED, help='Base seed for all restarts')
    parser.add_argument('--restarts', type=int, default=restarts, help='Number of EM restarts')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='HDDC: High-Dimensional Data Clustering')
    sub = parser.add_subparsers(dest='command', required=True)

    p_fit = sub.add_parser('fit', help='Fit one model and write a model file')
    _add_data_args(p_fit)
    _add_em_args(p_fit)
    p_fit.add_argument('--k', type=int, required=True, help='Number of components')
    p_fit.add_argument('--model', default=DEFAULT_MODEL, help='Model name, e.g. "[a_ij b_i Q_i d_i]" or Full-GMM')
    p_fit.add_argument('--dim-policy', default='scree', choices=['scree', 'fixed', 'fixed-common', 'common-bic'])
    p_fit.add_argument('--threshold', type=float, default=BENCHMARK_THRESHOLD, help='Scree threshold')
    p_fit.add_argument('--dims', help='Intrinsic dimensions: one per class, or one for fixed-common')
    p_fit.add_argument('--out', help='Model file path (JSON)')
    p_fit.add_argument('--confusion', help='Confusion matrix TSV path (needs --label-col)')
    p_fit.set_defaults(handler=cmd_fit)

    p_select = sub.add_parser('select', help='BIC search over models, k and thresholds')
    _add_data_args(p_select)
    _add_em_args(p_select)
    p_select.add_argument('--models', nargs='+', default=[DEFAULT_MODEL], help='Model names')
    p_select.add_argument('--k-range', default='1..6', help="k range such as '2..6'")
    p_select.add_argument('--thresholds', help='Comma-separated scree thresholds')
    p_select.add_argument('--common-bic', action='store_true', help='Search common dimensions by BIC')
    p_select.add_argument('--jobs', type=int, default=HDDC_THREADS, help='Parallel grid cells')
    p_select.add_argument('--out', help='Selection TSV path (stdout when omitted)')
    p_select.set_defaults(handler=cmd_select)

    p_sim = sub.add_parser('simulate', help='Draw a labelled dataset from a spec file')
    p_sim.add_argument('spec', help='INI simulation spec')
    p_sim.add_argument('--seed', type=int, help='Override the seed in the spec')
    p_sim.add_argument('--out', required=True, help='Dataset CSV path')
    p_sim.set_defaults(handler=cmd_simulate)

    p_bench = sub.add_parser('benchmark', help='Run a benchmark suite')
    p_bench.add_argument('suite', choices=SUITES)
    p_bench.add_argument('--seed', type=int, default=DEFAULT_SEED)
    p_bench.add_argument('--replications', type=int, default=BENCHMARK_REPLICATIONS)
    p_bench.add_argument('--restarts', type=int, default=BENCHMARK_RESTARTS)
    p_bench.add_argument('--quick', action='store_true', help='Small sizes for a smoke run')
    p_bench.add_argument('--jobs', type=int, default=HDDC_THREADS, help='Parallel fitting cells')
    p_bench.add_argument('--out', help='Output directory for tables and plot data')
    p_bench.set_defaults(handler=cmd_benchmark)

    p_pred = sub.add_parser('predict', help='Assign new data with a saved model file')
    p_pred.add_argument('model_file', help='Model file written by fit')
    _add_data_args(p_pred)
    p_pred.add_argument('--out', help='Predictions CSV path')
    p_pred.set_defaults(handler=cmd_predict)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        return args.handler(args)
    except HddcError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"{args.command} rejected its input: {str(e)}")
        return InvalidInputError.exit_code


if __name__ == '__main__':
    sys.exit(main())
