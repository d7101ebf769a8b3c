from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional

from src.state.shared_state import ConfusionMatrix, FitReport, SelectionReport

SELECTION_COLUMNS = ["model", "k", "t", "dims", "loglik", "nu", "bic", "status"]
PLOT_COLUMNS = ["x", "method", "y"]


def _format_float(value: Any, precision: int = 2, fallback: str = "n/a") -> str:
    try:
        return f"{float(value):.{precision}f}"
    except (TypeError, ValueError):
        return fallback


def format_dims(dims: Iterable[int]) -> str:
    return ",".join(str(d) for d in dims)


def fit_summary_line(report: FitReport) -> str:
    """model k loglik nu bic dims"""
    return "\t".join([
        report.model.name,
        str(report.params.k),
        repr(float(report.loglik)),
        str(report.nu),
        repr(float(report.bic)),
        format_dims(report.dims),
    ])


def selection_rows(report: SelectionReport) -> List[Dict[str, Any]]:
    rows = []
    for row in report.rows:
        rows.append({
            "model": row.model,
            "k": row.k,
            "t": "" if row.threshold is None else f"{row.threshold:g}",
            "dims": format_dims(row.dims),
            "loglik": "" if row.loglik is None else repr(row.loglik),
            "nu": "" if row.nu is None else row.nu,
            "bic": "" if row.bic is None else repr(row.bic),
            "status": row.status,
        })
    return rows


def confusion_rows(matrix: ConfusionMatrix) -> List[Dict[str, Any]]:
    rows = []
    for i, true_label in enumerate(matrix.true_labels):
        row = {"true": true_label}
        for j, pred_label in enumerate(matrix.pred_labels):
            row[f"pred_{pred_label}"] = int(matrix.counts[i, j])
        rows.append(row)
    return rows


def _markdown_table(rows: List[Dict[str, Any]], limit: Optional[int] = None) -> List[str]:
    if not rows:
        return ["_No rows._", ""]
    columns = list(rows[0].keys())
    lines = [
        "| " + " | ".join(columns) + " |",
        "|" + "|".join("---" for _ in columns) + "|",
    ]
    shown = rows if limit is None else rows[:limit]
    for row in shown:
        cells = [_format_float(v, 3) if isinstance(v, float) else str(v) for v in (row.get(c, "") for c in columns)]
        lines.append("| " + " | ".join(cells) + " |")
    if limit is not None and len(rows) > limit:
        lines.append(f"| ...and {len(rows) - limit} more rows |" + " |" * (len(columns) - 1))
    lines.append("")
    return lines


def build_benchmark_markdown_report(state: Dict[str, Any], timings: Optional[Dict[str, float]] = None) -> str:
    """Render a readable Markdown summary of a benchmark run."""
    generated_at = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    fits = state.get("fits") or []
    failed = sum(1 for f in fits if f.get("status") != "ok")

    lines: List[str] = [
        f"# Benchmark Report: {state.get('suite', 'unknown')}",
        "",
        f"**Generated:** {generated_at}",
        f"**Status:** {str(state.get('status', 'unknown')).upper()}",
        "",
        "| Setting | Value |",
        "|---------|-------|",
        f"| Seed | {state.get('seed')} |",
        f"| Replications | {state.get('replications')} |",
        f"| Restarts | {state.get('restarts')} |",
        f"| Quick Mode | {'Yes' if state.get('quick') else 'No'} |",
        f"| Datasets | {len(state.get('jobs') or [])} |",
        f"| Fits | {len(fits)} ({failed} failed) |",
        "",
    ]

    for name, rows in (state.get("tables") or {}).items():
        lines.extend([f"## {name}", ""])
        lines.extend(_markdown_table(rows, limit=40))

    plots = state.get("plots") or {}
    if plots:
        lines.extend(["## Plot Data", ""])
        for name, rows in plots.items():
            lines.append(f"- `{name}`: {len(rows)} points")
        lines.append("")

    if timings:
        lines.extend(["## Stage Timings", "", "| Stage | Seconds |", "|-------|---------|"])
        for stage, seconds in timings.items():
            lines.append(f"| {stage} | {seconds:.2f} |")
        lines.append("")

    errors = state.get("errors") or []
    if errors:
        lines.extend(["## Errors", ""])
        for error in errors[:10]:
            lines.append(f"- {error}")
        if len(errors) > 10:
            lines.append(f"- ...and {len(errors) - 10} more errors")
        lines.append("")

    return "\n".join(lines).rstrip() + "\n"
