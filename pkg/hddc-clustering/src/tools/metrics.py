"""Clustering evaluation against ground-truth labels."""
import itertools
import logging
from typing import Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.errors import InvalidInputError
from src.state.shared_state import ConfusionMatrix, MixtureParams, RecognitionResult

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 8


def _encode(true_labels, pred_labels) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    truth = np.asarray(true_labels)
    pred = np.asarray(pred_labels)
    if truth.ndim != 1 or pred.ndim != 1 or truth.shape[0] != pred.shape[0]:
        raise InvalidInputError(f"label vectors differ in length ({truth.shape} vs {pred.shape})")
    if truth.shape[0] == 0:
        raise InvalidInputError("label vectors are empty")
    true_values, true_codes = np.unique(truth, return_inverse=True)
    pred_values, pred_codes = np.unique(pred, return_inverse=True)
    return true_values, true_codes, pred_values, pred_codes


def _counts(true_codes, pred_codes, k_true, k_pred) -> np.ndarray:
    counts = np.zeros((k_true, k_pred), dtype=int)
    np.add.at(counts, (true_codes, pred_codes), 1)
    return counts


def confusion_matrix(true_labels, pred_labels) -> ConfusionMatrix:
    true_values, true_codes, pred_values, pred_codes = _encode(true_labels, pred_labels)
    counts = _counts(true_codes, pred_codes, len(true_values), len(pred_values))
    return ConfusionMatrix(counts=counts, true_labels=true_values.tolist(), pred_labels=pred_values.tolist())


def _exhaustive(counts: np.ndarray):
    """Best injection of the smaller label set into the larger one."""
    k_true, k_pred = counts.shape
    best_score, best_pairs = -1, []
    if k_pred <= k_true:
        for targets in itertools.permutations(range(k_true), k_pred):
            score = sum(counts[t, j] for j, t in enumerate(targets))
            if score > best_score:
                best_score, best_pairs = score, [(t, j) for j, t in enumerate(targets)]
    else:
        for sources in itertools.permutations(range(k_pred), k_true):
            score = sum(counts[i, s] for i, s in enumerate(sources))
            if score > best_score:
                best_score, best_pairs = score, [(i, s) for i, s in enumerate(sources)]
    return int(best_score), best_pairs


def _assignment(counts: np.ndarray):
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return int(counts[rows, cols].sum()), list(zip(rows.tolist(), cols.tolist()))


def recognition_rate(true_labels, pred_labels, method: str = "auto") -> RecognitionResult:
    """Accuracy maximized over matchings of predicted clusters to true classes.

    Unmatched clusters count as errors when the label sets differ in size.
    """
    true_values, true_codes, pred_values, pred_codes = _encode(true_labels, pred_labels)
    counts = _counts(true_codes, pred_codes, len(true_values), len(pred_values))
    if method == "auto":
        method = "exhaustive" if max(counts.shape) <= EXHAUSTIVE_LIMIT else "assignment"
    if method == "exhaustive":
        correct, pairs = _exhaustive(counts)
    elif method == "assignment":
        correct, pairs = _assignment(counts)
    else:
        raise InvalidInputError(f"unknown matching method {method!r}")

    matching = {pred_values[j].item(): true_values[t].item() for t, j in pairs}
    n = int(true_codes.shape[0])
    return RecognitionResult(rate=correct / n, matching=matching, correct=correct, n=n)


def condition_ratio(params: MixtureParams, component: int) -> float:
    return float(params.a[component][0] / params.b[component])


def covariance_condition_number(covariance: np.ndarray) -> float:
    """Largest over smallest eigenvalue; inf for singular matrices."""
    values = np.linalg.eigvalsh(np.asarray(covariance, dtype=float))
    smallest = float(values[0])
    if smallest <= 0.0:
        return float("inf")
    return float(values[-1] / smallest)
