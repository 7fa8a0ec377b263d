"""Adaptive borrowing of external group-membership information.

Group-membership probabilities from a model trained on external data are
convexly blended with internally trained ones; the blend weight alpha is
picked on a dense grid by predictive performance on the internal sample
(Brier score minimized, or one-vs-rest multiclass AUC maximized). Ties go
to the smallest alpha, so borrowing never happens when it buys nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


class DimensionMismatch(Exception):
    pass


class SingleClassLabels(Exception):
    pass


@dataclass
class BlendedMembership:
    alpha: float
    h_internal: np.ndarray
    h_external: np.ndarray
    h_star: np.ndarray  # alpha * external + (1 - alpha) * internal
    metric_used: str  # "brier" | "auc"
    metric_curve: list[tuple[float, float]]  # (alpha, score) over the grid

    def curve_csv_rows(self) -> list[list[str]]:
        rows = [["alpha", "score"]]
        rows += [[repr(a), repr(s)] for a, s in self.metric_curve]
        return rows


def _label_columns(labels, classes) -> np.ndarray:
    index = {g: j for j, g in enumerate(classes)}
    try:
        return np.array([index[g] for g in labels], dtype=int)
    except KeyError as err:
        raise DimensionMismatch(f"label {err.args[0]} not among the model classes") from None


def brier_score(probs, labels, classes) -> float:
    """Mean squared distance between probability rows and one-hot labels.

    Ranges over [0, 2]; 0 for perfect one-hot predictions, 2 for confidently
    wrong ones. Lower is better.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] != len(labels):
        raise DimensionMismatch("one probability row per label required")
    if probs.shape[1] != len(classes):
        raise DimensionMismatch("one probability column per class required")
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(labels)), _label_columns(labels, classes)] = 1.0
    return float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))


def _binary_auc(scores, positives) -> float:
    # rank-based Mann-Whitney; average ranks make all-ties come out at 0.5 exactly
    ranks = rankdata(scores)
    n_pos = int(np.sum(positives))
    n_neg = len(scores) - n_pos
    rank_sum = float(np.sum(ranks[positives]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def multiclass_auc(probs, labels, classes) -> float:
    """Unweighted mean of one-vs-rest AUCs over the classes present in labels."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] != len(labels):
        raise DimensionMismatch("one probability row per label required")
    cols = _label_columns(labels, classes)
    present = sorted(set(cols))
    if len(present) < 2:
        raise SingleClassLabels("multiclass AUC needs at least two label classes")
    aucs = [_binary_auc(probs[:, j], cols == j) for j in present]
    return float(np.mean(aucs))


def alpha_grid(grid_step: float) -> np.ndarray:
    points = round(1.0 / grid_step)
    if abs(points * grid_step - 1.0) > 1e-9:
        raise ValueError("grid_step must divide 1 evenly")
    return np.linspace(0.0, 1.0, points + 1)


def select_alpha(h_external, h_internal, labels, classes, metric="brier",
                 grid_step=0.001) -> BlendedMembership:
    """Pick the borrowing weight on the grid {0, grid_step, ..., 1}.

    Evaluates the chosen metric at every grid point on the blend
    alpha * h_external + (1 - alpha) * h_internal and keeps the best score,
    breaking ties toward the smallest alpha.
    """
    h_external = np.asarray(h_external, dtype=np.float64)
    h_internal = np.asarray(h_internal, dtype=np.float64)
    if h_external.shape != h_internal.shape:
        raise DimensionMismatch("blend inputs must have identical shapes")
    if metric == "brier":
        score_fn, better = brier_score, lambda a, b: a < b
    elif metric == "auc":
        score_fn, better = multiclass_auc, lambda a, b: a > b
    else:
        raise ValueError(f"unknown borrowing metric: {metric!r}")

    curve = []
    best_alpha, best_score = None, None
    for alpha in alpha_grid(grid_step):
        blended = alpha * h_external + (1.0 - alpha) * h_internal
        score = score_fn(blended, labels, classes)
        curve.append((float(alpha), score))
        if best_score is None or better(score, best_score):
            best_alpha, best_score = float(alpha), score

    h_star = best_alpha * h_external + (1.0 - best_alpha) * h_internal
    return BlendedMembership(
        alpha=best_alpha,
        h_internal=h_internal,
        h_external=h_external,
        h_star=h_star,
        metric_used=metric,
        metric_curve=curve,
    )
