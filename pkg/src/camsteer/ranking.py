"""Review-order ranking for validation images under a selected label.

Three strategies, selectable per query:

* ``accuracy``      - confidence toward the correct answer; lowest first.
* ``concentration`` - fraction of heatmap mass in the top cells; most
                      diffuse first.
* ``dependency``    - inverse-co-occurrence entanglement with other labels;
                      most entangled first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import CoOccurrenceMatrix, ImageRecord

INV_FREQ_EPS = 0.01  # stabilizer against division by zero in inverse frequency


class RankingMode(str, Enum):
    ACCURACY = "accuracy"
    CONCENTRATION = "concentration"
    DEPENDENCY = "dependency"


# ascending=True means "small score needs review first"
_ASCENDING = {
    RankingMode.ACCURACY: True,
    RankingMode.CONCENTRATION: True,
    RankingMode.DEPENDENCY: False,
}


@dataclass
class RankingScore:
    image_id: str
    label_index: int
    mode: RankingMode
    score: float
    rank: int = 0


def accuracy_deviation_score(probabilities: np.ndarray, truth: np.ndarray, label_index: int) -> float:
    """Confidence toward the correct answer for one label: p if positive, 1-p if not."""
    probabilities = np.asarray(probabilities, dtype=float)
    truth = np.asarray(truth)
    if not 0 <= label_index < len(probabilities):
        raise ValueError(f"label index {label_index} out of range")
    p = float(probabilities[label_index])
    return p if truth[label_index] == 1 else 1.0 - p


def concentration_score(values: np.ndarray, top_fraction: float = 0.05, *, degenerate: bool = False) -> float:
    """Share of total heatmap mass held by the largest ``top_fraction`` of cells.

    1.0 means all mass in the top cells (sharp focus); a value near
    ``top_fraction`` means the map is uniform. Degenerate (constant) maps
    rank as maximally diffuse: score = ``top_fraction``.
    """
    if not 0 < top_fraction < 1:
        raise ValueError("top_fraction must be in (0, 1)")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty heatmap")
    total = values.sum()
    if degenerate or total <= 0:
        return top_fraction
    n_top = math.ceil(top_fraction * values.size)
    top_sum = np.sort(values, axis=None)[-n_top:].sum()
    return float(top_sum / total)


def inverse_frequency(matrix: CoOccurrenceMatrix, c: int, j: int) -> float:
    """1 / (M[c][j] + 0.01); strictly decreasing in the co-occurrence count."""
    if c == j:
        raise ValueError("inverse frequency is undefined for a label with itself")
    return 1.0 / (matrix.M[c, j] + INV_FREQ_EPS)


def dependency_score(matrix: CoOccurrenceMatrix, c: int, threshold: int = 1) -> float:
    """Normalized inverse-frequency mass of labels co-occurring with ``c``.

    Partners whose co-occurrence count is below ``threshold`` contribute
    nothing to the numerator; the denominator sums inverse frequencies over
    every other label, so the score is 1 exactly when all of them qualify.
    """
    k = len(matrix.label_names)
    if k < 2:
        raise ValueError("dependency score needs at least 2 labels")
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    num = 0.0
    den = 0.0
    for j in range(k):
        if j == c:
            continue
        inv = inverse_frequency(matrix, c, j)
        den += inv
        if matrix.M[c, j] >= threshold:
            num += inv
    return num / den


def image_dependency_score(matrix: CoOccurrenceMatrix, item: ImageRecord, c: int,
                           threshold: int = 1) -> float:
    """Per-image lift of ``dependency_score``: numerator restricted to the
    qualifying partner labels actually present on the item."""
    k = len(matrix.label_names)
    if k < 2:
        raise ValueError("dependency score needs at least 2 labels")
    num = 0.0
    den = 0.0
    for j in range(k):
        if j == c:
            continue
        inv = inverse_frequency(matrix, c, j)
        den += inv
        if item.labels[j] == 1 and matrix.M[c, j] >= threshold:
            num += inv
    return num / den


def rank_images(scores: list[RankingScore], mode: RankingMode) -> list[RankingScore]:
    """Order scores into review priority; ties broken by image_id ascending."""
    mode = RankingMode(mode)
    if any(RankingMode(s.mode) is not mode for s in scores):
        raise ValueError("all scores must share the requested ranking mode")
    ascending = _ASCENDING[mode]
    ordered = sorted(scores, key=lambda s: (s.score if ascending else -s.score, s.image_id))
    return [
        RankingScore(image_id=s.image_id, label_index=s.label_index, mode=mode,
                     score=s.score, rank=i + 1)
        for i, s in enumerate(ordered)
    ]
