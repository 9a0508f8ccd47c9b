"""Optimal bipartite assignment maximizing total score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class Matching:
    """One-to-one row/col pairing with the summed matched score.

    Pairs are sorted by row; zero-score pairs are never present.
    """

    pairs: list[tuple[int, int]]
    total: float


def solve_max_assignment(scores: np.ndarray) -> Matching:
    """Solve the rectangular max-score assignment problem.

    Accepts a (rows, cols) matrix of scores in [0, 1]. After solving,
    pairs whose score is exactly zero are dropped: a zero-score "match"
    is no match, so those rows/cols count as unmatched. Raises ValueError
    on non-finite or out-of-range entries.
    """
    m = np.asarray(scores, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("score matrix must be two-dimensional")
    if m.size:
        if not np.isfinite(m).all():
            raise ValueError("score matrix entries must be finite")
        if (m < 0.0).any() or (m > 1.0).any():
            raise ValueError("score matrix entries must lie in [0, 1]")
    if m.shape[0] == 0 or m.shape[1] == 0:
        return Matching([], 0.0)
    rows, cols = linear_sum_assignment(m, maximize=True)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if m[r, c] > 0.0]
    total = math.fsum(float(m[r, c]) for r, c in pairs)
    return Matching(pairs, total)
