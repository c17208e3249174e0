"""Local data association: gated Mahalanobis geometry times gallery appearance.

Each (measurement, tracker) pair gets a geometric score (scaled Mahalanobis
distance on ground-plane position, gated at ``tau``) and an appearance
score (minimum cosine distance against the tracker gallery).  Admissible
pairs compete in a one-to-one minimum-cost assignment on the product of
both scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .appearance import Gallery
from .model import GaussianBelief, Measurement

# Large finite placeholder for gated pairs; assumes real costs stay far below.
GATED_COST = 1e9

# Deterministic tie-breaks: prefer smaller distance, then earlier tracker column.
_TIE_DISTANCE = 1e-12
_TIE_COLUMN = 1e-15


@dataclass(frozen=True)
class AssociationCandidate:
    measurement_index: int
    tracker_id: Hashable
    geometric: float
    appearance: float

    @property
    def combined(self) -> float:
        return self.geometric * self.appearance


@dataclass
class AssociationResult:
    matches: list[tuple[int, Hashable]]
    unmatched_measurements: list[int]
    unmatched_trackers: list[Hashable]


def mahalanobis(meas: Measurement, prediction: GaussianBelief) -> float:
    """Position Mahalanobis distance under V = P_xy + R_xy."""
    V = prediction.cov[:2, :2] + meas.R[:2, :2]
    diff = meas.z[:2] - prediction.mean[:2]
    sq = float(diff @ np.linalg.solve(V, diff))
    return float(np.sqrt(max(sq, 0.0)))


def geometric_score(d: float, alpha: float, tau: float) -> float:
    """d / alpha below the gate, exactly 1 at or beyond it."""
    if alpha <= 0.0 or tau <= 0.0:
        raise ValueError("alpha and tau must be positive")
    return d / alpha if d < tau else 1.0


def solve_assignment(cost: np.ndarray, admissible: np.ndarray
                     ) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Max-cardinality, minimum-cost one-to-one assignment over admissible pairs."""
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0 or not admissible.any():
        return [], list(range(n_rows)), list(range(n_cols))
    filled = np.where(admissible, cost, GATED_COST)
    rows, cols = linear_sum_assignment(filled)
    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if admissible[r, c]]
    matched_rows = {r for r, _ in matches}
    matched_cols = {c for _, c in matches}
    unmatched_rows = [r for r in range(n_rows) if r not in matched_rows]
    unmatched_cols = [c for c in range(n_cols) if c not in matched_cols]
    return matches, unmatched_rows, unmatched_cols


def associate(measurements: Sequence[Measurement],
              trackers: Sequence[tuple[Hashable, GaussianBelief, Gallery | None]],
              alpha: float, tau: float) -> AssociationResult:
    """Match measurements to trackers on the product of both scores.

    ``trackers`` rows are (tracker_id, prediction, gallery).  A missing or
    empty gallery scores a neutral 1.0, so matching degrades to geometry
    only.  Pairs at or beyond the ``tau`` gate are excluded outright.
    """
    n_m, n_t = len(measurements), len(trackers)
    cost = np.zeros((n_m, n_t))
    admissible = np.zeros((n_m, n_t), dtype=bool)
    for j, meas in enumerate(measurements):
        for i, (_, prediction, gallery) in enumerate(trackers):
            d = mahalanobis(meas, prediction)
            if d >= tau:
                continue
            s_d = geometric_score(d, alpha, tau)
            s_a = 1.0 if gallery is None or len(gallery) == 0 else gallery.similarity(meas.embedding)
            admissible[j, i] = True
            cost[j, i] = s_d * s_a + _TIE_DISTANCE * d + _TIE_COLUMN * i
    matches, unmatched_m, unmatched_t = solve_assignment(cost, admissible)
    ids = [tid for tid, _, _ in trackers]
    return AssociationResult(
        matches=[(j, ids[i]) for j, i in sorted(matches)],
        unmatched_measurements=unmatched_m,
        unmatched_trackers=[ids[i] for i in unmatched_t],
    )
