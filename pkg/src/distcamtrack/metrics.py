"""CLEAR MOT and identification metrics on ground-plane tracks.

Per-frame matching is a gated minimum-cost assignment on ground-plane
distance, keeping last frame's pairs when still in range.  Identification
metrics come from one global truth-to-hypothesis identity assignment that
maximizes the number of frames the paired identities coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import solve_assignment


@dataclass
class FrameAnnotations:
    """Identities and ground-plane positions at one frame."""

    frame: int
    items: list[tuple[Hashable, float, float]] = field(default_factory=list)

    def __post_init__(self):
        ids = [identity for identity, _, _ in self.items]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate identities in frame {self.frame}")


@dataclass
class MotReport:
    mota: float
    motp: float
    idp: float
    idr: float
    idf1: float
    fp: float
    fn: float
    idsw: float


def _positions(annotations: FrameAnnotations) -> dict[Hashable, np.ndarray]:
    return {identity: np.array([x, y]) for identity, x, y in annotations.items}


def evaluate_sequence(truth: Sequence[FrameAnnotations],
                      hypothesis: Sequence[FrameAnnotations],
                      match_radius: float = 1.0) -> MotReport:
    """Score a hypothesis track stream against ground truth."""
    if len(truth) != len(hypothesis):
        raise ValueError("truth and hypothesis must cover the same frames")

    total_gt = 0
    total_hyp = 0
    fp = fn = idsw = 0
    matched_dist_sum = 0.0
    matched_count = 0
    overlap: dict[tuple[Hashable, Hashable], int] = {}
    prev_match: dict[Hashable, Hashable] = {}
    last_matched_hyp: dict[Hashable, Hashable] = {}

    for truth_frame, hyp_frame in zip(truth, hypothesis):
        gt = _positions(truth_frame)
        hyp = _positions(hyp_frame)
        total_gt += len(gt)
        total_hyp += len(hyp)

        # identity overlap counts ignore per-frame exclusivity; the global
        # assignment enforces one hypothesis identity per truth identity
        for t_id, t_pos in gt.items():
            for h_id, h_pos in hyp.items():
                if np.linalg.norm(t_pos - h_pos) <= match_radius:
                    overlap[(t_id, h_id)] = overlap.get((t_id, h_id), 0) + 1

        matches: dict[Hashable, Hashable] = {}
        for t_id, h_id in prev_match.items():
            if t_id in gt and h_id in hyp and h_id not in matches.values():
                if np.linalg.norm(gt[t_id] - hyp[h_id]) <= match_radius:
                    matches[t_id] = h_id
        free_t = sorted((t for t in gt if t not in matches), key=str)
        free_h = sorted((h for h in hyp if h not in matches.values()), key=str)
        if free_t and free_h:
            cost = np.zeros((len(free_t), len(free_h)))
            admissible = np.zeros_like(cost, dtype=bool)
            for r, t_id in enumerate(free_t):
                for c, h_id in enumerate(free_h):
                    d = float(np.linalg.norm(gt[t_id] - hyp[h_id]))
                    cost[r, c] = d
                    admissible[r, c] = d <= match_radius
            pairs, _, _ = solve_assignment(cost, admissible)
            for r, c in pairs:
                matches[free_t[r]] = free_h[c]

        fp += len(hyp) - len(matches)
        fn += len(gt) - len(matches)
        for t_id, h_id in matches.items():
            matched_dist_sum += float(np.linalg.norm(gt[t_id] - hyp[h_id]))
            matched_count += 1
            previous = last_matched_hyp.get(t_id)
            if previous is not None and previous != h_id:
                idsw += 1
            last_matched_hyp[t_id] = h_id
        prev_match = matches

    idtp = _best_identity_overlap(overlap)
    idp = _ratio(idtp, total_hyp, empty_value=1.0 if total_gt == 0 else 0.0)
    idr = _ratio(idtp, total_gt, empty_value=1.0 if total_hyp == 0 else 0.0)
    idf1 = (2.0 * idtp / (total_gt + total_hyp)) if total_gt + total_hyp else 1.0

    if total_gt:
        mota = 1.0 - (fn + fp + idsw) / total_gt
    else:
        mota = 1.0 if fp + idsw == 0 else float("-inf")
    motp = matched_dist_sum / matched_count if matched_count else 0.0
    return MotReport(mota=mota, motp=motp, idp=idp, idr=idr, idf1=idf1,
                     fp=fp, fn=fn, idsw=idsw)


def _ratio(num: float, den: float, empty_value: float) -> float:
    return num / den if den else empty_value


def _best_identity_overlap(overlap: dict[tuple[Hashable, Hashable], int]) -> int:
    """Maximum total per-frame coincidence over one-to-one identity pairings.

    Identities may stay unmatched; with non-negative gains a complete
    assignment on the negated gain matrix attains the same maximum.
    """
    if not overlap:
        return 0
    t_ids = sorted({t for t, _ in overlap}, key=str)
    h_ids = sorted({h for _, h in overlap}, key=str)
    gain = np.zeros((len(t_ids), len(h_ids)))
    for (t, h), count in overlap.items():
        gain[t_ids.index(t), h_ids.index(h)] = count
    rows, cols = linear_sum_assignment(-gain)
    return int(gain[rows, cols].sum())


def aggregate_across_cameras(reports: Sequence[MotReport]) -> MotReport:
    """Componentwise median; even counts average the two central values."""
    if not reports:
        raise ValueError("cannot aggregate an empty report collection")
    fields_ = ("mota", "motp", "idp", "idr", "idf1", "fp", "fn", "idsw")
    values = {name: float(np.median([getattr(r, name) for r in reports]))
              for name in fields_}
    return MotReport(**values)
