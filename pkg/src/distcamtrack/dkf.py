"""Information-form measurement encoding and the Kalman-consensus update.

Each camera encodes its measurement as an information pair
``u = H^T R^-1 z``, ``U = H^T R^-1 H``.  Pairs received from neighbors are
fused by plain addition, and the state update adds a consensus term that
pulls the camera's prediction toward its neighbors' predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .model import MEAS_DIM, STATE_DIM, DynamicsModel, GaussianBelief, Measurement


class NotPositiveDefiniteError(ValueError):
    """A matrix that must be symmetric positive definite is not."""


def spd_solve(mat: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    """Solve mat @ x = rhs via Cholesky; raise instead of pseudo-inverting."""
    try:
        factor = sla.cho_factor(mat, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from exc
    return sla.cho_solve(factor, rhs, check_finite=False)


def spd_inv(mat: np.ndarray, what: str) -> np.ndarray:
    return spd_solve(mat, np.eye(mat.shape[0]), what)


@dataclass
class InformationPair:
    """A measurement in additive information form."""

    u: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        if self.u.shape != (STATE_DIM,) or not np.all(np.isfinite(self.u)):
            raise ValueError("u must be a finite 6-vector")
        if self.U.shape != (STATE_DIM, STATE_DIM) or not np.all(np.isfinite(self.U)):
            raise ValueError("U must be a finite 6x6 matrix")
        scale = max(1.0, float(np.abs(self.U).max()))
        if not np.allclose(self.U, self.U.T, atol=1e-9 * scale):
            raise ValueError("U must be symmetric")


def zero_pair() -> InformationPair:
    """The information-form encoding of "no measurement"."""
    return InformationPair(u=np.zeros(STATE_DIM), U=np.zeros((STATE_DIM, STATE_DIM)))


@dataclass
class ConsensusInput:
    """Everything one camera fuses in a cycle for a single tracker.

    A camera that found no measurement for the tracker contributes the zero
    pair but still shares its prediction, so pairs and predictions always
    come in equal numbers.
    """

    own_pair: InformationPair
    neighbor_pairs: Sequence[InformationPair] = field(default_factory=tuple)
    own_prediction: np.ndarray | None = None
    neighbor_predictions: Sequence[np.ndarray] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.neighbor_pairs) != len(self.neighbor_predictions):
            raise ValueError("each neighbor must contribute a pair and a prediction")


def encode_measurement(meas: Measurement, H: np.ndarray) -> InformationPair:
    """Re-express a measurement as (H^T R^-1 z, H^T R^-1 H)."""
    stacked = np.column_stack([meas.z, H])
    sol = spd_solve(meas.R, stacked, "measurement covariance R")
    u = H.T @ sol[:, 0]
    U = H.T @ sol[:, 1:]
    return InformationPair(u=u, U=0.5 * (U + U.T))


def fuse(inp: ConsensusInput) -> tuple[np.ndarray, np.ndarray]:
    """Sum the camera's own information pair with the received ones."""
    y = inp.own_pair.u.copy()
    S = inp.own_pair.U.copy()
    for pair in inp.neighbor_pairs:
        y += pair.u
        S += pair.U
    return y, S


def consensus_update(belief: GaussianBelief, inp: ConsensusInput,
                     dyn: DynamicsModel) -> GaussianBelief:
    """One Kalman-consensus cycle for a single tracker at a single camera.

    ``belief`` carries the prediction pair (x_bar, P).  The returned belief
    holds the corrected mean and the covariance already propagated to the
    next frame, ``A M A^T + Q`` with ``M = (P^-1 + S)^-1``.
    """
    xbar = belief.mean
    y, S = fuse(inp)
    P_inv = spd_inv(belief.cov, "prior covariance P")
    M = spd_inv(P_inv + S, "fused information matrix P^-1 + S")
    M = 0.5 * (M + M.T)
    gamma = 1.0 / (np.linalg.norm(M, "fro") + 1.0)
    disagreement = np.zeros(STATE_DIM)
    for xj in inp.neighbor_predictions:
        disagreement += np.asarray(xj, dtype=float) - xbar
    mean = xbar + M @ (y - S @ xbar) + gamma * (M @ disagreement)
    cov = dyn.A @ M @ dyn.A.T + dyn.Q
    return GaussianBelief(mean=mean, cov=0.5 * (cov + cov.T))
