"""Target state representation, linear dynamics, and noise models.

The target is a cylinder moving on the ground plane.  Its state vector is
``(x, y, w, h, vx, vy)``: position and size in meters, velocity in meters
per frame.  Measurements observe ``(x, y, w, h)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STATE_DIM = 6
MEAS_DIM = 4

# State vector layout.
IX_X, IX_Y, IX_W, IX_H, IX_VX, IX_VY = range(STATE_DIM)


@dataclass(frozen=True)
class TargetState:
    """Named view of the 6-dim state vector."""

    x: float
    y: float
    w: float
    h: float
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("target state must be finite")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError("cylinder width and height must be positive")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h, self.vx, self.vy], dtype=float)

    @classmethod
    def from_vector(cls, vec) -> "TargetState":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (STATE_DIM,):
            raise ValueError(f"expected a {STATE_DIM}-vector, got shape {vec.shape}")
        return cls(*vec)


@dataclass
class Measurement:
    """Ground-plane cylinder observation with noise covariance and appearance.

    ``z`` is the observed ``(x, y, w, h)``, ``R`` its 4x4 covariance and
    ``embedding`` a unit-norm appearance feature vector.
    """

    z: np.ndarray
    R: np.ndarray
    embedding: np.ndarray
    frame: int = 0
    camera_id: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.embedding = np.asarray(self.embedding, dtype=float)
        if self.z.shape != (MEAS_DIM,) or not np.all(np.isfinite(self.z)):
            raise ValueError("z must be a finite 4-vector (x, y, w, h)")
        if self.z[2] <= 0.0 or self.z[3] <= 0.0:
            raise ValueError("measured width and height must be positive")
        if self.R.shape != (MEAS_DIM, MEAS_DIM) or not np.all(np.isfinite(self.R)):
            raise ValueError("R must be a finite 4x4 matrix")
        if not np.allclose(self.R, self.R.T, atol=1e-9):
            raise ValueError("R must be symmetric")
        norm = np.linalg.norm(self.embedding)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"embedding must be unit norm, got |e| = {norm}")

    @property
    def position(self) -> np.ndarray:
        return self.z[:2]


@dataclass(frozen=True)
class DynamicsModel:
    """Linear dynamics: transition A, output H, process noise Q."""

    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    dt: float = 1.0


@dataclass
class GaussianBelief:
    """Gaussian belief over a target state.

    ``mean`` follows the ``(x, y, w, h, vx, vy)`` layout; ``cov`` is the
    6x6 covariance.  After an update, ``cov`` already includes the
    propagation to the next frame, so :func:`predict` touches the mean only.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.mean.shape != (STATE_DIM,) or not np.all(np.isfinite(self.mean)):
            raise ValueError("mean must be a finite 6-vector")
        if self.cov.shape != (STATE_DIM, STATE_DIM) or not np.all(np.isfinite(self.cov)):
            raise ValueError("cov must be a finite 6x6 matrix")
        scale = max(1.0, float(np.abs(self.cov).max()))
        if not np.allclose(self.cov, self.cov.T, atol=1e-9 * scale):
            raise ValueError("cov must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() <= 1e-12:
            raise ValueError("cov must be positive definite")

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]


def make_dynamics(dt: float = 1.0, q_pos: float = 0.05, q_vel: float = 0.01,
                  q_size: float = 0.01) -> DynamicsModel:
    """Build the constant-velocity dynamics for the cylinder state.

    A moves (x, y) by (vx, vy) * dt and leaves (w, h, vx, vy) untouched;
    H selects (x, y, w, h); Q is diagonal with per-block noise levels.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if min(q_pos, q_vel, q_size) < 0.0:
        raise ValueError("process noise terms must be non-negative")
    A = np.eye(STATE_DIM)
    A[IX_X, IX_VX] = dt
    A[IX_Y, IX_VY] = dt
    H = np.zeros((MEAS_DIM, STATE_DIM))
    H[0, IX_X] = H[1, IX_Y] = H[2, IX_W] = H[3, IX_H] = 1.0
    Q = np.diag([q_pos, q_pos, q_size, q_size, q_vel, q_vel]).astype(float)
    return DynamicsModel(A=A, H=H, Q=Q, dt=dt)


def predict(belief: GaussianBelief, dyn: DynamicsModel) -> GaussianBelief:
    """Advance the belief mean one frame; covariance is left as is.

    The covariance of a belief produced by the consensus update is already
    the prediction covariance for the next frame.
    """
    return GaussianBelief(mean=dyn.A @ belief.mean, cov=belief.cov.copy())
