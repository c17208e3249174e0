"""Synthetic world generation: trajectories, visibility, noisy detections.

Ground-truth targets move along piecewise-linear waypoint tracks.  Each
camera sees a convex ground-plane region, misses detections at a configured
rate, perturbs them with its measurement noise, and adds uniform clutter.
Detection streams are a pure function of (scenario, frame, camera, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .appearance import DEFAULT_EMBEDDING_DIM, random_embedding, synthetic_embedding
from .model import Measurement

_DETECTION_STREAM = 0xDE7EC7


@dataclass
class GroundTruthTrack:
    """Piecewise-linear trajectory with a presence window."""

    identity_seed: int
    waypoints: np.ndarray          # rows (frame, x, y), strictly increasing frames
    size: tuple[float, float] = (0.5, 1.7)
    presence: list[tuple[int, int]] | None = None

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 3:
            raise ValueError("waypoints must be rows of (frame, x, y)")
        frames = self.waypoints[:, 0]
        if not np.all(np.diff(frames) > 0):
            raise ValueError("waypoint frames must be strictly increasing")
        if self.presence is None:
            self.presence = [(int(frames[0]), int(frames[-1]))]

    def present(self, frame: int) -> bool:
        return any(lo <= frame <= hi for lo, hi in self.presence)

    def position(self, frame: int) -> np.ndarray:
        frames = self.waypoints[:, 0]
        x = np.interp(frame, frames, self.waypoints[:, 1])
        y = np.interp(frame, frames, self.waypoints[:, 2])
        return np.array([x, y])


def _ccw(polygon: np.ndarray) -> np.ndarray:
    area = 0.0
    for i in range(len(polygon)):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % len(polygon)]
        area += x0 * y1 - x1 * y0
    return polygon if area >= 0 else polygon[::-1].copy()


def polygon_contains(polygon: np.ndarray, point: np.ndarray, tol: float = 1e-9) -> bool:
    """Point-in-convex-polygon test; polygon vertices must be CCW."""
    for i in range(len(polygon)):
        a = polygon[i]
        b = polygon[(i + 1) % len(polygon)]
        cross = (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0])
        if cross < -tol:
            return False
    return True


@dataclass
class CameraModel:
    """Field of view, measurement noise, and detector failure model."""

    camera_id: int
    fov: np.ndarray                 # convex ground-plane polygon, (K, 2)
    detection_noise: np.ndarray     # 4x4 covariance, doubles as the reported R
    miss_probability: float = 0.0
    false_positive_rate: float = 0.0
    homography: np.ndarray | None = None

    def __post_init__(self):
        self.fov = _ccw(np.asarray(self.fov, dtype=float))
        self.detection_noise = np.asarray(self.detection_noise, dtype=float)
        if self.detection_noise.shape != (4, 4):
            raise ValueError("detection noise must be a 4x4 covariance")
        if not 0.0 <= self.miss_probability <= 1.0:
            raise ValueError("miss probability must be in [0, 1]")
        if self.false_positive_rate < 0.0:
            raise ValueError("false positive rate must be non-negative")
        if self.homography is not None:
            self.homography = np.asarray(self.homography, dtype=float)
            if abs(np.linalg.det(self.homography)) < 1e-12:
                raise ValueError("homography must be invertible")

    def sees(self, point: np.ndarray) -> bool:
        return polygon_contains(self.fov, point)


@dataclass
class Scenario:
    tracks: list[GroundTruthTrack]
    cameras: list[CameraModel]
    frame_count: int
    embedding_noise: float = 0.0
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    seed: int = 0

    def camera(self, camera_id: int) -> CameraModel:
        return next(c for c in self.cameras if c.camera_id == camera_id)

    def visible_truth(self, frame: int, camera_id: int) -> list[tuple[int, float, float]]:
        """Ground truth inside the camera's view: (identity, x, y) rows."""
        cam = self.camera(camera_id)
        rows = []
        for track in self.tracks:
            if not track.present(frame):
                continue
            pos = track.position(frame)
            if cam.sees(pos):
                rows.append((track.identity_seed, float(pos[0]), float(pos[1])))
        return rows


def detection_rng(scenario: Scenario, frame: int, camera_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        entropy=(_DETECTION_STREAM, scenario.seed, frame, camera_id)))


def _sample_noise(cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if not cov.any():
        return np.zeros(len(cov))
    return np.linalg.cholesky(cov) @ rng.standard_normal(len(cov))


def _uniform_in_polygon(polygon: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lo = polygon.min(axis=0)
    hi = polygon.max(axis=0)
    while True:
        point = lo + rng.random(2) * (hi - lo)
        if polygon_contains(polygon, point):
            return point


def generate_detections(scenario: Scenario, frame: int, camera_id: int,
                        rng: np.random.Generator | None = None) -> list[Measurement]:
    """Noisy detections one camera produces at one frame.

    Visible targets are detected with probability 1 - miss_probability and
    measured with the camera's noise; Poisson clutter with fresh random
    embeddings is added on top.
    """
    if frame >= scenario.frame_count:
        raise ValueError("frame beyond the scenario horizon")
    if rng is None:
        rng = detection_rng(scenario, frame, camera_id)
    cam = scenario.camera(camera_id)
    detections: list[Measurement] = []
    for track in scenario.tracks:
        if not track.present(frame):
            continue
        pos = track.position(frame)
        if not cam.sees(pos):
            continue
        if cam.miss_probability > 0.0 and rng.random() < cam.miss_probability:
            continue
        truth = np.array([pos[0], pos[1], track.size[0], track.size[1]])
        z = truth + _sample_noise(cam.detection_noise, rng)
        z[2] = max(z[2], 1e-6)
        z[3] = max(z[3], 1e-6)
        embedding = synthetic_embedding(track.identity_seed, scenario.embedding_noise,
                                        rng, scenario.embedding_dim)
        detections.append(Measurement(z=z, R=cam.detection_noise.copy(),
                                      embedding=embedding, frame=frame,
                                      camera_id=camera_id))
    if cam.false_positive_rate > 0.0:
        for _ in range(rng.poisson(cam.false_positive_rate)):
            point = _uniform_in_polygon(cam.fov, rng)
            z = np.array([point[0], point[1],
                          0.3 + 0.4 * rng.random(), 1.2 + 0.8 * rng.random()])
            detections.append(Measurement(z=z, R=cam.detection_noise.copy(),
                                          embedding=random_embedding(rng, scenario.embedding_dim),
                                          frame=frame, camera_id=camera_id))
    return detections


def project_to_ground(bbox, homography: np.ndarray) -> np.ndarray:
    """Map an image bounding box (u, v, w_px, h_px) to a ground cylinder.

    The box bottom-center is projected through the homography to give
    (x, y); the projected bottom width gives w, and h scales w by the
    pixel aspect ratio.
    """
    u, v, w_px, h_px = (float(b) for b in bbox)
    if w_px <= 0.0 or h_px <= 0.0:
        raise ValueError("bounding box width and height must be positive")

    def apply(px: float, py: float) -> np.ndarray:
        q = np.asarray(homography, dtype=float) @ np.array([px, py, 1.0])
        if abs(q[2]) < 1e-12:
            raise ValueError("bounding box bottom maps to a point at infinity")
        return q[:2] / q[2]

    bottom = v + h_px
    center = apply(u + w_px / 2.0, bottom)
    left = apply(u, bottom)
    right = apply(u + w_px, bottom)
    width = float(np.linalg.norm(right - left))
    height = width * (h_px / w_px)
    return np.array([center[0], center[1], width, height])


def _corner_fovs(camera_count: int, arena: float) -> list[np.ndarray]:
    """Overlapping rectangles anchored at the arena corners, all covering
    the center region."""
    span = arena * 0.65
    corners = [(0.0, 0.0), (arena, 0.0), (arena, arena), (0.0, arena)]
    fovs = []
    for idx in range(camera_count):
        cx, cy = corners[idx % 4]
        x0, x1 = (0.0, span) if cx == 0.0 else (arena - span, arena)
        y0, y1 = (0.0, span) if cy == 0.0 else (arena - span, arena)
        fovs.append(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))
    return fovs


def crossing_scenario(camera_count: int, target_count: int, seed: int, *,
                      arena: float = 20.0, duration: int = 70,
                      stagger: int = 4, frame_count: int | None = None,
                      detection_sigma: float = 0.08,
                      size_sigma: float = 0.02,
                      miss_probability: float = 0.0,
                      false_positive_rate: float = 0.0,
                      embedding_noise: float = 0.0,
                      embedding_dim: int = DEFAULT_EMBEDDING_DIM) -> Scenario:
    """Targets walking straight lines that intersect near the arena center.

    Start frames are staggered so the crossings pile up around the middle
    of the run; camera views overlap there, which makes the scenario a
    stress test for association and identity handover.
    """
    if target_count < 2:
        raise ValueError("a crossing scenario needs at least two targets")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0xC505, seed)))
    center = np.array([arena / 2.0, arena / 2.0])
    radius = arena * 0.40
    tracks = []
    for idx in range(target_count):
        angle = 2.0 * np.pi * idx / target_count + rng.uniform(-0.15, 0.15)
        start_pos = center + radius * np.array([np.cos(angle), np.sin(angle)])
        end_pos = center - radius * np.array([np.cos(angle), np.sin(angle)])
        start_frame = idx * stagger
        end_frame = start_frame + duration
        waypoints = np.array([
            [start_frame, start_pos[0], start_pos[1]],
            [end_frame, end_pos[0], end_pos[1]],
        ])
        tracks.append(GroundTruthTrack(
            identity_seed=seed * 4096 + idx,
            waypoints=waypoints,
            size=(0.5 + rng.uniform(-0.05, 0.05), 1.7 + rng.uniform(-0.1, 0.1)),
        ))
    noise = np.diag([detection_sigma ** 2, detection_sigma ** 2,
                     size_sigma ** 2, size_sigma ** 2])
    cameras = [
        CameraModel(camera_id=cid, fov=fov, detection_noise=noise.copy(),
                    miss_probability=miss_probability,
                    false_positive_rate=false_positive_rate)
        for cid, fov in enumerate(_corner_fovs(camera_count, arena))
    ]
    if frame_count is None:
        frame_count = (target_count - 1) * stagger + duration + 1
    return Scenario(tracks=tracks, cameras=cameras, frame_count=frame_count,
                    embedding_noise=embedding_noise, embedding_dim=embedding_dim,
                    seed=seed)
