"""Simulated synchronous camera network: topology, exchange, bandwidth.

Every camera composes exactly one message per cycle.  Messages carry one
51-element wire record per active tracker (2 id + 6 prediction + 6
information vector + 36 information matrix + 1 drop counter) plus, for
freshly created trackers, a one-off appearance attachment of two
embedding vectors.  Delivery is simultaneous along the adjacency graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Sequence

import numpy as np

from .model import STATE_DIM
from .tracker_manager import TrackerId

WIRE_ELEMENT_COUNT = 51
DEFAULT_ELEMENT_BYTES = 16

TOPOLOGY_KINDS = ("complete", "ring", "chain", "disconnected")


class ContractViolation(RuntimeError):
    """A camera broke the one-message-per-cycle exchange contract."""


@dataclass(frozen=True)
class TopologyGraph:
    camera_count: int
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (self.camera_count, self.camera_count):
            raise ValueError("adjacency shape must match camera count")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("self-loops are not allowed")
        object.__setattr__(self, "adjacency", adj)

    def neighbors(self, camera_id: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[camera_id])]

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    def diameter(self) -> int:
        """Longest shortest path; raises if the graph is disconnected."""
        n = self.camera_count
        dist = np.where(self.adjacency, 1, np.inf)
        np.fill_diagonal(dist, 0)
        for k in range(n):
            dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
        if np.isinf(dist).any():
            raise ValueError("graph is disconnected")
        return int(dist.max())


def ring_orderings(camera_count: int) -> list[tuple[int, ...]]:
    """Distinct cyclic camera orderings, rotation- and reflection-free."""
    if camera_count < 3:
        return [tuple(range(camera_count))]
    return sorted(
        (0,) + perm
        for perm in permutations(range(1, camera_count))
        if perm[0] < perm[-1]
    )


def chain_orderings(camera_count: int) -> list[tuple[int, ...]]:
    """Distinct path camera orderings, reflection-free."""
    if camera_count < 2:
        return [tuple(range(camera_count))]
    return sorted(perm for perm in permutations(range(camera_count))
                  if perm[0] < perm[-1])


def build_topology(kind: str, camera_count: int, variant: int = 0) -> TopologyGraph:
    """Build one of the supported topologies; variant picks an ordering."""
    if camera_count < 1:
        raise ValueError("camera_count must be at least 1")
    adj = np.zeros((camera_count, camera_count), dtype=bool)
    if kind == "complete":
        _pick_variant([tuple(range(camera_count))], variant, kind)
        adj[:] = ~np.eye(camera_count, dtype=bool)
    elif kind == "disconnected":
        _pick_variant([tuple(range(camera_count))], variant, kind)
    elif kind == "ring":
        order = _pick_variant(ring_orderings(camera_count), variant, kind)
        for a, b in zip(order, order[1:]):
            adj[a, b] = adj[b, a] = True
        if camera_count > 2:
            adj[order[0], order[-1]] = adj[order[-1], order[0]] = True
    elif kind == "chain":
        order = _pick_variant(chain_orderings(camera_count), variant, kind)
        for a, b in zip(order, order[1:]):
            adj[a, b] = adj[b, a] = True
    else:
        raise ValueError(f"unknown topology kind: {kind!r}")
    return TopologyGraph(camera_count=camera_count, adjacency=adj)


def _pick_variant(orderings: list[tuple[int, ...]], variant: int, kind: str
                  ) -> tuple[int, ...]:
    if not 0 <= variant < len(orderings):
        raise ValueError(
            f"{kind} topology has {len(orderings)} variants, got variant {variant}")
    return orderings[variant]


def variant_count(kind: str, camera_count: int) -> int:
    if kind == "ring":
        return len(ring_orderings(camera_count))
    if kind == "chain":
        return len(chain_orderings(camera_count))
    if kind in ("complete", "disconnected"):
        return 1
    raise ValueError(f"unknown topology kind: {kind!r}")


@dataclass
class TrackerWire:
    """Per-tracker, per-cycle record: 51 wire elements in total."""

    id: TrackerId
    prediction: np.ndarray
    u: np.ndarray
    U: np.ndarray
    last_seen: int

    def __post_init__(self):
        self.prediction = np.asarray(self.prediction, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        if self.prediction.shape != (STATE_DIM,):
            raise ValueError("prediction must be a 6-vector")
        if self.u.shape != (STATE_DIM,):
            raise ValueError("u must be a 6-vector")
        if self.U.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("U must be a 6x6 matrix")

    def element_count(self) -> int:
        return 2 + self.prediction.size + self.u.size + self.U.size + 1

    def to_elements(self) -> np.ndarray:
        return np.concatenate([
            [float(self.id.camera_id), float(self.id.counter)],
            self.prediction, self.u, self.U.ravel(), [float(self.last_seen)],
        ])


@dataclass
class AppearanceAttachment:
    """Two-sample appearance model, sent once when a tracker is created."""

    id: TrackerId
    embeddings: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if len(self.embeddings) != 2:
            raise ValueError("attachment must carry exactly two embeddings")
        self.embeddings = tuple(np.asarray(e, dtype=float) for e in self.embeddings)

    def element_count(self) -> int:
        return sum(e.size for e in self.embeddings)


@dataclass
class CameraMessage:
    sender: int
    wires: list[TrackerWire] = field(default_factory=list)
    attachments: list[AppearanceAttachment] = field(default_factory=list)

    def __post_init__(self):
        ids = [w.id for w in self.wires]
        if len(ids) != len(set(ids)):
            raise ValueError("at most one wire per tracker per message")


def exchange(messages: Sequence[CameraMessage], graph: TopologyGraph
             ) -> list[list[CameraMessage]]:
    """Deliver each camera's single message to its graph neighbors.

    Returns one inbox per camera, ordered by sender id.  Raises
    :class:`ContractViolation` unless exactly one message per camera is
    supplied.
    """
    senders = [m.sender for m in messages]
    if len(senders) != len(set(senders)):
        raise ContractViolation("a camera sent more than one message this cycle")
    if sorted(senders) != list(range(graph.camera_count)):
        raise ContractViolation("exactly one message per camera per cycle is required")
    by_sender = {m.sender: m for m in messages}
    return [[by_sender[j] for j in graph.neighbors(i)]
            for i in range(graph.camera_count)]


@dataclass
class BandwidthLedger:
    """Exact per-frame byte accounting of tracker wires and attachments."""

    element_bytes: int = DEFAULT_ELEMENT_BYTES
    per_frame: list[list[int]] = field(default_factory=list)

    def begin_frame(self) -> None:
        self.per_frame.append([0, 0])

    def record(self, message: CameraMessage) -> "BandwidthLedger":
        if not self.per_frame:
            self.begin_frame()
        current = self.per_frame[-1]
        current[0] += sum(w.element_count() for w in message.wires) * self.element_bytes
        current[1] += sum(a.element_count() for a in message.attachments) * self.element_bytes
        return self

    @property
    def tracker_bytes(self) -> int:
        return sum(row[0] for row in self.per_frame)

    @property
    def appearance_bytes(self) -> int:
        return sum(row[1] for row in self.per_frame)

    @property
    def total_bytes(self) -> int:
        return self.tracker_bytes + self.appearance_bytes


def measure_bandwidth(message: CameraMessage, ledger: BandwidthLedger) -> BandwidthLedger:
    return ledger.record(message)
