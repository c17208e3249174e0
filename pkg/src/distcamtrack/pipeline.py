"""Per-camera tracking pipeline and the synchronous simulation loop.

Every frame each camera: predicts its trackers, associates local
detections, encodes matched measurements in information form, initializes
new trackers, and composes one message.  All messages are delivered
simultaneously; each camera then merges announced trackers, runs the
consensus update, refreshes the drop counters, and drops expired trackers.

Modes: ``dkf`` associates on geometry alone and manages trackers purely
locally; ``dkf+lda`` adds gallery appearance to the association;
``dkf+lda+dtm`` adds cross-camera identity management (announcements,
merging, min-consensus dropping, archive re-identification).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .association import associate, solve_assignment
from .dkf import ConsensusInput, InformationPair, consensus_update, encode_measurement, zero_pair
from .metrics import FrameAnnotations
from .model import DynamicsModel, GaussianBelief, make_dynamics
from .network import (AppearanceAttachment, BandwidthLedger, CameraMessage,
                      TopologyGraph, TrackerWire, exchange)
from .scenario import Scenario, generate_detections
from .tracker_manager import (Announcement, TrackerId, TrackerManager,
                              update_last_seen)

logger = logging.getLogger(__name__)

MODE_DKF = "dkf"
MODE_LDA = "dkf+lda"
MODE_DTM = "dkf+lda+dtm"
MODES = (MODE_DKF, MODE_LDA, MODE_DTM)


@dataclass(frozen=True)
class TrackingParams:
    """Thresholds and priors shared by every camera."""

    alpha_lda: float = 2000.0
    alpha_gda: float = 50.0
    tau: float = 0.5
    tau_gda: float = 1.0
    kappa: int = 15
    epsilon: float = 0.25
    gallery_size: int = 20
    gallery_period: int = 20
    init_pos_var: float = 0.5
    init_size_var: float = 0.25
    init_vel_var: float = 0.5
    tentative_max_age: int = 5
    # trackers coast for up to kappa frames before dropping; only report ones
    # some camera saw within this many frames (>= graph diameter, so counters
    # still propagating do not suppress remote trackers)
    report_max_age: int = 3

    def __post_init__(self):
        for name in ("alpha_lda", "alpha_gda", "tau", "tau_gda", "epsilon"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


class CameraNode:
    """One camera's tracking state and per-frame processing."""

    def __init__(self, camera_id: int, params: TrackingParams,
                 dyn: DynamicsModel, mode: str = MODE_DTM):
        if mode not in MODES:
            raise ValueError(f"unknown pipeline mode: {mode!r}")
        self.camera_id = camera_id
        self.params = params
        self.dyn = dyn
        self.mode = mode
        self.use_appearance = mode != MODE_DKF
        self.use_dtm = mode == MODE_DTM
        self.manager = TrackerManager(
            camera_id,
            alpha_gda=params.alpha_gda, tau_gda=params.tau_gda,
            epsilon=params.epsilon, gallery_size=params.gallery_size,
            gallery_period=params.gallery_period,
            init_pos_var=params.init_pos_var, init_size_var=params.init_size_var,
            init_vel_var=params.init_vel_var,
            tentative_max_age=params.tentative_max_age,
            use_archive=self.use_dtm)
        self._pairs: dict[TrackerId, InformationPair] = {}
        self._detected: dict[TrackerId, bool] = {}

    # -- pre-exchange ----------------------------------------------------------

    def begin_frame(self, frame: int, detections) -> CameraMessage:
        mgr = self.manager
        for tid in sorted(mgr.records):
            record = mgr.records[tid]
            record.prediction = self.dyn.A @ record.belief.mean

        trackers = [
            (tid,
             GaussianBelief(mgr.records[tid].prediction, mgr.records[tid].belief.cov),
             mgr.records[tid].gallery if self.use_appearance else None)
            for tid in sorted(mgr.records)
        ]
        result = associate(detections, trackers, self.params.alpha_lda, self.params.tau)

        self._pairs = {}
        self._detected = {}
        for j, tid in result.matches:
            meas = detections[j]
            self._pairs[tid] = encode_measurement(meas, self.dyn.H)
            self._detected[tid] = True
            mgr.records[tid].gallery.maybe_store(meas.embedding, frame)
            mgr.records[tid].last_update_frame = frame

        unmatched = [detections[j] for j in result.unmatched_measurements]
        new_records, announcements = mgr.try_local_init(unmatched, frame)
        for record in new_records:
            record.prediction = record.belief.mean.copy()
            self._detected[record.id] = True
        mgr.prune_tentatives(frame)

        wires = []
        for tid in sorted(mgr.records):
            pair = self._pairs.get(tid) or zero_pair()
            wires.append(TrackerWire(id=tid,
                                     prediction=mgr.records[tid].prediction.copy(),
                                     u=pair.u, U=pair.U,
                                     last_seen=mgr.records[tid].last_seen))
        attachments = []
        if self.use_dtm:
            outgoing = announcements + mgr.take_relays()
            for ann in outgoing:
                canonical = mgr.resolve(ann.id)
                if canonical != ann.id:
                    # relayed identity merged locally meanwhile: forward the
                    # announcement under its original id with a zero-information
                    # wire so receivers can place and deduplicate it
                    source = mgr.records.get(canonical)
                    if source is None:
                        continue
                    wires.append(TrackerWire(id=ann.id,
                                             prediction=source.prediction.copy(),
                                             u=zero_pair().u, U=zero_pair().U,
                                             last_seen=source.last_seen))
                elif canonical not in mgr.records:
                    continue
                attachments.append(AppearanceAttachment(id=ann.id,
                                                        embeddings=ann.embeddings))
        return CameraMessage(sender=self.camera_id, wires=wires,
                             attachments=attachments)

    # -- post-exchange ---------------------------------------------------------

    def complete_frame(self, frame: int, inbox: list[CameraMessage]) -> None:
        mgr = self.manager
        if self.use_dtm:
            announcements = self._parse_announcements(inbox)
            mgr.handle_announcements(announcements, frame)
            self._remap_local_state()
            for record in mgr.records.values():
                if record.prediction is None:
                    record.prediction = record.belief.mean.copy()
            contributions = self._wire_contributions(inbox, frame)
        else:
            contributions = self._nearest_wire_contributions(inbox)

        for tid in sorted(mgr.records):
            record = mgr.records[tid]
            pairs, predictions, counters = contributions.get(tid, ([], [], []))
            inp = ConsensusInput(
                own_pair=self._pairs.get(tid, zero_pair()),
                neighbor_pairs=pairs,
                own_prediction=record.prediction,
                neighbor_predictions=predictions)
            prior = GaussianBelief(record.prediction, record.belief.cov)
            record.belief = consensus_update(prior, inp, self.dyn)
            neighbor_counters = counters if self.use_dtm else []
            record.last_seen = update_last_seen(
                self._detected.get(tid, False), record.last_seen, neighbor_counters)
        mgr.drop_expired(self.params.kappa, frame)

    def _remap_local_state(self) -> None:
        """Re-key this frame's association results after identity merges."""
        mgr = self.manager
        pairs: dict[TrackerId, InformationPair] = {}
        for tid, pair in self._pairs.items():
            canonical = mgr.resolve(tid)
            if canonical in pairs:
                pairs[canonical] = InformationPair(u=pairs[canonical].u + pair.u,
                                                   U=pairs[canonical].U + pair.U)
            else:
                pairs[canonical] = pair
        detected: dict[TrackerId, bool] = {}
        for tid, flag in self._detected.items():
            canonical = mgr.resolve(tid)
            detected[canonical] = detected.get(canonical, False) or flag
        self._pairs, self._detected = pairs, detected

    def _parse_announcements(self, inbox) -> list[Announcement]:
        announcements = []
        for message in inbox:
            wire_by_id = {w.id: w for w in message.wires}
            for att in message.attachments:
                if len(att.embeddings) != 2:
                    logger.warning("cam=%d rejecting malformed attachment for %s",
                                   self.camera_id, att.id)
                    continue
                wire = wire_by_id.get(att.id)
                if wire is None:
                    logger.warning("cam=%d attachment without wire for %s",
                                   self.camera_id, att.id)
                    continue
                announcements.append(Announcement(
                    id=att.id, state=wire.prediction,
                    embeddings=tuple(att.embeddings), last_seen=wire.last_seen))
        return announcements

    def _wire_contributions(self, inbox, frame: int):
        """Group received wires by local canonical tracker id."""
        mgr = self.manager
        grouped: dict[TrackerId, tuple[list, list, list]] = {}
        for message in inbox:
            for wire in message.wires:
                canonical = mgr.resolve(wire.id)
                if canonical not in mgr.records:
                    if canonical in mgr.archive:
                        record = mgr.reactivate_from_wire(
                            canonical, wire.prediction, wire.last_seen,
                            self.params.kappa, frame)
                        if record is None:
                            continue
                        record.prediction = record.belief.mean.copy()
                    else:
                        continue
                entry = grouped.setdefault(canonical, ([], [], []))
                entry[0].append(InformationPair(u=wire.u, U=wire.U))
                entry[1].append(wire.prediction)
                entry[2].append(wire.last_seen)
        return grouped

    def _nearest_wire_contributions(self, inbox):
        """Without cross-camera identities, align each neighbor's wires to
        local trackers by nearest prediction, one-to-one per neighbor."""
        mgr = self.manager
        ids = sorted(mgr.records)
        grouped: dict[TrackerId, tuple[list, list, list]] = {}
        if not ids:
            return grouped
        positions = np.stack([mgr.records[tid].prediction[:2] for tid in ids])
        for message in inbox:
            wires = message.wires
            if not wires:
                continue
            cost = np.zeros((len(wires), len(ids)))
            admissible = np.zeros_like(cost, dtype=bool)
            for r, wire in enumerate(wires):
                dists = np.linalg.norm(positions - wire.prediction[:2], axis=1)
                cost[r] = dists
                admissible[r] = dists < self.params.tau_gda
            matches, _, _ = solve_assignment(cost, admissible)
            for r, c in matches:
                entry = grouped.setdefault(ids[c], ([], [], []))
                entry[0].append(InformationPair(u=wires[r].u, U=wires[r].U))
                entry[1].append(wires[r].prediction)
                entry[2].append(wires[r].last_seen)
        return grouped

    def estimates(self) -> list[tuple[str, float, float]]:
        mgr = self.manager
        return [(str(tid), float(mgr.records[tid].belief.mean[0]),
                 float(mgr.records[tid].belief.mean[1]))
                for tid in sorted(mgr.records)
                if mgr.records[tid].last_seen <= self.params.report_max_age]


@dataclass
class SimulationTrace:
    """Everything a run produces: per-camera streams, bandwidth, events."""

    truth: list[list[FrameAnnotations]]
    hypotheses: list[list[FrameAnnotations]]
    ledger: BandwidthLedger
    attachment_log: list[tuple[int, int, TrackerId]] = field(default_factory=list)
    events: list[tuple] = field(default_factory=list)

    def drop_frames(self) -> dict[tuple[int, TrackerId], int]:
        """Last frame each camera archived each tracker id."""
        frames = {}
        for event in self.events:
            if event[2] == "drop":
                frame, camera_id, _, tid = event[:4]
                frames[(camera_id, tid)] = frame
        return frames


class SimulationRunner:
    """Drive a scenario over a camera graph with synchronous rounds."""

    def __init__(self, scenario: Scenario, graph: TopologyGraph,
                 params: TrackingParams | None = None, mode: str = MODE_DTM,
                 dyn: DynamicsModel | None = None,
                 camera_order: list[int] | None = None):
        if graph.camera_count != len(scenario.cameras):
            raise ValueError("graph size must match the scenario's camera count")
        self.scenario = scenario
        self.graph = graph
        self.params = params or TrackingParams()
        self.dyn = dyn or make_dynamics()
        self.mode = mode
        self.camera_order = camera_order or list(range(graph.camera_count))
        if sorted(self.camera_order) != list(range(graph.camera_count)):
            raise ValueError("camera_order must be a permutation of the cameras")
        self.nodes = [CameraNode(cid, self.params, self.dyn, mode)
                      for cid in range(graph.camera_count)]

    def run(self) -> SimulationTrace:
        n = self.graph.camera_count
        ledger = BandwidthLedger()
        truth: list[list[FrameAnnotations]] = [[] for _ in range(n)]
        hypotheses: list[list[FrameAnnotations]] = [[] for _ in range(n)]
        attachment_log: list[tuple[int, int, TrackerId]] = []

        for frame in range(self.scenario.frame_count):
            ledger.begin_frame()
            messages: dict[int, CameraMessage] = {}
            for cid in self.camera_order:
                detections = generate_detections(self.scenario, frame, cid)
                messages[cid] = self.nodes[cid].begin_frame(frame, detections)
            ordered = [messages[cid] for cid in range(n)]
            for message in ordered:
                ledger.record(message)
                for att in message.attachments:
                    attachment_log.append((frame, message.sender, att.id))
            inboxes = exchange(ordered, self.graph)
            for cid in self.camera_order:
                self.nodes[cid].complete_frame(frame, inboxes[cid])
            for cid in range(n):
                camera = self.scenario.camera(cid)
                rows = [(identity, x, y) for identity, x, y in self.nodes[cid].estimates()
                        if camera.sees(np.array([x, y]))]
                hypotheses[cid].append(FrameAnnotations(frame=frame, items=rows))
                truth[cid].append(FrameAnnotations(
                    frame=frame, items=self.scenario.visible_truth(frame, cid)))

        events = sorted(
            (event for node in self.nodes for event in node.manager.events),
            key=lambda e: (e[0], e[1]))
        return SimulationTrace(truth=truth, hypotheses=hypotheses, ledger=ledger,
                               attachment_log=attachment_log, events=events)
