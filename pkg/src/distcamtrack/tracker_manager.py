"""Distributed tracker lifecycle: identities, initialization, merging, drop.

Trackers carry a two-part identity (creating camera, local counter).  A
camera initializes a tracker locally after two gated observations, checks
the old-tracker archive before assigning a fresh identity, and announces a
fresh tracker once, together with its two-sample appearance model.
Announcements received from neighbors are merged with local trackers when
close in position and appearance; the surviving identity is the smallest.
A min-consensus counter of frames since any camera observed the target
decides when everyone drops it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .appearance import Gallery, set_similarity
from .association import solve_assignment
from .model import GaussianBelief, Measurement

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class TrackerId:
    camera_id: int
    counter: int

    def __post_init__(self):
        if self.camera_id < 0 or self.counter < 0:
            raise ValueError("tracker id parts must be non-negative")

    def __str__(self) -> str:
        return f"{self.camera_id}:{self.counter}"


class Phase(Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    ARCHIVED = "archived"


@dataclass
class TrackerRecord:
    """One camera's view of one tracker.

    Tentative records have no identity or belief yet; they hold the raw
    observations collected so far.  ``last_seen`` is the camera's local
    estimate of frames since any camera observed the target.
    """

    id: TrackerId | None
    belief: GaussianBelief | None
    gallery: Gallery
    last_seen: int = 0
    phase: Phase = Phase.TENTATIVE
    aliases: set[TrackerId] = field(default_factory=set)
    pending: list[Measurement] = field(default_factory=list)
    last_update_frame: int = 0
    prediction: np.ndarray | None = None

    @property
    def position(self) -> np.ndarray:
        if self.prediction is not None:
            return self.prediction[:2]
        if self.belief is not None:
            return self.belief.position
        return self.pending[-1].position


@dataclass
class Announcement:
    """New-tracker message payload: identity, state, two-sample appearance."""

    id: TrackerId
    state: np.ndarray
    embeddings: tuple[np.ndarray, np.ndarray]
    last_seen: int = 0

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float)
        if len(self.embeddings) != 2:
            raise ValueError("announcement must carry exactly two embeddings")


@dataclass
class Archive:
    """Galleries of dropped trackers, kept for re-identification."""

    entries: dict[TrackerId, Gallery] = field(default_factory=dict)

    def __contains__(self, tid: TrackerId) -> bool:
        return tid in self.entries

    def add(self, tid: TrackerId, gallery: Gallery) -> None:
        self.entries[tid] = gallery

    def pop(self, tid: TrackerId) -> Gallery:
        return self.entries.pop(tid)

    def best_match(self, embeddings: Sequence[np.ndarray], epsilon: float
                   ) -> TrackerId | None:
        """Archived identity with minimum cross-pair cosine distance < epsilon."""
        best_id, best_score = None, epsilon
        for tid in sorted(self.entries):
            gallery = self.entries[tid]
            if len(gallery) == 0:
                continue
            score = set_similarity(embeddings, gallery.snapshot())
            if score < best_score:
                best_id, best_score = tid, score
        return best_id


def update_last_seen(detected: bool, own: int, neighbor_values: Iterable[int]) -> int:
    """Min-consensus step for the frames-since-observation counter."""
    if detected:
        return 0
    return min([own, *neighbor_values]) + 1


def maybe_drop(record: TrackerRecord, kappa: int, archive: Archive) -> bool:
    """Archive the record when its counter exceeds kappa; True if dropped."""
    if record.last_seen <= kappa:
        return False
    record.phase = Phase.ARCHIVED
    archive.add(record.id, record.gallery)
    return True


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


class TrackerManager:
    """Per-camera tracker table and its lifecycle rules."""

    def __init__(self, camera_id: int, *, alpha_gda: float = 50.0,
                 tau_gda: float = 1.0, epsilon: float = 0.25,
                 gallery_size: int = 20, gallery_period: int = 20,
                 init_pos_var: float = 0.5, init_size_var: float = 0.25,
                 init_vel_var: float = 0.5, tentative_max_age: int = 5,
                 use_archive: bool = True):
        self.camera_id = camera_id
        self.alpha_gda = alpha_gda
        self.tau_gda = tau_gda
        self.epsilon = epsilon
        self.gallery_size = gallery_size
        self.gallery_period = gallery_period
        self.init_cov = np.diag([init_pos_var, init_pos_var, init_size_var,
                                 init_size_var, init_vel_var, init_vel_var])
        self.tentative_max_age = tentative_max_age
        self.use_archive = use_archive
        self.records: dict[TrackerId, TrackerRecord] = {}
        self.tentatives: list[TrackerRecord] = []
        self.archive = Archive()
        self.alias_map: dict[TrackerId, TrackerId] = {}
        self.announced: set[TrackerId] = set()
        self.relay_queue: list[Announcement] = []
        self.next_counter = 0
        self.events: list[tuple] = []

    # -- identity bookkeeping -------------------------------------------------

    def resolve(self, tid: TrackerId) -> TrackerId:
        return self.alias_map.get(tid, tid)

    def knows(self, tid: TrackerId) -> bool:
        canon = self.resolve(tid)
        return canon in self.records or canon in self.archive

    def _fresh_id(self) -> TrackerId:
        tid = TrackerId(self.camera_id, self.next_counter)
        self.next_counter += 1
        return tid

    def _log(self, frame: int, kind: str, *detail) -> None:
        self.events.append((frame, self.camera_id, kind, *detail))
        logger.info("frame=%d cam=%d %s %s", frame, self.camera_id, kind,
                    " ".join(str(d) for d in detail))

    # -- local initialization -------------------------------------------------

    def _new_gallery(self) -> Gallery:
        return Gallery(capacity=self.gallery_size, save_period=self.gallery_period)

    def _two_point_belief(self, first: Measurement, second: Measurement) -> GaussianBelief:
        gap = max(second.frame - first.frame, 1)
        vel = (second.z[:2] - first.z[:2]) / gap
        mean = np.concatenate([second.z, vel])
        return GaussianBelief(mean=mean, cov=self.init_cov.copy())

    def try_local_init(self, unmatched: Sequence[Measurement], frame: int
                       ) -> tuple[list[TrackerRecord], list[Announcement]]:
        """Feed unmatched measurements to tentatives; promote those with two.

        Returns the newly activated records and the announcements to attach
        to this frame's outgoing message (one per freshly assigned identity;
        archive re-activations are not announced).
        """
        n_m, n_t = len(unmatched), len(self.tentatives)
        cost = np.zeros((n_m, n_t))
        admissible = np.zeros((n_m, n_t), dtype=bool)
        for j, meas in enumerate(unmatched):
            for i, tent in enumerate(self.tentatives):
                d = float(np.linalg.norm(meas.position - tent.position))
                cost[j, i] = d
                admissible[j, i] = d < self.tau_gda
        matches, unmatched_rows, _ = solve_assignment(cost, admissible)

        new_active: list[TrackerRecord] = []
        announcements: list[Announcement] = []
        promoted: list[TrackerRecord] = []
        for j, i in matches:
            tent = self.tentatives[i]
            meas = unmatched[j]
            tent.pending.append(meas)
            tent.gallery.maybe_store(meas.embedding, frame)
            tent.last_update_frame = frame
            if len(tent.pending) >= 2:
                promoted.append(tent)
                record, announcement = self._promote(tent, frame)
                new_active.append(record)
                if announcement is not None:
                    announcements.append(announcement)
        for j in unmatched_rows:
            meas = unmatched[j]
            tent = TrackerRecord(id=None, belief=None, gallery=self._new_gallery(),
                                 pending=[meas], last_update_frame=frame)
            tent.gallery.maybe_store(meas.embedding, frame)
            self.tentatives.append(tent)
        for tent in promoted:
            self.tentatives.remove(tent)
        return new_active, announcements

    def _promote(self, tent: TrackerRecord, frame: int
                 ) -> tuple[TrackerRecord, Announcement | None]:
        first, second = tent.pending[0], tent.pending[-1]
        embeddings = (tent.pending[0].embedding, tent.pending[-1].embedding)
        belief = self._two_point_belief(first, second)

        archived_id = None
        if self.use_archive:
            archived_id = self.archive.best_match(embeddings, self.epsilon)
        if archived_id is not None:
            gallery = self.archive.pop(archived_id)
            gallery.extend(embeddings)
            gallery.last_saved_frame = frame
            record = TrackerRecord(id=archived_id, belief=belief, gallery=gallery,
                                   last_seen=0, phase=Phase.ACTIVE,
                                   last_update_frame=frame)
            self.records[archived_id] = record
            self._log(frame, "reactivate", archived_id)
            return record, None

        tid = self._fresh_id()
        tent.id = tid
        tent.belief = belief
        tent.phase = Phase.ACTIVE
        tent.last_seen = 0
        tent.pending = []
        tent.last_update_frame = frame
        self.records[tid] = tent
        self.announced.add(tid)
        self._log(frame, "init", tid)
        announcement = Announcement(id=tid, state=belief.mean.copy(),
                                    embeddings=embeddings, last_seen=0)
        return tent, announcement

    def prune_tentatives(self, frame: int) -> None:
        self.tentatives = [t for t in self.tentatives
                           if frame - t.last_update_frame <= self.tentative_max_age]

    # -- cross-camera management ----------------------------------------------

    def handle_announcements(self, incoming: Sequence[Announcement], frame: int) -> None:
        """Merge announced new trackers with local ones or instantiate them.

        Unknown announcements are re-broadcast once, so knowledge of a new
        tracker floods multi-hop topologies; the appearance payload still
        originates from the creating camera only.
        """
        fresh: list[Announcement] = []
        seen: set[TrackerId] = set()
        for ann in incoming:
            if ann.id in seen:
                continue
            seen.add(ann.id)
            if self.knows(ann.id):
                continue
            fresh.append(ann)
            if ann.id not in self.announced:
                self.relay_queue.append(ann)
                self.announced.add(ann.id)
        if not fresh:
            return

        records = [self.records[tid] for tid in sorted(self.records)]
        items: list[tuple] = [("ann", ann) for ann in fresh]
        items += [("rec", rec) for rec in records]

        def item_position(item) -> np.ndarray:
            kind, obj = item
            return obj.state[:2] if kind == "ann" else obj.position

        def item_embeddings(item):
            kind, obj = item
            return list(obj.embeddings) if kind == "ann" else obj.gallery.snapshot()

        edges = []
        for a in range(len(items)):
            for b in range(a + 1, len(items)):
                if items[a][0] == "rec" and items[b][0] == "rec":
                    continue
                d = float(np.linalg.norm(item_position(items[a]) - item_position(items[b])))
                if d >= self.tau_gda:
                    continue
                emb_a, emb_b = item_embeddings(items[a]), item_embeddings(items[b])
                s_a = set_similarity(emb_a, emb_b) if emb_a and emb_b else 1.0
                # merging is a re-identification decision: a nearby tracker with
                # incompatible appearance stays separate
                if s_a >= self.epsilon:
                    continue
                edges.append(((d / self.alpha_gda) * s_a, d, a, b))
        uf = _UnionFind(len(items))
        for _, _, a, b in sorted(edges):
            uf.union(a, b)

        clusters: dict[int, list] = {}
        for idx, item in enumerate(items):
            clusters.setdefault(uf.find(idx), []).append(item)
        for members in clusters.values():
            anns = sorted((obj for kind, obj in members if kind == "ann"),
                          key=lambda a: a.id)
            if not anns:
                continue
            recs = sorted((obj for kind, obj in members if kind == "rec"),
                          key=lambda r: r.id)
            self._apply_cluster(anns, recs, frame)

    def _apply_cluster(self, anns: list[Announcement], recs: list[TrackerRecord],
                       frame: int) -> None:
        all_ids = {a.id for a in anns} | {r.id for r in recs}
        for rec in recs:
            all_ids |= rec.aliases
        canonical = min(all_ids)

        if recs:
            survivor = recs[0]
            for other in recs[1:]:
                survivor.gallery.extend(other.gallery.snapshot())
                survivor.last_seen = min(survivor.last_seen, other.last_seen)
                del self.records[other.id]
            for ann in anns:
                survivor.gallery.extend(ann.embeddings)
                survivor.last_seen = min(survivor.last_seen, ann.last_seen)
            if survivor.id != canonical:
                del self.records[survivor.id]
                survivor.id = canonical
                self.records[canonical] = survivor
            survivor.aliases = all_ids - {canonical}
            for tid in survivor.aliases:
                self.alias_map[tid] = canonical
            self._log(frame, "merge", canonical,
                      sorted(all_ids - {canonical}))
        else:
            base = next(a for a in anns if a.id == canonical)
            gallery = self._new_gallery()
            for ann in anns:
                gallery.extend(ann.embeddings)
            gallery.last_saved_frame = frame
            record = TrackerRecord(id=canonical,
                                   belief=GaussianBelief(base.state, self.init_cov.copy()),
                                   gallery=gallery,
                                   last_seen=min(a.last_seen for a in anns),
                                   phase=Phase.ACTIVE,
                                   aliases=all_ids - {canonical},
                                   last_update_frame=frame)
            self.records[canonical] = record
            for tid in record.aliases:
                self.alias_map[tid] = canonical
            self._log(frame, "adopt", canonical)

    def take_relays(self) -> list[Announcement]:
        relays, self.relay_queue = self.relay_queue, []
        return relays

    def reactivate_from_wire(self, tid: TrackerId, prediction: np.ndarray,
                             wire_last_seen: int, kappa: int, frame: int
                             ) -> TrackerRecord | None:
        """Bring an archived tracker back when a neighbor still runs it live."""
        if wire_last_seen > kappa or tid not in self.archive:
            return None
        record = TrackerRecord(id=tid,
                               belief=GaussianBelief(prediction, self.init_cov.copy()),
                               gallery=self.archive.pop(tid),
                               last_seen=wire_last_seen, phase=Phase.ACTIVE,
                               last_update_frame=frame)
        self.records[tid] = record
        self._log(frame, "reactivate-wire", tid)
        return record

    def drop_expired(self, kappa: int, frame: int) -> list[TrackerId]:
        dropped = []
        for tid in sorted(self.records):
            record = self.records[tid]
            if maybe_drop(record, kappa, self.archive):
                dropped.append(tid)
                del self.records[tid]
                self._log(frame, "drop", tid, record.last_seen)
        return dropped
