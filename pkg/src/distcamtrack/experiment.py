"""Experiment configuration, single runs, sweeps, and CSV output.

A config bundles a synthetic scenario, a topology, a pipeline mode, and
tracking thresholds.  One run produces per-camera tracking reports, their
median aggregate, and exact bandwidth totals.  Sweeps expand repetitions
(seed offsets) and append a median row per config group.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path
from typing import Iterable, Sequence

from .metrics import MotReport, aggregate_across_cameras, evaluate_sequence
from .network import build_topology
from .pipeline import MODES, SimulationRunner, TrackingParams
from .scenario import crossing_scenario
from .tracker_manager import TrackerId

CSV_COLUMNS = ("mode", "topology", "variant", "seed", "MOTA", "MOTP", "IDP",
               "IDR", "IDF1", "FP", "FN", "IDSW", "trackerKB", "appearanceKB",
               "totalKBperFrame")


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of the generated crossing scenario."""

    camera_count: int = 4
    target_count: int = 3
    frame_count: int | None = None
    arena: float = 20.0
    duration: int = 70
    stagger: int = 4
    detection_sigma: float = 0.08
    size_sigma: float = 0.02
    miss_probability: float = 0.0
    false_positive_rate: float = 0.0
    embedding_noise: float = 0.0
    embedding_dim: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    topology: str = "complete"
    variant: int = 0
    mode: str = "dkf+lda+dtm"
    params: TrackingParams = field(default_factory=TrackingParams)
    match_radius: float = 1.0
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.match_radius <= 0.0:
            raise ValueError("match_radius must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        try:
            scenario = ScenarioConfig(**data.pop("scenario", {}))
            params = TrackingParams(**data.pop("params", {}))
            return cls(scenario=scenario, params=params, **data)
        except TypeError as exc:
            raise ValueError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    config: ExperimentConfig
    seed: int
    per_camera: list[MotReport]
    aggregate: MotReport
    tracker_kb: float
    appearance_kb: float
    total_kb_per_frame: float
    duration_s: float
    attachment_log: list[tuple[int, int, TrackerId]] = field(default_factory=list)
    events: list[tuple] = field(default_factory=list)


def build_run(config: ExperimentConfig, seed: int | None = None) -> SimulationRunner:
    seed = config.seed if seed is None else seed
    sc = config.scenario
    scenario = crossing_scenario(
        sc.camera_count, sc.target_count, seed,
        arena=sc.arena, duration=sc.duration, stagger=sc.stagger,
        frame_count=sc.frame_count, detection_sigma=sc.detection_sigma,
        size_sigma=sc.size_sigma, miss_probability=sc.miss_probability,
        false_positive_rate=sc.false_positive_rate,
        embedding_noise=sc.embedding_noise, embedding_dim=sc.embedding_dim)
    graph = build_topology(config.topology, sc.camera_count, config.variant)
    return SimulationRunner(scenario, graph, config.params, config.mode)


def run_experiment(config: ExperimentConfig, seed: int | None = None) -> RunResult:
    """Execute one seeded run of the configured experiment."""
    seed = config.seed if seed is None else seed
    started = time.perf_counter()
    runner = build_run(config, seed)
    trace = runner.run()
    reports = [evaluate_sequence(truth, hyp, config.match_radius)
               for truth, hyp in zip(trace.truth, trace.hypotheses)]
    frames = runner.scenario.frame_count
    return RunResult(
        config=config, seed=seed,
        per_camera=reports,
        aggregate=aggregate_across_cameras(reports),
        tracker_kb=trace.ledger.tracker_bytes / 1000.0,
        appearance_kb=trace.ledger.appearance_bytes / 1000.0,
        total_kb_per_frame=trace.ledger.total_bytes / 1000.0 / frames,
        duration_s=time.perf_counter() - started,
        attachment_log=trace.attachment_log,
        events=trace.events)


def _format(value: float) -> str:
    return f"{value:.10g}"


def result_row(result: RunResult, seed_label: str | None = None) -> list[str]:
    config = result.config
    agg = result.aggregate
    return [config.mode, config.topology, str(config.variant),
            seed_label if seed_label is not None else str(result.seed),
            _format(agg.mota), _format(agg.motp), _format(agg.idp),
            _format(agg.idr), _format(agg.idf1), _format(agg.fp),
            _format(agg.fn), _format(agg.idsw), _format(result.tracker_kb),
            _format(result.appearance_kb), _format(result.total_kb_per_frame)]


def _median_row(config: ExperimentConfig, rows: list[list[str]]) -> list[str]:
    import numpy as np

    numeric = [[float(v) for v in row[4:]] for row in rows]
    medians = np.median(np.asarray(numeric), axis=0)
    return [config.mode, config.topology, str(config.variant), "median",
            *[_format(m) for m in medians]]


def _run_job(args) -> tuple[int, int, list[str] | None, str | None]:
    group, seed, config = args
    try:
        return group, seed, result_row(run_experiment(config, seed)), None
    except Exception as exc:  # failed rows are recorded, the sweep continues
        return group, seed, None, str(exc)


def sweep(configs: Sequence[ExperimentConfig], jobs: int = 1) -> list[list[str]]:
    """Run every config x repetition; emit run rows plus per-config medians.

    Output order follows config order then seed, regardless of how many
    worker processes execute the runs.
    """
    if not configs:
        raise ValueError("sweep needs at least one config")
    tasks = [(gi, config.seed + rep, config)
             for gi, config in enumerate(configs)
             for rep in range(config.repetitions)]
    if jobs > 1:
        with get_context("spawn").Pool(jobs) as pool:
            outcomes = pool.map(_run_job, tasks)
    else:
        outcomes = [_run_job(task) for task in tasks]

    rows: list[list[str]] = []
    for gi, config in enumerate(configs):
        group_rows = []
        for group, seed, row, error in outcomes:
            if group != gi:
                continue
            if row is None:
                row = [config.mode, config.topology, str(config.variant),
                       str(seed)] + ["nan"] * 11
            group_rows.append(row)
        rows.extend(group_rows)
        ok_rows = [r for r in group_rows if r[4] != "nan"]
        if ok_rows:
            rows.append(_median_row(config, ok_rows))
    return rows


def write_csv(rows: Iterable[Sequence[str]], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_to_rows(config: ExperimentConfig) -> list[list[str]]:
    """Rows for one config honoring its repetitions, plus a median row."""
    return sweep([config])
