"""Distributed multi-target tracking over a simulated camera network."""

from .appearance import Gallery, synthetic_embedding
from .association import AssociationResult, associate, geometric_score, mahalanobis
from .dkf import (ConsensusInput, InformationPair, consensus_update,
                  encode_measurement, fuse, zero_pair)
from .experiment import ExperimentConfig, RunResult, run_experiment, sweep
from .metrics import FrameAnnotations, MotReport, aggregate_across_cameras, evaluate_sequence
from .model import (DynamicsModel, GaussianBelief, Measurement, TargetState,
                    make_dynamics, predict)
from .network import (BandwidthLedger, CameraMessage, TopologyGraph, TrackerWire,
                      build_topology, exchange, measure_bandwidth)
from .pipeline import CameraNode, SimulationRunner, TrackingParams
from .scenario import (CameraModel, GroundTruthTrack, Scenario, crossing_scenario,
                       generate_detections, project_to_ground)
from .tracker_manager import (Archive, TrackerId, TrackerManager, TrackerRecord,
                              maybe_drop, update_last_seen)

__version__ = "0.1.0"
