"""Per-node anomaly intrusion detection from authentication grants, with a
deterministic network simulator around it."""

from .agent import NodeAgent, NodeState, activate, bootstrap_agent, end_of_window, handle_message, request_join
from .alarm import Alarm, accept_alarm, raise_alarm
from .collection import Collector, EventRecord, close_window, observe
from .core import (
    AuthGrant,
    BehaviorVector,
    FeatureCatalog,
    FeatureVector,
    NodeProfile,
    build_catalog,
    build_profile,
    decode_bits,
    encode_bits,
)
from .detection import DetectionPolicy, DetectionResult, Mode, Verdict, classify, detect, distance, violation_count
from .messages import Message, MessageKind
from .netsim import IntruderSpec, JoinSpec, RunLog, SimConfig, Topology, build_topology, inject_intruder, run_simulation
from .report import RunReport, export_report, run
from .scenario import Scenario, load_bundled, load_scenario

__version__ = "0.1.0"
