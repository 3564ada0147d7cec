"""Scenario documents: JSON loading, validation and conversion to run inputs."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .agent import NodeAgent, activate, install_units
from .collection import LABELS, EventRecord
from .core import AuthGrant, FeatureCatalog, NodeId
from .detection import DetectionPolicy, Mode
from .errors import (
    CatalogError,
    ConfigError,
    InvariantViolationError,
    ScenarioParseError,
    TopologyError,
    UnresolvedReferenceError,
)
from .netsim import IntruderSpec, JoinSpec, SimConfig, Topology, build_topology, generate_traffic

SPEC_VERSION = 1
BUNDLED = ("marc_smart_office", "marc_join_midrun", "marc_lossy_links", "compliant_office")

_TOP_KEYS = {
    "spec_version", "name", "description", "catalog", "topology", "grants", "joiners",
    "trace", "traffic", "intruders", "policy", "sim",
}
_SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)}


@dataclass(frozen=True)
class TrafficSpec:
    events_per_window: int
    seed: int


@dataclass(frozen=True)
class Scenario:
    name: str
    catalog: FeatureCatalog
    topology: Topology
    grants: dict[NodeId, AuthGrant]
    joiners: tuple[tuple[NodeId, int], ...]
    trace: tuple[EventRecord, ...]
    intruders: tuple[IntruderSpec, ...]
    policy: DetectionPolicy
    sim: SimConfig
    digest: str
    traffic: Optional[TrafficSpec] = None

    def with_overrides(self, seed=None, mode=None, threshold=None) -> Scenario:
        sim = self.sim if seed is None else dataclasses.replace(self.sim, seed=seed)
        policy = DetectionPolicy(
            self.policy.mode if mode is None else Mode(mode),
            self.policy.threshold if threshold is None else threshold,
        )
        return dataclasses.replace(self, sim=sim, policy=policy)

    def full_trace(self) -> list[EventRecord]:
        """Explicit trace followed by generated background traffic (no intruders)."""
        trace = list(self.trace)
        if self.traffic is not None:
            trace.extend(generate_traffic(
                self.grants, self.sim.total_windows, self.traffic.events_per_window, self.traffic.seed
            ))
        return trace

    def build_agents(self) -> tuple[dict[NodeId, NodeAgent], list[JoinSpec]]:
        joining = dict(self.joiners)
        agents = {}
        joins = []
        for node in self.topology.nodes:
            agent = NodeAgent(node, self.topology.neighbors(node), self.policy)
            if node in joining:
                joins.append(JoinSpec(node, joining[node], self.grants[node]))
            else:
                install_units(agent)
                activate(agent, self.grants[node], self.catalog)
            agents[node] = agent
        return agents, joins


def _need(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise InvariantViolationError(f"{where}: missing required field {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise InvariantViolationError(f"{where}: field {key!r} has the wrong type")
    return val


def _str_list(val, where) -> list[str]:
    if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
        raise InvariantViolationError(f"{where} must be a list of strings")
    return val


def _int(val, where, lo=0) -> int:
    if isinstance(val, bool) or not isinstance(val, int) or val < lo:
        raise InvariantViolationError(f"{where} must be an integer >= {lo}, got {val!r}")
    return val


def canonical_digest(doc: Any) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_scenario(doc: Any, source: str = "<scenario>") -> Scenario:
    """Validate a decoded scenario document.

    Raises ``UnresolvedReferenceError`` for names that point nowhere and
    ``InvariantViolationError`` for everything structurally wrong.
    """
    if not isinstance(doc, dict):
        raise InvariantViolationError(f"{source}: top level must be a JSON object")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise InvariantViolationError(f"{source}: unknown top-level fields {unknown}")
    version = _need(doc, "spec_version", int, source)
    if version != SPEC_VERSION:
        raise InvariantViolationError(f"{source}: unsupported spec_version {version} (expected {SPEC_VERSION})")
    name = doc.get("name", Path(source).stem)

    # catalog
    names = _str_list(_need(doc, "catalog", list, source), "catalog")
    try:
        catalog = FeatureCatalog(tuple(names))
    except CatalogError as exc:
        raise InvariantViolationError(f"catalog: {exc}") from None

    # sim config first: windows bound the trace and intruders
    sim_doc = doc.get("sim", {})
    if not isinstance(sim_doc, dict):
        raise InvariantViolationError("sim must be an object")
    bad = sorted(set(sim_doc) - _SIM_KEYS)
    if bad:
        raise InvariantViolationError(f"sim: unknown fields {bad}")
    try:
        sim = SimConfig(**sim_doc)
    except ConfigError as exc:
        raise InvariantViolationError(f"sim: {exc}") from None

    # topology
    topo_doc = _need(doc, "topology", dict, source)
    nodes = _str_list(_need(topo_doc, "nodes", list, "topology"), "topology.nodes")
    if not nodes:
        raise InvariantViolationError("topology must declare at least one node")
    edges = topo_doc.get("edges", [])
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e) for e in edges
    ):
        raise InvariantViolationError("topology.edges must be a list of [node, node] pairs")
    node_set = set(nodes)
    for u, v in edges:
        for end in (u, v):
            if end not in node_set:
                raise UnresolvedReferenceError(f"edge {u}-{v} references undeclared node {end!r}")
    try:
        topology = build_topology(nodes, edges)
    except TopologyError as exc:
        raise InvariantViolationError(f"topology: {exc}") from None

    # grants
    grants_doc = _need(doc, "grants", dict, source)
    grants = {}
    for node, g in grants_doc.items():
        if node not in node_set:
            raise UnresolvedReferenceError(f"grant for undeclared node {node!r}")
        if not isinstance(g, dict):
            raise InvariantViolationError(f"grant for {node!r} must be an object")
        permitted = _str_list(g.get("permitted", []), f"grants.{node}.permitted")
        restricted = _str_list(g.get("restricted", []), f"grants.{node}.restricted")
        for f in permitted + restricted:
            if f not in catalog:
                raise UnresolvedReferenceError(f"grant for {node!r} names feature {f!r} absent from the catalog")
        overlap = set(permitted) & set(restricted)
        if overlap:
            raise InvariantViolationError(f"grant for {node!r} both permits and restricts {sorted(overlap)}")
        missing = [f for f in catalog.features if f not in permitted and f not in restricted]
        if missing:
            raise InvariantViolationError(f"grant for {node!r} leaves features unclassified: {missing}")
        grants[node] = AuthGrant(node, frozenset(permitted), frozenset(restricted))
    ungranted = [v for v in topology.nodes if v not in grants]
    if ungranted:
        raise InvariantViolationError(f"nodes without a grant: {ungranted}")

    # joiners
    joiners = []
    jdoc = doc.get("joiners", [])
    if not isinstance(jdoc, list):
        raise InvariantViolationError("joiners must be a list")
    seen_join = set()
    for j in jdoc:
        if not isinstance(j, dict):
            raise InvariantViolationError("each joiner must be an object")
        node = _need(j, "node", str, "joiner")
        if node not in node_set:
            raise UnresolvedReferenceError(f"joiner {node!r} is not a topology node")
        if node in seen_join:
            raise InvariantViolationError(f"joiner {node!r} listed twice")
        seen_join.add(node)
        tick = _int(j.get("tick"), f"joiner {node!r} tick")
        if not topology.neighbors(node):
            raise InvariantViolationError(f"joiner {node!r} has no neighbor to join through")
        joiners.append((node, tick))

    # trace
    tdoc = doc.get("trace", [])
    if not isinstance(tdoc, list):
        raise InvariantViolationError("trace must be a list")
    trace = []
    for i, rec in enumerate(tdoc):
        where = f"trace[{i}]"
        if not isinstance(rec, dict):
            raise InvariantViolationError(f"{where} must be an object")
        node = _need(rec, "node", str, where)
        feature = _need(rec, "feature", str, where)
        window = _int(rec.get("window"), f"{where}.window")
        label = rec.get("label", "benign")
        if node not in node_set:
            raise UnresolvedReferenceError(f"{where} references undeclared node {node!r}")
        if feature not in catalog and sim.unknown_features == "error":
            raise UnresolvedReferenceError(f"{where} references feature {feature!r} absent from the catalog")
        if window >= sim.total_windows:
            raise InvariantViolationError(f"{where}.window {window} >= total_windows {sim.total_windows}")
        if label not in LABELS:
            raise InvariantViolationError(f"{where}.label must be one of {LABELS}")
        trace.append(EventRecord(node, feature, window, label))

    traffic = None
    if "traffic" in doc:
        tr = doc["traffic"]
        if not isinstance(tr, dict):
            raise InvariantViolationError("traffic must be an object")
        traffic = TrafficSpec(
            _int(tr.get("events_per_window"), "traffic.events_per_window"),
            _int(tr.get("seed", 0), "traffic.seed"),
        )

    # intruders
    intruders = []
    idoc = doc.get("intruders", [])
    if not isinstance(idoc, list):
        raise InvariantViolationError("intruders must be a list")
    for i, rec in enumerate(idoc):
        where = f"intruders[{i}]"
        if not isinstance(rec, dict):
            raise InvariantViolationError(f"{where} must be an object")
        node = _need(rec, "node", str, where)
        window = _int(rec.get("window"), f"{where}.window")
        features = _str_list(_need(rec, "features", list, where), f"{where}.features")
        if node not in node_set:
            raise UnresolvedReferenceError(f"{where} targets undeclared node {node!r}")
        for f in features:
            if f not in catalog:
                raise UnresolvedReferenceError(f"{where} names feature {f!r} absent from the catalog")
        if window >= sim.total_windows:
            raise InvariantViolationError(f"{where}.window {window} >= total_windows {sim.total_windows}")
        if not features:
            raise InvariantViolationError(f"{where} must access at least one feature")
        intruders.append(IntruderSpec(node, window, tuple(features)))

    pdoc = doc.get("policy", {})
    if not isinstance(pdoc, dict):
        raise InvariantViolationError("policy must be an object")
    try:
        policy = DetectionPolicy(pdoc.get("mode", Mode.VIOLATION_ONLY.value), pdoc.get("threshold", 0))
    except (ValueError, ConfigError) as exc:
        raise InvariantViolationError(f"policy: {exc}") from None

    return Scenario(
        name=name,
        catalog=catalog,
        topology=topology,
        grants=grants,
        joiners=tuple(joiners),
        trace=tuple(trace),
        intruders=tuple(intruders),
        policy=policy,
        sim=sim,
        digest=canonical_digest(doc),
        traffic=traffic,
    )


def loads_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{source}: {exc.msg}", exc.lineno, exc.colno) from None
    return parse_scenario(doc, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioParseError(f"{path}: not UTF-8 text ({exc.reason})") from None
    return loads_scenario(text, str(path))


def bundled_path(name: str):
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario named {name!r}; choose from {BUNDLED}")
    return resources.files("ubinode").joinpath("scenarios", f"{name}.json")


def load_bundled(name: str) -> Scenario:
    ref = bundled_path(name)
    return loads_scenario(ref.read_text(encoding="utf-8"), f"{name}.json")
