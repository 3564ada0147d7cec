"""Per-node agent: join-time provisioning and the per-window detection step."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .alarm import Alarm, accept_alarm, raise_alarm
from .collection import Collector
from .core import AuthGrant, FeatureCatalog, NodeId, NodeProfile, build_profile
from .detection import DetectionPolicy, DetectionResult, Verdict, detect
from .errors import AgentStateError, IsolatedNodeError, TopologyViolationError
from .messages import Message, MessageKind

log = logging.getLogger(__name__)

UNITS = frozenset({"collection", "detection"})


class NodeState(str, enum.Enum):
    UNPROVISIONED = "Unprovisioned"
    PROVISIONED = "Provisioned"
    ACTIVE = "Active"


@dataclass
class NodeAgent:
    id: NodeId
    neighbors: tuple[NodeId, ...] = ()
    policy: DetectionPolicy = field(default_factory=DetectionPolicy)
    state: NodeState = NodeState.UNPROVISIONED
    units: frozenset[str] = frozenset()
    profile: Optional[NodeProfile] = None
    collector: Optional[Collector] = None
    # ids this node has seen registered as Active members (the existence test)
    members: set[NodeId] = field(default_factory=set)
    alarm_log: dict[str, Alarm] = field(default_factory=dict)
    audit: list[DetectionResult] = field(default_factory=list)
    acks: list[NodeId] = field(default_factory=list)
    alarm_seq: int = 0
    duplicate_alarms: int = 0
    alarm_ttl: int = 1

    def __post_init__(self):
        nbrs = tuple(sorted(set(self.neighbors)))
        if self.id in nbrs:
            raise TopologyViolationError(f"node {self.id!r} lists itself as a neighbor")
        self.neighbors = nbrs

    @property
    def active(self) -> bool:
        return self.state is NodeState.ACTIVE


def install_units(agent: NodeAgent) -> NodeAgent:
    """Give ``agent`` both units without the join exchange (initial members)."""
    if agent.state is not NodeState.UNPROVISIONED:
        log.warning("node %s already has its units; install ignored", agent.id)
        return agent
    agent.units = UNITS
    agent.state = NodeState.PROVISIONED
    return agent


def request_join(agent: NodeAgent, neighbor: Optional[NodeId] = None, now: int = 0) -> Optional[Message]:
    """ExistenceQuery to ``neighbor`` (lowest-id neighbor when omitted).

    Returns None, with a warning, when the agent already has its units.
    """
    if agent.state is not NodeState.UNPROVISIONED:
        log.warning("node %s is %s; join request ignored", agent.id, agent.state.value)
        return None
    if not agent.neighbors:
        raise IsolatedNodeError(f"node {agent.id!r} has no neighbor to join through")
    if neighbor is None:
        neighbor = agent.neighbors[0]
    elif neighbor not in agent.neighbors:
        raise TopologyViolationError(f"{neighbor!r} is not adjacent to {agent.id!r}")
    return Message(MessageKind.EXISTENCE_QUERY, agent.id, neighbor, {}, now)


def handle_message(agent: NodeAgent, msg: Message, now: int = 0) -> list[Message]:
    if msg.to != agent.id:
        raise TopologyViolationError(f"message for {msg.to!r} handed to {agent.id!r}")
    if msg.sender not in agent.neighbors:
        raise TopologyViolationError(f"{agent.id!r} received a message from non-neighbor {msg.sender!r}")

    kind = msg.kind
    if kind is MessageKind.EXISTENCE_QUERY:
        if not agent.active:
            log.debug("node %s is not active; existence query from %s ignored", agent.id, msg.sender)
            return []
        if msg.sender in agent.members:
            return []
        agent.members.add(msg.sender)
        return [
            Message(MessageKind.EXISTENCE_ACK, agent.id, msg.sender, {"known": False}, now),
            Message(MessageKind.UNIT_PROVISION, agent.id, msg.sender, {"units": sorted(UNITS)}, now),
        ]
    if kind is MessageKind.EXISTENCE_ACK:
        agent.acks.append(msg.sender)
        return []
    if kind is MessageKind.UNIT_PROVISION:
        if agent.state is not NodeState.UNPROVISIONED:
            log.warning("duplicate unit provision for %s from %s ignored", agent.id, msg.sender)
            return []
        agent.units = frozenset(msg.payload.get("units", UNITS))
        agent.state = NodeState.PROVISIONED
        return []
    if kind is MessageKind.ALARM:
        return accept_alarm(agent, msg, now)
    raise ValueError(f"unhandled message kind {kind!r}")


def activate(agent: NodeAgent, grant: AuthGrant, catalog: FeatureCatalog, start_window: int = 0) -> NodeAgent:
    if agent.state is NodeState.UNPROVISIONED:
        raise AgentStateError(f"node {agent.id!r} cannot activate before it is provisioned")
    if agent.state is NodeState.ACTIVE:
        raise AgentStateError(f"node {agent.id!r} is already active")
    if grant.node != agent.id:
        raise AgentStateError(f"grant for {grant.node!r} offered to {agent.id!r}")
    profile = build_profile(grant, catalog)
    agent.profile = profile
    agent.collector = Collector(agent.id, catalog, current_window=start_window)
    agent.members.add(agent.id)
    agent.state = NodeState.ACTIVE
    return agent


def bootstrap_agent(
    node: NodeId,
    neighbors: Iterable[NodeId],
    grant: AuthGrant,
    catalog: FeatureCatalog,
    policy: Optional[DetectionPolicy] = None,
) -> NodeAgent:
    """An agent that is Active from the start, skipping the join exchange."""
    agent = NodeAgent(node, tuple(neighbors), policy or DetectionPolicy())
    install_units(agent)
    return activate(agent, grant, catalog)


def end_of_window(agent: NodeAgent, now: int = 0):
    """Close the current window, run detection, and raise an alarm on Anomaly.

    Returns ``(result, alarm_or_None, outbound_alarm_messages)``.
    """
    if not agent.active:
        raise AgentStateError(f"node {agent.id!r} is {agent.state.value}; no window to close")
    window = agent.collector.current_window
    vt, _ = agent.collector.close_window()
    result = detect(agent.profile, vt, agent.policy, window)
    agent.audit.append(result)
    if result.verdict is Verdict.ANOMALY:
        alarm, msgs = raise_alarm(agent, result, now, agent.alarm_ttl)
        return result, alarm, msgs
    return result, None, []
