"""Alarm construction and one-hop dissemination."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .core import NodeId
from .detection import DetectionResult, Verdict
from .errors import ContractViolationError
from .messages import Message, MessageKind

if TYPE_CHECKING:
    from .agent import NodeAgent


@dataclass(frozen=True)
class Alarm:
    alarm_id: str
    origin: NodeId
    window: int
    result: DetectionResult
    recipients: frozenset[NodeId]
    ttl: int = 1

    def __post_init__(self):
        if self.result.verdict is not Verdict.ANOMALY:
            raise ContractViolationError("an alarm requires an Anomaly verdict")


def raise_alarm(agent: NodeAgent, result: DetectionResult, now: int = 0, ttl: int = 1):
    """Build an alarm for ``result`` and address it to ``agent``'s neighbors.

    The origin's own log gets the alarm directly (no network hop). Returns the
    alarm and one AlarmMsg per neighbor, in ascending neighbor order.
    """
    if result.verdict is not Verdict.ANOMALY:
        raise ContractViolationError(
            f"raise_alarm called with a {result.verdict.value} verdict for {result.node!r}"
        )
    if result.node != agent.id:
        raise ContractViolationError(f"result for {result.node!r} raised by {agent.id!r}")
    seq = agent.alarm_seq
    agent.alarm_seq += 1
    alarm = Alarm(
        alarm_id=f"{agent.id}:{result.window}:{seq}",
        origin=agent.id,
        window=result.window,
        result=result,
        recipients=frozenset({agent.id, *agent.neighbors}),
        ttl=ttl,
    )
    agent.alarm_log[alarm.alarm_id] = alarm
    msgs = [
        Message(MessageKind.ALARM, agent.id, nb, {"alarm": alarm, "hop": 1}, now)
        for nb in agent.neighbors
    ]
    return alarm, msgs


def accept_alarm(agent: NodeAgent, msg: Message, now: int = 0) -> list[Message]:
    """Log an incoming alarm once per alarm id; duplicates are dropped.

    Forwarding only happens when the alarm's ttl exceeds the hop count, which
    never holds at the default ttl of 1.
    """
    alarm: Alarm = msg.payload["alarm"]
    hop = msg.payload.get("hop", 1)
    if alarm.alarm_id in agent.alarm_log:
        agent.duplicate_alarms += 1
        return []
    agent.alarm_log[alarm.alarm_id] = alarm
    if hop >= alarm.ttl:
        return []
    return [
        Message(MessageKind.ALARM, agent.id, nb, {"alarm": alarm, "hop": hop + 1}, now)
        for nb in agent.neighbors
        if nb != msg.sender and nb != alarm.origin
    ]
