from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

from .core import NodeId
from .errors import TopologyViolationError


class MessageKind(str, enum.Enum):
    EXISTENCE_QUERY = "ExistenceQuery"
    EXISTENCE_ACK = "ExistenceAck"
    UNIT_PROVISION = "UnitProvision"
    ALARM = "AlarmMsg"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: NodeId
    to: NodeId
    payload: dict[str, Any] = field(default_factory=dict)
    sent_at: int = 0

    def __post_init__(self):
        if self.sender == self.to:
            raise TopologyViolationError(f"message from {self.sender!r} addressed to itself")
