"""Collection unit: folds observed actions into one behavior vector per window."""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import FeatureCatalog, FeatureVector, NodeId
from .errors import LateEventError, TraceError, UnknownFeatureError, WindowOrderError, WrongNodeError

BENIGN = "benign"
MALICIOUS = "malicious"
LABELS = (BENIGN, MALICIOUS)


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One observed action. ``label`` is ground truth; detection never reads it."""

    node: NodeId
    feature: str
    window: int
    label: str = BENIGN

    def __post_init__(self):
        if isinstance(self.window, bool) or not isinstance(self.window, int) or self.window < 0:
            raise TraceError(f"event window must be a non-negative integer, got {self.window!r}")
        if self.label not in LABELS:
            raise TraceError(f"event label must be one of {LABELS}, got {self.label!r}")


@dataclass
class Collector:
    """Per-node accumulator. Single owner; not safe for concurrent mutation."""

    node: NodeId
    catalog: FeatureCatalog
    current_window: int = 0
    closed_windows: int = 0
    unknown_actions: int = 0
    _acc: list = field(init=False, repr=False)

    def __post_init__(self):
        self._acc = [0] * self.catalog.n

    @property
    def accumulator(self) -> FeatureVector:
        return FeatureVector(tuple(self._acc), self.catalog)

    def observe(self, e: EventRecord) -> Collector:
        if e.node != self.node:
            raise WrongNodeError(f"event for {e.node!r} offered to collector of {self.node!r}")
        if e.window < self.current_window:
            raise LateEventError(
                f"event for window {e.window} arrived after it closed (now at {self.current_window})"
            )
        if e.window > self.current_window:
            raise WindowOrderError(
                f"event for future window {e.window} while collecting window {self.current_window}"
            )
        k = self.catalog._index.get(e.feature)
        if k is None:
            self.unknown_actions += 1
            raise UnknownFeatureError(f"action {e.feature!r} is not a catalog feature")
        self._acc[k] = 1
        return self

    def close_window(self) -> tuple[FeatureVector, Collector]:
        v = FeatureVector._trusted(tuple(self._acc), self.catalog)
        self._acc = [0] * self.catalog.n
        self.current_window += 1
        self.closed_windows += 1
        return v, self


def observe(c: Collector, e: EventRecord) -> Collector:
    return c.observe(e)


def close_window(c: Collector) -> tuple[FeatureVector, Collector]:
    return c.close_window()
