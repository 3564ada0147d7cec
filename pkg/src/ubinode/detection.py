"""Distance between a profile and a behavior vector, and the verdict rule."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import compress
from operator import lt, ne

from .core import FeatureCatalog, FeatureVector, NodeId, NodeProfile
from .errors import ConfigError, LengthMismatchError


class Mode(str, enum.Enum):
    # every differing position counts, unused permissions included
    STRICT_LITERAL = "strict_literal"
    # only accesses to restricted features count
    VIOLATION_ONLY = "violation_only"


class Verdict(str, enum.Enum):
    NORMAL = "Normal"
    ANOMALY = "Anomaly"


@dataclass(frozen=True)
class DetectionPolicy:
    mode: Mode = Mode.VIOLATION_ONLY
    threshold: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if isinstance(self.threshold, bool) or not isinstance(self.threshold, int):
            raise ConfigError(f"threshold must be an integer, got {self.threshold!r}")
        if self.threshold < 0:
            raise ConfigError(f"threshold must be >= 0, got {self.threshold}")


@dataclass(frozen=True)
class DetectionResult:
    node: NodeId
    window: int
    mode: Mode
    threshold: int
    distance: int
    score: int
    verdict: Verdict
    deviating_features: frozenset[int]
    violating_features: frozenset[int]

    def to_row(self, catalog: FeatureCatalog) -> dict:
        return {
            "node": self.node,
            "window": self.window,
            "mode": self.mode.value,
            "score": self.score,
            "distance": self.distance,
            "threshold": self.threshold,
            "verdict": self.verdict.value,
            "deviating": catalog.names(self.deviating_features),
            "violating": catalog.names(self.violating_features),
        }


def _check_same_length(v0: FeatureVector, vt: FeatureVector) -> None:
    if len(v0.bits) != len(vt.bits):
        raise LengthMismatchError(
            f"vectors have different lengths ({len(v0.bits)} vs {len(vt.bits)})"
        )


def distance(v0: FeatureVector, vt: FeatureVector) -> int:
    """Sum over features of |v0[k] - vt[k]|, i.e. the Hamming distance."""
    _check_same_length(v0, vt)
    # on {0, 1}, |a - b| == (a != b)
    return sum(map(ne, v0.bits, vt.bits))


def violation_count(v0: FeatureVector, vt: FeatureVector) -> int:
    """Number of features restricted in ``v0`` but accessed in ``vt``."""
    _check_same_length(v0, vt)
    # a < b on {0, 1} means a == 0 and b == 1
    return sum(map(lt, v0.bits, vt.bits))


def classify(score: int, policy: DetectionPolicy) -> Verdict:
    return Verdict.ANOMALY if score > policy.threshold else Verdict.NORMAL


def detect(
    profile: NodeProfile, behavior: FeatureVector, policy: DetectionPolicy, window: int = 0
) -> DetectionResult:
    v0 = profile.vector
    d = distance(v0, behavior)
    violations = violation_count(v0, behavior)
    idx = range(len(v0.bits))
    deviating = frozenset(compress(idx, map(ne, v0.bits, behavior.bits))) if d else frozenset()
    violating = frozenset(compress(idx, map(lt, v0.bits, behavior.bits))) if violations else frozenset()
    score = d if policy.mode is Mode.STRICT_LITERAL else violations
    return DetectionResult(
        node=profile.node,
        window=window,
        mode=policy.mode,
        threshold=policy.threshold,
        distance=d,
        score=score,
        verdict=classify(score, policy),
        deviating_features=deviating,
        violating_features=violating,
    )
