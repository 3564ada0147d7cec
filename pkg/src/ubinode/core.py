"""Feature catalog, binary feature vectors and authentication-derived profiles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import BitstringError, CatalogError, GrantError, UnknownFeatureError

NodeId = str


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered universe of permission/restriction features shared by all nodes.

    Position in ``features`` is the feature index used by every vector built
    against this catalog.
    """

    features: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        features = tuple(self.features)
        if not features:
            raise CatalogError("feature catalog must contain at least one feature")
        index = {}
        for i, name in enumerate(features):
            if not isinstance(name, str) or not name:
                raise CatalogError(f"feature name at position {i} must be a non-empty string")
            if name in index:
                raise CatalogError(f"duplicate feature name {name!r}")
            index[name] = i
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return len(self.features)

    def __len__(self):
        return len(self.features)

    def __contains__(self, name):
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownFeatureError(f"feature {name!r} is not in the catalog") from None

    def names(self, indices: Iterable[int]) -> list[str]:
        return [self.features[i] for i in sorted(indices)]


def build_catalog(names: Sequence[str]) -> FeatureCatalog:
    return FeatureCatalog(tuple(names))


@dataclass(frozen=True)
class FeatureVector:
    bits: tuple[int, ...]
    catalog: FeatureCatalog

    def __post_init__(self):
        bits = tuple(self.bits)
        if len(bits) != self.catalog.n:
            raise BitstringError(
                f"vector has {len(bits)} bits but the catalog defines {self.catalog.n} features"
            )
        for b in bits:
            # bool is an int subclass; True/False are tolerated as 1/0
            if b not in (0, 1) or not isinstance(b, int):
                raise BitstringError(f"vector element {b!r} is not 0 or 1")
        object.__setattr__(self, "bits", tuple(int(b) for b in bits))

    @classmethod
    def _trusted(cls, bits: tuple, catalog: FeatureCatalog) -> FeatureVector:
        # skips validation; only for bits built internally from a catalog-sized 0/1 list
        v = object.__new__(cls)
        object.__setattr__(v, "bits", bits)
        object.__setattr__(v, "catalog", catalog)
        return v

    @classmethod
    def zeros(cls, catalog: FeatureCatalog) -> FeatureVector:
        return cls((0,) * catalog.n, catalog)

    @classmethod
    def from_features(cls, names: Iterable[str], catalog: FeatureCatalog) -> FeatureVector:
        """Vector with a 1 at the index of every named feature."""
        bits = [0] * catalog.n
        for name in names:
            bits[catalog.index(name)] = 1
        return cls(tuple(bits), catalog)

    def __len__(self):
        return len(self.bits)

    def __getitem__(self, i):
        return self.bits[i]

    def __iter__(self):
        return iter(self.bits)

    def set_features(self) -> list[str]:
        return [name for name, b in zip(self.catalog.features, self.bits) if b]

    def __str__(self):
        return encode_bits(self)


# A behavior vector is structurally a feature vector; the alias documents intent.
BehaviorVector = FeatureVector


@dataclass(frozen=True)
class AuthGrant:
    """Permissions and restrictions handed to a node when it authenticates."""

    node: NodeId
    permitted: frozenset[str]
    restricted: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "permitted", frozenset(self.permitted))
        object.__setattr__(self, "restricted", frozenset(self.restricted))
        both = self.permitted & self.restricted
        if both:
            raise GrantError(
                f"grant for {self.node!r} both permits and restricts {sorted(both)}"
            )

    def validate(self, catalog: FeatureCatalog) -> None:
        for name in sorted(self.permitted | self.restricted):
            if name not in catalog:
                raise UnknownFeatureError(
                    f"grant for {self.node!r} names feature {name!r} absent from the catalog"
                )
        missing = [f for f in catalog.features if f not in self.permitted and f not in self.restricted]
        if missing:
            raise GrantError(
                f"grant for {self.node!r} neither permits nor restricts {missing}"
            )


@dataclass(frozen=True)
class NodeProfile:
    node: NodeId
    vector: FeatureVector
    built_at: int = 0


def build_profile(grant: AuthGrant, catalog: FeatureCatalog) -> NodeProfile:
    """Normal profile: 1 for every permitted feature, 0 for every restricted one.

    The grant must partition the catalog exactly; partial grants are rejected.
    """
    grant.validate(catalog)
    return NodeProfile(grant.node, FeatureVector.from_features(grant.permitted, catalog))


def encode_bits(v: FeatureVector) -> str:
    return "".join("1" if b else "0" for b in v.bits)


def decode_bits(s: str, catalog: FeatureCatalog) -> FeatureVector:
    if len(s) != catalog.n:
        raise BitstringError(f"bitstring has length {len(s)}, expected {catalog.n}")
    bad = set(s) - {"0", "1"}
    if bad:
        raise BitstringError(f"bitstring contains non-binary characters {sorted(bad)}")
    return FeatureVector(tuple(1 if c == "1" else 0 for c in s), catalog)
