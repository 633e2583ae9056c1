"""Domain types for the composition-sharing ecosystem.

Everything here is an immutable value; operations are pure functions.
Features are versioned installable units with dependencies; a composition
is a named subset of features plus their on-screen arrangement; a
workspace is one user's local installation state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional


class ModelError(Exception):
    """Base for domain-level failures."""


class UnresolvableRef(ModelError):
    def __init__(self, feature_id: "FeatureId", version: "Version"):
        self.feature_id = feature_id
        self.version = version
        super().__init__(f"no catalog entry satisfies {feature_id.value} >= {version}")


class DependencyCycle(ModelError):
    def __init__(self, cycle: list["FeatureId"]):
        self.cycle = cycle
        super().__init__("dependency cycle: " + " -> ".join(f.value for f in cycle))


class UnknownComposition(ModelError):
    pass


_FEATURE_ID_RE = re.compile(r"^[a-z0-9._-]+$")


@dataclass(frozen=True, order=True)
class FeatureId:
    """Reverse-domain style identifier, e.g. "org.acme.guibuilder".

    Normalized to lowercase at construction so hashing and comparison
    are stable regardless of input casing.
    """

    value: str

    def __post_init__(self):
        object.__setattr__(self, "value", self.value.lower())
        if not self.value or not _FEATURE_ID_RE.match(self.value):
            raise ValueError(f"invalid feature id: {self.value!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class Version:
    major: int
    minor: int
    patch: int

    def __post_init__(self):
        for part in (self.major, self.minor, self.patch):
            if not isinstance(part, int) or part < 0:
                raise ValueError(f"invalid version component: {part!r}")

    @classmethod
    def parse(cls, text: str) -> "Version":
        m = re.match(r"^(\d+)\.(\d+)\.(\d+)$", text)
        if not m:
            raise ValueError(f"invalid version string: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)), int(m.group(3)))

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}.{self.patch}"


@dataclass(frozen=True, order=True)
class PartId:
    """Names a UI-contributable element (view, editor, toolbar)."""

    value: str

    def __post_init__(self):
        if not self.value or any(c.isspace() for c in self.value):
            raise ValueError(f"invalid part id: {self.value!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class UserId:
    """"name@realm" shaped account identifier."""

    value: str

    def __post_init__(self):
        parts = self.value.split("@")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"invalid user id: {self.value!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Feature:
    id: FeatureId
    version: Version
    display_name: str
    description: str
    category: str
    dependencies: tuple = ()  # tuple[(FeatureId, Version), ...] minimum bounds
    parts: tuple = ()  # tuple[PartId, ...]

    def __post_init__(self):
        object.__setattr__(self, "dependencies", tuple(self.dependencies))
        object.__setattr__(self, "parts", tuple(self.parts))
        dep_ids = [d for d, _ in self.dependencies]
        if self.id in dep_ids:
            raise ValueError(f"{self.id} depends on itself")
        if len(dep_ids) != len(set(dep_ids)):
            raise ValueError(f"{self.id} has duplicate dependency ids")
        if len(self.parts) != len(set(self.parts)):
            raise ValueError(f"{self.id} has duplicate part ids")


MICRO = 1_000_000  # canonical coordinate grid: 1e-6 steps


@dataclass(frozen=True, order=True)
class Rect:
    """Normalized screenshot rectangle; all coordinates in [0, 1].

    Canonical serialization quantizes to the micro grid, so values
    meant to round-trip exactly should be multiples of 1e-6.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"rect origin out of range: {self}")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError(f"rect has non-positive extent: {self}")
        # micro-grid tolerance: quantization may push the sum past 1 by < 1e-6
        if self.x + self.w > 1.0 + 1e-9 or self.y + self.h > 1.0 + 1e-9:
            raise ValueError(f"rect exceeds unit square: {self}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains(self, x: float, y: float) -> bool:
        return self.x <= x <= self.x + self.w and self.y <= y <= self.y + self.h

    @classmethod
    def from_micro(cls, x: int, y: int, w: int, h: int) -> "Rect":
        return cls(x / MICRO, y / MICRO, w / MICRO, h / MICRO)


@dataclass(frozen=True)
class Placement:
    part: PartId
    feature: FeatureId
    region: Rect

    def sort_key(self):
        return (self.part, self.feature, self.region.x, self.region.y)


@dataclass(frozen=True)
class Composition:
    """A named, content-addressed subset of features plus layout.

    ``id`` is the content hash computed by the codec; construction with
    id=None is allowed for not-yet-hashed values (the codec fills it in).
    Lists are normalized to canonical order so structurally equal inputs
    compare (and hash) equal regardless of input ordering.
    """

    name: str
    owner: UserId
    feature_refs: tuple = ()  # tuple[(FeatureId, Version), ...]
    placements: tuple = ()  # tuple[Placement, ...]
    screenshot: bytes = b""
    created_at: int = 0  # UTC whole seconds
    id: Optional[str] = None

    def __post_init__(self):
        refs = tuple(sorted(self.feature_refs, key=lambda r: r[0]))
        object.__setattr__(self, "feature_refs", refs)
        object.__setattr__(
            self, "placements", tuple(sorted(self.placements, key=Placement.sort_key))
        )
        ref_ids = [fid for fid, _ in refs]
        if len(ref_ids) != len(set(ref_ids)):
            raise ValueError("feature_refs must be unique by feature id")
        for p in self.placements:
            if p.feature not in ref_ids:
                raise ValueError(
                    f"placement references {p.feature} which is not in feature_refs"
                )
        if not isinstance(self.created_at, int) or self.created_at < 0:
            raise ValueError(f"created_at must be non-negative seconds: {self.created_at!r}")


@dataclass(frozen=True)
class Workspace:
    owner: UserId
    installed: Mapping = field(default_factory=dict)  # FeatureId -> Version
    compositions: tuple = ()  # tuple[Composition, ...]
    active: Optional[str] = None  # CompositionId
    sharing_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "installed", dict(self.installed))
        comps = tuple(sorted(
            self.compositions,
            key=lambda c: (c.id is None, c.id or "", c.name, c.created_at),
        ))
        object.__setattr__(self, "compositions", comps)
        if self.active is not None and self.active not in {
            c.id for c in self.compositions
        }:
            raise ValueError(f"active composition {self.active} is not owned")

    def find_composition(self, comp_id: str) -> Optional[Composition]:
        for c in self.compositions:
            if c.id == comp_id:
                return c
        return None


@dataclass(frozen=True)
class CatalogEntry:
    feature: Feature
    payload: bytes = b""


@dataclass(frozen=True)
class Catalog:
    entries: Mapping = field(default_factory=dict)  # (FeatureId, Version) -> CatalogEntry
    categories: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        object.__setattr__(self, "categories", tuple(self.categories))

    @classmethod
    def of(cls, features: Iterable[Feature], payloads: Mapping = None,
           categories: Iterable[str] = None) -> "Catalog":
        payloads = payloads or {}
        entries = {}
        cats = set(categories or [])
        for f in features:
            entries[(f.id, f.version)] = CatalogEntry(
                f, payloads.get((f.id, f.version), b"")
            )
            cats.add(f.category)
        return cls(entries=entries, categories=tuple(sorted(cats)))

    def versions_of(self, fid: FeatureId) -> list:
        return sorted(v for (i, v) in self.entries if i == fid)

    def resolve(self, fid: FeatureId, minimum: Version) -> Feature:
        """Lowest catalog version satisfying the minimum bound."""
        for v in self.versions_of(fid):
            if v >= minimum:
                return self.entries[(fid, v)].feature
        raise UnresolvableRef(fid, minimum)

    def payload(self, fid: FeatureId, version: Version) -> bytes:
        entry = self.entries.get((fid, version))
        return entry.payload if entry else b""

    def validate(self) -> None:
        """Check dependency satisfiability and category membership."""
        for entry in self.entries.values():
            f = entry.feature
            if f.category not in self.categories:
                raise ValueError(f"{f.id} category {f.category!r} not in catalog categories")
            for dep_id, dep_min in f.dependencies:
                self.resolve(dep_id, dep_min)


def feature_closure(fid: FeatureId, version: Version, cat: Catalog) -> set:
    """Reflexive-transitive dependency closure as (FeatureId, Version) pairs.

    Each dependency resolves to the lowest catalog version at or above
    its stated minimum. Raises DependencyCycle when traversal re-enters
    a node still being expanded.
    """
    result: set = set()
    in_progress: list = []

    def visit(f: FeatureId, minimum: Version):
        feature = cat.resolve(f, minimum)
        key = (feature.id, feature.version)
        if key in result:
            return
        if key in in_progress:
            start = in_progress.index(key)
            raise DependencyCycle([k[0] for k in in_progress[start:]] + [feature.id])
        in_progress.append(key)
        for dep_id, dep_min in feature.dependencies:
            visit(dep_id, dep_min)
        in_progress.pop()
        result.add(key)

    visit(fid, version)
    return result


def composition_features(c: Composition, cat: Catalog) -> set:
    """All features a composition pulls in: each ref plus its dependency closure."""
    pairs: set = set()
    for fid, version in c.feature_refs:
        pairs |= feature_closure(fid, version, cat)
    return {cat.entries[pair].feature for pair in pairs}


def set_active(w: Workspace, comp_id: str) -> Workspace:
    if w.find_composition(comp_id) is None:
        raise UnknownComposition(comp_id)
    return replace(w, active=comp_id)


def search_catalog(cat: Catalog, category: str = None, text: str = None) -> list:
    """Filter catalog entries; sorted by (display_name, version descending)."""
    results = []
    needle = text.lower() if text else None
    for entry in cat.entries.values():
        f = entry.feature
        if category is not None and f.category != category:
            continue
        if needle is not None and needle not in f.display_name.lower() \
                and needle not in f.description.lower():
            continue
        results.append(f)
    results.sort(key=lambda f: (f.display_name, [-f.version.major, -f.version.minor, -f.version.patch]))
    return results
