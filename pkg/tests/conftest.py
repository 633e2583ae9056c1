"""Shared generators and brute-force oracles.

The oracles deliberately re-derive results from first principles
(fixpoint iteration, exhaustive scans) so they stay independent of the
code paths they check.
"""

from __future__ import annotations

import random

import pytest

from compshare import codec
from compshare.model import (
    Catalog,
    Composition,
    FeatureId,
    PartId,
    Placement,
    Rect,
    UserId,
    Version,
)


# -- generators -------------------------------------------------------------

def random_user(rng: random.Random) -> UserId:
    return UserId(f"user{rng.randint(0, 999)}@lab")


def random_rect(rng: random.Random) -> Rect:
    # micro-grid aligned so canonical serialization round-trips exactly
    xi = rng.randint(0, 900_000)
    yi = rng.randint(0, 900_000)
    wi = rng.randint(1, 1_000_000 - xi)
    hi = rng.randint(1, 1_000_000 - yi)
    return Rect.from_micro(xi, yi, wi, hi)


def random_composition(rng: random.Random, n_refs: int = None,
                       n_placements: int = None, catalog: Catalog = None) -> Composition:
    if catalog is not None:
        pool = sorted(catalog.entries)
        refs = rng.sample(pool, min(n_refs or rng.randint(0, 5), len(pool)))
    else:
        n = n_refs if n_refs is not None else rng.randint(0, 6)
        ids = rng.sample(range(1000), n)
        refs = [
            (FeatureId(f"org.f{i}"), Version(rng.randint(0, 3), rng.randint(0, 9), 0))
            for i in ids
        ]
    placements = []
    if refs:
        for i in range(n_placements if n_placements is not None else rng.randint(0, 4)):
            fid, _ = rng.choice(refs)
            placements.append(Placement(
                part=PartId(f"part.{i}.{rng.randint(0, 99)}"),
                feature=fid, region=random_rect(rng),
            ))
    screenshot = rng.randbytes(rng.randint(0, 64)) if rng.random() < 0.7 else b""
    return Composition(
        name=f"comp-{rng.randint(0, 10 ** 9)}",
        owner=random_user(rng),
        feature_refs=tuple(refs),
        placements=tuple(placements),
        screenshot=screenshot,
        created_at=rng.randint(0, 2_000_000_000),
    )


# -- oracles ----------------------------------------------------------------

def closure_oracle(fid: FeatureId, version: Version, cat: Catalog) -> set:
    """Fixpoint oracle: repeatedly union direct dependencies until stable."""
    resolved = cat.resolve(fid, version)
    current = {(resolved.id, resolved.version)}
    while True:
        nxt = set(current)
        for member_id, member_version in current:
            feature = cat.entries[(member_id, member_version)].feature
            for dep_id, dep_min in feature.dependencies:
                dep = cat.resolve(dep_id, dep_min)
                nxt.add((dep.id, dep.version))
        if nxt == current:
            return current
        current = nxt


def classify_oracle(closure: set, installed: dict):
    """Exhaustive membership scan over the closure."""
    present, missing, mismatched = [], [], []
    for fid, required in sorted(closure):
        if fid not in installed:
            missing.append((fid, required))
        elif installed[fid] >= required:
            present.append((fid, installed[fid]))
        else:
            mismatched.append((fid, installed[fid], required))
    return present, missing, mismatched


def hit_oracle(c: Composition, x: float, y: float):
    """Linear scan; smallest area wins, ties by (part, feature)."""
    hits = [
        (p.region.area, p.part, p.feature)
        for p in c.placements
        if p.region.x <= x <= p.region.x + p.region.w
        and p.region.y <= y <= p.region.y + p.region.h
    ]
    if not hits:
        return None
    _, part, feature = min(hits)
    return part, feature


def has_cycle_by_path_enumeration(cat: Catalog) -> bool:
    """Enumerate all simple paths (small graphs only) and look for one
    that returns to its start."""
    edges = {}
    for key, entry in cat.entries.items():
        edges[key] = []
        for dep_id, dep_min in entry.feature.dependencies:
            try:
                dep = cat.resolve(dep_id, dep_min)
            except Exception:
                continue
            edges[key].append((dep.id, dep.version))

    def extend(path):
        for nxt in edges.get(path[-1], []):
            if nxt == path[0]:
                return True
            if nxt not in path:
                if extend(path + [nxt]):
                    return True
        return False

    return any(extend([node]) for node in edges)


def install_order_is_valid(order, members, cat: Catalog) -> bool:
    """Dependencies no later than their dependents, exact membership."""
    if set(order) != set(members) or len(order) != len(set(order)):
        return False
    position = {pair: i for i, pair in enumerate(order)}
    for fid, version in order:
        feature = cat.entries[(fid, version)].feature
        for dep_id, dep_min in feature.dependencies:
            dep = cat.resolve(dep_id, dep_min)
            dep_key = (dep.id, dep.version)
            if dep_key in position and position[dep_key] > position[(fid, version)]:
                return False
    return True


@pytest.fixture
def rng():
    return random.Random(20260825)
