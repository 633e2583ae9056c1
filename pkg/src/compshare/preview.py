"""Screenshot preview geometry: map cursor positions to parts and features.

All geometry comes from placement rects; screenshot pixels are never
interpreted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import MICRO, Composition, FeatureId, PartId, Rect


def hit_test(c: Composition, x: float, y: float) -> Optional[tuple]:
    """Resolve a normalized point to the (PartId, FeatureId) under it.

    Among placements containing the point the smallest-area one wins, so
    nested regions (a toolbar inside a view) resolve to the innermost
    element. Ties break by (PartId, FeatureId) ascending. None when no
    region contains the point.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point out of range: ({x}, {y})")
    best = None
    best_key = None
    for p in c.placements:
        if p.region.contains(x, y):
            key = (p.region.area, p.part, p.feature)
            if best_key is None or key < best_key:
                best, best_key = (p.part, p.feature), key
    return best


@dataclass(frozen=True)
class Annotation:
    rect: Rect
    part: PartId
    feature: FeatureId
    display_name: str


def annotation_documents(c: Composition, feature_names: dict = None) -> list:
    """annotation_list as plain documents (rects in micro-units)."""
    return [
        {
            "rect": {"x": round(a.rect.x * MICRO), "y": round(a.rect.y * MICRO),
                     "w": round(a.rect.w * MICRO), "h": round(a.rect.h * MICRO)},
            "part": a.part.value,
            "feature": a.feature.value,
            "display_name": a.display_name,
        }
        for a in annotation_list(c, feature_names)
    ]


def annotation_list(c: Composition, feature_names: dict = None) -> list:
    """One annotation per placement, in canonical placement order.

    ``feature_names`` maps FeatureId to a display name from cached
    metadata; unknown features fall back to the id string.
    """
    feature_names = feature_names or {}
    return [
        Annotation(
            rect=p.region,
            part=p.part,
            feature=p.feature,
            display_name=feature_names.get(p.feature, p.feature.value),
        )
        for p in c.placements
    ]
