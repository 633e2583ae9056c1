#!/usr/bin/env python3
"""Export fixtures for the web UI test suite.

The UI re-implements hit-testing and renders install-plan
classifications; these fixtures pin its behavior to the library's.

    python3 tools/export_ui_fixtures.py
"""

import json
import random
from pathlib import Path

from compshare import codec, resolver
from compshare.model import (
    MICRO,
    Composition,
    FeatureId,
    PartId,
    Placement,
    Rect,
    UserId,
    Version,
    Workspace,
)
from compshare.preview import annotation_documents, hit_test
from compshare.simharness import gen_catalog

OUT = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"


def hittest_cases(rng):
    cases = []
    for case_index in range(8):
        refs = tuple((FeatureId(f"org.f{i}"), Version(1, 0, 0)) for i in range(6))
        placements = []
        for i in range(rng.randint(5, 20)):
            fid, _ = rng.choice(refs)
            xi, yi = rng.randint(0, 900_000), rng.randint(0, 900_000)
            wi = rng.randint(1, MICRO - xi)
            hi = rng.randint(1, MICRO - yi)
            placements.append(Placement(
                part=PartId(f"part.{i}"), feature=fid,
                region=Rect.from_micro(xi, yi, wi, hi)))
        # equal-area ties: duplicate regions under different parts
        for i, source in enumerate(placements[:3]):
            fid, _ = rng.choice(refs)
            placements.append(Placement(part=PartId(f"tie.{i}"), feature=fid,
                                        region=source.region))
        comp = Composition(name=f"hit-{case_index}", owner=UserId("o@lab"),
                           feature_refs=refs, placements=tuple(placements),
                           created_at=case_index)
        points = []
        for _ in range(60):
            if rng.random() < 0.5 and comp.placements:
                p = rng.choice(comp.placements).region
                xi = rng.randint(round(p.x * MICRO),
                                 round(p.x * MICRO) + round(p.w * MICRO))
                yi = rng.randint(round(p.y * MICRO),
                                 round(p.y * MICRO) + round(p.h * MICRO))
            else:
                xi, yi = rng.randint(0, MICRO), rng.randint(0, MICRO)
            hit = hit_test(comp, xi / MICRO, yi / MICRO)
            points.append({
                "x": xi, "y": yi,
                "expected": None if hit is None else
                {"part": hit[0].value, "feature": hit[1].value},
            })
        cases.append({"annotations": annotation_documents(comp),
                      "points": points})
    return cases


def plan_cases(rng):
    cases = []
    for case_index in range(12):
        cat = gen_catalog(seed=case_index, n_features=20, max_deps=3)
        keys = sorted(cat.entries)
        refs = sorted(rng.sample(keys, rng.randint(1, 4)))
        comp = codec.with_id(Composition(
            name=f"plan-{case_index}", owner=UserId("sharer@lab"),
            feature_refs=tuple(refs), created_at=case_index))
        installed = {}
        for fid, version in rng.sample(keys, rng.randint(0, 10)):
            installed[fid] = version if rng.random() < 0.7 else Version(0, 0, 0)
        w = Workspace(owner=UserId("me@lab"), installed=installed)
        selected = [f.value for f, _ in rng.sample(refs, rng.randint(1, len(refs)))]
        p = resolver.diff(comp, {FeatureId(s) for s in selected}, w, cat)
        cases.append({
            "composition": codec.composition_document(comp),
            "selected": sorted(selected),
            "installed": {f.value: str(v) for f, v in installed.items()},
            "plan": resolver.plan_document(p),
        })
    return cases


def main():
    rng = random.Random(20260825)
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "hittest.json").write_text(
        json.dumps(hittest_cases(rng), indent=1, sort_keys=True))
    (OUT / "plan.json").write_text(
        json.dumps(plan_cases(rng), indent=1, sort_keys=True))
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
