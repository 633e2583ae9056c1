"""Canonical serialization and content hashing for compositions.

Canonical document format: UTF-8 JSON with object keys sorted ascending
bytewise, no whitespace outside strings, integers only (rect coordinates
travel as micro-units: round(coordinate * 1_000_000)), strings
NFC-normalized. Screenshots never travel inline: the document carries
the SHA-256 digest of the PNG bytes and the bytes move as a separate
binary attachment.

A composition's id is the SHA-256 hex digest of its canonical document
with the id field omitted.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import replace
from typing import Any, Optional

from .model import (
    MICRO,
    Composition,
    FeatureId,
    PartId,
    Placement,
    Rect,
    UserId,
    Version,
)

FORMAT_VERSION = 1


class CodecError(Exception):
    pass


class MalformedDocument(CodecError):
    """Input is not parseable as a canonical document."""


class SchemaViolation(CodecError):
    """Parseable, but fields are missing/extra or violate an invariant."""


class HashMismatch(CodecError):
    """Stated content hash differs from the recomputed one."""


def _nfc(value: Any) -> Any:
    if isinstance(value, str):
        return unicodedata.normalize("NFC", value)
    if isinstance(value, dict):
        return {_nfc(k): _nfc(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_nfc(v) for v in value]
    return value


def _check_no_floats(value: Any) -> None:
    if isinstance(value, float):
        raise ValueError(f"floats are not representable in canonical documents: {value!r}")
    if isinstance(value, dict):
        for k, v in value.items():
            _check_no_floats(k)
            _check_no_floats(v)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _check_no_floats(v)


def canonical_bytes(obj: Any) -> bytes:
    """Canonical JSON encoding: sorted keys, no whitespace, NFC strings, ints only."""
    obj = _nfc(obj)
    _check_no_floats(obj)
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def parse_document(data: bytes, strict: bool = True) -> Any:
    """Parse a canonical document.

    In strict mode (hashing contexts) any document whose re-serialization
    differs from the received bytes is rejected as non-canonical.
    Protocol bodies use strict=False.
    """
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedDocument(str(e)) from e
    if strict and canonical_bytes(obj) != data:
        raise MalformedDocument("document is not in canonical form")
    return obj


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _to_micro(coord: float) -> int:
    return round(coord * MICRO)


def _rect_to_doc(r: Rect) -> dict:
    x, y = _to_micro(r.x), _to_micro(r.y)
    # rounding both endpoints independently may overshoot the unit square
    w = min(_to_micro(r.w), MICRO - x)
    h = min(_to_micro(r.h), MICRO - y)
    return {"x": x, "y": y, "w": w, "h": h}


def _composition_doc(c: Composition, include_id: bool) -> dict:
    doc = {
        "format": FORMAT_VERSION,
        "name": c.name,
        "owner": c.owner.value,
        "created_at": c.created_at,
        "feature_refs": [
            {"id": fid.value, "version": str(v)} for fid, v in c.feature_refs
        ],
        "placements": [
            {
                "part": p.part.value,
                "feature": p.feature.value,
                "rect": _rect_to_doc(p.region),
            }
            for p in c.placements
        ],
        "screenshot": sha256_hex(c.screenshot),
    }
    if include_id:
        doc["id"] = c.id
    return doc


def composition_document(c: Composition) -> dict:
    """The composition's canonical document as a plain object (id included)."""
    if c.id is None:
        c = with_id(c)
    return _composition_doc(c, include_id=True)


def composition_id(c: Composition) -> str:
    """Content hash over everything except the id field itself."""
    return sha256_hex(canonical_bytes(_composition_doc(c, include_id=False)))


def with_id(c: Composition) -> Composition:
    """Return the composition with its content hash filled in."""
    return replace(c, id=composition_id(c))


def serialize_composition(c: Composition) -> bytes:
    if c.id is None:
        c = with_id(c)
    elif c.id != composition_id(c):
        raise HashMismatch(f"composition carries stale id {c.id}")
    return canonical_bytes(_composition_doc(c, include_id=True))


def _require(doc: dict, key: str, types) -> Any:
    if key not in doc:
        raise SchemaViolation(f"missing field: {key}")
    value = doc[key]
    if not isinstance(value, types):
        raise SchemaViolation(f"field {key} has wrong type: {type(value).__name__}")
    return value


_COMPOSITION_KEYS = {
    "format", "id", "name", "owner", "created_at",
    "feature_refs", "placements", "screenshot",
}


def deserialize_composition(data: bytes, screenshot: bytes = b"") -> Composition:
    """Decode and fully verify a composition document.

    ``screenshot`` supplies the attachment bytes named by the document's
    screenshot digest; they are verified against it.
    """
    doc = parse_document(data, strict=True)
    if not isinstance(doc, dict):
        raise SchemaViolation("composition document must be an object")
    extra = set(doc) - _COMPOSITION_KEYS
    if extra:
        raise SchemaViolation(f"unexpected fields: {sorted(extra)}")
    if _require(doc, "format", int) != FORMAT_VERSION:
        raise SchemaViolation(f"unsupported format: {doc['format']}")
    name = _require(doc, "name", str)
    created_at = _require(doc, "created_at", int)
    stated_id = _require(doc, "id", str)
    screenshot_digest = _require(doc, "screenshot", str)

    try:
        owner = UserId(_require(doc, "owner", str))
        refs = []
        for ref in _require(doc, "feature_refs", list):
            if not isinstance(ref, dict) or set(ref) != {"id", "version"}:
                raise SchemaViolation(f"bad feature ref: {ref!r}")
            refs.append((FeatureId(ref["id"]), Version.parse(ref["version"])))
        placements = []
        for p in _require(doc, "placements", list):
            if not isinstance(p, dict) or set(p) != {"part", "feature", "rect"}:
                raise SchemaViolation(f"bad placement: {p!r}")
            rect = p["rect"]
            if not isinstance(rect, dict) or set(rect) != {"x", "y", "w", "h"} or \
                    not all(isinstance(rect[k], int) for k in rect):
                raise SchemaViolation(f"bad rect: {rect!r}")
            placements.append(
                Placement(
                    part=PartId(p["part"]),
                    feature=FeatureId(p["feature"]),
                    region=Rect.from_micro(rect["x"], rect["y"], rect["w"], rect["h"]),
                )
            )
        comp = Composition(
            name=name,
            owner=owner,
            feature_refs=tuple(refs),
            placements=tuple(placements),
            screenshot=screenshot,
            created_at=created_at,
            id=stated_id,
        )
    except SchemaViolation:
        raise
    except ValueError as e:
        raise SchemaViolation(str(e)) from e

    if sha256_hex(screenshot) != screenshot_digest:
        raise HashMismatch(
            f"screenshot digest {screenshot_digest} does not match attachment bytes"
        )
    recomputed = composition_id(comp)
    if recomputed != stated_id:
        raise HashMismatch(f"stated id {stated_id} != recomputed {recomputed}")
    return comp
