"""Wire protocol: envelopes and length-prefixed framing.

Every message is an Envelope serialized as a canonical document and
framed as a 4-byte big-endian payload length followed by the payload.
The relay routes envelopes without ever inspecting their bodies.
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from . import codec
from .model import UserId

MAX_BODY = 16 * 1024 * 1024  # per-envelope body limit
MAX_FRAME = MAX_BODY + 64 * 1024  # envelope overhead allowance
ATTACHMENT_CHUNK = 256 * 1024  # binary payloads are split at this size
RELAY_ADDR = "*"  # broadcast / relay-addressed envelopes
DEFAULT_PORT = 7474


class Kind(str, Enum):
    HELLO = "HELLO"
    HELLO_OK = "HELLO_OK"
    PRESENCE = "PRESENCE"
    ROSTER_GET = "ROSTER_GET"
    ROSTER = "ROSTER"
    COMPS_GET = "COMPS_GET"
    COMPS = "COMPS"
    ATTACHMENT_GET = "ATTACHMENT_GET"
    ATTACHMENT = "ATTACHMENT"
    FEATURE_GET = "FEATURE_GET"
    FEATURE = "FEATURE"
    CHAT = "CHAT"
    ERROR = "ERROR"


class ProtocolError(Exception):
    pass


class FrameTooLarge(ProtocolError):
    pass


class TruncatedFrame(ProtocolError):
    pass


class MalformedEnvelope(ProtocolError):
    pass


def new_msg_id(rng=None) -> str:
    """16 random bytes, hex. A seeded rng makes simulations deterministic."""
    if rng is None:
        return secrets.token_hex(16)
    return bytes(rng.getrandbits(8) for _ in range(16)).hex()


@dataclass(frozen=True)
class Envelope:
    kind: Kind
    sender: str  # "name@realm", or "*" for relay-originated envelopes
    to: str  # "name@realm", or "*" for relay-addressed
    msg_id: str
    body: dict

    def reply(self, kind: Kind, body: dict, sender: str = None) -> "Envelope":
        """Build a response echoing this envelope's msg_id."""
        return Envelope(kind=kind, sender=sender or self.to, to=self.sender,
                        msg_id=self.msg_id, body=body)


@dataclass(frozen=True)
class RosterEntry:
    user: UserId
    online: bool
    sharing: bool


@dataclass(frozen=True)
class ChatMessage:
    sender: UserId
    to: UserId
    text: str
    sent_at: int  # UTC seconds

    def __post_init__(self):
        if len(self.text.encode("utf-8")) > 64 * 1024:
            raise ValueError("chat message exceeds 64 KiB")


def encode_envelope(e: Envelope) -> bytes:
    return codec.canonical_bytes({
        "kind": e.kind.value,
        "from": e.sender,
        "to": e.to,
        "msg_id": e.msg_id,
        "body": e.body,
    })


def decode_envelope(data: bytes) -> Envelope:
    try:
        doc = codec.parse_document(data, strict=False)
    except codec.MalformedDocument as e:
        raise MalformedEnvelope(str(e)) from e
    if not isinstance(doc, dict) or set(doc) != {"kind", "from", "to", "msg_id", "body"}:
        raise MalformedEnvelope(f"bad envelope shape: {data[:80]!r}")
    try:
        kind = Kind(doc["kind"])
    except ValueError:
        raise MalformedEnvelope(f"unknown kind: {doc['kind']!r}") from None
    if not isinstance(doc["body"], dict) or not isinstance(doc["msg_id"], str):
        raise MalformedEnvelope("bad body or msg_id")
    for addr in (doc["from"], doc["to"]):
        if addr != RELAY_ADDR:
            try:
                UserId(addr)
            except (ValueError, TypeError):
                raise MalformedEnvelope(f"bad address: {addr!r}") from None
    return Envelope(kind=kind, sender=doc["from"], to=doc["to"],
                    msg_id=doc["msg_id"], body=doc["body"])


def frame(e: Envelope) -> bytes:
    payload = encode_envelope(e)
    if len(payload) > MAX_FRAME:
        raise FrameTooLarge(f"{len(payload)} bytes exceeds {MAX_FRAME}")
    return struct.pack(">I", len(payload)) + payload


def unframe(data: bytes) -> Envelope:
    """Decode exactly one framed envelope from a complete buffer."""
    if len(data) < 4:
        raise TruncatedFrame("incomplete length prefix")
    (length,) = struct.unpack(">I", data[:4])
    if length > MAX_FRAME:
        raise FrameTooLarge(f"declared length {length} exceeds {MAX_FRAME}")
    if len(data) < 4 + length:
        raise TruncatedFrame(f"declared {length} bytes, got {len(data) - 4}")
    return decode_envelope(data[4 : 4 + length])


class FrameDecoder:
    """Incremental decoder for a framed byte stream."""

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list:
        """Append stream bytes; return all envelopes completed by them."""
        self._buffer.extend(data)
        out = []
        while True:
            if len(self._buffer) < 4:
                return out
            (length,) = struct.unpack(">I", bytes(self._buffer[:4]))
            if length > MAX_FRAME:
                raise FrameTooLarge(f"declared length {length} exceeds {MAX_FRAME}")
            if len(self._buffer) < 4 + length:
                return out
            payload = bytes(self._buffer[4 : 4 + length])
            del self._buffer[: 4 + length]
            out.append(decode_envelope(payload))

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)


def error_body(code: str, detail: str = "") -> dict:
    return {"code": code, "detail": detail}


def chunk_attachment(digest: str, data: bytes) -> list:
    """Split binary data into ordered ATTACHMENT bodies (hex-encoded)."""
    chunks = [data[i : i + ATTACHMENT_CHUNK] for i in range(0, len(data), ATTACHMENT_CHUNK)]
    if not chunks:
        chunks = [b""]
    return [
        {"digest": digest, "index": i, "count": len(chunks), "data": chunk.hex()}
        for i, chunk in enumerate(chunks)
    ]
