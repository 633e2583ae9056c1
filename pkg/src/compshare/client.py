"""Client library: one relay session plus the local workspace/catalog.

BaseClient holds all protocol behavior behind two transport hooks
(_send_raw and _wait), so the TCP client and the in-process simulation
run exactly the same code. Incoming envelopes surface on one ordered
delivery stream (``events``); request/response pairs correlate by
msg_id.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

from . import codec, resolver
from .model import Catalog, CatalogEntry, Composition, Feature, FeatureId, PartId, UserId, Version
from .protocol import (
    DEFAULT_PORT,
    ChatMessage,
    Envelope,
    FrameDecoder,
    Kind,
    RELAY_ADDR,
    RosterEntry,
    chunk_attachment,
    error_body,
    frame,
    new_msg_id,
)
from .store import Store


class ClientError(Exception):
    pass


class RequestError(ClientError):
    """The peer or relay answered with an ERROR envelope."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class RequestTimeout(ClientError):
    pass


# -- delivery stream events -------------------------------------------------

@dataclass(frozen=True)
class PresenceEvent:
    user: str
    online: bool
    sharing: bool


@dataclass(frozen=True)
class ChatEvent:
    sender: str
    text: str
    sent_at: int


@dataclass(frozen=True)
class InstallProgressEvent:
    feature: str
    version: str
    source: str


@dataclass(frozen=True)
class SessionEvent:
    state: str  # "superseded", "disconnected"


@dataclass(frozen=True)
class ErrorEvent:
    """An ERROR envelope that did not answer any pending request."""

    code: str
    detail: str


class _Pending:
    def __init__(self, expect: set):
        self.expect = expect
        self.done = False
        self.value = None
        self.error: Optional[Exception] = None
        self.chunks: dict = {}
        self.chunk_count: Optional[int] = None
        self.digest: Optional[str] = None


class BaseClient:
    """Protocol logic shared by the TCP client and the simulation client."""

    def __init__(self, user: UserId, token: str, store: Store,
                 catalog: Catalog = None, rng=None,
                 clock: Callable[[], int] = None):
        self.user = user
        self.token = token
        self.store = store
        self.workspace = store.load_workspace(default_owner=user)
        self.catalog = catalog if catalog is not None else store.load_catalog()
        self.roster: dict = {}  # user str -> RosterEntry
        self.events: list = []  # ordered delivery stream
        self._subscribers: list = []
        self._pending: dict = {}  # msg_id -> _Pending
        self._rng = rng
        self._clock = clock or (lambda: int(time.time()))
        self.connected = False

    # -- transport hooks ------------------------------------------------

    def _send_raw(self, e: Envelope) -> None:
        raise NotImplementedError

    def _wait(self, pending: _Pending, timeout: float) -> None:
        """Block until pending.done (transport-specific)."""
        raise NotImplementedError

    def _completed(self, pending: _Pending) -> None:
        """Hook: a pending request just finished (transport may wake waiters)."""

    # -- event stream ---------------------------------------------------

    def subscribe(self, callback: Callable) -> None:
        self._subscribers.append(callback)

    def _emit(self, event) -> None:
        self.events.append(event)
        for cb in self._subscribers:
            cb(event)

    # -- envelope intake ------------------------------------------------

    def on_envelope(self, e: Envelope) -> None:
        pending = self._pending.get(e.msg_id)
        if e.kind == Kind.ERROR:
            code = e.body.get("code", "unknown")
            if pending is not None:
                pending.error = RequestError(code, e.body.get("detail", ""))
                self._finish(e.msg_id, pending)
            elif code == "superseded":
                self.connected = False
                self._emit(SessionEvent("superseded"))
            else:
                self._emit(ErrorEvent(code, e.body.get("detail", "")))
            return
        if e.kind == Kind.ATTACHMENT:
            if pending is not None:
                self._accumulate_chunk(e, pending)
            return
        if e.kind in (Kind.HELLO_OK, Kind.ROSTER, Kind.COMPS, Kind.FEATURE):
            if pending is not None and e.kind in pending.expect:
                if e.kind == Kind.ROSTER:
                    self._update_roster(e.body.get("entries", []))
                pending.value = e
                self._finish(e.msg_id, pending)
            return
        if e.kind == Kind.PRESENCE:
            entry = RosterEntry(
                user=UserId(e.sender), online=bool(e.body.get("online", False)),
                sharing=bool(e.body.get("sharing", True)),
            )
            self.roster[e.sender] = entry
            self._emit(PresenceEvent(e.sender, entry.online, entry.sharing))
            return
        if e.kind == Kind.CHAT:
            self._emit(ChatEvent(e.sender, e.body.get("text", ""),
                                 int(e.body.get("sent_at", 0))))
            return
        if e.kind == Kind.COMPS_GET:
            self._serve_comps(e)
            return
        if e.kind == Kind.ATTACHMENT_GET:
            self._serve_attachment(e)
            return
        if e.kind == Kind.FEATURE_GET:
            self._serve_feature(e)
            return

    def _finish(self, msg_id: str, pending: _Pending) -> None:
        pending.done = True
        self._pending.pop(msg_id, None)
        self._completed(pending)

    def _accumulate_chunk(self, e: Envelope, pending: _Pending) -> None:
        body = e.body
        try:
            index, count = int(body["index"]), int(body["count"])
            pending.chunks[index] = bytes.fromhex(body["data"])
            pending.chunk_count = count
            pending.digest = body["digest"]
        except (KeyError, ValueError) as err:
            pending.error = RequestError("malformed_attachment", str(err))
            self._finish(e.msg_id, pending)
            return
        if len(pending.chunks) == pending.chunk_count:
            data = b"".join(pending.chunks[i] for i in range(pending.chunk_count))
            if codec.sha256_hex(data) != pending.digest:
                pending.error = RequestError("digest_mismatch", pending.digest)
            else:
                pending.value = data
            self._finish(e.msg_id, pending)

    def _update_roster(self, entries) -> None:
        for entry in entries:
            self.roster[entry["user"]] = RosterEntry(
                user=UserId(entry["user"]), online=bool(entry["online"]),
                sharing=bool(entry["sharing"]),
            )

    # -- serving incoming requests --------------------------------------

    def _serve_comps(self, request: Envelope) -> None:
        if not self.workspace.sharing_enabled:
            self._send_raw(request.reply(Kind.ERROR, error_body("sharing_disabled"),
                                         sender=str(self.user)))
            return
        docs = [codec.composition_document(c) for c in self.workspace.compositions]
        self._send_raw(request.reply(Kind.COMPS, {"compositions": docs},
                                     sender=str(self.user)))

    def _servable_digests(self) -> set:
        """Digests this client will hand out over ATTACHMENT_GET.

        Feature payloads are always servable; screenshots only while
        sharing is enabled (they are composition data).
        """
        digests = {
            codec.sha256_hex(entry.payload)
            for entry in self.catalog.entries.values() if entry.payload
        }
        if self.workspace.sharing_enabled:
            digests |= {
                codec.sha256_hex(c.screenshot) for c in self.workspace.compositions
            }
        return digests

    def _serve_attachment(self, request: Envelope) -> None:
        digest = request.body.get("digest", "")
        if digest not in self._servable_digests():
            self._send_raw(request.reply(Kind.ERROR, error_body("not_available", digest),
                                         sender=str(self.user)))
            return
        data = None
        for c in self.workspace.compositions:
            if codec.sha256_hex(c.screenshot) == digest:
                data = c.screenshot
        if data is None:
            for entry in self.catalog.entries.values():
                if entry.payload and codec.sha256_hex(entry.payload) == digest:
                    data = entry.payload
        for body in chunk_attachment(digest, data):
            self._send_raw(request.reply(Kind.ATTACHMENT, body, sender=str(self.user)))

    def _serve_feature(self, request: Envelope) -> None:
        try:
            fid = FeatureId(request.body["id"])
            version = Version.parse(request.body["version"])
        except (KeyError, ValueError):
            self._send_raw(request.reply(Kind.ERROR, error_body("malformed"),
                                         sender=str(self.user)))
            return
        entry = self.catalog.entries.get((fid, version))
        if entry is None or not entry.payload:
            self._send_raw(request.reply(Kind.ERROR, error_body("not_available",
                                                                f"{fid} {version}"),
                                         sender=str(self.user)))
            return
        f = entry.feature
        body = {
            "id": f.id.value,
            "version": str(f.version),
            "display_name": f.display_name,
            "description": f.description,
            "category": f.category,
            "dependencies": [{"id": d.value, "version": str(m)}
                             for d, m in f.dependencies],
            "parts": [p.value for p in f.parts],
            "payload_digest": codec.sha256_hex(entry.payload),
        }
        self._send_raw(request.reply(Kind.FEATURE, body, sender=str(self.user)))

    # -- requests -------------------------------------------------------

    def _request(self, kind: Kind, to: str, body: dict, expect: set,
                 timeout: float = 10.0):
        msg_id = new_msg_id(self._rng)
        pending = _Pending(expect)
        self._pending[msg_id] = pending
        self._send_raw(Envelope(kind=kind, sender=str(self.user), to=to,
                                msg_id=msg_id, body=body))
        self._wait(pending, timeout)
        if not pending.done:
            self._pending.pop(msg_id, None)
            raise RequestTimeout(f"{kind.value} to {to}")
        if pending.error is not None:
            raise pending.error
        return pending.value

    # -- high-level operations ------------------------------------------

    def connect(self, timeout: float = 10.0) -> None:
        self._request(Kind.HELLO, RELAY_ADDR, {"token": self.token},
                      {Kind.HELLO_OK}, timeout)
        self.connected = True
        self.announce_presence()
        # seed the roster view from ground truth; PRESENCE keeps it fresh
        self.contacts(timeout)

    def announce_presence(self) -> None:
        self._send_raw(Envelope(
            kind=Kind.PRESENCE, sender=str(self.user), to=RELAY_ADDR,
            msg_id=new_msg_id(self._rng),
            body={"online": True, "sharing": self.workspace.sharing_enabled},
        ))

    def contacts(self, timeout: float = 10.0) -> list:
        reply = self._request(Kind.ROSTER_GET, RELAY_ADDR, {}, {Kind.ROSTER}, timeout)
        return [
            RosterEntry(user=UserId(e["user"]), online=bool(e["online"]),
                        sharing=bool(e["sharing"]))
            for e in reply.body.get("entries", [])
        ]

    def fetch_attachment(self, user: str, digest: str, timeout: float = 30.0) -> bytes:
        return self._request(Kind.ATTACHMENT_GET, user, {"digest": digest},
                             set(), timeout)

    def fetch_compositions(self, user: str, timeout: float = 30.0) -> list:
        """Live COMPS fetch; verified compositions are cached for offline use."""
        reply = self._request(Kind.COMPS_GET, user, {}, {Kind.COMPS}, timeout)
        comps = []
        for doc in reply.body.get("compositions", []):
            data = codec.canonical_bytes(doc)
            digest = doc.get("screenshot", codec.sha256_hex(b""))
            screenshot = b""
            if digest != codec.sha256_hex(b""):
                screenshot = self.fetch_attachment(user, digest, timeout)
            comps.append(codec.deserialize_composition(data, screenshot=screenshot))
        self.store.cache_put(UserId(user), comps, fetched_at=self._clock())
        return comps

    def compositions_for(self, user: str, timeout: float = 30.0):
        """Live when the contact is online, else the offline cache.

        Returns (compositions, cached, fetched_at); cached is False for a
        live fetch.
        """
        entry = self.roster.get(user)
        online = entry.online if entry else False
        if self.connected and online:
            try:
                return self.fetch_compositions(user, timeout), False, self._clock()
            except RequestError as e:
                if e.code != "offline":
                    raise
        cached = self.store.cache_get(UserId(user))
        if cached is None:
            raise RequestError("offline", f"{user} is offline and not cached")
        return list(cached.compositions), True, cached.fetched_at

    def fetch_feature(self, user: str, fid: FeatureId, version: Version,
                      timeout: float = 30.0) -> Feature:
        """Pull feature metadata + payload from a peer into the local catalog."""
        reply = self._request(Kind.FEATURE_GET, user,
                              {"id": fid.value, "version": str(version)},
                              {Kind.FEATURE}, timeout)
        body = reply.body
        feature = Feature(
            id=FeatureId(body["id"]),
            version=Version.parse(body["version"]),
            display_name=body["display_name"],
            description=body["description"],
            category=body["category"],
            dependencies=tuple((FeatureId(d["id"]), Version.parse(d["version"]))
                               for d in body["dependencies"]),
            parts=tuple(PartId(p) for p in body["parts"]),
        )
        payload = self.fetch_attachment(user, body["payload_digest"], timeout)
        entries = dict(self.catalog.entries)
        entries[(feature.id, feature.version)] = CatalogEntry(feature, payload)
        categories = self.catalog.categories
        if feature.category not in categories:
            categories = tuple(sorted(set(categories) | {feature.category}))
        self.catalog = Catalog(entries=entries, categories=categories)
        return feature

    def send_chat(self, to: str, text: str) -> ChatMessage:
        msg = ChatMessage(sender=self.user, to=UserId(to), text=text,
                          sent_at=self._clock())
        self._send_raw(Envelope(
            kind=Kind.CHAT, sender=str(self.user), to=to,
            msg_id=new_msg_id(self._rng),
            body={"text": msg.text, "sent_at": msg.sent_at},
        ))
        return msg

    def set_sharing(self, enabled: bool) -> None:
        self.workspace = replace(self.workspace, sharing_enabled=enabled)
        self.store.save_workspace(self.workspace)
        if self.connected:
            self.announce_presence()

    # -- install flow ---------------------------------------------------

    def find_composition(self, user: str, comp_id: str):
        comps, cached, fetched_at = self.compositions_for(user)
        for c in comps:
            if c.id == comp_id:
                return c, cached, fetched_at
        raise ClientError(f"{user} has no composition {comp_id}")

    def plan(self, user: str, comp_id: str, select=None,
             include_composition: bool = True):
        comp, _, _ = self.find_composition(user, comp_id)
        selected = None
        if select is not None:
            selected = {FeatureId(s) for s in select}
        p = resolver.diff(comp, selected, self.workspace, self.catalog,
                          include_composition=include_composition)
        return comp, p

    def install(self, user: str, comp_id: str, select=None,
                include_composition: bool = True, force: bool = False):
        comp, p = self.plan(user, comp_id, select, include_composition)
        # pull payloads from the sharer when the local catalog lacks them
        for fid, version in p.install_order:
            entry = self.catalog.entries.get((fid, version))
            if entry is None or not entry.payload:
                if self.connected:
                    self.fetch_feature(user, fid, version)
        result = resolver.apply(p, comp, self.workspace, self.catalog,
                                force=force, source=user)
        self.store.save_workspace(result.workspace)
        self.workspace = result.workspace
        for event in result.events:
            self._emit(InstallProgressEvent(str(event.feature), str(event.version),
                                            event.source))
        return result


class TcpClient(BaseClient):
    """Thread-safe TCP session; operations may be invoked from any thread."""

    def __init__(self, user: UserId, token: str, store: Store,
                 relay: str = f"127.0.0.1:{DEFAULT_PORT}", **kwargs):
        super().__init__(user, token, store, **kwargs)
        host, _, port = relay.rpartition(":")
        self._addr = (host or "127.0.0.1", int(port))
        self._sock: Optional[socket.socket] = None
        self._lock = threading.RLock()  # serializes protocol state access
        self._write_lock = threading.Lock()
        self._wakeup = threading.Condition()
        self._reader: Optional[threading.Thread] = None

    def connect(self, timeout: float = 10.0) -> None:
        self._sock = socket.create_connection(self._addr, timeout=timeout)
        self._sock.settimeout(None)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        super().connect(timeout)

    def close(self) -> None:
        self.connected = False
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()

    def _send_raw(self, e: Envelope) -> None:
        if self._sock is None:
            raise ClientError("not connected")
        with self._write_lock:
            self._sock.sendall(frame(e))

    def _wait(self, pending: _Pending, timeout: float) -> None:
        deadline = time.monotonic() + timeout
        with self._wakeup:
            while not pending.done:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return
                self._wakeup.wait(remaining)

    def _completed(self, pending: _Pending) -> None:
        with self._wakeup:
            self._wakeup.notify_all()

    def _read_loop(self) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = self._sock.recv(65536)
                if not data:
                    break
                for env in decoder.feed(data):
                    with self._lock:
                        self.on_envelope(env)
        except OSError:
            pass
        finally:
            self.connected = False
            with self._lock:
                self._emit(SessionEvent("disconnected"))
            with self._wakeup:
                self._wakeup.notify_all()
