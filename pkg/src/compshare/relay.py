"""Relay server: authenticates clients, tracks presence, and routes
envelopes between them.

RelayCore is a transport-free state machine (the simulation drives it
directly); RelayServer wraps it in a threaded TCP accept loop speaking
the framed wire protocol. The relay never inspects the bodies of
addressed envelopes; it reads only relay-addressed (to="*") traffic.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .protocol import (
    DEFAULT_PORT,
    Envelope,
    FrameDecoder,
    FrameTooLarge,
    Kind,
    MalformedEnvelope,
    RELAY_ADDR,
    error_body,
    frame,
    new_msg_id,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Deliver:
    session: int
    envelope: Envelope


@dataclass(frozen=True)
class Close:
    session: int


def load_user_table(path) -> dict:
    """Relay user table: one "user@realm token" per line; '#' comments."""
    users = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        user, _, token = line.partition(" ")
        users[user] = token.strip()
    return users


class RelayCore:
    """Routing state machine: sessions, presence, and fan-out.

    ``users`` maps user id strings to pre-shared tokens; ``rosters`` maps
    each user to the (directional) list of contacts they see.
    """

    def __init__(self, users: dict, rosters: dict, rng=None):
        self.users = dict(users)
        self.rosters = {u: list(cs) for u, cs in rosters.items()}
        self.sessions: dict = {}  # session_id -> user or None (pre-HELLO)
        self.online: dict = {}  # user -> session_id
        self.sharing: dict = {}  # user -> last-known sharing flag
        self._rng = rng

    # -- session lifecycle ---------------------------------------------

    def open(self, session_id: int) -> None:
        self.sessions[session_id] = None

    def closed(self, session_id: int) -> list:
        """Transport saw the connection drop; fan out offline presence."""
        user = self.sessions.pop(session_id, None)
        if user is None or self.online.get(user) != session_id:
            return []
        del self.online[user]
        return self._presence_fanout(user, online=False)

    # -- routing --------------------------------------------------------

    def handle(self, session_id: int, e: Envelope) -> list:
        user = self.sessions.get(session_id)
        if e.kind == Kind.HELLO:
            return self._handle_hello(session_id, e)
        if user is None:
            return [
                Deliver(session_id, self._error(e, "unauthenticated")),
                Close(session_id),
            ]
        if e.sender != user:
            return [Deliver(session_id, self._error(e, "malformed", "from mismatch"))]

        if e.to == RELAY_ADDR:
            if e.kind == Kind.PRESENCE:
                return self._handle_presence(user, e)
            if e.kind == Kind.ROSTER_GET:
                return [Deliver(session_id, self._roster_reply(user, e))]
            return [Deliver(session_id, self._error(e, "malformed",
                                                    f"{e.kind.value} not relay-addressed"))]

        # addressed envelope: pure pass-through
        if e.to not in self.users:
            return [Deliver(session_id, self._error(e, "unknown_recipient", e.to))]
        target = self.online.get(e.to)
        if target is None:
            return [Deliver(session_id, self._error(e, "offline", e.to))]
        return [Deliver(target, e)]

    # -- handlers -------------------------------------------------------

    def _handle_hello(self, session_id: int, e: Envelope) -> list:
        token = e.body.get("token")
        expected = self.users.get(e.sender)
        if expected is None or token != expected:
            return [
                Deliver(session_id, self._error(e, "unauthenticated")),
                Close(session_id),
            ]
        actions = []
        previous = self.online.get(e.sender)
        if previous is not None and previous != session_id:
            superseded = Envelope(
                kind=Kind.ERROR, sender=RELAY_ADDR, to=e.sender,
                msg_id=new_msg_id(self._rng), body=error_body("superseded"),
            )
            actions += [Deliver(previous, superseded), Close(previous)]
            self.sessions[previous] = None
        self.sessions[session_id] = e.sender
        self.online[e.sender] = session_id
        actions.append(Deliver(session_id, e.reply(Kind.HELLO_OK, {}, sender=RELAY_ADDR)))
        actions += self._presence_fanout(e.sender, online=True)
        return actions

    def _handle_presence(self, user: str, e: Envelope) -> list:
        if "sharing" in e.body:
            self.sharing[user] = bool(e.body["sharing"])
        return [
            Deliver(self.online[contact], e)
            for contact in self.rosters.get(user, [])
            if contact in self.online
        ]

    def _roster_reply(self, user: str, e: Envelope) -> Envelope:
        entries = [
            {
                "user": contact,
                "online": contact in self.online,
                "sharing": self.sharing.get(contact, True),
            }
            for contact in self.rosters.get(user, [])
        ]
        return e.reply(Kind.ROSTER, {"entries": entries}, sender=RELAY_ADDR)

    def _presence_fanout(self, user: str, online: bool) -> list:
        env = Envelope(
            kind=Kind.PRESENCE, sender=user, to=RELAY_ADDR,
            msg_id=new_msg_id(self._rng),
            body={"user": user, "online": online,
                  "sharing": self.sharing.get(user, True)},
        )
        return [
            Deliver(self.online[contact], env)
            for contact in self.rosters.get(user, [])
            if contact in self.online
        ]

    def _error(self, request: Envelope, code: str, detail: str = "") -> Envelope:
        return Envelope(
            kind=Kind.ERROR, sender=RELAY_ADDR, to=request.sender,
            msg_id=request.msg_id, body=error_body(code, detail),
        )


class RelayServer:
    """Threaded TCP front end for RelayCore."""

    def __init__(self, users: dict, rosters: dict, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT):
        self.core = RelayCore(users, rosters)
        self.host = host
        self.port = port
        self._lock = threading.Lock()  # guards core + session table
        self._conns: dict = {}  # session_id -> _Conn
        self._next_session = 0
        self._server_socket: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None
        self._stopping = threading.Event()

    def start(self) -> None:
        self._server_socket = socket.create_server((self.host, self.port))
        self.port = self._server_socket.getsockname()[1]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._stopping.set()
        if self._server_socket:
            try:
                # close() alone does not wake a thread blocked in accept()
                self._server_socket.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._server_socket.close()
        with self._lock:
            conns = list(self._conns.values())
        for conn in conns:
            conn.close()
        if self._accept_thread:
            self._accept_thread.join(timeout=5)

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                sock, _addr = self._server_socket.accept()
            except OSError:
                return
            with self._lock:
                session_id = self._next_session
                self._next_session += 1
                conn = _Conn(self, session_id, sock)
                self._conns[session_id] = conn
                self.core.open(session_id)
            conn.start()

    def _dispatch(self, actions) -> None:
        """Execute routing actions; caller holds the core lock."""
        for action in actions:
            conn = self._conns.get(action.session)
            if conn is None:
                continue
            if isinstance(action, Deliver):
                conn.send(action.envelope)
            elif isinstance(action, Close):
                conn.close()

    def on_envelope(self, session_id: int, e: Envelope) -> None:
        with self._lock:
            self._dispatch(self.core.handle(session_id, e))

    def on_closed(self, session_id: int) -> None:
        with self._lock:
            self._conns.pop(session_id, None)
            self._dispatch(self.core.closed(session_id))


class _Conn:
    def __init__(self, server: RelayServer, session_id: int, sock: socket.socket):
        self.server = server
        self.session_id = session_id
        self.sock = sock
        self._write_lock = threading.Lock()
        self._closed = False
        self._thread = threading.Thread(target=self._read_loop, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def send(self, e: Envelope) -> None:
        try:
            with self._write_lock:
                self.sock.sendall(frame(e))
        except OSError:
            pass  # reader will observe the drop and clean up

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def _read_loop(self) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = self.sock.recv(65536)
                if not data:
                    break
                try:
                    envelopes = decoder.feed(data)
                except (FrameTooLarge, MalformedEnvelope) as e:
                    log.warning("session %d: %s", self.session_id, e)
                    break
                for env in envelopes:
                    self.server.on_envelope(self.session_id, env)
        except OSError:
            pass
        finally:
            self.close()
            self.server.on_closed(self.session_id)
