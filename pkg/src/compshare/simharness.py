"""In-process multi-peer simulation.

Spins up a relay core plus N scripted clients over an in-memory
transport with a virtual clock. Everything is driven by one
deterministic event loop: same seed + script means a byte-identical
transcript. The clients run the very same BaseClient code as the TCP
path; only the transport hooks differ.
"""

from __future__ import annotations

import random
import tempfile
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import codec
from .client import BaseClient, _Pending
from .model import (
    Catalog,
    Composition,
    Feature,
    FeatureId,
    PartId,
    Placement,
    Rect,
    UserId,
    Version,
    Workspace,
)
from .protocol import Envelope, Kind
from .relay import Close, Deliver, RelayCore
from .store import Store


class ScenarioDeadlock(Exception):
    """The script is waiting on traffic that will never arrive."""


def gen_catalog(seed: int, n_features: int, max_deps: int = 0) -> Catalog:
    """Deterministic acyclic catalog; dependencies only point to
    earlier-generated features."""
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    rng = random.Random(seed)
    categories = ("GUI", "Modeling", "Testing", "SCM", "Language")
    features = []
    payloads = {}
    for i in range(n_features):
        fid = FeatureId(f"gen.feat{i:03d}")
        version = Version(rng.randint(1, 3), rng.randint(0, 9), rng.randint(0, 9))
        n_deps = rng.randint(0, min(max_deps, i)) if i else 0
        dep_targets = rng.sample(range(i), n_deps)
        deps = tuple(
            (features[j].id, features[j].version) for j in sorted(dep_targets)
        )
        parts = ()
        if rng.random() < 0.5:
            parts = tuple(PartId(f"gen.feat{i:03d}.part{k}")
                          for k in range(rng.randint(1, 2)))
        feature = Feature(
            id=fid, version=version,
            display_name=f"Feature {i:03d}",
            description=f"synthetic feature number {i}",
            category=rng.choice(categories),
            dependencies=deps, parts=parts,
        )
        features.append(feature)
        payloads[(fid, version)] = f"payload:{fid}:{version}".encode()
    return Catalog.of(features, payloads=payloads, categories=categories)


class SimClient(BaseClient):
    def __init__(self, network: "SimNetwork", user: UserId, token: str,
                 store: Store, catalog: Catalog, seed):
        super().__init__(
            user, token, store, catalog=catalog,
            rng=random.Random(f"{seed}:{user}"),
            clock=lambda: network.clock,
        )
        self.network = network
        self.session_id: Optional[int] = None

    def _send_raw(self, e: Envelope) -> None:
        if self.session_id is None:
            raise ScenarioDeadlock(f"{self.user} sent while disconnected")
        self.network.client_send(self.session_id, e)

    def _wait(self, pending: _Pending, timeout: float) -> None:
        self.network.pump_until(lambda: pending.done)


class SimNetwork:
    """Deterministic single-threaded event loop over in-memory links."""

    def __init__(self, users: dict, rosters: dict, seed: int = 0):
        self.core = RelayCore(users, rosters, rng=random.Random(f"{seed}:relay"))
        self.seed = seed
        self.clock = 0
        self._seq = 0
        self._queue: deque = deque()  # (due, seq, op, *args)
        self._next_session = 0
        self._clients: dict = {}  # session_id -> SimClient
        self.transcript: list = []

    def log(self, line: str) -> None:
        self.transcript.append(f"t={self.clock:04d} {line}")

    def _schedule(self, delay: int, op: str, *args) -> None:
        self._queue.append((self.clock + delay, self._seq, op, args))
        self._seq += 1

    def attach(self, client: SimClient) -> None:
        session_id = self._next_session
        self._next_session += 1
        self.core.open(session_id)
        self._clients[session_id] = client
        client.session_id = session_id

    def detach(self, client: SimClient) -> None:
        if client.session_id is None:
            return
        self._schedule(1, "close", client.session_id)
        client.session_id = None
        client.connected = False

    def client_send(self, session_id: int, e: Envelope) -> None:
        self._schedule(1, "to_relay", session_id, e)

    def _run_actions(self, actions) -> None:
        for action in actions:
            if isinstance(action, Deliver):
                self._schedule(1, "to_client", action.session, action.envelope)
            elif isinstance(action, Close):
                self._schedule(1, "close", action.session)

    def step(self) -> None:
        due, _seq, op, args = self._queue.popleft()
        self.clock = max(self.clock, due)
        if op == "to_relay":
            session_id, e = args
            self.log(f"relay<-{e.sender} {e.kind.value} msg={e.msg_id}")
            self._run_actions(self.core.handle(session_id, e))
        elif op == "to_client":
            session_id, e = args
            client = self._clients.get(session_id)
            if client is None or client.session_id != session_id:
                return
            digest = codec.sha256_hex(codec.canonical_bytes(e.body))[:12]
            self.log(f"{client.user}<-{e.sender} {e.kind.value} msg={e.msg_id} body={digest}")
            client.on_envelope(e)
        elif op == "close":
            (session_id,) = args
            client = self._clients.pop(session_id, None)
            if client is not None and client.session_id == session_id:
                client.session_id = None
                client.connected = False
            self._run_actions(self.core.closed(session_id))

    def pump_until(self, condition: Callable[[], bool], limit: int = 100_000) -> None:
        steps = 0
        while not condition():
            if not self._queue:
                raise ScenarioDeadlock("no traffic in flight")
            if steps >= limit:
                raise ScenarioDeadlock("virtual timeout")
            self.step()
            steps += 1

    def drain(self) -> None:
        while self._queue:
            self.step()


@dataclass
class Scenario:
    """A timed script over a fixed set of users.

    ``setups`` seeds each user's initial workspace; ``actions`` is a list
    of (time, user, op, kwargs) executed in order.
    """

    users: dict  # user -> token
    rosters: dict
    catalog: Catalog
    setups: dict = field(default_factory=dict)  # user -> Workspace factory
    actions: list = field(default_factory=list)
    seed: int = 0


@dataclass
class ScenarioResult:
    transcript: tuple
    clients: dict  # user -> SimClient
    stores: dict  # user -> Store


def run_scenario(scenario: Scenario, root: Path = None) -> ScenarioResult:
    root = Path(root) if root else Path(tempfile.mkdtemp(prefix="compshare-sim-"))
    network = SimNetwork(scenario.users, scenario.rosters, seed=scenario.seed)
    clients = {}
    stores = {}
    for user, token in scenario.users.items():
        store = Store(root / user.replace("@", "_at_"))
        uid = UserId(user)
        setup = scenario.setups.get(user)
        workspace = setup(network) if setup else Workspace(owner=uid)
        store.save_workspace(workspace)
        store.save_catalog(scenario.catalog)
        client = SimClient(network, uid, token, store, scenario.catalog,
                           seed=scenario.seed)
        clients[user] = client
        stores[user] = store

    for when, user, op, kwargs in sorted(scenario.actions, key=lambda a: a[0]):
        network.clock = max(network.clock, when)
        client = clients[user]
        network.log(f"action {user} {op}")
        try:
            _execute(network, client, op, kwargs)
        except ScenarioDeadlock:
            raise
        except Exception as e:
            # scripted failures (offline peers, refused conflicts) are part
            # of the transcript, not a harness crash
            network.log(f"action {user} {op} failed: {type(e).__name__}")
    network.drain()
    return ScenarioResult(transcript=tuple(network.transcript),
                          clients=clients, stores=stores)


def _execute(network: SimNetwork, client: SimClient, op: str, kwargs: dict) -> None:
    if op == "connect":
        network.attach(client)
        client.connect()
    elif op == "disconnect":
        network.detach(client)
    elif op == "share":
        client.set_sharing(kwargs["enabled"])
    elif op == "contacts":
        client.contacts()
    elif op == "comps_get":
        client.fetch_compositions(kwargs["contact"])
    elif op == "plan":
        client.plan(kwargs["contact"], kwargs["comp_id"],
                    select=kwargs.get("select"),
                    include_composition=kwargs.get("with_composition", True))
    elif op == "install":
        client.install(kwargs["contact"], kwargs["comp_id"],
                       select=kwargs.get("select"),
                       include_composition=kwargs.get("with_composition", True),
                       force=kwargs.get("force", False))
    elif op == "chat":
        client.send_chat(kwargs["to"], kwargs["text"])
    else:
        raise ValueError(f"unknown scenario op: {op}")


# -- the canonical two-developer walkthrough --------------------------------

GUI_CATALOG_FEATURES = [
    Feature(
        id=FeatureId("org.gui.builder"), version=Version(1, 2, 0),
        display_name="GUI Builder", description="drag and drop interface designer",
        category="GUI",
        dependencies=((FeatureId("core.widgets"), Version(1, 0, 0)),),
        parts=(PartId("gui.palette"), PartId("gui.canvas")),
    ),
    Feature(
        id=FeatureId("org.gui.inspector"), version=Version(1, 0, 0),
        display_name="Widget Inspector", description="live widget property inspector",
        category="GUI", parts=(PartId("gui.inspector"),),
    ),
    Feature(
        id=FeatureId("core.widgets"), version=Version(1, 1, 0),
        display_name="Core Widgets", description="shared widget runtime",
        category="GUI",  # no parts: headless runtime
    ),
    Feature(
        id=FeatureId("org.gui.icons"), version=Version(1, 0, 0),
        display_name="Icon Pack", description="stock icon collection",
        category="GUI", parts=(PartId("gui.iconview"),),
    ),
    Feature(
        id=FeatureId("dev.snippets"), version=Version(2, 0, 0),
        display_name="Snippet Library", description="reusable code snippets",
        category="Language",  # no parts
    ),
]

FAKE_PNG = b"\x89PNG\r\n\x1a\n" + b"not-really-pixels" * 16


def gui_development_catalog() -> Catalog:
    payloads = {(f.id, f.version): f"payload:{f.id}".encode()
                for f in GUI_CATALOG_FEATURES}
    return Catalog.of(GUI_CATALOG_FEATURES, payloads=payloads,
                      categories=("GUI", "Language"))


def gui_development_composition(owner: str, created_at: int = 1000) -> Composition:
    refs = tuple((f.id, f.version) for f in GUI_CATALOG_FEATURES)
    placements = (
        Placement(part=PartId("gui.canvas"), feature=FeatureId("org.gui.builder"),
                  region=Rect(0.25, 0.0, 0.75, 1.0)),
        Placement(part=PartId("gui.inspector"), feature=FeatureId("org.gui.inspector"),
                  region=Rect(0.0, 0.0, 0.25, 1.0)),
    )
    return codec.with_id(Composition(
        name="GUI Development", owner=UserId(owner),
        feature_refs=refs, placements=placements,
        screenshot=FAKE_PNG, created_at=created_at,
    ))


def peter_john_scenario(seed: int = 0) -> Scenario:
    """John shares his GUI Development composition; Peter browses it,
    selects the builder feature plus the layout, and installs."""
    john, peter = "john@lab", "peter@lab"
    catalog = gui_development_catalog()
    comp = gui_development_composition(john)

    def john_workspace(network) -> Workspace:
        installed = {f.id: f.version for f in GUI_CATALOG_FEATURES}
        return Workspace(owner=UserId(john), installed=installed,
                         compositions=(comp,), active=comp.id)

    return Scenario(
        users={john: "john-token", peter: "peter-token"},
        rosters={john: [peter], peter: [john]},
        catalog=catalog,
        setups={john: john_workspace},
        actions=[
            (10, john, "connect", {}),
            (20, peter, "connect", {}),
            (30, peter, "contacts", {}),
            (40, peter, "comps_get", {"contact": john}),
            (50, peter, "chat", {"to": john, "text": "that builder looks right for my task"}),
            (60, peter, "plan", {"contact": john, "comp_id": comp.id,
                                 "select": ["org.gui.builder"]}),
            (70, peter, "install", {"contact": john, "comp_id": comp.id,
                                    "select": ["org.gui.builder"],
                                    "with_composition": True}),
            (80, john, "disconnect", {}),
            (90, peter, "disconnect", {}),
        ],
        seed=seed,
    )
