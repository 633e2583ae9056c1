import random

import pytest

from compshare import codec
from compshare.client import ChatEvent, PresenceEvent
from compshare.model import FeatureId, UserId, Version, Workspace
from compshare.resolver import workspace_fingerprint
from compshare.simharness import (
    Scenario,
    ScenarioDeadlock,
    gen_catalog,
    gui_development_catalog,
    gui_development_composition,
    peter_john_scenario,
    run_scenario,
)
from compshare.store import Store

from conftest import closure_oracle


class TestGenCatalog:
    def test_single_feature(self):
        cat = gen_catalog(1, n_features=1, max_deps=0)
        assert len(cat.entries) == 1
        (entry,) = cat.entries.values()
        assert entry.feature.dependencies == ()

    def test_same_seed_identical(self):
        a = gen_catalog(9, n_features=30, max_deps=3)
        b = gen_catalog(9, n_features=30, max_deps=3)
        assert a == b

    def test_large_catalog_acyclic(self):
        from compshare.resolver import validate_acyclic
        cat = gen_catalog(7, n_features=196, max_deps=4)
        assert validate_acyclic(cat) is None

    def test_rejects_zero_features(self):
        with pytest.raises(ValueError):
            gen_catalog(0, n_features=0)


class TestScenarios:
    def test_empty_script_empty_transcript(self, tmp_path):
        scenario = Scenario(users={"a@lab": "t"}, rosters={},
                            catalog=gen_catalog(1, 1), actions=[])
        result = run_scenario(scenario, root=tmp_path)
        assert result.transcript == ()

    def test_peter_john_final_state(self, tmp_path):
        result = run_scenario(peter_john_scenario(), root=tmp_path)
        peter = result.clients["peter@lab"]
        cat = gui_development_catalog()
        expected = dict(closure_oracle(FeatureId("org.gui.builder"),
                                       Version(1, 2, 0), cat))
        assert peter.workspace.installed == expected
        comp = gui_development_composition("john@lab")
        assert [c.id for c in peter.workspace.compositions] == [comp.id]
        # survives a store round trip
        reloaded = Store(result.stores["peter@lab"].root).load_workspace()
        assert reloaded == peter.workspace
        # install events in dependency order
        installs = [line for line in result.transcript if "install" in line]
        assert installs

    def test_byte_identical_across_runs(self, tmp_path):
        transcripts = {
            run_scenario(peter_john_scenario(), root=tmp_path / str(i)).transcript
            for i in range(3)
        }
        assert len(transcripts) == 1

    def test_different_seeds_differ(self, tmp_path):
        a = run_scenario(peter_john_scenario(seed=0), root=tmp_path / "a").transcript
        b = run_scenario(peter_john_scenario(seed=1), root=tmp_path / "b").transcript
        assert a != b  # msg_ids differ

    def test_disconnect_during_install_is_atomic(self, tmp_path):
        john, peter = "john@lab", "peter@lab"
        comp = gui_development_composition(john)
        catalog = gui_development_catalog()

        def john_ws(network):
            installed = {e.feature.id: e.feature.version
                         for e in catalog.entries.values()}
            return Workspace(owner=UserId(john), installed=installed,
                             compositions=(comp,))

        # Peter's install needs payloads from John, but John is gone by then
        from compshare.model import Catalog, CatalogEntry
        stripped = Catalog(
            entries={k: CatalogEntry(v.feature, b"") for k, v in
                     catalog.entries.items()},
            categories=catalog.categories)
        scenario = Scenario(
            users={john: "jt", peter: "pt"},
            rosters={john: [peter], peter: [john]},
            catalog=stripped,
            setups={john: john_ws},
            actions=[
                (10, john, "connect", {}),
                (20, peter, "connect", {}),
                (30, peter, "contacts", {}),
                (40, peter, "comps_get", {"contact": john}),
                (50, john, "disconnect", {}),
                (60, peter, "install", {"contact": john, "comp_id": comp.id}),
            ],
        )
        result = run_scenario(scenario, root=tmp_path)
        peter_client = result.clients[peter]
        assert peter_client.workspace.installed == {}
        assert peter_client.workspace.compositions == ()
        assert any("install failed" in line for line in result.transcript)

    def test_sharing_disabled_blocks_comps(self, tmp_path):
        john, peter = "john@lab", "peter@lab"
        comp = gui_development_composition(john)
        catalog = gui_development_catalog()

        def john_ws(network):
            return Workspace(owner=UserId(john), compositions=(comp,),
                             sharing_enabled=False)

        scenario = Scenario(
            users={john: "jt", peter: "pt"},
            rosters={john: [peter], peter: [john]},
            catalog=catalog,
            setups={john: john_ws},
            actions=[
                (10, john, "connect", {}),
                (20, peter, "connect", {}),
                (30, peter, "comps_get", {"contact": john}),
            ],
        )
        result = run_scenario(scenario, root=tmp_path)
        assert any("comps_get failed" in line for line in result.transcript)
        assert result.stores[peter].cache_get(UserId(john)) is None

    def test_deadlock_detected(self, tmp_path):
        scenario = Scenario(
            users={"a@lab": "t", "b@lab": "t"}, rosters={},
            catalog=gen_catalog(1, 1),
            actions=[(10, "a@lab", "comps_get", {"contact": "b@lab"})],
        )
        # a@lab never connected: sending raises ScenarioDeadlock
        with pytest.raises(ScenarioDeadlock):
            run_scenario(scenario, root=tmp_path)


class TestProtocolInvariantsUnderRandomScripts:
    def _random_scenario(self, seed):
        rng = random.Random(seed)
        n_peers = rng.randint(2, 5)
        users = {f"p{i}@lab": f"tok{i}" for i in range(n_peers)}
        names = sorted(users)
        rosters = {u: [v for v in names if v != u] for u in names}
        catalog = gen_catalog(seed, n_features=10, max_deps=2)
        comp = gui_development_composition(names[0])

        def owner_ws(network):
            return Workspace(owner=UserId(names[0]), compositions=(comp,))

        actions = []
        connected = set()
        t = 0
        for _ in range(rng.randint(5, 40)):
            t += rng.randint(1, 20)
            user = rng.choice(names)
            if user not in connected:
                actions.append((t, user, "connect", {}))
                connected.add(user)
                continue
            op = rng.choice(["contacts", "chat", "comps_get", "disconnect", "share"])
            if op == "chat":
                actions.append((t, user, "chat",
                                {"to": rng.choice(names), "text": "ping"}))
            elif op == "comps_get":
                actions.append((t, user, "comps_get", {"contact": names[0]}))
            elif op == "share":
                actions.append((t, user, "share", {"enabled": rng.random() < 0.5}))
            elif op == "disconnect":
                actions.append((t, user, "disconnect", {}))
                connected.discard(user)
            else:
                actions.append((t, user, "contacts", {}))
        return Scenario(users=users, rosters=rosters, catalog=catalog,
                        setups={names[0]: owner_ws}, actions=actions, seed=seed), connected

    @pytest.mark.parametrize("seed", range(20))
    def test_presence_converges_and_ordering_holds(self, tmp_path, seed):
        scenario, connected = self._random_scenario(seed)
        result = run_scenario(scenario, root=tmp_path)
        # presence convergence after quiescence: roster views of connected
        # clients match relay ground truth
        for user, client in result.clients.items():
            if user not in connected:
                continue
            for other, entry in client.roster.items():
                assert entry.online == (other in connected), \
                    f"seed={seed}: {user} sees {other} online={entry.online}"
        # no unsolicited composition data: clients that never asked hold no cache
        askers = {u for (_, u, op, _k) in scenario.actions if op == "comps_get"}
        for user, store in result.stores.items():
            if user not in askers:
                owner = sorted(scenario.users)[0]
                assert store.cache_get(UserId(owner)) is None


def test_chat_delivered_in_order(tmp_path):
    a, b = "a@lab", "b@lab"
    actions = [(10, a, "connect", {}), (20, b, "connect", {})]
    for i in range(10):
        actions.append((30 + i, a, "chat", {"to": b, "text": f"msg-{i}"}))
    scenario = Scenario(users={a: "t", b: "t"}, rosters={a: [b], b: [a]},
                        catalog=gen_catalog(1, 1), actions=actions)
    result = run_scenario(scenario, root=tmp_path)
    texts = [e.text for e in result.clients[b].events if isinstance(e, ChatEvent)]
    assert texts == [f"msg-{i}" for i in range(10)]
