import random

import pytest
from hypothesis import given, strategies as st

from compshare.model import (
    Catalog,
    Composition,
    DependencyCycle,
    Feature,
    FeatureId,
    PartId,
    Placement,
    Rect,
    UnknownComposition,
    UnresolvableRef,
    UserId,
    Version,
    Workspace,
    composition_features,
    feature_closure,
    search_catalog,
    set_active,
)
from compshare.simharness import gen_catalog

from conftest import closure_oracle, random_composition


def feat(fid, version="1.0.0", deps=(), category="GUI", parts=(), name=None):
    return Feature(
        id=FeatureId(fid), version=Version.parse(version),
        display_name=name or fid, description=f"the {fid} feature",
        category=category,
        dependencies=tuple((FeatureId(d), Version.parse(v)) for d, v in deps),
        parts=tuple(PartId(p) for p in parts),
    )


class TestIdentifiers:
    def test_feature_id_lowercases(self):
        assert FeatureId("Org.Acme.GUIBuilder").value == "org.acme.guibuilder"

    @pytest.mark.parametrize("bad", ["", "has space", "Ünïcode", "a/b"])
    def test_feature_id_rejects(self, bad):
        with pytest.raises(ValueError):
            FeatureId(bad)

    @pytest.mark.parametrize("bad", ["", "noatsign", "@realm", "name@", "a@b@c"])
    def test_user_id_rejects(self, bad):
        with pytest.raises(ValueError):
            UserId(bad)

    def test_version_round_trip_and_order(self):
        assert str(Version.parse("1.2.3")) == "1.2.3"
        assert Version.parse("1.2.3") < Version.parse("1.10.0") < Version.parse("2.0.0")

    @pytest.mark.parametrize("bad", ["1.2", "1.2.3.4", "v1.2.3", "1.-2.3", ""])
    def test_version_rejects(self, bad):
        with pytest.raises(ValueError):
            Version.parse(bad)


class TestFeatureInvariants:
    def test_no_self_dependency(self):
        with pytest.raises(ValueError):
            feat("a.b", deps=[("a.b", "1.0.0")])

    def test_unique_dependency_ids(self):
        with pytest.raises(ValueError):
            feat("a.b", deps=[("c.d", "1.0.0"), ("c.d", "2.0.0")])

    def test_unique_parts(self):
        with pytest.raises(ValueError):
            feat("a.b", parts=["p", "p"])


class TestRect:
    @given(
        x=st.integers(0, 999_999), y=st.integers(0, 999_999),
        w=st.integers(1, 1_000_000), h=st.integers(1, 1_000_000),
    )
    def test_construction_enforces_unit_square(self, x, y, w, h):
        if x + w <= 1_000_000 and y + h <= 1_000_000:
            r = Rect.from_micro(x, y, w, h)
            assert r.area > 0
        else:
            with pytest.raises(ValueError):
                Rect.from_micro(x, y, w, h)

    @pytest.mark.parametrize("args", [(0, 0, 0, 0.5), (0, 0, 0.5, 0), (-0.1, 0, 0.5, 0.5)])
    def test_degenerate_rejected(self, args):
        with pytest.raises(ValueError):
            Rect(*args)


class TestComposition:
    def test_placement_must_reference_a_ref(self):
        with pytest.raises(ValueError):
            Composition(
                name="x", owner=UserId("a@b"),
                feature_refs=((FeatureId("f.one"), Version(1, 0, 0)),),
                placements=(Placement(PartId("p"), FeatureId("f.other"),
                                      Rect(0, 0, 1, 1)),),
            )

    def test_refs_unique_by_id(self):
        with pytest.raises(ValueError):
            Composition(
                name="x", owner=UserId("a@b"),
                feature_refs=(
                    (FeatureId("f.one"), Version(1, 0, 0)),
                    (FeatureId("f.one"), Version(2, 0, 0)),
                ),
            )

    def test_input_order_is_normalized(self, rng):
        c = random_composition(rng, n_refs=4, n_placements=3)
        shuffled = Composition(
            name=c.name, owner=c.owner,
            feature_refs=tuple(reversed(c.feature_refs)),
            placements=tuple(reversed(c.placements)),
            screenshot=c.screenshot, created_at=c.created_at,
        )
        assert shuffled == c


class TestClosure:
    def test_no_dependencies_is_reflexive(self):
        cat = Catalog.of([feat("a.x")])
        assert feature_closure(FeatureId("a.x"), Version(1, 0, 0), cat) == {
            (FeatureId("a.x"), Version(1, 0, 0))
        }

    def test_chain(self):
        cat = Catalog.of([
            feat("a.x", deps=[("b.x", "1.0.0")]),
            feat("b.x", deps=[("c.x", "1.0.0")]),
            feat("c.x"),
        ])
        got = feature_closure(FeatureId("a.x"), Version(1, 0, 0), cat)
        assert {fid.value for fid, _ in got} == {"a.x", "b.x", "c.x"}

    def test_lowest_satisfying_version_wins(self):
        cat = Catalog.of([
            feat("a.x", deps=[("b.x", "1.1.0")]),
            feat("b.x", "1.0.0"), feat("b.x", "1.2.0"), feat("b.x", "2.0.0"),
        ])
        got = feature_closure(FeatureId("a.x"), Version(1, 0, 0), cat)
        assert (FeatureId("b.x"), Version(1, 2, 0)) in got

    def test_unresolvable(self):
        cat = Catalog.of([feat("a.x", deps=[("b.x", "3.0.0")]), feat("b.x", "1.0.0")])
        with pytest.raises(UnresolvableRef):
            feature_closure(FeatureId("a.x"), Version(1, 0, 0), cat)

    def test_cycle_detected(self):
        cat = Catalog.of([
            feat("a.x", deps=[("b.x", "1.0.0")]),
            feat("b.x", deps=[("a.x", "1.0.0")]),
        ])
        with pytest.raises(DependencyCycle) as exc:
            feature_closure(FeatureId("a.x"), Version(1, 0, 0), cat)
        assert len(exc.value.cycle) >= 3

    def test_matches_fixpoint_oracle_on_random_dags(self):
        for seed in range(30):
            cat = gen_catalog(seed, n_features=40, max_deps=4)
            for key in sorted(cat.entries):
                fid, version = key
                assert feature_closure(fid, version, cat) == \
                    closure_oracle(fid, version, cat), f"seed={seed} {fid}"

    def test_monotone_under_catalog_growth(self):
        # adding entries for previously unknown feature ids never changes
        # (in particular never shrinks) an already computable closure
        cat = gen_catalog(3, n_features=40, max_deps=3)
        bigger = gen_catalog(3, n_features=60, max_deps=3)
        assert set(cat.entries) <= set(bigger.entries)
        for fid, version in cat.entries:
            before = feature_closure(fid, version, cat)
            after = feature_closure(fid, version, bigger)
            assert before <= after


class TestCompositionFeatures:
    def test_empty_refs(self):
        cat = Catalog.of([feat("a.x")])
        c = Composition(name="empty", owner=UserId("a@b"))
        assert composition_features(c, cat) == set()

    def test_includes_dependency_closure(self):
        cat = Catalog.of([feat("a.x", deps=[("b.x", "1.0.0")]), feat("b.x", "1.2.0")])
        c = Composition(
            name="c", owner=UserId("a@b"),
            feature_refs=((FeatureId("a.x"), Version(1, 0, 0)),),
        )
        got = composition_features(c, cat)
        assert {(f.id.value, str(f.version)) for f in got} == \
            {("a.x", "1.0.0"), ("b.x", "1.2.0")}

    def test_equals_refs_iff_no_dependencies(self):
        cat = gen_catalog(11, n_features=30, max_deps=0)
        rng = random.Random(5)
        pool = sorted(cat.entries)
        refs = rng.sample(pool, 6)
        c = Composition(name="c", owner=UserId("a@b"), feature_refs=tuple(refs))
        got = composition_features(c, cat)
        assert {(f.id, f.version) for f in got} == set(refs)

    def test_scale_matches_oracle(self):
        cat = gen_catalog(7, n_features=196, max_deps=4)
        rng = random.Random(7)
        refs = rng.sample(sorted(cat.entries), 12)
        c = Composition(name="big", owner=UserId("a@b"), feature_refs=tuple(refs))
        expected = set()
        for fid, version in refs:
            expected |= closure_oracle(fid, version, cat)
        got = {(f.id, f.version) for f in composition_features(c, cat)}
        assert got == expected


class TestSetActive:
    def _workspace(self, rng):
        from compshare.codec import with_id
        c1 = with_id(random_composition(rng, n_refs=0, n_placements=0))
        c2 = with_id(random_composition(rng, n_refs=0, n_placements=0))
        w = Workspace(owner=UserId("a@b"), compositions=(c1, c2))
        return w, c1, c2

    def test_last_write_wins(self, rng):
        w, c1, c2 = self._workspace(rng)
        assert set_active(set_active(w, c1.id), c2.id).active == c2.id

    def test_idempotent(self, rng):
        w, c1, _ = self._workspace(rng)
        assert set_active(w, c1.id) == set_active(set_active(w, c1.id), c1.id)

    def test_unknown_composition(self, rng):
        w, _, _ = self._workspace(rng)
        with pytest.raises(UnknownComposition):
            set_active(w, "0" * 64)

    def test_never_mutates_installed_or_compositions(self, rng):
        w, c1, _ = self._workspace(rng)
        w2 = set_active(w, c1.id)
        assert w2.installed == w.installed
        assert w2.compositions == w.compositions


class TestSearchCatalog:
    def _catalog(self):
        return Catalog.of([
            feat("g.one", name="Alpha GUI", category="GUI"),
            feat("g.two", name="Beta GUI", category="GUI"),
            feat("g.three", name="Gamma GUI", category="GUI"),
            feat("m.one", name="Modeler", category="Modeling"),
            feat("m.two", name="Flowchart", category="Modeling"),
            feat("t.one", name="Runner", category="Testing"),
            feat("t.two", name="Coverage", category="Testing"),
            feat("t.three", name="Mocks", category="Testing"),
        ])

    def test_no_filters_returns_all_sorted(self):
        cat = self._catalog()
        got = search_catalog(cat)
        assert len(got) == 8
        assert [f.display_name for f in got] == sorted(f.display_name for f in got)

    def test_category_filter_matches_exhaustive_scan(self):
        cat = self._catalog()
        got = search_catalog(cat, category="GUI")
        expected = [e.feature for e in cat.entries.values() if e.feature.category == "GUI"]
        assert sorted(f.id for f in got) == sorted(f.id for f in expected)
        assert len(got) == 3

    def test_text_filter_case_insensitive(self):
        cat = self._catalog()
        assert [f.display_name for f in search_catalog(cat, text="gui")] == \
            ["Alpha GUI", "Beta GUI", "Gamma GUI"]

    def test_no_match_and_unknown_category(self):
        cat = self._catalog()
        assert search_catalog(cat, text="zzz-no-match") == []
        assert search_catalog(cat, category="Nope") == []

    def test_version_descending_within_name(self):
        cat = Catalog.of([
            feat("v.x", "1.0.0", name="Same"), feat("v.x", "2.0.0", name="Same"),
        ])
        got = search_catalog(cat)
        assert [str(f.version) for f in got] == ["2.0.0", "1.0.0"]


def test_catalog_validate():
    good = Catalog.of([feat("a.x", deps=[("b.x", "1.0.0")]), feat("b.x", "1.5.0")])
    good.validate()
    bad = Catalog.of([feat("a.x", deps=[("b.x", "2.0.0")]), feat("b.x", "1.5.0")])
    with pytest.raises(UnresolvableRef):
        bad.validate()
