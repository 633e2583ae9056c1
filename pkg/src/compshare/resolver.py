"""Diff a shared composition against the local workspace and install.

The plan classifies the dependency closure of the user-selected refs
into already-present / missing / version-mismatch, and orders the
features to install so dependencies come first. Applying a plan is
additive and all-or-nothing; installed features are never removed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

from .model import (
    Catalog,
    Composition,
    DependencyCycle,
    FeatureId,
    UnresolvableRef,
    Version,
    Workspace,
    feature_closure,
)


class ResolverError(Exception):
    pass


class ConflictRefused(ResolverError):
    """Version mismatches present and force not given."""


class PayloadMissing(ResolverError):
    def __init__(self, fid: FeatureId, version: Version):
        self.fid, self.version = fid, version
        super().__init__(f"catalog has no payload bytes for {fid} {version}")


class StaleWorkspace(ResolverError):
    """The workspace changed between diff and apply."""


def workspace_fingerprint(w: Workspace) -> str:
    """Digest of the installed map; detects concurrent modification."""
    items = sorted((str(fid), str(v)) for fid, v in w.installed.items())
    h = hashlib.sha256(repr(items).encode())
    return h.hexdigest()


@dataclass(frozen=True)
class InstallEvent:
    feature: FeatureId
    version: Version
    source: str  # contact the composition came from

    def __str__(self) -> str:
        return f"installed {self.feature} {self.version} (from {self.source})"


@dataclass(frozen=True)
class InstallPlan:
    already_present: tuple = ()  # (FeatureId, Version) pairs, required versions
    missing: tuple = ()
    version_mismatch: tuple = ()  # (FeatureId, local Version, required Version)
    install_order: tuple = ()  # missing plus mismatches-to-upgrade, deps first
    include_composition: bool = True
    selected: tuple = ()  # the composition refs the user chose
    workspace_fingerprint: str = ""

    @property
    def is_noop(self) -> bool:
        return not self.missing and not self.version_mismatch


def plan_document(p: InstallPlan) -> dict:
    """An InstallPlan as a plain document for the CLI and the local API."""
    return {
        "already_present": [{"id": str(f), "version": str(v)}
                            for f, v in p.already_present],
        "missing": [{"id": str(f), "version": str(v)} for f, v in p.missing],
        "version_mismatch": [
            {"id": str(f), "local": str(lo), "required": str(req)}
            for f, lo, req in p.version_mismatch
        ],
        "install_order": [{"id": str(f), "version": str(v)}
                          for f, v in p.install_order],
        "include_composition": p.include_composition,
        "selected": [str(f) for f in p.selected],
    }


def validate_acyclic(cat: Catalog) -> Optional[DependencyCycle]:
    """None when the dependency graph is acyclic, else one witness cycle."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {key: WHITE for key in cat.entries}
    stack: list = []

    def edges(key):
        feature = cat.entries[key].feature
        for dep_id, dep_min in feature.dependencies:
            try:
                dep = cat.resolve(dep_id, dep_min)
            except UnresolvableRef:
                continue  # unsatisfiable edges cannot participate in a cycle
            yield (dep.id, dep.version)

    def dfs(key) -> Optional[DependencyCycle]:
        color[key] = GRAY
        stack.append(key)
        for nxt in edges(key):
            if color[nxt] == GRAY:
                start = stack.index(nxt)
                cycle = [k[0] for k in stack[start:]] + [nxt[0]]
                return DependencyCycle(cycle)
            if color[nxt] == WHITE:
                found = dfs(nxt)
                if found:
                    return found
        stack.pop()
        color[key] = BLACK
        return None

    for key in list(cat.entries):
        if color[key] == WHITE:
            found = dfs(key)
            if found:
                return found
    return None


def _topo_order(pairs: set, cat: Catalog) -> tuple:
    """Topological order of (FeatureId, Version) pairs, dependencies first.

    Ties broken by ascending FeatureId (Kahn's algorithm with a sorted
    ready set). Only edges between members of ``pairs`` matter.
    """
    members = set(pairs)
    dependents: dict = {p: [] for p in members}
    in_degree = {p: 0 for p in members}
    for fid, version in members:
        feature = cat.entries[(fid, version)].feature
        for dep_id, dep_min in feature.dependencies:
            dep = cat.resolve(dep_id, dep_min)
            dep_key = (dep.id, dep.version)
            if dep_key in members:
                dependents[dep_key].append((fid, version))
                in_degree[(fid, version)] += 1
    ready = sorted(p for p, d in in_degree.items() if d == 0)
    order = []
    while ready:
        current = ready.pop(0)
        order.append(current)
        newly = []
        for nxt in dependents[current]:
            in_degree[nxt] -= 1
            if in_degree[nxt] == 0:
                newly.append(nxt)
        ready = sorted(ready + newly)
    if len(order) != len(members):
        leftover = sorted(p for p in members if in_degree[p] > 0)
        raise DependencyCycle([p[0] for p in leftover])
    return tuple(order)


def diff(
    c: Composition,
    selected: Optional[set] = None,
    w: Workspace = None,
    cat: Catalog = None,
    include_composition: bool = True,
) -> InstallPlan:
    """Classify the closure of the selected refs against the workspace.

    ``selected`` is a set of FeatureIds drawn from the composition's refs;
    it defaults to all of them. Only the selected refs' closure is ever
    considered — never the sharer's full installation.
    """
    ref_ids = {fid for fid, _ in c.feature_refs}
    if selected is None:
        selected = ref_ids
    else:
        unknown = set(selected) - ref_ids
        if unknown:
            raise ValueError(f"selected features not in composition: {sorted(unknown)}")

    closure: set = set()
    for fid, version in c.feature_refs:
        if fid in selected:
            closure |= feature_closure(fid, version, cat)

    present, missing, mismatched = [], [], []
    for fid, required in sorted(closure):
        local = w.installed.get(fid)
        if local is None:
            missing.append((fid, required))
        elif local >= required:
            present.append((fid, local))
        else:
            mismatched.append((fid, local, required))

    to_install = set(missing) | {(fid, req) for fid, _, req in mismatched}
    order = _topo_order(to_install, cat)
    return InstallPlan(
        already_present=tuple(present),
        missing=tuple(missing),
        version_mismatch=tuple(mismatched),
        install_order=order,
        include_composition=include_composition,
        selected=tuple(sorted(selected)),
        workspace_fingerprint=workspace_fingerprint(w),
    )


@dataclass(frozen=True)
class ApplyResult:
    workspace: Workspace
    events: tuple = ()  # tuple[InstallEvent, ...]


def apply(
    plan: InstallPlan,
    c: Composition,
    w: Workspace,
    cat: Catalog,
    force: bool = False,
    source: str = "",
) -> ApplyResult:
    """Install the planned features, and optionally the composition itself.

    All-or-nothing: validation happens up front, against an unmodified
    workspace, and the new workspace value is built in one step.
    """
    if workspace_fingerprint(w) != plan.workspace_fingerprint:
        raise StaleWorkspace("workspace changed since the plan was computed")
    if plan.version_mismatch and not force:
        raise ConflictRefused(
            "version mismatches present: "
            + ", ".join(f"{fid} {old}<{new}" for fid, old, new in plan.version_mismatch)
        )

    to_install = plan.install_order if force else tuple(
        p for p in plan.install_order if p in set(plan.missing)
    )
    for fid, version in to_install:
        if (fid, version) not in cat.entries:
            raise UnresolvableRef(fid, version)
        if not cat.entries[(fid, version)].payload:
            raise PayloadMissing(fid, version)

    installed = dict(w.installed)
    events = []
    for fid, version in to_install:
        installed[fid] = version
        events.append(InstallEvent(fid, version, source or str(c.owner)))

    compositions = w.compositions
    if plan.include_composition and all(existing.id != c.id for existing in compositions):
        compositions = compositions + (c,)
    new_ws = replace(w, installed=installed, compositions=compositions)
    return ApplyResult(workspace=new_ws, events=tuple(events))
