"""On-disk persistence: workspace, catalog, blobs, and the offline cache
of contacts' compositions.

Layout (one directory per store):

    workspace.json         canonical workspace document (+ .bak of the prior version)
    compositions/<id>.json canonical composition documents
    blobs/<digest>         content-addressed screenshots and feature payloads
    cache/<user>.json      per-contact cache entries
    catalog.json           feature metadata; payloads live in blobs/
    config.json            relay address and credentials for the CLI/daemon
    lock                   exclusive-writer lock file

Compositions and blobs are shared between the workspace and the cache,
so caching a contact's composition dedups against local data for free.
All writes are atomic (temp file + rename) and every load verifies
content hashes; a corrupted file surfaces as CorruptStore, never as
silently wrong data.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import codec
from .model import Composition, FeatureId, UserId, Version, Workspace, Catalog, CatalogEntry, Feature, PartId


class StoreError(Exception):
    pass


class CorruptStore(StoreError):
    pass


class LockHeld(StoreError):
    pass


@dataclass(frozen=True)
class CacheEntry:
    contact: UserId
    compositions: tuple  # tuple[Composition, ...]
    fetched_at: int  # UTC seconds


def default_home() -> Path:
    env = os.environ.get("COMPSHARE_HOME")
    if env:
        return Path(env)
    base = os.environ.get("XDG_DATA_HOME", os.path.expanduser("~/.local/share"))
    return Path(base) / "compshare"


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Store:
    """Single-writer, multi-reader store rooted at one directory."""

    def __init__(self, root: Path = None):
        self.root = Path(root) if root else default_home()
        self._lock_depth = 0

    # -- locking --------------------------------------------------------

    @property
    def _lock_path(self) -> Path:
        return self.root / "lock"

    @contextmanager
    def writer(self):
        """Exclusive writer lock; fails fast when another writer holds it."""
        if self._lock_depth == 0:
            self.root.mkdir(parents=True, exist_ok=True)
            try:
                fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                raise LockHeld(f"another writer holds {self._lock_path}") from None
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
        self._lock_depth += 1
        try:
            yield self
        finally:
            self._lock_depth -= 1
            if self._lock_depth == 0:
                try:
                    os.unlink(self._lock_path)
                except FileNotFoundError:
                    pass

    # -- blobs ----------------------------------------------------------

    def put_blob(self, data: bytes) -> str:
        digest = codec.sha256_hex(data)
        path = self.root / "blobs" / digest
        if not path.exists():
            _atomic_write(path, data)
        return digest

    def get_blob(self, digest: str) -> bytes:
        path = self.root / "blobs" / digest
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise CorruptStore(f"missing blob {digest}") from None
        if codec.sha256_hex(data) != digest:
            raise CorruptStore(f"blob {digest} fails digest verification")
        return data

    def has_blob(self, digest: str) -> bool:
        return (self.root / "blobs" / digest).exists()

    # -- compositions ---------------------------------------------------

    def put_composition(self, c: Composition) -> str:
        c = codec.with_id(c) if c.id is None else c
        self.put_blob(c.screenshot)
        _atomic_write(self.root / "compositions" / f"{c.id}.json",
                      codec.serialize_composition(c))
        return c.id

    def get_composition(self, comp_id: str) -> Composition:
        path = self.root / "compositions" / f"{comp_id}.json"
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise CorruptStore(f"missing composition {comp_id}") from None
        try:
            doc = codec.parse_document(data, strict=True)
            screenshot = self.get_blob(doc["screenshot"]) if isinstance(doc, dict) else b""
            comp = codec.deserialize_composition(data, screenshot=screenshot)
        except (codec.CodecError, KeyError, TypeError) as e:
            raise CorruptStore(f"composition {comp_id}: {e}") from e
        if comp.id != comp_id:
            raise CorruptStore(f"composition file {comp_id} contains id {comp.id}")
        return comp

    # -- workspace ------------------------------------------------------

    @property
    def _workspace_path(self) -> Path:
        return self.root / "workspace.json"

    def _workspace_doc(self, w: Workspace) -> dict:
        return {
            "format": 1,
            "owner": w.owner.value,
            "installed": {str(fid): str(v) for fid, v in w.installed.items()},
            "compositions": sorted(c.id for c in w.compositions),
            "active": w.active or "",
            "sharing_enabled": w.sharing_enabled,
        }

    def save_workspace(self, w: Workspace) -> None:
        with self.writer():
            for c in w.compositions:
                self.put_composition(c)
            path = self._workspace_path
            if path.exists():
                backup = path.with_suffix(".json.bak")
                _atomic_write(backup, path.read_bytes())
            _atomic_write(path, codec.canonical_bytes(self._workspace_doc(w)))

    def _load_workspace_file(self, path: Path) -> Workspace:
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise
        try:
            doc = codec.parse_document(data, strict=True)
            owner = UserId(doc["owner"])
            installed = {
                FeatureId(fid): Version.parse(v) for fid, v in doc["installed"].items()
            }
            comps = tuple(self.get_composition(cid) for cid in doc["compositions"])
            active = doc["active"] or None
            return Workspace(
                owner=owner,
                installed=installed,
                compositions=comps,
                active=active,
                sharing_enabled=bool(doc["sharing_enabled"]),
            )
        except CorruptStore:
            raise
        except (codec.CodecError, KeyError, TypeError, ValueError, AttributeError) as e:
            raise CorruptStore(f"workspace: {e}") from e

    def load_workspace(self, default_owner: UserId = None) -> Workspace:
        """Load the workspace; a fresh store yields an empty default one."""
        try:
            return self._load_workspace_file(self._workspace_path)
        except FileNotFoundError:
            if default_owner is None:
                raise CorruptStore("no workspace and no default owner") from None
            return Workspace(owner=default_owner)

    def load_backup_workspace(self) -> Workspace:
        """The prior consistent state, for recovery after CorruptStore."""
        try:
            return self._load_workspace_file(self._workspace_path.with_suffix(".json.bak"))
        except FileNotFoundError:
            raise CorruptStore("no backup workspace") from None

    # -- catalog --------------------------------------------------------

    def save_catalog(self, cat: Catalog) -> None:
        with self.writer():
            entries = []
            for (fid, version), entry in sorted(cat.entries.items()):
                f = entry.feature
                entries.append({
                    "id": fid.value,
                    "version": str(version),
                    "display_name": f.display_name,
                    "description": f.description,
                    "category": f.category,
                    "dependencies": [
                        {"id": d.value, "version": str(m)} for d, m in f.dependencies
                    ],
                    "parts": [p.value for p in f.parts],
                    "payload": self.put_blob(entry.payload) if entry.payload else "",
                })
            doc = {"format": 1, "categories": list(cat.categories), "entries": entries}
            _atomic_write(self.root / "catalog.json", codec.canonical_bytes(doc))

    def load_catalog(self) -> Catalog:
        path = self.root / "catalog.json"
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            return Catalog()
        try:
            doc = codec.parse_document(data, strict=True)
            entries = {}
            for e in doc["entries"]:
                feature = Feature(
                    id=FeatureId(e["id"]),
                    version=Version.parse(e["version"]),
                    display_name=e["display_name"],
                    description=e["description"],
                    category=e["category"],
                    dependencies=tuple(
                        (FeatureId(d["id"]), Version.parse(d["version"]))
                        for d in e["dependencies"]
                    ),
                    parts=tuple(PartId(p) for p in e["parts"]),
                )
                payload = self.get_blob(e["payload"]) if e["payload"] else b""
                entries[(feature.id, feature.version)] = CatalogEntry(feature, payload)
            return Catalog(entries=entries, categories=tuple(doc["categories"]))
        except CorruptStore:
            raise
        except (codec.CodecError, KeyError, TypeError, ValueError) as e:
            raise CorruptStore(f"catalog: {e}") from e

    # -- offline cache of contacts' compositions ------------------------

    def _cache_path(self, contact: UserId) -> Path:
        return self.root / "cache" / f"{contact.value}.json"

    def cache_put(self, contact: UserId, comps, fetched_at: int) -> CacheEntry:
        """Wholesale-replace the contact's cached compositions."""
        with self.writer():
            previous = self.cache_get(contact)
            if previous is not None:
                fetched_at = max(fetched_at, previous.fetched_at)
            ids = []
            for c in comps:
                ids.append(self.put_composition(c))
            doc = {
                "format": 1,
                "contact": contact.value,
                "fetched_at": fetched_at,
                "compositions": sorted(ids),
            }
            _atomic_write(self._cache_path(contact), codec.canonical_bytes(doc))
            return CacheEntry(contact=contact, compositions=tuple(comps),
                              fetched_at=fetched_at)

    def cache_get(self, contact: UserId) -> Optional[CacheEntry]:
        path = self._cache_path(contact)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            return None
        try:
            doc = codec.parse_document(data, strict=True)
            comps = tuple(self.get_composition(cid) for cid in doc["compositions"])
            return CacheEntry(
                contact=UserId(doc["contact"]),
                compositions=comps,
                fetched_at=int(doc["fetched_at"]),
            )
        except CorruptStore:
            raise
        except (codec.CodecError, KeyError, TypeError, ValueError) as e:
            raise CorruptStore(f"cache entry for {contact}: {e}") from e

    # -- CLI/daemon configuration ---------------------------------------

    def save_config(self, config: dict) -> None:
        _atomic_write(self.root / "config.json",
                      json.dumps(config, indent=2, sort_keys=True).encode())

    def load_config(self) -> dict:
        try:
            return json.loads((self.root / "config.json").read_text())
        except FileNotFoundError:
            return {}
        except json.JSONDecodeError as e:
            raise CorruptStore(f"config: {e}") from e
