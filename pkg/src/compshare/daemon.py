"""Local HTTP/WebSocket bridge between the client library and the web UI.

Loopback only, no auth between UI and daemon: this is a personal,
single-user bridge (never bind it to a non-loopback interface). Every
response body is a plain serialization of a client-library result — the
API layer adds no business logic of its own.
"""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import codec, resolver
from .client import (
    BaseClient,
    ChatEvent,
    ClientError,
    ErrorEvent,
    InstallProgressEvent,
    PresenceEvent,
    RequestError,
    SessionEvent,
)
from .model import ModelError, UserId
from .preview import annotation_documents

DEFAULT_DAEMON_PORT = 7478


class PlanRequest(BaseModel):
    user: str
    comp_id: str
    select: Optional[List[str]] = None


class InstallRequest(BaseModel):
    user: str
    comp_id: str
    select: Optional[List[str]] = None
    with_composition: bool = True
    force: bool = False


class ShareRequest(BaseModel):
    enabled: bool


class ChatRequest(BaseModel):
    to: str
    text: str


def event_document(event) -> Optional[dict]:
    """One delivery-stream event as a wire document (None: not exported)."""
    if isinstance(event, PresenceEvent):
        return {"type": "presence", "user": event.user,
                "online": event.online, "sharing": event.sharing}
    if isinstance(event, ChatEvent):
        return {"type": "chat", "sender": event.sender,
                "text": event.text, "sent_at": event.sent_at}
    if isinstance(event, InstallProgressEvent):
        return {"type": "install", "feature": event.feature,
                "version": event.version, "source": event.source}
    if isinstance(event, SessionEvent):
        return {"type": "session", "state": event.state}
    if isinstance(event, ErrorEvent):
        return {"type": "error", "code": event.code, "detail": event.detail}
    return None


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, resolver.ConflictRefused):
        return HTTPException(409, str(exc))
    if isinstance(exc, RequestError):
        if exc.code == "offline":
            return HTTPException(503, str(exc))
        if exc.code in ("unknown_recipient", "not_available"):
            return HTTPException(404, str(exc))
        return HTTPException(400, str(exc))
    if isinstance(exc, (ModelError, ValueError)):
        return HTTPException(400, str(exc))
    if isinstance(exc, ClientError):
        return HTTPException(503, str(exc))
    raise exc


def create_app(client: BaseClient, static_dir: Path = None) -> FastAPI:
    """Wrap one connected client in the local HTTP surface."""
    app = FastAPI(title="compshare daemon", openapi_url=None)

    def require_connected():
        if not client.connected:
            raise HTTPException(503, "disconnected from relay")

    def find_composition(comp_id: str):
        """Resolve an id against our own workspace, then contact caches."""
        own = client.workspace.find_composition(comp_id)
        if own is not None:
            return own
        for contact in client.roster:
            cached = client.store.cache_get(UserId(contact))
            if cached is None:
                continue
            for c in cached.compositions:
                if c.id == comp_id:
                    return c
        raise HTTPException(404, f"unknown composition {comp_id}")

    def run(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise _http_error(exc)

    @app.get("/contacts")
    def contacts():
        require_connected()
        entries = run(client.contacts)
        return [{"user": str(e.user), "online": e.online, "sharing": e.sharing}
                for e in entries]

    @app.get("/contacts/{user}/compositions")
    def contact_compositions(user: str):
        if user not in client.roster and client.connected:
            run(client.contacts)
        if user not in client.roster:
            raise HTTPException(404, f"unknown contact {user}")
        comps, cached, fetched_at = run(client.compositions_for, user)
        return {
            "cached": cached,
            "fetched_at": fetched_at,
            "compositions": [
                {"id": c.id, "name": c.name, "created_at": c.created_at,
                 "features": len(c.feature_refs)}
                for c in comps
            ],
        }

    @app.get("/compositions/{comp_id}")
    def composition(comp_id: str):
        return codec.composition_document(find_composition(comp_id))

    @app.get("/compositions/{comp_id}/screenshot")
    def screenshot(comp_id: str):
        c = find_composition(comp_id)
        return Response(content=c.screenshot, media_type="image/png")

    @app.get("/compositions/{comp_id}/annotations")
    def annotations(comp_id: str):
        c = find_composition(comp_id)
        names = {e.feature.id: e.feature.display_name
                 for e in client.catalog.entries.values()}
        return annotation_documents(c, feature_names=names)

    @app.post("/plan")
    def plan(request: PlanRequest):
        require_connected()
        _, p = run(client.plan, request.user, request.comp_id,
                   select=request.select)
        return resolver.plan_document(p)

    @app.post("/install")
    def install(request: InstallRequest):
        require_connected()
        result = run(client.install, request.user, request.comp_id,
                     select=request.select,
                     include_composition=request.with_composition,
                     force=request.force)
        return {"events": [{"id": str(e.feature), "version": str(e.version),
                            "source": e.source} for e in result.events]}

    @app.post("/share")
    def share(request: ShareRequest):
        run(client.set_sharing, request.enabled)
        return {"enabled": client.workspace.sharing_enabled}

    @app.post("/chat")
    def chat(request: ChatRequest):
        require_connected()
        msg = run(client.send_chat, request.to, request.text)
        return {"to": str(msg.to), "sent_at": msg.sent_at}

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()

        def forward(event):
            doc = event_document(event)
            if doc is not None:
                loop.call_soon_threadsafe(queue.put_nowait, doc)

        client.subscribe(forward)
        try:
            while True:
                await ws.send_json(await queue.get())
        except WebSocketDisconnect:
            pass
        finally:
            client._subscribers.remove(forward)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True))

    return app
