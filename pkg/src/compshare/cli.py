"""Command-line surface over the client library.

Line-oriented plain text by default; --json emits canonical documents.
Exit codes: 1 usage, 2 network, 3 conflict, 4 corrupt store.
"""

from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import click

from . import codec, resolver
from .client import ChatEvent, ClientError, ErrorEvent, PresenceEvent, RequestError, RequestTimeout, TcpClient
from .model import (
    Composition,
    FeatureId,
    ModelError,
    PartId,
    Placement,
    Rect,
    UserId,
    Version,
    set_active,
)
from .preview import annotation_documents
from .protocol import DEFAULT_PORT
from .relay import RelayServer, load_user_table
from .store import CorruptStore, LockHeld, Store

EXIT_USAGE = 1
EXIT_NETWORK = 2
EXIT_CONFLICT = 3
EXIT_CORRUPT = 4


def _clock():
    fake = os.environ.get("COMPSHARE_CLOCK")
    return (lambda: int(fake)) if fake else (lambda: int(time.time()))


def _store() -> Store:
    return Store()


def _load_workspace(store: Store):
    user = store.load_config().get("user")
    return store.load_workspace(default_owner=UserId(user) if user else None)


def _open_client(store: Store) -> TcpClient:
    config = store.load_config()
    relay = os.environ.get("COMPSHARE_RELAY") or config.get("relay")
    user, token = config.get("user"), config.get("token")
    if not (relay and user and token):
        raise click.UsageError("not configured; run `compshare connect` first")
    client = TcpClient(UserId(user), token, store, relay=relay, clock=_clock())
    client.connect()
    return client


def _echo_json(obj) -> None:
    click.echo(codec.canonical_bytes(obj).decode())


@click.group()
@click.option("--json", "as_json", is_flag=True, help="emit canonical documents")
@click.pass_context
def cli(ctx, as_json):
    """Share component compositions with your contacts."""
    ctx.obj = {"json": as_json}


@cli.command()
@click.option("--relay", required=True, metavar="HOST:PORT")
@click.option("--user", "user", required=True, metavar="NAME@REALM")
@click.option("--token", required=True)
def connect(relay, user, token):
    """Verify credentials against the relay and remember them."""
    store = _store()
    store.save_config({"relay": relay, "user": user, "token": token})
    client = TcpClient(UserId(user), token, store, relay=relay, clock=_clock())
    client.connect()
    client.close()
    click.echo(f"connected to {relay} as {user}")


@cli.command()
@click.pass_context
def contacts(ctx):
    """Roster: user, online, sharing."""
    client = _open_client(_store())
    try:
        entries = client.contacts()
    finally:
        client.close()
    if ctx.obj["json"]:
        _echo_json([{"user": str(e.user), "online": e.online, "sharing": e.sharing}
                    for e in entries])
        return
    for e in entries:
        click.echo(f"{e.user}\t{'online' if e.online else 'offline'}"
                   f"\t{'sharing' if e.sharing else 'not-sharing'}")


def _comps_for(client, user):
    return client.compositions_for(user)


@cli.command()
@click.argument("user")
@click.pass_context
def comps(ctx, user):
    """List a contact's compositions (live, or from the offline cache)."""
    client = _open_client(_store())
    try:
        comp_list, cached, fetched_at = _comps_for(client, user)
    finally:
        client.close()
    if ctx.obj["json"]:
        _echo_json({
            "cached": cached,
            "fetched_at": fetched_at,
            "compositions": [codec.composition_document(c) for c in comp_list],
        })
        return
    marker = f" (cached at {fetched_at})" if cached else ""
    for c in comp_list:
        click.echo(f"{c.id}\t{c.name}\t{len(c.feature_refs)} features{marker}")


@cli.command()
@click.argument("user")
@click.argument("comp_id")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_context
def preview(ctx, user, comp_id, out):
    """Write a composition's screenshot and annotation table."""
    client = _open_client(_store())
    try:
        comp, _, _ = client.find_composition(user, comp_id)
        refs = dict(comp.feature_refs)
        for p in comp.placements:
            key = (p.feature, refs[p.feature])
            if key not in client.catalog.entries:
                try:
                    client.fetch_feature(user, *key)
                except (ClientError, RequestError):
                    pass  # offline sharer: fall back to feature ids
        names = {e.feature.id: e.feature.display_name
                 for e in client.catalog.entries.values()}
    finally:
        client.close()
    rows = annotation_documents(comp, feature_names=names)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "screenshot.png").write_bytes(comp.screenshot)
        with open(out / "annotations.txt", "w") as f:
            for r in rows:
                f.write(f"{r['part']}\t{r['feature']}\t{r['display_name']}\n")
    if ctx.obj["json"]:
        _echo_json(rows)
        return
    for r in rows:
        click.echo(f"{r['part']}\t{r['feature']}\t{r['display_name']}")


def _parse_select(select):
    return [s.strip() for s in select.split(",") if s.strip()] if select else None


def _plan_lines(p):
    lines = []
    for fid, version in p.already_present:
        lines.append(f"present\t{fid}\t{version}")
    for fid, version in p.missing:
        lines.append(f"missing\t{fid}\t{version}")
    for fid, local, required in p.version_mismatch:
        lines.append(f"mismatch\t{fid}\tlocal={local}\trequired={required}")
    return lines


@cli.command()
@click.argument("user")
@click.argument("comp_id")
@click.option("--select", default=None, metavar="F1,F2")
@click.pass_context
def plan(ctx, user, comp_id, select):
    """Show what installing a composition would change."""
    client = _open_client(_store())
    try:
        _, p = client.plan(user, comp_id, select=_parse_select(select))
    finally:
        client.close()
    if ctx.obj["json"]:
        _echo_json(resolver.plan_document(p))
        return
    if p.is_noop:
        click.echo("nothing to install")
        return
    for line in _plan_lines(p):
        click.echo(line)


@cli.command()
@click.argument("user")
@click.argument("comp_id")
@click.option("--select", default=None, metavar="F1,F2")
@click.option("--with-composition/--no-composition", default=True)
@click.option("--force", is_flag=True)
@click.pass_context
def install(ctx, user, comp_id, select, with_composition, force):
    """Diff and apply: install missing features, optionally the layout too."""
    client = _open_client(_store())
    try:
        result = client.install(user, comp_id, select=_parse_select(select),
                                include_composition=with_composition, force=force)
    finally:
        client.close()
    if ctx.obj["json"]:
        _echo_json([{"id": str(e.feature), "version": str(e.version),
                     "source": e.source} for e in result.events])
        return
    for event in result.events:
        click.echo(f"installed {event.feature} {event.version} (from {event.source})")
    if with_composition:
        click.echo(f"copied composition {comp_id}")


@cli.command()
@click.argument("state", type=click.Choice(["on", "off"]))
def share(state):
    """Toggle whether contacts may browse our compositions."""
    store = _store()
    client = _open_client(store)
    try:
        client.set_sharing(state == "on")
    finally:
        client.close()
    click.echo(f"sharing {state}")


@cli.command()
@click.argument("user", required=False)
@click.argument("text", required=False)
@click.option("--listen", is_flag=True, help="stream incoming chat")
def chat(user, text, listen):
    """Send a chat message, or stream incoming ones."""
    client = _open_client(_store())
    try:
        if listen:
            click.echo("listening; ctrl-c to stop")
            try:
                seen = 0
                while True:
                    time.sleep(0.1)
                    for event in client.events[seen:]:
                        seen += 1
                        if isinstance(event, ChatEvent):
                            click.echo(f"{event.sent_at} {event.sender}: {event.text}")
            except KeyboardInterrupt:
                pass
            return
        if not user or text is None:
            raise click.UsageError("chat USER TEXT, or chat --listen")
        client.send_chat(user, text)
        click.echo(f"sent to {user}")
    finally:
        client.close()


@cli.group()
def compose():
    """Manage local compositions."""


@compose.command("list")
@click.pass_context
def compose_list(ctx):
    store = _store()
    w = _load_workspace(store)
    if ctx.obj["json"]:
        _echo_json([codec.composition_document(c) for c in w.compositions])
        return
    for c in w.compositions:
        marker = " *active" if w.active == c.id else ""
        click.echo(f"{c.id}\t{c.name}\t{len(c.feature_refs)} features{marker}")


@compose.command("capture")
@click.argument("name")
@click.option("--ref", "refs", multiple=True, metavar="FEATURE@VERSION",
              help="feature reference; defaults to every installed feature")
@click.option("--placement", "placements", multiple=True,
              metavar="PART:FEATURE:x,y,w,h", help="micro-unit region")
@click.option("--screenshot", type=click.Path(path_type=Path), default=None)
def compose_capture(name, refs, placements, screenshot):
    """Capture a new composition from the local workspace."""
    store = _store()
    w = _load_workspace(store)
    if refs:
        parsed_refs = []
        for ref in refs:
            fid, _, version = ref.partition("@")
            parsed_refs.append((FeatureId(fid), Version.parse(version)))
    else:
        parsed_refs = sorted(w.installed.items())
    parsed_placements = []
    for spec_text in placements:
        part, feature, rect_text = spec_text.split(":")
        x, y, wd, ht = (int(v) for v in rect_text.split(","))
        parsed_placements.append(Placement(
            part=PartId(part), feature=FeatureId(feature),
            region=Rect.from_micro(x, y, wd, ht)))
    comp = codec.with_id(Composition(
        name=name, owner=w.owner,
        feature_refs=tuple(parsed_refs),
        placements=tuple(parsed_placements),
        screenshot=screenshot.read_bytes() if screenshot else b"",
        created_at=_clock()(),
    ))
    store.save_workspace(replace(w, compositions=w.compositions + (comp,)))
    click.echo(comp.id)


@compose.command("activate")
@click.argument("comp_id")
def compose_activate(comp_id):
    store = _store()
    store.save_workspace(set_active(_load_workspace(store), comp_id))
    click.echo(f"active composition: {comp_id}")


@cli.command()
@click.option("--port", default=DEFAULT_PORT, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--users", "users_file", required=True,
              type=click.Path(exists=True, path_type=Path),
              help='user table: one "user@realm token" per line')
@click.option("--rosters", "rosters_file", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="JSON object mapping each user to their contact list")
def relay(port, host, users_file, rosters_file):
    """Run the relay server."""
    users = load_user_table(users_file)
    rosters = json.loads(rosters_file.read_text())
    server = RelayServer(users, rosters, host=host, port=port)
    server.start()
    click.echo(f"relay listening on {host}:{server.port}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        server.stop()


@cli.command()
@click.option("--port", default=7478, show_default=True)
@click.option("--static", "static_dir", default=None,
              type=click.Path(exists=True, path_type=Path),
              help="directory of web UI files to serve at /")
def daemon(port, static_dir):
    """Run the local HTTP/WebSocket bridge for the web UI."""
    import uvicorn

    from .daemon import create_app

    store = _store()
    client = _open_client(store)
    app = create_app(client, static_dir=static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except ModelError as e:
        click.echo(f"usage error: {e}", err=True)
        return EXIT_USAGE
    except resolver.ConflictRefused as e:
        click.echo(f"conflict: {e}", err=True)
        return EXIT_CONFLICT
    except (CorruptStore, LockHeld) as e:
        click.echo(f"store error: {e}", err=True)
        return EXIT_CORRUPT
    except RequestError as e:
        if e.code == "sharing_disabled":
            click.echo("contact is not sharing their compositions", err=True)
        else:
            click.echo(f"request failed: {e}", err=True)
        return EXIT_NETWORK
    except (ClientError, RequestTimeout, OSError) as e:
        click.echo(f"network error: {e}", err=True)
        return EXIT_NETWORK


if __name__ == "__main__":
    sys.exit(main())
