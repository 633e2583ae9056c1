"""One-process demo stack: relay + a sharing peer + a local daemon.

Starts everything on ephemeral ports, prints a single JSON line with the
addresses, then runs until stdin closes. Used by the web UI's end-to-end
tests and handy for manual UI development:

    python3 -m compshare.devstack --root /tmp/stack
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import threading
import time
from pathlib import Path

import uvicorn

from .client import TcpClient
from .daemon import create_app
from .model import UserId, Workspace
from .relay import RelayServer
from .simharness import gui_development_catalog, gui_development_composition
from .store import Store

JOHN, PETER = "john@lab", "peter@lab"
USERS = {JOHN: "jt", PETER: "pt"}
ROSTERS = {JOHN: [PETER], PETER: [JOHN]}


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def build_stack(root: Path, static_dir: Path = None):
    """Wire up relay, John (sharing), and Peter's daemon app."""
    relay = RelayServer(USERS, ROSTERS, port=0)
    relay.start()

    catalog = gui_development_catalog()
    comp = gui_development_composition(JOHN)
    john_store = Store(root / "john")
    john_store.save_workspace(Workspace(
        owner=UserId(JOHN),
        installed={e.feature.id: e.feature.version
                   for e in catalog.entries.values()},
        compositions=(comp,),
    ))
    john = TcpClient(UserId(JOHN), USERS[JOHN], john_store,
                     relay=f"127.0.0.1:{relay.port}", catalog=catalog)
    john.connect()

    peter = TcpClient(UserId(PETER), USERS[PETER], Store(root / "peter"),
                      relay=f"127.0.0.1:{relay.port}", catalog=catalog)
    peter.connect()

    app = create_app(peter, static_dir=static_dir)
    return relay, john, peter, app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", type=Path, required=True,
                        help="directory for the stores")
    parser.add_argument("--static", type=Path, default=None,
                        help="web UI files to serve at /")
    args = parser.parse_args(argv)

    relay, john, peter, app = build_stack(args.root, static_dir=args.static)
    port = _free_port()
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    while not server.started:
        time.sleep(0.01)

    print(json.dumps({"daemon": f"http://127.0.0.1:{port}",
                      "root": str(args.root), "relay_port": relay.port}),
          flush=True)

    sys.stdin.read()  # run until the parent closes our stdin
    server.should_exit = True
    thread.join(timeout=5)
    peter.close()
    john.close()
    relay.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
