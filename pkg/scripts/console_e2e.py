#!/usr/bin/env python3
"""Console-to-gate integration: the full review loop across both stacks.

1. Builds a product whose graph has two uncleared (pending) dependencies,
   so the strict gate exits 2 with UNCLEARED findings.
2. Starts the real inventory service on a local port.
3. Runs the console's live test suite against it (vitest), which approves
   one pending item through the decision endpoint.
4. Re-runs the gate and checks the approved dependency's UNCLEARED reason
   is gone (the other one still blocks, as it should).

Requires the frontend to be installed (`cd frontend && npm install`).
"""

import json
import socket
import subprocess
import sys
import time
import urllib.request
from datetime import datetime, timezone
from pathlib import Path
from tempfile import TemporaryDirectory

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import GateEnv  # noqa: E402

from complygate.gate import run_check  # noqa: E402
from complygate.inventory import (  # noqa: E402
    ClearanceDecision,
    Coordinates,
    InventoryStore,
)

TOKENS = {
    "reviewer-token": {"identity": "alice", "role": "reviewer"},
    "developer-token": {"identity": "dana", "role": "developer"},
}


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_for(url: str, timeout: float = 15.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            with urllib.request.urlopen(url, timeout=1):
                return
        except OSError:
            time.sleep(0.2)
    raise RuntimeError(f"service at {url} did not come up")


def main() -> int:
    with TemporaryDirectory() as tmp:
        env = GateEnv(Path(tmp))
        deps = [("npm", "app-core"), ("npm", "pending-a"), ("npm", "pending-b")]
        coords = [Coordinates(eco, name, "1.0.0") for eco, name in deps]
        env.chain_lockfile(deps)
        env.populate_inventory([(coords[0], "MIT", True)])
        with InventoryStore.open(env.journal_path, clock=env.clock) as store:
            for pending in coords[1:]:
                cid = store.register_component(pending)
                from complygate.inventory import ReleaseRef
                from complygate.licexpr import parse_expression

                ref = ReleaseRef(cid, "1.0.0")
                store.attach_scan(ref, [], parse_expression("MIT"))
                store.request_clearance(ref)

        exit_code, report = run_check(env.config(strict=True))
        uncleared = {
            v.subject for v in report.nodes
            for r in v.reasons if r.code == "UNCLEARED"
        }
        print(f"[1] initial gate: exit {exit_code}, uncleared={sorted(uncleared)}")
        assert exit_code == 2 and len(uncleared) == 2

        tokens_path = Path(tmp) / "tokens.json"
        tokens_path.write_text(json.dumps(TOKENS))
        port = free_port()
        server = subprocess.Popen(
            [
                sys.executable, "-m", "complygate.cli", "serve",
                "--journal", str(env.journal_path),
                "--tokens", str(tokens_path),
                "--policy", str(env.policy_path),
                "--listen", f"127.0.0.1:{port}",
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            wait_for(f"http://127.0.0.1:{port}/healthz")
            print(f"[2] service up on port {port}")

            vitest = subprocess.run(
                ["npx", "vitest", "run", "tests/live-api.test.ts"],
                cwd=ROOT / "frontend",
                env={
                    "PATH": __import__("os").environ["PATH"],
                    "HOME": __import__("os").environ.get("HOME", "/root"),
                    "CONSOLE_API_URL": f"http://127.0.0.1:{port}",
                    "CONSOLE_REVIEWER_TOKEN": "reviewer-token",
                    "CONSOLE_DEVELOPER_TOKEN": "developer-token",
                },
            )
            print(f"[3] console live suite: exit {vitest.returncode}")
            assert vitest.returncode == 0
        finally:
            server.terminate()
            server.wait(timeout=10)

        exit_code, report = run_check(env.config(strict=True))
        still_uncleared = {
            v.subject for v in report.nodes
            for r in v.reasons if r.code == "UNCLEARED"
        }
        print(f"[4] gate after approval: exit {exit_code}, uncleared={sorted(still_uncleared)}")
        assert exit_code == 2  # one item remains pending
        assert len(still_uncleared) == 1  # the approved one dropped out

        # Approve the remainder directly and confirm the gate goes green.
        with InventoryStore.open(env.journal_path) as store:
            from complygate.inventory import ReleaseState

            for ref, _ in store.releases_in_state(ReleaseState.PENDING_REVIEW):
                store.decide(
                    ref,
                    ClearanceDecision(
                        reviewer="alice", role="reviewer",
                        timestamp=datetime.now(timezone.utc),
                        verdict="cleared", rationale="e2e cleanup",
                        policy_version="2026.1",
                    ),
                )
        exit_code, _ = run_check(env.config(strict=True))
        print(f"[5] final gate: exit {exit_code}")
        assert exit_code == 0
        print("console end-to-end: OK")
        return 0


if __name__ == "__main__":
    sys.exit(main())
