#!/usr/bin/env python3
"""Build a runnable demo environment and walk the full workflow.

Creates ./demo/ with a policy, product manifest, neutral lockfile, local
sources for one dependency, and service tokens; then exercises the
pipeline: sync (register+scan+request), a failing strict check, a
clearance decision, and the passing check with artifacts.

    python scripts/demo.py
    complygate serve --journal demo/journal.ndjson --tokens demo/tokens.json \
        --policy demo/policy.json
"""

import json
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "demo"

POLICY = {
    "schema_version": 1,
    "policy_version": "demo-2026.1",
    "default_class": "review_required",
    "classes": {
        "MIT": "allow_with_obligations",
        "ISC": "allow",
        "Apache-2.0": "allow_with_obligations",
        "BSD-2-Clause": "allow_with_obligations",
        "BSD-3-Clause": "allow_with_obligations",
        "GPL-*": {"internal": "allow_with_obligations", "distributed_binary": "deny"},
    },
    "obligations": {
        "MIT": [{"kind": "attribution"}],
        "Apache-2.0": [{"kind": "attribution"}, {"kind": "notice_file"}],
        "BSD-2-Clause": [{"kind": "attribution"}],
        "BSD-3-Clause": [{"kind": "attribution"}],
        "GPL-*": [
            {"kind": "source_disclosure",
             "channels": ["distributed_binary", "distributed_source", "embedded"]},
            {"kind": "source_offer", "channels": ["distributed_binary", "embedded"]},
        ],
    },
    "waivers": [],
}

MANIFEST = {
    "product_name": "web-shop",
    "product_version": "2.4.0",
    "channel": "distributed_binary",
    "root_dependencies": [],
}

LOCKFILE = {
    "schema_version": 1,
    "roots": [{"ecosystem": "npm", "name": "storefront", "version": "3.1.0"}],
    "packages": [
        {"ecosystem": "npm", "name": "storefront", "version": "3.1.0", "deps": [1, 2]},
        {"ecosystem": "npm", "name": "left-pad", "version": "1.3.0", "deps": []},
        {"ecosystem": "npm", "name": "http-core", "version": "5.0.2", "deps": [3]},
        {"ecosystem": "npm", "name": "tiny-parser", "version": "0.9.1", "deps": []},
    ],
}

TOKENS = {
    "demo-reviewer-token": {"identity": "alice", "role": "reviewer"},
    "demo-developer-token": {"identity": "dana", "role": "developer"},
}

MIT_TEXT = (ROOT / "src" / "complygate" / "corpus" / "MIT.txt").read_text()


def run(*args: str) -> int:
    print(f"\n$ {' '.join(args)}", flush=True)
    return subprocess.run(args, cwd=ROOT).returncode


def main() -> None:
    DEMO.mkdir(exist_ok=True)
    (DEMO / "policy.json").write_text(json.dumps(POLICY, indent=2))
    (DEMO / "manifest.json").write_text(json.dumps(MANIFEST, indent=2))
    (DEMO / "deps.lock.json").write_text(json.dumps(LOCKFILE, indent=2))
    (DEMO / "tokens.json").write_text(json.dumps(TOKENS, indent=2))
    journal = DEMO / "journal.ndjson"
    journal.unlink(missing_ok=True)

    # Local sources for every dependency so sync can scan them.
    for name, version in [
        ("storefront", "3.1.0"),
        ("left-pad", "1.3.0"),
        ("http-core", "5.0.2"),
        ("tiny-parser", "0.9.1"),
    ]:
        tree = DEMO / "sources" / "npm" / name / version
        tree.mkdir(parents=True, exist_ok=True)
        (tree / "LICENSE").write_text(
            f"Copyright (c) 2026 The {name} authors\n\n" + MIT_TEXT
        )
        (tree / "index.js").write_text("// SPDX-License-Identifier: MIT\n")

    base = [
        sys.executable, "-m", "complygate.cli",
    ]
    common = [
        "--manifest", str(DEMO / "manifest.json"),
        "--policy", str(DEMO / "policy.json"),
        "--journal", str(journal),
        "--lockfile", f"neutral:{DEMO / 'deps.lock.json'}",
        "--out-dir", str(DEMO / "out"),
    ]

    print("== 1. sync: register, scan, and open clearance requests ==")
    run(*base, "sync", *common, "--sources-dir", str(DEMO / "sources"))

    print("== 2. strict check: everything is pending review, exit 2 ==")
    code = run(*base, "check", *common, "--strict")
    print(f"exit code: {code} (2 = review needed)")

    print("== 3. a reviewer clears every pending release (normally via the console) ==")
    from complygate.inventory import ClearanceDecision, InventoryStore, ReleaseState

    with InventoryStore.open(journal) as store:
        for ref, _ in store.releases_in_state(ReleaseState.PENDING_REVIEW):
            store.decide(
                ref,
                ClearanceDecision(
                    reviewer="alice", role="reviewer",
                    timestamp=datetime.now(timezone.utc),
                    verdict="cleared", rationale="demo clearance",
                    policy_version=POLICY["policy_version"],
                ),
            )
            print(f"cleared {ref.release_id()}")

    print("== 4. check again: green build, artifacts generated ==")
    code = run(*base, "check", *common, "--strict")
    print(f"exit code: {code} (0 = pass)")
    for artifact in sorted((DEMO / "out").iterdir()):
        print(f"  {artifact.relative_to(ROOT)}")

    print("\nTo try the review API:")
    print(f"  complygate serve --journal {journal.relative_to(ROOT)} "
          f"--tokens {(DEMO / 'tokens.json').relative_to(ROOT)} "
          f"--policy {(DEMO / 'policy.json').relative_to(ROOT)}")


if __name__ == "__main__":
    main()
