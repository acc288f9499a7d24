"""Shared fixture machinery: a miniature product environment on disk."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from complygate.gate import GateConfig
from complygate.inventory import (
    ClearanceDecision,
    Coordinates,
    InventoryStore,
    ReleaseRef,
)
from complygate.licexpr import parse_expression

STANDARD_POLICY = {
    "schema_version": 1,
    "policy_version": "2026.1",
    "default_class": "review_required",
    "classes": {
        "MIT": "allow_with_obligations",
        "ISC": "allow",
        "Apache-2.0": "allow_with_obligations",
        "BSD-2-Clause": "allow_with_obligations",
        "BSD-3-Clause": "allow_with_obligations",
        "MPL-2.0": {
            "internal": "allow_with_obligations",
            "saas": "allow_with_obligations",
            "distributed_binary": "allow_with_obligations",
            "distributed_source": "allow_with_obligations",
            "embedded": "review_required",
        },
        "GPL-*": {"internal": "allow_with_obligations", "distributed_binary": "deny"},
        "LGPL-*": {"internal": "allow_with_obligations", "distributed_binary": "allow_with_obligations"},
    },
    "obligations": {
        "MIT": [{"kind": "attribution"}],
        "Apache-2.0": [{"kind": "attribution"}, {"kind": "notice_file"}],
        "BSD-2-Clause": [{"kind": "attribution"}],
        "BSD-3-Clause": [{"kind": "attribution"}],
        "MPL-2.0": [{"kind": "source_disclosure",
                     "channels": ["distributed_binary", "distributed_source", "embedded"]}],
        "GPL-*": [
            {"kind": "source_disclosure",
             "channels": ["distributed_binary", "distributed_source", "embedded"]},
            {"kind": "source_offer", "channels": ["distributed_binary", "embedded"]},
            {"kind": "same_license", "channels": ["distributed_binary", "distributed_source"]},
        ],
        "LGPL-*": [
            {"kind": "source_disclosure",
             "channels": ["distributed_binary", "distributed_source", "embedded"]},
        ],
    },
    "waivers": [],
}


def frozen_clock(start="2026-04-01T00:00:00+00:00"):
    current = datetime.fromisoformat(start)
    step = timedelta(seconds=1)

    def clock():
        nonlocal current
        current += step
        return current

    return clock


class GateEnv:
    """Builds manifest/policy/lockfile/journal files for gate-level tests."""

    def __init__(self, root: Path):
        self.root = root
        self.out_dir = root / "out"
        self.journal_path = root / "journal.ndjson"
        self.policy_path = root / "policy.json"
        self.manifest_path = root / "manifest.json"
        self.lockfile_path = root / "deps.lock.json"
        self.clock = frozen_clock()
        self.write_policy(STANDARD_POLICY)
        self.write_manifest()

    def write_policy(self, policy_doc: dict) -> None:
        self.policy_path.write_text(json.dumps(policy_doc, indent=2))

    def write_manifest(self, channel="distributed_binary", name="shop", version="1.0.0"):
        self.manifest_path.write_text(
            json.dumps(
                {
                    "product_name": name,
                    "product_version": version,
                    "channel": channel,
                    "root_dependencies": [],
                }
            )
        )

    def write_lockfile(self, packages: list[dict], roots: list[dict]) -> None:
        self.lockfile_path.write_text(
            json.dumps({"schema_version": 1, "packages": packages, "roots": roots})
        )

    def chain_lockfile(self, deps: list[tuple[str, str]]) -> None:
        """A root package depending on every other package, linearly chained."""
        packages = [
            {
                "ecosystem": eco,
                "name": name,
                "version": "1.0.0",
                "deps": [i + 1] if i + 1 < len(deps) else [],
                "scope": "runtime",
            }
            for i, (eco, name) in enumerate(deps)
        ]
        roots = [{"ecosystem": deps[0][0], "name": deps[0][1], "version": "1.0.0"}]
        self.write_lockfile(packages, roots)

    def populate_inventory(self, entries: list[tuple[Coordinates, str | None, bool]]) -> None:
        """entries: (coords, expression, cleared). Appends to the journal."""
        with InventoryStore.open(self.journal_path, clock=self.clock) as store:
            for coords, expression, cleared in entries:
                expr = parse_expression(expression) if expression else None
                cid = store.register_component(coords, declared_license=expr)
                ref = ReleaseRef(cid, coords.version)
                store.attach_scan(ref, [], expr)
                if cleared:
                    store.request_clearance(ref)
                    store.decide(
                        ref,
                        ClearanceDecision(
                            reviewer="alice",
                            role="reviewer",
                            timestamp=self.clock(),
                            verdict="cleared",
                            rationale="fixture clearance",
                            policy_version="2026.1",
                        ),
                    )

    def config(self, **overrides) -> GateConfig:
        values = dict(
            manifest_path=self.manifest_path,
            policy_path=self.policy_path,
            journal_path=self.journal_path,
            out_dir=self.out_dir,
            lockfiles=(("neutral", self.lockfile_path),),
        )
        values.update(overrides)
        return GateConfig(**values)


@pytest.fixture
def gate_env(tmp_path):
    return GateEnv(tmp_path)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for outcome in ("passed", "failed", "error"):
        reports.extend(terminalreporter.stats.get(outcome, []))
    criteria = [
        r for r in reports
        if getattr(r, "when", "call") == "call" and "test_acceptance" in r.nodeid
    ]
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for report in sorted(criteria, key=lambda r: r.nodeid):
        word = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1].replace("test_criterion_", "")
        terminalreporter.write_line(f"{word}  {name}")
