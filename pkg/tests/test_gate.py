"""Tests for the CI gate: exit codes, reports, baseline, sync."""

from __future__ import annotations

import json

import pytest

from complygate.gate import (
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_PASS,
    EXIT_REVIEW,
    run_check,
    sync_inventory,
)
from complygate.inventory import Coordinates, InventoryStore, ReleaseState
from complygate.scanner import bundled_corpus

DEPS = [("npm", "app-core"), ("npm", "left-pad"), ("pypi", "requests")]
COORDS = [Coordinates(eco, name, "1.0.0") for eco, name in DEPS]


def all_cleared(env, licenses=("MIT", "Apache-2.0", "BSD-3-Clause")):
    env.chain_lockfile(DEPS)
    env.populate_inventory(
        [(coords, lic, True) for coords, lic in zip(COORDS, licenses)]
    )


class TestRunCheck:
    def test_all_cleared_and_allowed_exits_zero(self, gate_env):
        all_cleared(gate_env)
        exit_code, report = run_check(gate_env.config())
        assert exit_code == EXIT_PASS
        assert report.product.status.name == "PASS"
        assert (gate_env.out_dir / "report.json").exists()
        assert (gate_env.out_dir / "sbom.spdx.json").exists()
        assert (gate_env.out_dir / "NOTICE.txt").exists()
        assert (gate_env.out_dir / "licenses.csv").exists()
        assert (gate_env.out_dir / "ccs-manifest.json").exists()

    def test_denied_license_fails_and_names_coords(self, gate_env):
        gate_env.chain_lockfile(DEPS + [("npm", "copyleft-lib")])
        gate_env.populate_inventory(
            [(coords, "MIT", True) for coords in COORDS]
            + [(Coordinates("npm", "copyleft-lib", "1.0.0"), "GPL-3.0-only", True)]
        )
        exit_code, report = run_check(gate_env.config())
        assert exit_code == EXIT_FAIL
        offenders = [v for v in report.nodes if v.status.name == "FAIL"]
        assert len(offenders) == 1
        assert offenders[0].subject == "npm/copyleft-lib@1.0.0"
        assert offenders[0].reasons[0].code == "LICENSE_DENIED"
        text = report.to_text()
        assert "FAIL npm/copyleft-lib@1.0.0 LICENSE_DENIED" in text

    def test_no_artifacts_on_fail_by_default(self, gate_env):
        gate_env.chain_lockfile([("npm", "gpl-dep")])
        gate_env.populate_inventory(
            [(Coordinates("npm", "gpl-dep", "1.0.0"), "GPL-3.0-only", True)]
        )
        exit_code, report = run_check(gate_env.config())
        assert exit_code == EXIT_FAIL
        assert not (gate_env.out_dir / "sbom.spdx.json").exists()
        assert (gate_env.out_dir / "report.json").exists()  # report always written

    def test_artifacts_always_overrides(self, gate_env):
        gate_env.chain_lockfile([("npm", "gpl-dep")])
        gate_env.populate_inventory(
            [(Coordinates("npm", "gpl-dep", "1.0.0"), "GPL-3.0-only", True)]
        )
        exit_code, _ = run_check(gate_env.config(artifacts_always=True))
        assert exit_code == EXIT_FAIL
        assert (gate_env.out_dir / "sbom.spdx.json").exists()

    def test_unknown_dep_strict_exits_two(self, gate_env):
        gate_env.chain_lockfile(DEPS + [("npm", "mystery")])
        gate_env.populate_inventory([(coords, "MIT", True) for coords in COORDS])
        exit_code, report = run_check(gate_env.config(strict=True))
        assert exit_code == EXIT_REVIEW
        review = [v for v in report.nodes if v.status.name == "NEEDS_REVIEW"]
        assert review and review[0].subject == "npm/mystery@1.0.0"
        assert any(r.code == "UNCLEARED" for r in review[0].reasons)

    def test_unknown_dep_lenient_folds_to_zero_with_warning(self, gate_env):
        gate_env.chain_lockfile(DEPS + [("npm", "mystery")])
        gate_env.populate_inventory([(coords, "MIT", True) for coords in COORDS])
        exit_code, report = run_check(gate_env.config(strict=False))
        assert exit_code == EXIT_PASS
        assert any("strict mode off" in w for w in report.warnings)

    def test_corrupt_journal_exits_three(self, gate_env):
        all_cleared(gate_env)
        gate_env.journal_path.write_text("definitely not json\n")
        exit_code, report = run_check(gate_env.config())
        assert exit_code == EXIT_ERROR
        assert "journal" in report.error

    def test_bad_policy_exits_three(self, gate_env):
        all_cleared(gate_env)
        gate_env.policy_path.write_text('{"policy_version": "1"}')  # no default_class
        exit_code, report = run_check(gate_env.config())
        assert exit_code == EXIT_ERROR

    def test_missing_manifest_exits_three(self, gate_env, tmp_path):
        all_cleared(gate_env)
        exit_code, report = run_check(
            gate_env.config(manifest_path=tmp_path / "nope.json")
        )
        assert exit_code == EXIT_ERROR

    def test_exit_codes_are_total(self, gate_env):
        all_cleared(gate_env)
        for config in (
            gate_env.config(),
            gate_env.config(strict=True),
            gate_env.config(policy_path=gate_env.root / "missing.json"),
        ):
            exit_code, _ = run_check(config)
            assert exit_code in (0, 1, 2, 3)

    def test_idempotent_reports_modulo_timestamps(self, gate_env):
        all_cleared(gate_env)
        _, first = run_check(gate_env.config())
        _, second = run_check(gate_env.config())

        def stripped(report):
            doc = report.to_dict()
            doc.pop("generated_at")
            doc.pop("timing_secs")
            doc.pop("artifacts")  # same paths, but drop for strictness
            return json.dumps(doc, sort_keys=True)

        assert stripped(first) == stripped(second)
        assert first.exit_code == second.exit_code

    def test_report_json_written_and_versioned(self, gate_env):
        all_cleared(gate_env)
        run_check(gate_env.config())
        doc = json.loads((gate_env.out_dir / "report.json").read_text())
        assert doc["schema_version"] == 1
        assert doc["policy_version"] == "2026.1"
        assert doc["product"]["status"] == "PASS"
        assert len(doc["nodes"]) == len(DEPS)


class TestBaseline:
    def test_known_findings_do_not_gate(self, gate_env):
        gate_env.chain_lockfile(DEPS + [("npm", "legacy-gpl")])
        gate_env.populate_inventory(
            [(coords, "MIT", True) for coords in COORDS]
            + [(Coordinates("npm", "legacy-gpl", "1.0.0"), "GPL-3.0-only", True)]
        )
        exit_code, report = run_check(gate_env.config())
        assert exit_code == EXIT_FAIL
        baseline_path = gate_env.root / "baseline.json"
        baseline_path.write_text(report.to_json())

        exit_code, report = run_check(gate_env.config(baseline_path=baseline_path))
        assert exit_code == EXIT_PASS
        assert any(b["subject"] == "npm/legacy-gpl@1.0.0" for b in report.baselined)

    def test_new_findings_still_fail(self, gate_env):
        gate_env.chain_lockfile(DEPS + [("npm", "legacy-gpl")])
        gate_env.populate_inventory(
            [(coords, "MIT", True) for coords in COORDS]
            + [(Coordinates("npm", "legacy-gpl", "1.0.0"), "GPL-3.0-only", True)]
        )
        _, report = run_check(gate_env.config())
        baseline_path = gate_env.root / "baseline.json"
        baseline_path.write_text(report.to_json())

        gate_env.chain_lockfile(DEPS + [("npm", "legacy-gpl"), ("npm", "fresh-gpl")])
        gate_env.populate_inventory(
            [(Coordinates("npm", "fresh-gpl", "1.0.0"), "GPL-2.0-only", True)]
        )
        exit_code, report = run_check(gate_env.config(baseline_path=baseline_path))
        assert exit_code == EXIT_FAIL
        failing = {v.subject for v in report.nodes if v.status.name == "FAIL"}
        assert "npm/fresh-gpl@1.0.0" in failing


class TestSync:
    def test_all_known_yields_zeros(self, gate_env):
        all_cleared(gate_env)
        exit_code, summary = sync_inventory(gate_env.config())
        assert exit_code == EXIT_PASS
        assert (summary.registered, summary.scanned, summary.requested) == (0, 0, 0)

    def test_new_dep_with_local_sources_is_scanned_and_requested(self, gate_env):
        all_cleared(gate_env)
        gate_env.chain_lockfile(DEPS + [("npm", "newdep")])
        sources = gate_env.root / "sources" / "npm" / "newdep" / "1.0.0"
        sources.mkdir(parents=True)
        (sources / "LICENSE").write_text(bundled_corpus().get("MIT").canonical_text)
        exit_code, summary = sync_inventory(
            gate_env.config(sources_dir=gate_env.root / "sources")
        )
        assert exit_code == EXIT_PASS
        assert (summary.registered, summary.scanned, summary.requested) == (1, 1, 1)
        store = InventoryStore.replay(gate_env.journal_path)
        located = store.lookup(Coordinates("npm", "newdep", "1.0.0"))
        assert located is not None
        ref, state = located
        assert state is ReleaseState.PENDING_REVIEW
        release = store.release(ref)
        assert release.detected_license is not None

    def test_new_dep_without_sources_stays_new(self, gate_env):
        all_cleared(gate_env)
        gate_env.chain_lockfile(DEPS + [("npm", "newdep")])
        exit_code, summary = sync_inventory(gate_env.config())
        assert exit_code == EXIT_PASS
        assert (summary.registered, summary.scanned, summary.requested) == (1, 0, 0)
        store = InventoryStore.replay(gate_env.journal_path)
        _, state = store.lookup(Coordinates("npm", "newdep", "1.0.0"))
        assert state is ReleaseState.NEW

    def test_sync_then_check_drops_unknown_but_still_uncleared(self, gate_env):
        all_cleared(gate_env)
        gate_env.chain_lockfile(DEPS + [("npm", "newdep")])
        sync_inventory(gate_env.config())
        exit_code, report = run_check(gate_env.config(strict=True))
        assert exit_code == EXIT_REVIEW  # registered but NEW, still uncleared
        review = next(v for v in report.nodes if v.subject == "npm/newdep@1.0.0")
        assert any(r.code == "UNCLEARED" for r in review.reasons)

    def test_corrupt_journal_exits_three(self, gate_env):
        all_cleared(gate_env)
        gate_env.journal_path.write_text("oops\n")
        exit_code, summary = sync_inventory(gate_env.config())
        assert exit_code == EXIT_ERROR
