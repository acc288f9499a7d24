"""Tests for the inventory store: lifecycle, aliases, journal replay."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import settings
from hypothesis.stateful import RuleBasedStateMachine, invariant, precondition, rule

from complygate.inventory import (
    AliasConflict,
    ClearanceDecision,
    Coordinates,
    CorruptJournal,
    IllegalTransition,
    InventoryStore,
    ReleaseRef,
    ReleaseState,
    Unauthorized,
)
from complygate.licexpr import parse_expression
from complygate.scanner import ScanFinding


def ticking_clock(start="2026-01-01T00:00:00+00:00"):
    current = datetime.fromisoformat(start)
    step = timedelta(seconds=1)

    def clock():
        nonlocal current
        current += step
        return current

    return clock


def decision(verdict="cleared", role="reviewer", rationale="looks fine"):
    return ClearanceDecision(
        reviewer="alice",
        role=role,
        timestamp=datetime(2026, 2, 1, tzinfo=timezone.utc),
        verdict=verdict,
        rationale=rationale,
        policy_version="2026.1",
    )


def mit_finding(path="LICENSE"):
    return ScanFinding(
        path=path,
        method="text_match",
        expression=parse_expression("MIT"),
        score=1.0,
        span=(1, 20),
        copyright_lines=("Copyright (c) 2020 A. Hacker",),
    )


LEFT_PAD = Coordinates("npm", "left-pad", "1.3.0")


class TestRegister:
    def test_idempotent(self):
        store = InventoryStore()
        first = store.register_component(LEFT_PAD)
        second = store.register_component(LEFT_PAD)
        assert first == second
        assert len(store.components) == 1

    def test_alias_added_for_existing_canonical_name(self):
        store = InventoryStore()
        cid = store.register_component(LEFT_PAD, canonical_name="left-pad")
        before = len(store.components[cid].aliases)
        store.register_component(
            Coordinates("maven", "org.acme:left-pad"), canonical_name="left-pad"
        )
        assert len(store.components[cid].aliases) == before + 1
        assert len(store.components) == 1

    def test_alias_conflict(self):
        store = InventoryStore()
        store.register_component(LEFT_PAD, canonical_name="left-pad")
        store.register_component(Coordinates("pypi", "rightpad"), canonical_name="right-pad")
        with pytest.raises(AliasConflict):
            store.register_component(LEFT_PAD.unversioned(), canonical_name="right-pad")

    def test_default_canonical_names_do_not_merge_ecosystems(self):
        store = InventoryStore()
        a = store.register_component(Coordinates("npm", "foo", "1.0.0"))
        b = store.register_component(Coordinates("pypi", "foo", "1.0.0"))
        assert a != b

    def test_new_version_starts_at_new(self):
        store = InventoryStore()
        cid = store.register_component(LEFT_PAD)
        ref, state = store.lookup(LEFT_PAD)
        assert ref == ReleaseRef(cid, "1.3.0")
        assert state is ReleaseState.NEW

    def test_declared_license_filled_once(self):
        store = InventoryStore()
        store.register_component(LEFT_PAD, declared_license=parse_expression("MIT"))
        store.register_component(LEFT_PAD, declared_license=parse_expression("ISC"))
        ref, _ = store.lookup(LEFT_PAD)
        assert store.release(ref).declared_license == parse_expression("MIT")


class TestLifecycle:
    def setup_method(self):
        self.store = InventoryStore(clock=ticking_clock())
        self.cid = self.store.register_component(LEFT_PAD)
        self.ref = ReleaseRef(self.cid, "1.3.0")

    def test_attach_scan_moves_to_scanned(self):
        record = self.store.attach_scan(self.ref, [mit_finding()], parse_expression("MIT"))
        assert record.state is ReleaseState.SCANNED
        assert record.detected_license == parse_expression("MIT")

    def test_rescan_replaces_findings(self):
        self.store.attach_scan(self.ref, [mit_finding("a")], parse_expression("MIT"))
        record = self.store.attach_scan(self.ref, [mit_finding("b")], parse_expression("MIT"))
        assert record.state is ReleaseState.SCANNED
        assert [f.path for f in record.findings] == ["b"]

    def test_attach_scan_after_clearance_is_illegal(self):
        self.store.attach_scan(self.ref, [], parse_expression("MIT"))
        self.store.request_clearance(self.ref)
        self.store.decide(self.ref, decision())
        with pytest.raises(IllegalTransition):
            self.store.attach_scan(self.ref, [], parse_expression("MIT"))

    def test_request_clearance_requires_scan(self):
        with pytest.raises(IllegalTransition):
            self.store.request_clearance(self.ref)

    def test_rejected_can_reenter_review(self):
        self.store.attach_scan(self.ref, [], parse_expression("MIT"))
        self.store.request_clearance(self.ref)
        self.store.decide(self.ref, decision(verdict="rejected", rationale="weak provenance"))
        assert self.store.release(self.ref).state is ReleaseState.REJECTED
        self.store.request_clearance(self.ref)
        assert self.store.release(self.ref).state is ReleaseState.PENDING_REVIEW

    def test_decide_requires_reviewer_role(self):
        self.store.attach_scan(self.ref, [], parse_expression("MIT"))
        self.store.request_clearance(self.ref)
        with pytest.raises(Unauthorized):
            self.store.decide(self.ref, decision(role="developer"))

    def test_cleared_is_terminal(self):
        self.store.attach_scan(self.ref, [], parse_expression("MIT"))
        self.store.request_clearance(self.ref)
        self.store.decide(self.ref, decision())
        with pytest.raises(IllegalTransition):
            self.store.decide(self.ref, decision(verdict="rejected", rationale="no"))
        with pytest.raises(IllegalTransition):
            self.store.request_clearance(self.ref)

    def test_rejection_without_rationale_invalid(self):
        with pytest.raises(ValueError):
            decision(verdict="rejected", rationale="  ")

    def test_decision_record_matches_state(self):
        self.store.attach_scan(self.ref, [], parse_expression("MIT"))
        self.store.request_clearance(self.ref)
        record = self.store.decide(self.ref, decision())
        assert record.decisions[-1].verdict == "cleared"
        assert record.state is ReleaseState.CLEARED


class TestLookup:
    def test_lookup_never_mutates(self):
        store = InventoryStore()
        cid = store.register_component(LEFT_PAD)
        ref = ReleaseRef(cid, "1.3.0")
        store.attach_scan(ref, [], parse_expression("MIT"))
        store.request_clearance(ref)
        store.decide(ref, decision())
        for _ in range(2):
            got_ref, state = store.lookup(LEFT_PAD)
            assert got_ref == ref and state is ReleaseState.CLEARED
        assert len(store.release(ref).decisions) == 1

    def test_unknown_coords(self):
        assert InventoryStore().lookup(Coordinates("npm", "ghost", "0.0.1")) is None

    def test_alias_resolves_to_same_release(self):
        store = InventoryStore()
        store.register_component(LEFT_PAD, canonical_name="left-pad")
        store.register_component(
            Coordinates("maven", "org.acme:left-pad"), canonical_name="left-pad"
        )
        via_alias = store.lookup(Coordinates("maven", "org.acme:left-pad", "1.3.0"))
        via_canonical = store.lookup(LEFT_PAD)
        assert via_alias == via_canonical


class TestJournal:
    def test_empty_journal_empty_store(self, tmp_path):
        journal = tmp_path / "journal.ndjson"
        journal.write_text("")
        store = InventoryStore.replay(journal)
        assert store.components == {}

    def test_replay_is_deterministic(self, tmp_path):
        journal = tmp_path / "journal.ndjson"
        with InventoryStore.open(journal, clock=ticking_clock()) as store:
            cid = store.register_component(LEFT_PAD)
            ref = ReleaseRef(cid, "1.3.0")
            store.attach_scan(ref, [mit_finding()], parse_expression("MIT"))
            store.request_clearance(ref)
            store.decide(ref, decision())
        once = InventoryStore.replay(journal).snapshot_json()
        twice = InventoryStore.replay(journal).snapshot_json()
        assert once == twice

    def test_replay_matches_in_memory_composition(self, tmp_path):
        # Oracle: the same four operations composed on an in-memory store.
        def run(store):
            cid = store.register_component(LEFT_PAD)
            ref = ReleaseRef(cid, "1.3.0")
            store.attach_scan(ref, [mit_finding()], parse_expression("MIT"))
            store.request_clearance(ref)
            store.decide(ref, decision())
            return ref

        oracle = InventoryStore(clock=ticking_clock())
        oracle_ref = run(oracle)
        assert oracle.release(oracle_ref).state is ReleaseState.CLEARED

        journal = tmp_path / "journal.ndjson"
        with InventoryStore.open(journal, clock=ticking_clock()) as journaled:
            run(journaled)
        replayed = InventoryStore.replay(journal)
        assert replayed.snapshot_json() == oracle.snapshot_json()
        assert replayed.release(oracle_ref).state is ReleaseState.CLEARED

    def test_replay_is_a_left_fold(self, tmp_path):
        journal = tmp_path / "journal.ndjson"
        with InventoryStore.open(journal, clock=ticking_clock()) as store:
            cid = store.register_component(LEFT_PAD)
            ref = ReleaseRef(cid, "1.3.0")
            store.attach_scan(ref, [], parse_expression("MIT"))
            store.request_clearance(ref)
            store.decide(ref, decision())
        lines = journal.read_text().splitlines()
        for n in range(len(lines) + 1):
            prefix = tmp_path / f"prefix-{n}.ndjson"
            prefix.write_text("\n".join(lines[:n]) + ("\n" if n else ""))
            folded = InventoryStore.replay(prefix)
            # State after N events extended by event N+1 equals state after N+1.
            if n < len(lines):
                folded._replay_lines([lines[n]])
                direct = tmp_path / f"direct-{n}.ndjson"
                direct.write_text("\n".join(lines[: n + 1]) + "\n")
                assert folded.snapshot_json() == InventoryStore.replay(direct).snapshot_json()

    def test_corrupt_line_stops_replay(self, tmp_path):
        journal = tmp_path / "journal.ndjson"
        with InventoryStore.open(journal, clock=ticking_clock()) as store:
            store.register_component(LEFT_PAD)
            cid2 = store.register_component(Coordinates("pypi", "requests", "2.31.0"))
        lines = journal.read_text().splitlines()
        corrupted = [lines[0], "{not json", lines[1]]
        journal.write_text("\n".join(corrupted) + "\n")
        with pytest.raises(CorruptJournal) as exc_info:
            InventoryStore.replay(journal)
        err = exc_info.value
        assert err.line == 2
        # Events before the corruption applied, nothing after.
        assert len(err.partial_store.components) == 1
        assert err.partial_store.component(cid2) is None

    def test_non_monotonic_seq_is_corrupt(self, tmp_path):
        journal = tmp_path / "journal.ndjson"
        with InventoryStore.open(journal, clock=ticking_clock()) as store:
            store.register_component(LEFT_PAD)
        line = journal.read_text().splitlines()[0]
        journal.write_text(line + "\n" + line + "\n")
        with pytest.raises(CorruptJournal) as exc_info:
            InventoryStore.replay(journal)
        assert exc_info.value.line == 2

    def test_journal_lines_carry_required_fields(self, tmp_path):
        journal = tmp_path / "journal.ndjson"
        with InventoryStore.open(journal, clock=ticking_clock()) as store:
            store.register_component(LEFT_PAD)
        event = json.loads(journal.read_text().splitlines()[0])
        assert set(event) == {"seq", "ts", "kind", "payload"}
        assert event["seq"] == 1


class InventoryMachine(RuleBasedStateMachine):
    """Random operation sequences can never step outside the legal lifecycle."""

    def __init__(self):
        super().__init__()
        self.store = InventoryStore(clock=ticking_clock())
        self.cid = self.store.register_component(LEFT_PAD)
        self.ref = ReleaseRef(self.cid, "1.3.0")
        self.seen_states = [self.state()]

    def state(self):
        return self.store.release(self.ref).state

    @rule()
    def attach(self):
        before = self.state()
        try:
            self.store.attach_scan(self.ref, [], parse_expression("MIT"))
        except IllegalTransition:
            assert before not in (ReleaseState.NEW, ReleaseState.SCANNED)
        else:
            assert before in (ReleaseState.NEW, ReleaseState.SCANNED)
        self.seen_states.append(self.state())

    @rule()
    def request(self):
        before = self.state()
        try:
            self.store.request_clearance(self.ref)
        except IllegalTransition:
            assert before not in (ReleaseState.SCANNED, ReleaseState.REJECTED)
        else:
            assert before in (ReleaseState.SCANNED, ReleaseState.REJECTED)
        self.seen_states.append(self.state())

    @precondition(lambda self: True)
    @rule(verdict=__import__("hypothesis").strategies.sampled_from(["cleared", "rejected"]))
    def decide_release(self, verdict):
        before = self.state()
        try:
            self.store.decide(self.ref, decision(verdict=verdict, rationale="r"))
        except IllegalTransition:
            assert before is not ReleaseState.PENDING_REVIEW
        else:
            assert before is ReleaseState.PENDING_REVIEW
        self.seen_states.append(self.state())

    @invariant()
    def transitions_are_legal(self):
        legal = {
            ReleaseState.NEW: {ReleaseState.NEW, ReleaseState.SCANNED},
            ReleaseState.SCANNED: {ReleaseState.SCANNED, ReleaseState.PENDING_REVIEW},
            ReleaseState.PENDING_REVIEW: {
                ReleaseState.PENDING_REVIEW,
                ReleaseState.CLEARED,
                ReleaseState.REJECTED,
            },
            ReleaseState.CLEARED: {ReleaseState.CLEARED},
            ReleaseState.REJECTED: {ReleaseState.REJECTED, ReleaseState.PENDING_REVIEW},
        }
        for a, b in zip(self.seen_states, self.seen_states[1:]):
            assert b in legal[a], f"{a} -> {b}"

    @invariant()
    def cleared_never_reverts(self):
        if ReleaseState.CLEARED in self.seen_states:
            idx = self.seen_states.index(ReleaseState.CLEARED)
            assert all(s is ReleaseState.CLEARED for s in self.seen_states[idx:])

    @invariant()
    def terminal_states_have_decisions(self):
        release = self.store.release(self.ref)
        if release.state in (ReleaseState.CLEARED, ReleaseState.REJECTED):
            assert release.decisions
            expected = "cleared" if release.state is ReleaseState.CLEARED else "rejected"
            assert release.decisions[-1].verdict == expected


TestInventoryMachine = InventoryMachine.TestCase
TestInventoryMachine.settings = settings(max_examples=40, stateful_step_count=30)
