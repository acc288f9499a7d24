"""Component inventory with a per-release clearance lifecycle.

The store is the source of truth for "is this release cleared?". Every
mutation is one event in an append-only JSON-lines journal; replaying the
journal reconstructs the exact store state, so snapshots are reproducible
byte for byte.

Release lifecycle::

    NEW -> SCANNED -> PENDING_REVIEW -> CLEARED (terminal)
                            ^              |
                            |              v
                            +---------- REJECTED

REJECTED releases may re-enter review; CLEARED never changes again.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, IO, Iterable

from .licexpr import LicenseExpression, parse_expression, render
from .scanner import ScanFinding

__all__ = [
    "Coordinates",
    "ReleaseState",
    "ClearanceDecision",
    "ReleaseRecord",
    "ComponentRecord",
    "ReleaseRef",
    "InventoryStore",
    "InventoryError",
    "AliasConflict",
    "IllegalTransition",
    "Unauthorized",
    "CorruptJournal",
    "DEFAULT_REVIEWER_ROLES",
]

DEFAULT_REVIEWER_ROLES = frozenset({"reviewer", "ospo"})

SNAPSHOT_SCHEMA_VERSION = 1


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_iso(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


class InventoryError(Exception):
    pass


class AliasConflict(InventoryError):
    def __init__(self, coords: "Coordinates", bound_to: str, requested: str) -> None:
        self.coords = coords
        self.bound_to = bound_to
        self.requested = requested
        super().__init__(
            f"{coords} is already bound to component {bound_to!r}, not {requested!r}"
        )


class IllegalTransition(InventoryError):
    def __init__(self, ref: "ReleaseRef", state: "ReleaseState", operation: str) -> None:
        self.ref = ref
        self.state = state
        self.operation = operation
        super().__init__(f"cannot {operation} on {ref.release_id()} in state {state.name}")


class Unauthorized(InventoryError):
    def __init__(self, role: str) -> None:
        self.role = role
        super().__init__(f"role {role!r} may not record clearance decisions")


class CorruptJournal(InventoryError):
    """A malformed journal line. Events before it are applied; nothing after."""

    def __init__(self, line: int, detail: str, partial_store: "InventoryStore | None" = None) -> None:
        self.line = line
        self.detail = detail
        self.partial_store = partial_store
        super().__init__(f"journal corrupt at line {line}: {detail}")


@dataclass(frozen=True, order=True)
class Coordinates:
    """A component name in one packaging context, optionally versioned."""

    ecosystem: str
    name: str
    version: str | None = None

    def __post_init__(self) -> None:
        if not self.ecosystem or not self.name:
            raise ValueError("ecosystem and name must be non-empty")

    def key(self) -> tuple[str, str]:
        return (self.ecosystem, self.name)

    def unversioned(self) -> "Coordinates":
        return Coordinates(self.ecosystem, self.name)

    def __str__(self) -> str:
        base = f"{self.ecosystem}/{self.name}"
        return f"{base}@{self.version}" if self.version else base

    def to_dict(self) -> dict:
        d = {"ecosystem": self.ecosystem, "name": self.name}
        if self.version is not None:
            d["version"] = self.version
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Coordinates":
        return cls(d["ecosystem"], d["name"], d.get("version"))


class ReleaseState(Enum):
    NEW = "NEW"
    SCANNED = "SCANNED"
    PENDING_REVIEW = "PENDING_REVIEW"
    CLEARED = "CLEARED"
    REJECTED = "REJECTED"


@dataclass(frozen=True)
class ClearanceDecision:
    reviewer: str
    role: str
    timestamp: datetime
    verdict: str  # "cleared" | "rejected"
    rationale: str
    policy_version: str

    def __post_init__(self) -> None:
        if self.verdict not in ("cleared", "rejected"):
            raise ValueError(f"verdict must be cleared or rejected, got {self.verdict!r}")
        if self.verdict == "rejected" and not self.rationale.strip():
            raise ValueError("a rejection requires a rationale")

    def to_dict(self) -> dict:
        return {
            "reviewer": self.reviewer,
            "role": self.role,
            "timestamp": _iso(self.timestamp),
            "verdict": self.verdict,
            "rationale": self.rationale,
            "policy_version": self.policy_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClearanceDecision":
        return cls(
            reviewer=d["reviewer"],
            role=d["role"],
            timestamp=_parse_iso(d["timestamp"]),
            verdict=d["verdict"],
            rationale=d["rationale"],
            policy_version=d["policy_version"],
        )


@dataclass
class ReleaseRecord:
    version: str
    source_ref: tuple[str, str | None] | None = None  # (url, content hash)
    declared_license: LicenseExpression | None = None
    detected_license: LicenseExpression | None = None
    findings: list[ScanFinding] = field(default_factory=list)
    state: ReleaseState = ReleaseState.NEW
    decisions: list[ClearanceDecision] = field(default_factory=list)
    requested_at: datetime | None = None  # set when review was last requested


@dataclass
class ComponentRecord:
    component_id: str
    canonical_name: str
    aliases: set[Coordinates] = field(default_factory=set)
    homepage: str | None = None
    releases: dict[str, ReleaseRecord] = field(default_factory=dict)


@dataclass(frozen=True, order=True)
class ReleaseRef:
    component_id: str
    version: str

    def release_id(self) -> str:
        return f"{self.component_id}@{self.version}"

    @classmethod
    def from_release_id(cls, release_id: str) -> "ReleaseRef":
        component_id, sep, version = release_id.rpartition("@")
        if not sep or not component_id or not version:
            raise ValueError(f"not a release id: {release_id!r}")
        return cls(component_id, version)


def _finding_to_dict(f: ScanFinding) -> dict:
    return {
        "path": f.path,
        "method": f.method,
        "expression": render(f.expression),
        "score": f.score,
        "span": list(f.span),
        "copyright_lines": list(f.copyright_lines),
    }


def _finding_from_dict(d: dict) -> ScanFinding:
    return ScanFinding(
        path=d["path"],
        method=d["method"],
        expression=parse_expression(d["expression"]),
        score=d["score"],
        span=tuple(d["span"]),
        copyright_lines=tuple(d.get("copyright_lines", ())),
    )


class InventoryStore:
    """Journal-backed registry of components and their clearance state.

    All mutations funnel through :meth:`_commit`, which appends exactly one
    event to the journal and applies it to memory with the same code path
    used during replay. Opening a store without a journal path keeps it
    purely in memory (useful for tests and dry runs).
    """

    def __init__(
        self,
        journal_path: str | Path | None = None,
        clock: Callable[[], datetime] | None = None,
        reviewer_roles: frozenset[str] = DEFAULT_REVIEWER_ROLES,
    ) -> None:
        self.components: dict[str, ComponentRecord] = {}
        self._alias_index: dict[tuple[str, str], str] = {}
        self._canonical_index: dict[str, str] = {}
        self._clock = clock or _utc_now
        self.reviewer_roles = reviewer_roles
        self._seq = 0
        self._id_counter = 0
        self._request_counter = 0
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal_file: IO[str] | None = None

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(
        cls,
        journal_path: str | Path,
        clock: Callable[[], datetime] | None = None,
        reviewer_roles: frozenset[str] = DEFAULT_REVIEWER_ROLES,
    ) -> "InventoryStore":
        """Replay an existing journal (if any) and keep appending to it.

        Raises :class:`CorruptJournal` on the first malformed line; events
        before that line are applied and available on the exception.
        """
        store = cls(journal_path=journal_path, clock=clock, reviewer_roles=reviewer_roles)
        path = Path(journal_path)
        if path.exists():
            store._replay_lines(path.read_text(encoding="utf-8").splitlines())
        return store

    @classmethod
    def replay(
        cls,
        journal_path: str | Path,
        reviewer_roles: frozenset[str] = DEFAULT_REVIEWER_ROLES,
    ) -> "InventoryStore":
        """Reconstruct state from a journal, read-only (no appending)."""
        store = cls(journal_path=None, reviewer_roles=reviewer_roles)
        path = Path(journal_path)
        if path.exists():
            store._replay_lines(path.read_text(encoding="utf-8").splitlines())
        return store

    def close(self) -> None:
        if self._journal_file is not None:
            self._journal_file.flush()
            self._journal_file.close()
            self._journal_file = None

    def __enter__(self) -> "InventoryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _replay_lines(self, lines: Iterable[str]) -> None:
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorruptJournal(lineno, f"invalid JSON: {err}", self) from None
            try:
                seq = event["seq"]
                kind = event["kind"]
                payload = event["payload"]
                event["ts"]
            except (KeyError, TypeError) as err:
                raise CorruptJournal(lineno, f"missing field: {err}", self) from None
            if not isinstance(seq, int) or seq <= self._seq:
                raise CorruptJournal(lineno, f"seq {seq!r} not strictly increasing", self)
            try:
                self._apply(kind, payload)
            except Exception as err:
                raise CorruptJournal(lineno, f"{kind}: {err}", self) from None
            self._seq = seq

    # -- event plumbing ------------------------------------------------------

    def _commit(self, kind: str, payload: dict) -> None:
        self._seq += 1
        event = {"seq": self._seq, "ts": _iso(self._clock()), "kind": kind, "payload": payload}
        if self._journal_path is not None:
            if self._journal_file is None:
                self._journal_path.parent.mkdir(parents=True, exist_ok=True)
                self._journal_file = self._journal_path.open("a", encoding="utf-8")
            self._journal_file.write(json.dumps(event, sort_keys=True) + "\n")
            self._journal_file.flush()
        self._apply(kind, payload)

    def _apply(self, kind: str, payload: dict) -> None:
        if kind == "register":
            self._apply_register(payload)
        elif kind == "attach_scan":
            self._apply_attach_scan(payload)
        elif kind == "request_clearance":
            self._apply_request_clearance(payload)
        elif kind == "decide":
            self._apply_decide(payload)
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _apply_register(self, p: dict) -> None:
        component_id = p["component_id"]
        component = self.components.get(component_id)
        if component is None:
            component = ComponentRecord(
                component_id=component_id,
                canonical_name=p["canonical_name"],
                homepage=p.get("homepage"),
            )
            self.components[component_id] = component
            self._canonical_index[component.canonical_name] = component_id
            self._id_counter = max(self._id_counter, int(component_id.lstrip("c")))
        coords = Coordinates.from_dict(p["coords"])
        component.aliases.add(coords.unversioned())
        self._alias_index[coords.key()] = component_id
        if p.get("homepage") and component.homepage is None:
            component.homepage = p["homepage"]
        if coords.version is not None:
            release = component.releases.get(coords.version)
            if release is None:
                release = ReleaseRecord(version=coords.version)
                component.releases[coords.version] = release
            if p.get("declared_license") and release.declared_license is None:
                if release.state not in (ReleaseState.CLEARED, ReleaseState.REJECTED):
                    release.declared_license = parse_expression(p["declared_license"])
            if p.get("source_ref") and release.source_ref is None:
                url, content_hash = p["source_ref"]
                release.source_ref = (url, content_hash)

    def _apply_attach_scan(self, p: dict) -> None:
        ref = ReleaseRef(p["component_id"], p["version"])
        release = self._release(ref)
        if release.state not in (ReleaseState.NEW, ReleaseState.SCANNED):
            raise IllegalTransition(ref, release.state, "attach_scan")
        release.findings = [_finding_from_dict(d) for d in p["findings"]]
        release.detected_license = (
            parse_expression(p["summary"]) if p.get("summary") else None
        )
        release.state = ReleaseState.SCANNED

    def _apply_request_clearance(self, p: dict) -> None:
        ref = ReleaseRef(p["component_id"], p["version"])
        release = self._release(ref)
        if release.state not in (ReleaseState.SCANNED, ReleaseState.REJECTED):
            raise IllegalTransition(ref, release.state, "request_clearance")
        release.state = ReleaseState.PENDING_REVIEW
        release.requested_at = _parse_iso(p["requested_at"])
        self._request_counter += 1

    def _apply_decide(self, p: dict) -> None:
        ref = ReleaseRef(p["component_id"], p["version"])
        release = self._release(ref)
        if release.state is not ReleaseState.PENDING_REVIEW:
            raise IllegalTransition(ref, release.state, "decide")
        decision = ClearanceDecision.from_dict(p["decision"])
        if decision.role not in self.reviewer_roles:
            raise Unauthorized(decision.role)
        release.decisions.append(decision)
        release.state = (
            ReleaseState.CLEARED if decision.verdict == "cleared" else ReleaseState.REJECTED
        )

    # -- operations ---------------------------------------------------------

    def register_component(
        self,
        coords: Coordinates,
        canonical_name: str | None = None,
        homepage: str | None = None,
        declared_license: LicenseExpression | None = None,
        source_ref: tuple[str, str | None] | None = None,
    ) -> str:
        """Idempotently register coordinates, returning the component id.

        Known coordinates return their existing component. A supplied
        ``canonical_name`` naming an existing component attaches the
        coordinates as an alias of it; a conflict between the binding and
        the requested name raises :class:`AliasConflict`.
        """
        bound_id = self._alias_index.get(coords.key())
        if bound_id is not None and canonical_name is not None:
            target_id = self._canonical_index.get(canonical_name)
            if target_id is not None and target_id != bound_id:
                raise AliasConflict(coords, self.components[bound_id].canonical_name, canonical_name)

        if bound_id is not None:
            component_id = bound_id
            name = self.components[bound_id].canonical_name
        else:
            name = canonical_name or f"{coords.ecosystem}/{coords.name}"
            existing_id = self._canonical_index.get(name)
            if existing_id is not None:
                component_id = existing_id
            else:
                self._id_counter += 1
                component_id = f"c{self._id_counter}"

        payload: dict = {
            "component_id": component_id,
            "canonical_name": name,
            "coords": coords.to_dict(),
        }
        if homepage:
            payload["homepage"] = homepage
        if declared_license is not None:
            payload["declared_license"] = render(declared_license)
        if source_ref is not None:
            payload["source_ref"] = [source_ref[0], source_ref[1]]

        if self._register_changes_state(component_id, coords, payload):
            self._commit("register", payload)
        return component_id

    def _register_changes_state(
        self, component_id: str, coords: Coordinates, payload: dict
    ) -> bool:
        component = self.components.get(component_id)
        if component is None:
            return True
        if coords.unversioned() not in component.aliases:
            return True
        if coords.version is not None:
            release = component.releases.get(coords.version)
            if release is None:
                return True
            if payload.get("declared_license") and release.declared_license is None:
                return release.state not in (ReleaseState.CLEARED, ReleaseState.REJECTED)
            if payload.get("source_ref") and release.source_ref is None:
                return True
        if payload.get("homepage") and component.homepage is None:
            return True
        return False

    def attach_scan(
        self,
        ref: ReleaseRef,
        findings: list[ScanFinding],
        summary: LicenseExpression | None,
    ) -> ReleaseRecord:
        """Store scan results; the release moves (or stays) at SCANNED."""
        release = self._release(ref)
        if release.state not in (ReleaseState.NEW, ReleaseState.SCANNED):
            raise IllegalTransition(ref, release.state, "attach_scan")
        self._commit(
            "attach_scan",
            {
                "component_id": ref.component_id,
                "version": ref.version,
                "findings": [_finding_to_dict(f) for f in findings],
                "summary": render(summary) if summary is not None else None,
            },
        )
        return self._release(ref)

    def request_clearance(self, ref: ReleaseRef) -> str:
        """Open a review request for a scanned (or re-reviewed) release."""
        release = self._release(ref)
        if release.state not in (ReleaseState.SCANNED, ReleaseState.REJECTED):
            raise IllegalTransition(ref, release.state, "request_clearance")
        request_id = f"req-{self._request_counter + 1}"
        self._commit(
            "request_clearance",
            {
                "component_id": ref.component_id,
                "version": ref.version,
                "request_id": request_id,
                "requested_at": _iso(self._clock()),
            },
        )
        return request_id

    def decide(self, ref: ReleaseRef, decision: ClearanceDecision) -> ReleaseRecord:
        """Record a reviewer's go/no-go determination."""
        release = self._release(ref)
        if release.state is not ReleaseState.PENDING_REVIEW:
            raise IllegalTransition(ref, release.state, "decide")
        if decision.role not in self.reviewer_roles:
            raise Unauthorized(decision.role)
        self._commit(
            "decide",
            {
                "component_id": ref.component_id,
                "version": ref.version,
                "decision": decision.to_dict(),
            },
        )
        return self._release(ref)

    def lookup(self, coords: Coordinates) -> tuple[ReleaseRef, ReleaseState] | None:
        """Resolve coordinates (through aliases) to a release and its state."""
        component_id = self._alias_index.get(coords.key())
        if component_id is None or coords.version is None:
            return None
        release = self.components[component_id].releases.get(coords.version)
        if release is None:
            return None
        return ReleaseRef(component_id, coords.version), release.state

    # -- queries -------------------------------------------------------------

    def _release(self, ref: ReleaseRef) -> ReleaseRecord:
        component = self.components.get(ref.component_id)
        if component is None or ref.version not in component.releases:
            raise KeyError(f"unknown release {ref.release_id()}")
        return component.releases[ref.version]

    def release(self, ref: ReleaseRef) -> ReleaseRecord:
        return self._release(ref)

    def find_release(self, release_id: str) -> tuple[ReleaseRef, ReleaseRecord] | None:
        try:
            ref = ReleaseRef.from_release_id(release_id)
            return ref, self._release(ref)
        except (ValueError, KeyError):
            return None

    def component(self, component_id: str) -> ComponentRecord | None:
        return self.components.get(component_id)

    def releases_in_state(self, *states: ReleaseState) -> list[tuple[ReleaseRef, ReleaseRecord]]:
        wanted = set(states)
        out = []
        for component_id in sorted(self.components):
            component = self.components[component_id]
            for version in sorted(component.releases):
                release = component.releases[version]
                if release.state in wanted:
                    out.append((ReleaseRef(component_id, version), release))
        return out

    def pending_queue(self) -> list[tuple[ReleaseRef, ReleaseRecord]]:
        """Open clearance requests, oldest first, then by component/version."""
        pending = self.releases_in_state(ReleaseState.PENDING_REVIEW)
        return sorted(
            pending,
            key=lambda pair: (
                _iso(pair[1].requested_at) if pair[1].requested_at else "",
                pair[0],
            ),
        )

    # -- snapshots -------------------------------------------------------------

    def snapshot(self) -> dict:
        components = {}
        for component_id in sorted(self.components):
            component = self.components[component_id]
            releases = {}
            for version in sorted(component.releases):
                release = component.releases[version]
                releases[version] = {
                    "state": release.state.value,
                    "source_ref": list(release.source_ref) if release.source_ref else None,
                    "declared_license": render(release.declared_license)
                    if release.declared_license
                    else None,
                    "detected_license": render(release.detected_license)
                    if release.detected_license
                    else None,
                    "findings": [_finding_to_dict(f) for f in release.findings],
                    "decisions": [d.to_dict() for d in release.decisions],
                    "requested_at": _iso(release.requested_at)
                    if release.requested_at
                    else None,
                }
            components[component_id] = {
                "canonical_name": component.canonical_name,
                "homepage": component.homepage,
                "aliases": sorted(str(a) for a in component.aliases),
                "releases": releases,
            }
        return {"schema_version": SNAPSHOT_SCHEMA_VERSION, "components": components}

    def snapshot_json(self) -> bytes:
        return json.dumps(self.snapshot(), sort_keys=True, indent=2).encode("utf-8")
