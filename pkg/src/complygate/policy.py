"""Declarative license policy and its evaluation.

A policy classifies license ids per distribution channel (allow,
allow_with_obligations, review_required, deny), attaches obligations to
ids, and carries time-bounded waivers for specific coordinates. Patterns
are exact ids or trailing-``*`` globs; the most specific match wins.

Expression evaluation works over the choice sets of the expression: the
licensee may satisfy any one set, so the verdict is PASS when some set is
fully acceptable, FAIL when every set contains a denied license, and
NEEDS_REVIEW in between. Among passing sets the one with the fewest
obligations is chosen (ties broken by rendering).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from functools import total_ordering
from typing import Callable

from .ingest import DependencyGraph, DistributionChannel, ProductManifest, resolve_transitive
from .inventory import Coordinates, InventoryStore, ReleaseState
from .licexpr import ChoiceSet, LicenseExpression, LicenseTerm, to_choice_sets

__all__ = [
    "LicenseClass",
    "OBLIGATION_KINDS",
    "Obligation",
    "Waiver",
    "PolicyDocument",
    "PolicyError",
    "SchemaError",
    "DuplicateExactPattern",
    "Status",
    "Reason",
    "Verdict",
    "ExpressionVerdict",
    "ProductEvaluation",
    "load_policy",
    "classify",
    "evaluate_expression",
    "evaluate_product",
]

POLICY_SCHEMA_VERSION = 1

OBLIGATION_KINDS = (
    "attribution",
    "source_disclosure",
    "same_license",
    "notice_file",
    "source_offer",
)

ATTRIBUTION_KINDS = frozenset({"attribution", "notice_file"})
DISCLOSURE_KINDS = frozenset({"source_disclosure", "source_offer"})

_CHANNEL_VALUES = tuple(c.value for c in DistributionChannel)


class PolicyError(ValueError):
    pass


class SchemaError(PolicyError):
    def __init__(self, path: str, detail: str) -> None:
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")


class DuplicateExactPattern(PolicyError):
    def __init__(self, pattern: str) -> None:
        self.pattern = pattern
        super().__init__(f"duplicate exact pattern {pattern!r}")


class LicenseClass(Enum):
    ALLOW = "allow"
    ALLOW_WITH_OBLIGATIONS = "allow_with_obligations"
    REVIEW_REQUIRED = "review_required"
    DENY = "deny"


_ACCEPTABLE = (LicenseClass.ALLOW, LicenseClass.ALLOW_WITH_OBLIGATIONS)


@total_ordering
class Status(Enum):
    """Verdict severity: FAIL dominates NEEDS_REVIEW dominates PASS."""

    PASS = 0
    NEEDS_REVIEW = 1
    FAIL = 2

    def __lt__(self, other: "Status") -> bool:
        return self.value < other.value


@dataclass(frozen=True)
class Obligation:
    kind: str
    channels: frozenset[str]  # channel values, or {"*"}

    def applies_to(self, channel: DistributionChannel) -> bool:
        return "*" in self.channels or channel.value in self.channels


@dataclass(frozen=True)
class Waiver:
    coords_pattern: str  # "<ecosystem>/<name>@<version>", trailing * glob allowed
    reason: str
    approver: str
    expires: date

    def matches(self, coords: Coordinates) -> bool:
        return _pattern_matches(self.coords_pattern, str(coords))

    def is_active(self, now: datetime) -> bool:
        return now.astimezone(timezone.utc).date() <= self.expires


@dataclass
class PolicyDocument:
    policy_version: str
    default_class: LicenseClass
    classes: dict[str, dict[str, LicenseClass]] = field(default_factory=dict)
    obligations: dict[str, frozenset[Obligation]] = field(default_factory=dict)
    waivers: list[Waiver] = field(default_factory=list)
    load_warnings: list[str] = field(default_factory=list)


def _pattern_matches(pattern: str, candidate: str) -> bool:
    if pattern.endswith("*"):
        return candidate.startswith(pattern[:-1])
    return pattern == candidate


def _is_glob(pattern: str) -> bool:
    return pattern.endswith("*")


# --- loading ----------------------------------------------------------------


def _reject_duplicate_keys(pairs):
    keys = [k for k, _ in pairs]
    seen = set()
    for key in keys:
        if key in seen:
            if _is_glob(key):
                raise SchemaError(key, "duplicate glob pattern")
            raise DuplicateExactPattern(key)
        seen.add(key)
    return dict(pairs)


def _parse_class(raw, path: str) -> LicenseClass:
    try:
        return LicenseClass(raw)
    except ValueError:
        raise SchemaError(path, f"{raw!r} not one of {[c.value for c in LicenseClass]}") from None


def _parse_channel_key(raw: str, path: str) -> str:
    if raw != "*" and raw not in _CHANNEL_VALUES:
        raise SchemaError(path, f"{raw!r} not a channel or '*'")
    return raw


def load_policy(
    data: bytes | str, clock: Callable[[], datetime] | None = None
) -> PolicyDocument:
    """Parse and validate a policy document; unknown keys are rejected.

    Waivers already expired at load time produce warnings on the returned
    document, not errors.
    """
    now = (clock or (lambda: datetime.now(timezone.utc)))()
    try:
        doc = json.loads(data, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"invalid JSON: {err}") from None

    known = {"schema_version", "policy_version", "default_class", "classes", "obligations", "waivers"}
    for key in doc:
        if key not in known:
            raise SchemaError(key, "unknown key")
    if doc.get("schema_version", POLICY_SCHEMA_VERSION) != POLICY_SCHEMA_VERSION:
        raise SchemaError("schema_version", f"expected {POLICY_SCHEMA_VERSION}")
    version = doc.get("policy_version")
    if not version or not isinstance(version, str):
        raise SchemaError("policy_version", "required non-empty string")
    if "default_class" not in doc:
        raise SchemaError("default_class", "missing required field")
    default_class = _parse_class(doc["default_class"], "default_class")

    classes: dict[str, dict[str, LicenseClass]] = {}
    for pattern, channel_map in doc.get("classes", {}).items():
        where = f"classes.{pattern}"
        if isinstance(channel_map, str):
            # Shorthand: a bare class applies to every channel.
            classes[pattern] = {"*": _parse_class(channel_map, where)}
            continue
        if not isinstance(channel_map, dict) or not channel_map:
            raise SchemaError(where, "expected a class or a channel-to-class map")
        classes[pattern] = {
            _parse_channel_key(ch, f"{where}.{ch}"): _parse_class(cls, f"{where}.{ch}")
            for ch, cls in channel_map.items()
        }

    obligations: dict[str, frozenset[Obligation]] = {}
    for pattern, entries in doc.get("obligations", {}).items():
        where = f"obligations.{pattern}"
        if not isinstance(entries, list):
            raise SchemaError(where, "expected a list of obligations")
        parsed = set()
        for i, entry in enumerate(entries):
            entry_where = f"{where}[{i}]"
            if not isinstance(entry, dict):
                raise SchemaError(entry_where, "expected an object")
            for key in entry:
                if key not in ("kind", "channels"):
                    raise SchemaError(f"{entry_where}.{key}", "unknown key")
            kind = entry.get("kind")
            if kind not in OBLIGATION_KINDS:
                raise SchemaError(f"{entry_where}.kind", f"{kind!r} not one of {OBLIGATION_KINDS}")
            channels = entry.get("channels", ["*"])
            if not isinstance(channels, list) or not channels:
                raise SchemaError(f"{entry_where}.channels", "expected a non-empty list")
            parsed.add(
                Obligation(
                    kind=kind,
                    channels=frozenset(
                        _parse_channel_key(c, f"{entry_where}.channels") for c in channels
                    ),
                )
            )
        obligations[pattern] = frozenset(parsed)

    warnings: list[str] = []
    waivers: list[Waiver] = []
    for i, entry in enumerate(doc.get("waivers", [])):
        where = f"waivers[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(where, "expected an object")
        for key in entry:
            if key not in ("coords", "reason", "approver", "expires"):
                raise SchemaError(f"{where}.{key}", "unknown key")
        for required in ("coords", "reason", "approver", "expires"):
            if not entry.get(required):
                raise SchemaError(f"{where}.{required}", "required non-empty field")
        try:
            expires = date.fromisoformat(entry["expires"])
        except ValueError as err:
            raise SchemaError(f"{where}.expires", str(err)) from None
        waiver = Waiver(
            coords_pattern=entry["coords"],
            reason=entry["reason"],
            approver=entry["approver"],
            expires=expires,
        )
        if not waiver.is_active(now):
            warnings.append(f"{where}: waiver for {waiver.coords_pattern} expired {expires}")
        waivers.append(waiver)

    return PolicyDocument(
        policy_version=version,
        default_class=default_class,
        classes=classes,
        obligations=obligations,
        waivers=waivers,
        load_warnings=warnings,
    )


# --- classification ------------------------------------------------------------


def _match_candidates(term: LicenseTerm) -> tuple[str, str]:
    """(full rendering, base id) the term is matched under.

    The or-later flag matches the base id; an exact pattern spelled like the
    full rendering (``X+``, ``X WITH Y``) overrides the base id match.
    """
    return term.render(), term.license_id


def _best_pattern(patterns, term: LicenseTerm) -> str | None:
    full, base = _match_candidates(term)
    exact_full = [p for p in patterns if not _is_glob(p) and p == full]
    if exact_full:
        return exact_full[0]
    exact_base = [p for p in patterns if not _is_glob(p) and p == base]
    if exact_base:
        return exact_base[0]
    globs = [p for p in patterns if _is_glob(p) and _pattern_matches(p, base)]
    if globs:
        # Longest prefix wins; ties break to the lexicographically smallest.
        return min(globs, key=lambda p: (-len(p), p))
    return None


def classify(
    term: LicenseTerm, channel: DistributionChannel, policy: PolicyDocument
) -> LicenseClass:
    """Class of one license term for one channel under the policy."""
    pattern = _best_pattern(policy.classes, term)
    if pattern is None:
        return policy.default_class
    channel_map = policy.classes[pattern]
    if channel.value in channel_map:
        return channel_map[channel.value]
    if "*" in channel_map:
        return channel_map["*"]
    return policy.default_class


def obligations_for(
    term: LicenseTerm, channel: DistributionChannel, policy: PolicyDocument
) -> frozenset[str]:
    """Obligation kinds the term carries on this channel (union of matches)."""
    full, base = _match_candidates(term)
    kinds: set[str] = set()
    for pattern, entries in policy.obligations.items():
        if _is_glob(pattern):
            matched = _pattern_matches(pattern, base)
        else:
            matched = pattern in (full, base)
        if not matched:
            continue
        kinds.update(o.kind for o in entries if o.applies_to(channel))
    return frozenset(kinds)


# --- verdicts ------------------------------------------------------------------


@dataclass(frozen=True)
class Reason:
    code: str  # UNCLEARED | NO_LICENSE | LICENSE_DENIED | LICENSE_REVIEW | WAIVED | EXPANSION_LIMIT
    message: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "evidence": self.evidence}


@dataclass
class Verdict:
    subject: str  # coordinates string, or "product:<name>@<version>"
    status: Status
    reasons: list[Reason] = field(default_factory=list)
    chosen_licenses: ChoiceSet | None = None
    obligations_due: frozenset[str] = frozenset()
    policy_version: str = ""

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "status": self.status.name,
            "reasons": [r.to_dict() for r in self.reasons],
            "chosen_licenses": self.chosen_licenses.render() if self.chosen_licenses else None,
            "obligations_due": sorted(self.obligations_due),
            "policy_version": self.policy_version,
        }


@dataclass(frozen=True)
class ExpressionVerdict:
    status: Status
    chosen: ChoiceSet | None
    obligations: frozenset[str]


def evaluate_expression(
    expr: LicenseExpression, channel: DistributionChannel, policy: PolicyDocument
) -> ExpressionVerdict:
    """Acceptability of one expression on one channel.

    PASS when some choice set is entirely allow/allow_with_obligations;
    the chosen set minimizes the number of obligation kinds (ties broken
    by rendering). FAIL when every set contains a denied term. Otherwise
    NEEDS_REVIEW.
    """
    choice_sets = to_choice_sets(expr)

    passing: list[tuple[int, str, ChoiceSet, frozenset[str]]] = []
    any_deny_free = False
    for cs in choice_sets:
        term_classes = [classify(t, channel, policy) for t in cs.sorted_terms()]
        if all(c is not LicenseClass.DENY for c in term_classes):
            any_deny_free = True
        if all(c in _ACCEPTABLE for c in term_classes):
            kinds = frozenset().union(
                *(obligations_for(t, channel, policy) for t in cs.terms)
            )
            passing.append((len(kinds), cs.render(), cs, kinds))

    if passing:
        _, _, chosen, kinds = min(passing, key=lambda entry: (entry[0], entry[1]))
        return ExpressionVerdict(Status.PASS, chosen, kinds)
    if any_deny_free:
        return ExpressionVerdict(Status.NEEDS_REVIEW, None, frozenset())
    return ExpressionVerdict(Status.FAIL, None, frozenset())


@dataclass
class ProductEvaluation:
    product: Verdict
    nodes: list[Verdict]

    def all_verdicts(self) -> list[Verdict]:
        return self.nodes + [self.product]


def _denied_terms(
    expr: LicenseExpression, channel: DistributionChannel, policy: PolicyDocument
) -> list[str]:
    from .licexpr import licenses_mentioned

    return sorted(
        t.render()
        for t in licenses_mentioned(expr)
        if classify(t, channel, policy) is LicenseClass.DENY
    )


def _review_terms(
    expr: LicenseExpression, channel: DistributionChannel, policy: PolicyDocument
) -> list[str]:
    from .licexpr import licenses_mentioned

    return sorted(
        t.render()
        for t in licenses_mentioned(expr)
        if classify(t, channel, policy) is LicenseClass.REVIEW_REQUIRED
    )


def evaluate_product(
    manifest: ProductManifest,
    graph: DependencyGraph,
    inventory: InventoryStore,
    policy: PolicyDocument,
    clock: Callable[[], datetime] | None = None,
    scopes: frozenset[str] | None = frozenset({"build", "runtime"}),
) -> ProductEvaluation:
    """Per-node verdicts plus the product aggregate.

    A node that is missing from the inventory or not CLEARED gets an
    UNCLEARED reason; a node with neither detected nor declared license
    gets NO_LICENSE; otherwise its effective expression is evaluated for
    the manifest's channel. An unexpired waiver matching the node
    downgrades FAIL/NEEDS_REVIEW to PASS with a WAIVED reason. The product
    status is the worst node status.
    """
    now = (clock or (lambda: datetime.now(timezone.utc)))()
    from .licexpr import render as render_expr

    roots = sorted(set(graph.roots()) | set(manifest.root_dependencies))
    nodes = resolve_transitive(graph, roots=roots, scopes=scopes)

    node_verdicts: list[Verdict] = []
    for coords in nodes:
        reasons: list[Reason] = []
        severity = Status.PASS
        chosen: ChoiceSet | None = None
        obligations: frozenset[str] = frozenset()

        located = inventory.lookup(coords)
        release = None
        if located is None:
            reasons.append(
                Reason("UNCLEARED", f"{coords} is not in the component inventory",
                       {"coords": str(coords)})
            )
            severity = max(severity, Status.NEEDS_REVIEW)
        else:
            ref, state = located
            release = inventory.release(ref)
            if state is not ReleaseState.CLEARED:
                reasons.append(
                    Reason(
                        "UNCLEARED",
                        f"{coords} is in state {state.value}, not CLEARED",
                        {"coords": str(coords), "state": state.value},
                    )
                )
                severity = max(severity, Status.NEEDS_REVIEW)

        effective = None
        if release is not None:
            effective = release.detected_license or release.declared_license

        if effective is None:
            reasons.append(
                Reason("NO_LICENSE", f"{coords} has no detected or declared license",
                       {"coords": str(coords)})
            )
            severity = max(severity, Status.NEEDS_REVIEW)
        else:
            expr_verdict = evaluate_expression(effective, manifest.channel, policy)
            if expr_verdict.status is Status.FAIL:
                denied = _denied_terms(effective, manifest.channel, policy)
                reasons.append(
                    Reason(
                        "LICENSE_DENIED",
                        f"{coords}: every licensing choice includes a denied license "
                        f"({', '.join(denied)}) on channel {manifest.channel.value}",
                        {
                            "coords": str(coords),
                            "expression": render_expr(effective),
                            "denied_terms": denied,
                            "channel": manifest.channel.value,
                        },
                    )
                )
                severity = Status.FAIL
            elif expr_verdict.status is Status.NEEDS_REVIEW:
                reasons.append(
                    Reason(
                        "LICENSE_REVIEW",
                        f"{coords}: no licensing choice is fully allowed "
                        f"({render_expr(effective)}) on channel {manifest.channel.value}",
                        {
                            "coords": str(coords),
                            "expression": render_expr(effective),
                            "review_terms": _review_terms(effective, manifest.channel, policy),
                            "channel": manifest.channel.value,
                        },
                    )
                )
                severity = max(severity, Status.NEEDS_REVIEW)
            else:
                chosen = expr_verdict.chosen
                obligations = expr_verdict.obligations

        if severity is not Status.PASS:
            waiver = _active_waiver(policy, coords, now)
            if waiver is not None:
                waived_codes = sorted({r.code for r in reasons})
                reasons = [
                    Reason(
                        "WAIVED",
                        f"{coords}: {('/'.join(waived_codes))} waived by {waiver.approver} "
                        f"until {waiver.expires.isoformat()} ({waiver.reason})",
                        {
                            "coords": str(coords),
                            "waived_codes": waived_codes,
                            "approver": waiver.approver,
                            "expires": waiver.expires.isoformat(),
                            "reason": waiver.reason,
                        },
                    )
                ]
                severity = Status.PASS

        node_verdicts.append(
            Verdict(
                subject=str(coords),
                status=severity,
                reasons=reasons,
                chosen_licenses=chosen,
                obligations_due=obligations,
                policy_version=policy.policy_version,
            )
        )

    product_status = max((v.status for v in node_verdicts), default=Status.PASS)
    product_reasons = [
        Reason(
            v.reasons[0].code if v.reasons else "NODE",
            f"{v.subject}: {v.status.name}",
            {"coords": v.subject, "codes": sorted({r.code for r in v.reasons})},
        )
        for v in node_verdicts
        if v.status is not Status.PASS
    ]
    product = Verdict(
        subject=f"product:{manifest.product_name}@{manifest.product_version}",
        status=product_status,
        reasons=product_reasons,
        policy_version=policy.policy_version,
    )
    return ProductEvaluation(product=product, nodes=node_verdicts)


def _active_waiver(
    policy: PolicyDocument, coords: Coordinates, now: datetime
) -> Waiver | None:
    for waiver in policy.waivers:
        if waiver.matches(coords) and waiver.is_active(now):
            return waiver
    return None
