"""Compliance deliverables generated from a product evaluation.

* ``sbom.spdx.json`` — SPDX 2.3 JSON subset, one package per graph node,
  DEPENDS_ON relationship per edge; canonical key order and an injectable
  timestamp make output byte-reproducible.
* ``NOTICE.txt`` — attribution sections per component plus each license
  text once.
* ``licenses.csv`` — spreadsheet-friendly list of all licenses in use.
* ``ccs-manifest.json`` + ``source-offer.txt`` — which components owe
  complete-and-corresponding source on this channel, and the written
  offer accompanying binaries.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

from . import __version__
from .ingest import DependencyGraph, ProductManifest
from .inventory import Coordinates, InventoryStore, ReleaseRecord, ReleaseState
from .licexpr import render
from .policy import (
    ATTRIBUTION_KINDS,
    DISCLOSURE_KINDS,
    PolicyDocument,
    evaluate_product,
    obligations_for,
)
from .scanner import Corpus, bundled_corpus

__all__ = [
    "SBOM_SCHEMA_NAMESPACE",
    "NoticesResult",
    "CcsResult",
    "generate_sbom",
    "generate_notices",
    "generate_license_list",
    "generate_ccs_manifest",
    "DEFAULT_OFFER_CONTACT",
]

SBOM_SCHEMA_NAMESPACE = "https://complygate.invalid/schemas/sbom-subset/1"

DEFAULT_OFFER_CONTACT = "[REPLACE WITH DISTRIBUTOR CONTACT]"

_RULE = "=" * 78
_THIN_RULE = "-" * 78


def _release_for(
    inventory: InventoryStore, coords: Coordinates
) -> ReleaseRecord | None:
    located = inventory.lookup(coords)
    if located is None:
        return None
    ref, _ = located
    return inventory.release(ref)


def _purl(coords: Coordinates) -> str:
    version = f"@{coords.version}" if coords.version else ""
    return f"pkg:{coords.ecosystem}/{coords.name}{version}"


def generate_sbom(
    manifest: ProductManifest,
    graph: DependencyGraph,
    inventory: InventoryStore,
    created: datetime | None = None,
) -> bytes:
    """Serialize the dependency graph as an SPDX 2.3 JSON document.

    ``licenseConcluded`` carries the scanner-detected (cleared) expression,
    ``licenseDeclared`` the upstream declaration; absences serialize as
    ``NOASSERTION``. Passing ``created`` pins the timestamp for
    byte-identical output.
    """
    created = created or datetime.now(timezone.utc)
    nodes = graph.sorted_nodes()
    spdx_ids = {coords: f"SPDXRef-Package-{i}" for i, coords in enumerate(nodes, start=1)}

    packages = []
    for coords in nodes:
        release = _release_for(inventory, coords)
        concluded = declared = "NOASSERTION"
        download = "NOASSERTION"
        copyright_text = "NOASSERTION"
        if release is not None:
            if release.detected_license is not None:
                concluded = render(release.detected_license)
            if release.declared_license is not None:
                declared = render(release.declared_license)
            if release.source_ref is not None:
                download = release.source_ref[0]
            lines = _harvest_copyrights(release)
            if lines:
                copyright_text = "\n".join(lines)
        packages.append(
            {
                "SPDXID": spdx_ids[coords],
                "name": coords.name,
                "versionInfo": coords.version or "NOASSERTION",
                "licenseConcluded": concluded,
                "licenseDeclared": declared,
                "downloadLocation": download,
                "copyrightText": copyright_text,
                "externalRefs": [
                    {
                        "referenceCategory": "PACKAGE-MANAGER",
                        "referenceType": "purl",
                        "referenceLocator": _purl(coords),
                    }
                ],
            }
        )

    relationships = sorted(
        (
            {
                "spdxElementId": spdx_ids[edge.src] if edge.src else "SPDXRef-DOCUMENT",
                "relationshipType": "DEPENDS_ON",
                "relatedSpdxElement": spdx_ids[edge.dst],
            }
            for edge in graph.edges
        ),
        key=lambda r: (r["spdxElementId"], r["relatedSpdxElement"]),
    )

    document = {
        "spdxVersion": "SPDX-2.3",
        "SPDXID": "SPDXRef-DOCUMENT",
        "name": f"{manifest.product_name}-{manifest.product_version}",
        "documentNamespace": f"{SBOM_SCHEMA_NAMESPACE}/{manifest.product_name}/{manifest.product_version}",
        "creationInfo": {
            "created": created.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "creators": [f"Tool: complygate-{__version__}"],
        },
        "packages": packages,
        "relationships": relationships,
    }
    return (json.dumps(document, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _harvest_copyrights(release: ReleaseRecord) -> list[str]:
    lines: list[str] = []
    for finding in release.findings:
        for line in finding.copyright_lines:
            if line not in lines:
                lines.append(line)
    return lines


@dataclass
class NoticesResult:
    text: str
    warnings: list[str] = field(default_factory=list)


def generate_notices(
    manifest: ProductManifest,
    graph: DependencyGraph,
    inventory: InventoryStore,
    policy: PolicyDocument,
    corpus: Corpus | None = None,
    clock: Callable[[], datetime] | None = None,
) -> NoticesResult:
    """Attribution document: one section per component owing attribution.

    Sections carry the component's raw copyright lines; each license text
    appears once in the appendix and sections reference it by id. Ids with
    no corpus text produce a ``MissingCorpusText`` warning and an id-only
    reference.
    """
    corpus = corpus if corpus is not None else bundled_corpus()
    evaluation = evaluate_product(manifest, graph, inventory, policy, clock=clock)
    warnings: list[str] = []
    sections: list[str] = []
    needed_texts: dict[str, str | None] = {}

    for verdict in evaluation.nodes:
        if not (verdict.obligations_due & ATTRIBUTION_KINDS):
            continue
        coords = verdict.subject
        license_ids = sorted(
            {t.license_id for t in verdict.chosen_licenses.terms}
            if verdict.chosen_licenses
            else set()
        )
        release = _release_for_subject(inventory, graph, coords)
        copyrights = _harvest_copyrights(release) if release else []
        for license_id in license_ids:
            if license_id in needed_texts:
                continue
            entry, fallback = corpus.get_fuzzy(license_id)
            if entry is None:
                warnings.append(f"MissingCorpusText: {license_id} (section emitted id-only)")
                needed_texts[license_id] = None
            else:
                if fallback:
                    warnings.append(
                        f"CaseInsensitiveLookup: {license_id} matched corpus entry {entry.license_id}"
                    )
                needed_texts[license_id] = entry.canonical_text
        lines = [coords, f"License: {', '.join(license_ids) or 'unknown'}"]
        lines.extend(copyrights)
        sections.append("\n".join(lines))

    out = io.StringIO()
    out.write(f"NOTICES for {manifest.product_name} {manifest.product_version}\n")
    out.write("This document lists open source components distributed with the\n")
    out.write("product and reproduces their license texts and copyright notices.\n")
    for section in sections:
        out.write(f"\n{_RULE}\n{section}\n")
    if needed_texts:
        out.write(f"\n{_RULE}\nLICENSE TEXTS\n")
        for license_id in sorted(needed_texts):
            out.write(f"\n{_THIN_RULE}\n{license_id}\n{_THIN_RULE}\n")
            text = needed_texts[license_id]
            out.write(text if text is not None else "(license text not on file)\n")
    return NoticesResult(text=out.getvalue(), warnings=warnings)


def _release_for_subject(
    inventory: InventoryStore, graph: DependencyGraph, subject: str
) -> ReleaseRecord | None:
    for coords in graph.nodes:
        if str(coords) == subject:
            return _release_for(inventory, coords)
    return None


def generate_license_list(
    manifest: ProductManifest,
    graph: DependencyGraph,
    inventory: InventoryStore,
) -> str:
    """CSV of every node: component, version, license, clearance state."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\r\n")
    writer.writerow(["component", "version", "license", "clearance_state"])
    for coords in graph.sorted_nodes():
        release = _release_for(inventory, coords)
        if release is None:
            license_text = ""
            state = "UNREGISTERED"
        else:
            effective = release.detected_license or release.declared_license
            license_text = render(effective) if effective else ""
            state = release.state.value
        writer.writerow(
            [f"{coords.ecosystem}/{coords.name}", coords.version or "", license_text, state]
        )
    return out.getvalue()


@dataclass
class CcsResult:
    manifest: dict
    offer_text: str
    warnings: list[str] = field(default_factory=list)

    def manifest_json(self) -> bytes:
        return (json.dumps(self.manifest, sort_keys=True, indent=2) + "\n").encode("utf-8")


def generate_ccs_manifest(
    manifest: ProductManifest,
    graph: DependencyGraph,
    inventory: InventoryStore,
    policy: PolicyDocument,
    contact: str = DEFAULT_OFFER_CONTACT,
    clock: Callable[[], datetime] | None = None,
) -> CcsResult:
    """Complete-and-corresponding-source manifest plus the written offer.

    Entries are exactly the nodes whose evaluated obligations on the
    manifest's channel include source_disclosure or source_offer. Entries
    without a recorded source archive are flagged INCOMPLETE (the gate
    surfaces those).
    """
    evaluation = evaluate_product(manifest, graph, inventory, policy, clock=clock)
    entries = []
    warnings: list[str] = []
    for verdict in evaluation.nodes:
        disclosure = verdict.obligations_due & DISCLOSURE_KINDS
        if not disclosure:
            continue
        triggering = sorted(
            t.render()
            for t in (verdict.chosen_licenses.terms if verdict.chosen_licenses else ())
            if obligations_for(t, manifest.channel, policy) & DISCLOSURE_KINDS
        )
        release = _release_for_subject(inventory, graph, verdict.subject)
        source_url = content_hash = None
        if release is not None and release.source_ref is not None:
            source_url, content_hash = release.source_ref
        incomplete = source_url is None
        if incomplete:
            warnings.append(f"INCOMPLETE: {verdict.subject} owes source but has no source_ref")
        entries.append(
            {
                "coords": verdict.subject,
                "license_ids": triggering,
                "source_url": source_url,
                "content_hash": content_hash,
                "offer_text_included": "source_offer" in disclosure,
                "incomplete": incomplete,
            }
        )

    entries.sort(key=lambda e: e["coords"])
    ccs_manifest = {
        "schema_version": 1,
        "product": manifest.product_name,
        "version": manifest.product_version,
        "channel": manifest.channel.value,
        "entries": entries,
    }
    offer = _render_offer(manifest, entries, contact)
    return CcsResult(manifest=ccs_manifest, offer_text=offer, warnings=warnings)


def _render_offer(manifest: ProductManifest, entries: list[dict], contact: str) -> str:
    lines = [
        "WRITTEN OFFER FOR CORRESPONDING SOURCE CODE",
        "",
        f"This offer accompanies {manifest.product_name} version "
        f"{manifest.product_version}.",
        "",
        "Some components of this product are licensed under terms that require",
        "the distributor to provide their complete and corresponding source",
        "code. We will provide a machine-readable copy of that source code to",
        "any third party, for a charge no more than the cost of physically",
        "performing the distribution, upon written request to:",
        "",
        f"    {contact}",
        "",
        "This offer is valid for at least three years from the date this",
        "product was distributed.",
        "",
    ]
    if entries:
        lines.append("Components covered by this offer:")
        for entry in entries:
            suffix = " [INCOMPLETE: source archive not yet recorded]" if entry["incomplete"] else ""
            lines.append(f"  - {entry['coords']} ({', '.join(entry['license_ids'])}){suffix}")
    else:
        lines.append("No components on this distribution channel require source offers.")
    lines.append("")
    return "\n".join(lines)
