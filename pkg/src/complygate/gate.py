"""The CI gate: ingest, evaluate, generate artifacts, and set the exit code.

Exit code contract (bit-exact):

* 0 — policy satisfied (NEEDS_REVIEW folds into 0 unless strict)
* 1 — policy violation (some node FAILs)
* 2 — NEEDS_REVIEW present and strict mode on
* 3 — internal error: bad config, unreadable inputs, corrupt journal

Artifacts are generated on exit 0/2 unless ``artifacts_always`` is set;
the report is always written. A baseline report can be supplied so that
only findings absent from the baseline affect the exit code (adoption on
legacy products).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .artifacts import (
    DEFAULT_OFFER_CONTACT,
    generate_ccs_manifest,
    generate_license_list,
    generate_notices,
    generate_sbom,
)
from .enrichment import EnrichmentConfig, apply_enrichment, enrich
from .ingest import (
    DependencyGraph,
    ProductManifest,
    SchemaError,
    UnknownFormat,
    graph_from_spdx,
    import_spdx,
    load_manifest,
    parse_lockfile,
)
from .inventory import (
    Coordinates,
    CorruptJournal,
    InventoryStore,
    ReleaseRef,
    ReleaseState,
)
from .policy import (
    PolicyDocument,
    ProductEvaluation,
    Status,
    Verdict,
    evaluate_product,
    load_policy,
)
from .policy import SchemaError as PolicySchemaError
from .scanner import ScanConfig, bundled_corpus, scan_tree

__all__ = [
    "GateInputError",
    "EXIT_PASS",
    "EXIT_FAIL",
    "EXIT_REVIEW",
    "EXIT_ERROR",
    "GateConfig",
    "GateReport",
    "SyncSummary",
    "run_check",
    "sync_inventory",
]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_REVIEW = 2
EXIT_ERROR = 3

REPORT_SCHEMA_VERSION = 1

_REASON_SEVERITY = {
    "LICENSE_DENIED": Status.FAIL,
    "LICENSE_REVIEW": Status.NEEDS_REVIEW,
    "UNCLEARED": Status.NEEDS_REVIEW,
    "NO_LICENSE": Status.NEEDS_REVIEW,
    "WAIVED": Status.PASS,
}


@dataclass(frozen=True)
class GateConfig:
    """Everything one gate run needs; all paths validated up front."""

    manifest_path: Path
    policy_path: Path
    journal_path: Path
    out_dir: Path
    lockfiles: tuple[tuple[str, Path], ...] = ()  # (format id, path)
    sbom_in: Path | None = None
    report_format: str = "text"  # "text" | "json"
    strict: bool = False
    baseline_path: Path | None = None
    artifacts_always: bool = False
    write_sbom: bool = True
    write_notices: bool = True
    write_license_list: bool = True
    write_ccs: bool = True
    include_scopes: frozenset[str] = frozenset({"build", "runtime"})
    sources_dir: Path | None = None
    enrichment: EnrichmentConfig | None = None
    offer_contact: str = DEFAULT_OFFER_CONTACT


@dataclass
class GateReport:
    product: Verdict | None
    nodes: list[Verdict]
    warnings: list[str]
    artifact_paths: dict[str, str]
    policy_version: str
    timing_secs: float
    exit_code: int
    strict: bool
    baselined: list[dict] = field(default_factory=list)
    generated_at: str = ""
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "generated_at": self.generated_at,
            "exit_code": self.exit_code,
            "strict": self.strict,
            "policy_version": self.policy_version,
            "product": self.product.to_dict() if self.product else None,
            "nodes": [v.to_dict() for v in self.nodes],
            "baselined": self.baselined,
            "warnings": self.warnings,
            "artifacts": self.artifact_paths,
            "timing_secs": self.timing_secs,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = []
        if self.error is not None:
            lines.append(f"ERROR {self.error}")
        if self.product is not None:
            lines.append(
                f"RESULT {self.product.status.name} {self.product.subject} "
                f"policy={self.policy_version} exit={self.exit_code}"
            )
        for verdict in self.nodes:
            if verdict.status is Status.PASS:
                waived = [r for r in verdict.reasons if r.code == "WAIVED"]
                if waived:
                    lines.append(f"WAIVED {verdict.subject} {waived[0].message}")
                continue
            word = "FAIL" if verdict.status is Status.FAIL else "REVIEW"
            codes = ",".join(sorted({r.code for r in verdict.reasons}))
            message = verdict.reasons[0].message if verdict.reasons else ""
            lines.append(f"{word} {verdict.subject} {codes} {message}")
        for item in self.baselined:
            lines.append(f"BASELINE {item['subject']} {item['code']} (known finding, not gating)")
        for warning in self.warnings:
            lines.append(f"WARN {warning}")
        for name, path in sorted(self.artifact_paths.items()):
            lines.append(f"ARTIFACT {name} {path}")
        return "\n".join(lines) + "\n"

    def render(self, report_format: str) -> str:
        return self.to_json() if report_format == "json" else self.to_text()


@dataclass
class SyncSummary:
    registered: int = 0
    scanned: int = 0
    requested: int = 0
    enriched: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "registered": self.registered,
            "scanned": self.scanned,
            "requested": self.requested,
            "enriched": self.enriched,
            "warnings": self.warnings,
        }


class GateInputError(Exception):
    """Internal: any input problem that must map to exit 3."""


def _read_bytes(path: Path, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as err:
        raise GateInputError(f"cannot read {what} at {path}: {err}") from None


def load_inputs(
    config: GateConfig,
) -> tuple[ProductManifest, DependencyGraph, InventoryStore, PolicyDocument, list[str]]:
    """Load and validate every input; raises ``GateInputError`` on any problem."""
    warnings: list[str] = []
    try:
        policy = load_policy(_read_bytes(config.policy_path, "policy"))
    except PolicySchemaError as err:
        raise GateInputError(f"policy: {err}") from None
    warnings.extend(policy.load_warnings)

    try:
        store = InventoryStore.replay(config.journal_path)
    except CorruptJournal as err:
        raise GateInputError(f"journal: {err}") from None

    try:
        manifest = load_manifest(_read_bytes(config.manifest_path, "manifest"))
    except SchemaError as err:
        raise GateInputError(f"manifest: {err}") from None

    graph = _build_graph(config, manifest, warnings)
    return manifest, graph, store, policy, warnings


def _build_graph(
    config: GateConfig, manifest: ProductManifest, warnings: list[str]
) -> DependencyGraph:
    graph = DependencyGraph()
    for coords in manifest.root_dependencies:
        graph.add_edge(None, coords)
    for format_id, path in config.lockfiles:
        try:
            graph.merge(parse_lockfile(format_id, _read_bytes(path, "lockfile")))
        except (UnknownFormat, SchemaError) as err:
            raise GateInputError(f"lockfile {path}: {err}") from None
    if config.sbom_in is not None:
        try:
            imported = import_spdx(_read_bytes(config.sbom_in, "inbound SBOM"))
        except SchemaError as err:
            raise GateInputError(f"sbom: {err}") from None
        warnings.extend(f"sbom: {w}" for w in imported.warnings)
        graph.merge(graph_from_spdx(imported))
    return graph


def _load_baseline(path: Path) -> set[tuple[str, str]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise GateInputError(f"baseline: {err}") from None
    known = set()
    for node in doc.get("nodes", []):
        for reason in node.get("reasons", []):
            known.add((node["subject"], reason["code"]))
    return known


def _gate_statuses(
    evaluation: ProductEvaluation, baseline: set[tuple[str, str]]
) -> tuple[Status, list[dict]]:
    """Worst status counting only reasons not present in the baseline."""
    baselined: list[dict] = []
    worst = Status.PASS
    for verdict in evaluation.nodes:
        if verdict.status is Status.PASS:
            continue
        new_severity = Status.PASS
        for reason in verdict.reasons:
            severity = _REASON_SEVERITY.get(reason.code, Status.NEEDS_REVIEW)
            if (verdict.subject, reason.code) in baseline:
                baselined.append({"subject": verdict.subject, "code": reason.code})
                continue
            new_severity = max(new_severity, severity)
        worst = max(worst, new_severity)
    return worst, baselined


def run_check(
    config: GateConfig, clock: Callable[[], datetime] | None = None
) -> tuple[int, GateReport]:
    """Evaluate the product and write report plus artifacts.

    Never raises: every internal failure is reported as exit 3 with a
    diagnostic in the report.
    """
    started = time.monotonic()
    now = clock or (lambda: datetime.now(timezone.utc))
    try:
        manifest, graph, store, policy, warnings = load_inputs(config)
        evaluation = evaluate_product(
            manifest, graph, store, policy, clock=now, scopes=config.include_scopes
        )
        baseline = _load_baseline(config.baseline_path) if config.baseline_path else set()
        gate_status, baselined = _gate_statuses(evaluation, baseline)

        if gate_status is Status.FAIL:
            exit_code = EXIT_FAIL
        elif gate_status is Status.NEEDS_REVIEW:
            exit_code = EXIT_REVIEW if config.strict else EXIT_PASS
            if not config.strict:
                warnings.append(
                    "review findings present but not failing the build (strict mode off)"
                )
        else:
            exit_code = EXIT_PASS

        artifact_paths: dict[str, str] = {}
        if exit_code in (EXIT_PASS, EXIT_REVIEW) or config.artifacts_always:
            artifact_paths = _write_artifacts(
                config, manifest, graph, store, policy, warnings, now
            )

        report = GateReport(
            product=evaluation.product,
            nodes=evaluation.nodes,
            warnings=warnings,
            artifact_paths=artifact_paths,
            policy_version=policy.policy_version,
            timing_secs=round(time.monotonic() - started, 6),
            exit_code=exit_code,
            strict=config.strict,
            baselined=baselined,
            generated_at=now().isoformat(),
        )
    except GateInputError as err:
        report = GateReport(
            product=None,
            nodes=[],
            warnings=[],
            artifact_paths={},
            policy_version="",
            timing_secs=round(time.monotonic() - started, 6),
            exit_code=EXIT_ERROR,
            strict=config.strict,
            generated_at=now().isoformat(),
            error=str(err),
        )
    except Exception as err:  # noqa: BLE001 - the gate must never crash the build tool
        report = GateReport(
            product=None,
            nodes=[],
            warnings=[],
            artifact_paths={},
            policy_version="",
            timing_secs=round(time.monotonic() - started, 6),
            exit_code=EXIT_ERROR,
            strict=config.strict,
            generated_at=now().isoformat(),
            error=f"unexpected: {type(err).__name__}: {err}",
        )

    _write_report(config, report)
    return report.exit_code, report


def _write_report(config: GateConfig, report: GateReport) -> None:
    try:
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
        if config.report_format == "text":
            (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    except OSError as err:
        report.warnings.append(f"could not write report: {err}")


def _write_artifacts(
    config: GateConfig,
    manifest: ProductManifest,
    graph: DependencyGraph,
    store: InventoryStore,
    policy: PolicyDocument,
    warnings: list[str],
    clock: Callable[[], datetime],
) -> dict[str, str]:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, str] = {}
    if config.write_sbom:
        path = out_dir / "sbom.spdx.json"
        path.write_bytes(generate_sbom(manifest, graph, store, created=clock()))
        paths["sbom"] = str(path)
    if config.write_notices:
        result = generate_notices(manifest, graph, store, policy, clock=clock)
        path = out_dir / "NOTICE.txt"
        path.write_text(result.text, encoding="utf-8")
        warnings.extend(f"notices: {w}" for w in result.warnings)
        paths["notices"] = str(path)
    if config.write_license_list:
        path = out_dir / "licenses.csv"
        path.write_text(generate_license_list(manifest, graph, store), encoding="utf-8")
        paths["license_list"] = str(path)
    if config.write_ccs:
        result = generate_ccs_manifest(
            manifest, graph, store, policy, contact=config.offer_contact, clock=clock
        )
        ccs_path = out_dir / "ccs-manifest.json"
        ccs_path.write_bytes(result.manifest_json())
        offer_path = out_dir / "source-offer.txt"
        offer_path.write_text(result.offer_text, encoding="utf-8")
        warnings.extend(f"ccs: {w}" for w in result.warnings)
        paths["ccs_manifest"] = str(ccs_path)
        paths["source_offer"] = str(offer_path)
    return paths


def sync_inventory(
    config: GateConfig, clock: Callable[[], datetime] | None = None
) -> tuple[int, SyncSummary]:
    """Register unknown graph nodes; scan and request clearance when possible.

    Nodes with a source tree under ``sources_dir/<ecosystem>/<name>/<version>``
    are scanned immediately and a clearance request is opened. With
    enrichment configured, missing declared licenses are pre-filled from
    the knowledge base.
    """
    summary = SyncSummary()
    try:
        try:
            manifest = load_manifest(_read_bytes(config.manifest_path, "manifest"))
        except SchemaError as err:
            raise GateInputError(f"manifest: {err}") from None
        graph = _build_graph(config, manifest, summary.warnings)
        declared_by_coords, source_by_coords = _sbom_hints(config, summary.warnings)

        try:
            store = InventoryStore.open(config.journal_path, clock=clock)
        except CorruptJournal as err:
            raise GateInputError(f"journal: {err}") from None

        with store:
            for coords in graph.sorted_nodes():
                if store.lookup(coords) is not None:
                    continue
                cid = store.register_component(
                    coords,
                    declared_license=declared_by_coords.get(coords),
                    source_ref=source_by_coords.get(coords),
                )
                summary.registered += 1
                ref = ReleaseRef(cid, coords.version)

                if config.enrichment is not None and declared_by_coords.get(coords) is None:
                    result = enrich(coords, config.enrichment, clock=clock)
                    if result.warning:
                        summary.warnings.append(f"enrichment: {result.warning}")
                    if apply_enrichment(store, result):
                        summary.enriched += 1

                source_tree = _local_sources(config, coords)
                if source_tree is not None:
                    scan = scan_tree(source_tree, bundled_corpus(), ScanConfig())
                    summary.warnings.extend(
                        f"scan {coords}: {w.code} {w.path}" for w in scan.warnings
                    )
                    store.attach_scan(ref, scan.findings, scan.summary)
                    summary.scanned += 1
                    store.request_clearance(ref)
                    summary.requested += 1
        return EXIT_PASS, summary
    except GateInputError as err:
        summary.warnings.append(str(err))
        return EXIT_ERROR, summary
    except OSError as err:
        summary.warnings.append(f"journal write failure: {err}")
        return EXIT_ERROR, summary


def _sbom_hints(
    config: GateConfig, warnings: list[str]
) -> tuple[dict[Coordinates, object], dict[Coordinates, tuple[str, str | None]]]:
    declared: dict[Coordinates, object] = {}
    sources: dict[Coordinates, tuple[str, str | None]] = {}
    if config.sbom_in is None:
        return declared, sources
    try:
        imported = import_spdx(_read_bytes(config.sbom_in, "inbound SBOM"))
    except SchemaError:
        return declared, sources
    for coords, expr, url in imported.components:
        if expr is not None:
            declared[coords] = expr
        if url is not None:
            sources[coords] = (url, None)
    return declared, sources


def _local_sources(config: GateConfig, coords: Coordinates) -> Path | None:
    if config.sources_dir is None or coords.version is None:
        return None
    candidate = Path(config.sources_dir) / coords.ecosystem / coords.name / coords.version
    return candidate if candidate.is_dir() else None
