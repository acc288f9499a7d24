"""Dependency ingestion: manifests, lockfiles, and inbound SBOMs to graphs.

The normalized :class:`DependencyGraph` keys everything by inventory
coordinates. Edges from the product root (``src=None``) are direct
dependencies; everything else is transitive. Cycles are tolerated; the
reachability computation always terminates.

Supported inputs:

* the neutral lockfile format (JSON, ``schema_version: 1``) documented in
  ``docs/neutral-lockfile-schema.json``;
* npm ``package-lock.json`` (lockfileVersion 2/3), with nested
  ``node_modules`` resolution;
* SPDX 2.3 JSON documents (the subset produced by the artifacts module).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .inventory import Coordinates
from .licexpr import ExpressionSyntaxError, LicenseExpression, parse_expression

__all__ = [
    "DistributionChannel",
    "Edge",
    "DependencyGraph",
    "ProductManifest",
    "SpdxImport",
    "SchemaError",
    "UnknownFormat",
    "LOCKFILE_FORMATS",
    "import_spdx",
    "parse_lockfile",
    "resolve_transitive",
    "load_manifest",
    "graph_from_spdx",
]

DEFAULT_SCOPES = frozenset({"build", "runtime"})  # test deps excluded by default

_VALID_SCOPES = ("build", "runtime", "test")


class DistributionChannel(Enum):
    INTERNAL = "internal"
    DISTRIBUTED_BINARY = "distributed_binary"
    DISTRIBUTED_SOURCE = "distributed_source"
    SAAS = "saas"
    EMBEDDED = "embedded"


class SchemaError(ValueError):
    """Input document violates the expected schema; `path` locates the field."""

    def __init__(self, path: str, detail: str) -> None:
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")


class UnknownFormat(ValueError):
    def __init__(self, format_id: str) -> None:
        self.format_id = format_id
        super().__init__(
            f"unknown lockfile format {format_id!r}; known: {sorted(LOCKFILE_FORMATS)}"
        )


@dataclass(frozen=True)
class Edge:
    """A dependency edge. ``src=None`` denotes the product root."""

    src: Coordinates | None
    dst: Coordinates
    kind: str  # "direct" | "transitive"
    scope: str  # "build" | "runtime" | "test"


@dataclass
class DependencyGraph:
    nodes: set[Coordinates] = field(default_factory=set)
    edges: list[Edge] = field(default_factory=list)

    def add_edge(self, src: Coordinates | None, dst: Coordinates, scope: str = "runtime") -> None:
        if src is not None and src == dst:
            raise SchemaError(str(dst), "self-edge")
        kind = "direct" if src is None else "transitive"
        if src is not None:
            self.nodes.add(src)
        self.nodes.add(dst)
        edge = Edge(src, dst, kind, scope)
        if edge not in self._edge_set():
            self.edges.append(edge)

    def _edge_set(self) -> set[Edge]:
        return set(self.edges)

    def roots(self) -> list[Coordinates]:
        return sorted({e.dst for e in self.edges if e.src is None})

    def merge(self, other: "DependencyGraph") -> None:
        self.nodes |= other.nodes
        existing = self._edge_set()
        for edge in other.edges:
            if edge not in existing:
                self.edges.append(edge)

    def sorted_nodes(self) -> list[Coordinates]:
        return sorted(self.nodes)


@dataclass(frozen=True)
class ProductManifest:
    product_name: str
    product_version: str
    channel: DistributionChannel
    root_dependencies: tuple[Coordinates, ...] = ()

    def __post_init__(self) -> None:
        if not self.product_name or not self.product_version:
            raise ValueError("product name and version must be non-empty")


def load_manifest(data: bytes | str) -> ProductManifest:
    """Parse a product manifest JSON document."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"invalid JSON: {err}") from None
    for key in ("product_name", "product_version", "channel"):
        if key not in doc or not isinstance(doc[key], str) or not doc[key]:
            raise SchemaError(key, "required non-empty string")
    try:
        channel = DistributionChannel(doc["channel"])
    except ValueError:
        raise SchemaError(
            "channel",
            f"{doc['channel']!r} not one of {[c.value for c in DistributionChannel]}",
        ) from None
    roots = []
    for i, entry in enumerate(doc.get("root_dependencies", [])):
        try:
            roots.append(Coordinates.from_dict(entry))
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaError(f"root_dependencies[{i}]", str(err)) from None
    return ProductManifest(
        product_name=doc["product_name"],
        product_version=doc["product_version"],
        channel=channel,
        root_dependencies=tuple(roots),
    )


# --- SPDX import ---------------------------------------------------------------


@dataclass
class SpdxImport:
    """Parsed content of an inbound SPDX document."""

    components: list[tuple[Coordinates, LicenseExpression | None, str | None]]
    relationships: list[tuple[Coordinates | None, Coordinates]]  # None = document root
    warnings: list[str] = field(default_factory=list)


def _coords_from_purl(purl: str) -> Coordinates | None:
    # pkg:npm/left-pad@1.3.0 or pkg:npm/@scope/pkg@1.0.0
    if not purl.startswith("pkg:"):
        return None
    body = purl[len("pkg:"):]
    if "/" not in body:
        return None
    ecosystem, _, rest = body.partition("/")
    name, _, version = rest.rpartition("@")
    if not name:  # no version separator
        name, version = rest, ""
    return Coordinates(ecosystem, name, version or None)


def import_spdx(data: bytes | str) -> SpdxImport:
    """Extract components and dependency relationships from SPDX 2.3 JSON.

    Every package yields coordinates (ecosystem from a purl external ref
    when present, else ``generic``); ``licenseDeclared`` is parsed unless it
    is ``NOASSERTION``. ``DEPENDS_ON`` relationships become edges, with the
    document element standing for the product root.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"invalid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise SchemaError("$", "document must be a JSON object")
    if "packages" not in doc:
        raise SchemaError("packages", "missing required field")

    warnings: list[str] = []
    by_spdxid: dict[str, Coordinates] = {}
    components: list[tuple[Coordinates, LicenseExpression | None, str | None]] = []

    for i, pkg in enumerate(doc["packages"]):
        where = f"packages[{i}]"
        for required in ("SPDXID", "name"):
            if required not in pkg:
                raise SchemaError(f"{where}.{required}", "missing required field")
        version = pkg.get("versionInfo")
        coords = None
        for ref in pkg.get("externalRefs", []):
            if ref.get("referenceType") == "purl":
                coords = _coords_from_purl(ref.get("referenceLocator", ""))
                if coords is not None:
                    break
        if coords is None:
            coords = Coordinates("generic", pkg["name"], version)
        elif coords.version is None and version:
            coords = Coordinates(coords.ecosystem, coords.name, version)

        declared: LicenseExpression | None = None
        raw_declared = pkg.get("licenseDeclared")
        if raw_declared and raw_declared != "NOASSERTION":
            try:
                declared = parse_expression(raw_declared)
            except ExpressionSyntaxError as err:
                warnings.append(f"{where}.licenseDeclared: unparseable ({err})")

        download = pkg.get("downloadLocation")
        if download == "NOASSERTION":
            download = None
        by_spdxid[pkg["SPDXID"]] = coords
        components.append((coords, declared, download))

    document_id = doc.get("SPDXID", "SPDXRef-DOCUMENT")
    relationships: list[tuple[Coordinates | None, Coordinates]] = []
    for i, rel in enumerate(doc.get("relationships", [])):
        where = f"relationships[{i}]"
        if rel.get("relationshipType") != "DEPENDS_ON":
            continue
        src_id = rel.get("spdxElementId")
        dst_id = rel.get("relatedSpdxElement")
        if dst_id not in by_spdxid:
            raise SchemaError(f"{where}.relatedSpdxElement", f"unknown SPDXID {dst_id!r}")
        if src_id == document_id:
            src = None
        elif src_id in by_spdxid:
            src = by_spdxid[src_id]
        else:
            raise SchemaError(f"{where}.spdxElementId", f"unknown SPDXID {src_id!r}")
        relationships.append((src, by_spdxid[dst_id]))

    return SpdxImport(components=components, relationships=relationships, warnings=warnings)


def graph_from_spdx(imported: SpdxImport) -> DependencyGraph:
    """Build a dependency graph from an imported SPDX document.

    Packages with no incoming edge are treated as product roots when the
    document carries no explicit root relationships.
    """
    graph = DependencyGraph()
    for coords, _, _ in imported.components:
        graph.nodes.add(coords)
    has_incoming = {dst for _, dst in imported.relationships}
    has_root_edges = any(src is None for src, _ in imported.relationships)
    for src, dst in imported.relationships:
        graph.add_edge(src, dst)
    if not has_root_edges:
        for coords, _, _ in imported.components:
            if coords not in has_incoming:
                graph.add_edge(None, coords)
    return graph


# --- lockfiles ---------------------------------------------------------------


def _parse_neutral(data: bytes | str) -> DependencyGraph:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"invalid JSON: {err}") from None
    if doc.get("schema_version") != 1:
        raise SchemaError("schema_version", f"expected 1, got {doc.get('schema_version')!r}")
    if not isinstance(doc.get("packages"), list):
        raise SchemaError("packages", "required list")
    if not isinstance(doc.get("roots"), list):
        raise SchemaError("roots", "required list")

    packages: list[Coordinates] = []
    scopes: list[str] = []
    for i, entry in enumerate(doc["packages"]):
        where = f"packages[{i}]"
        try:
            coords = Coordinates(entry["ecosystem"], entry["name"], entry.get("version"))
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaError(where, str(err)) from None
        scope = entry.get("scope", "runtime")
        if scope not in _VALID_SCOPES:
            raise SchemaError(f"{where}.scope", f"{scope!r} not one of {_VALID_SCOPES}")
        packages.append(coords)
        scopes.append(scope)

    index_of = {coords: i for i, coords in enumerate(packages)}
    graph = DependencyGraph()
    for coords in packages:
        graph.nodes.add(coords)

    for r, entry in enumerate(doc["roots"]):
        try:
            coords = Coordinates.from_dict(entry)
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaError(f"roots[{r}]", str(err)) from None
        if coords not in index_of:
            raise SchemaError(f"roots[{r}]", f"{coords} not among packages")
        graph.add_edge(None, coords, scope=scopes[index_of[coords]])

    for i, entry in enumerate(doc["packages"]):
        for j in entry.get("deps", []):
            if not isinstance(j, int) or not 0 <= j < len(packages):
                raise SchemaError(f"packages[{i}].deps", f"index {j!r} out of range")
            if j == i:
                raise SchemaError(f"packages[{i}].deps", "self-edge")
            graph.add_edge(packages[i], packages[j], scope=scopes[j])
    return graph


def _npm_resolve(dep_name: str, from_path: str, entries: dict) -> str | None:
    """Nearest enclosing node_modules wins, as in the npm resolution rules."""
    prefix = from_path
    while True:
        candidate = f"{prefix}/node_modules/{dep_name}" if prefix else f"node_modules/{dep_name}"
        if candidate in entries:
            return candidate
        if not prefix:
            return None
        cut = prefix.rfind("/node_modules/")
        prefix = prefix[:cut] if cut >= 0 else ""


def _parse_npm_lock(data: bytes | str) -> DependencyGraph:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"invalid JSON: {err}") from None
    if doc.get("lockfileVersion") not in (2, 3):
        raise SchemaError("lockfileVersion", f"expected 2 or 3, got {doc.get('lockfileVersion')!r}")
    entries = doc.get("packages")
    if not isinstance(entries, dict):
        raise SchemaError("packages", "required object (lockfileVersion >= 2)")

    def coords_at(path: str) -> Coordinates:
        entry = entries[path]
        name = entry.get("name") or path.rpartition("node_modules/")[2]
        version = entry.get("version")
        if not version:
            raise SchemaError(f"packages[{path}].version", "missing version")
        return Coordinates("npm", name, version)

    def scope_at(path: str) -> str:
        return "test" if entries[path].get("dev") else "runtime"

    graph = DependencyGraph()
    root_entry = entries.get("", {})
    root_dep_names = list(root_entry.get("dependencies", {})) + list(
        root_entry.get("devDependencies", {})
    )
    for dep_name in root_dep_names:
        resolved = _npm_resolve(dep_name, "", entries)
        if resolved is None:
            raise SchemaError(f"packages..dependencies.{dep_name}", "unresolvable dependency")
        graph.add_edge(None, coords_at(resolved), scope=scope_at(resolved))

    for path, entry in entries.items():
        if not path:
            continue
        src = coords_at(path)
        graph.nodes.add(src)
        for dep_name in entry.get("dependencies", {}):
            resolved = _npm_resolve(dep_name, path, entries)
            if resolved is None:
                raise SchemaError(f"packages[{path}].dependencies.{dep_name}", "unresolvable dependency")
            graph.add_edge(src, coords_at(resolved), scope=scope_at(resolved))
    return graph


LOCKFILE_FORMATS = {
    "neutral": _parse_neutral,
    "npm": _parse_npm_lock,
}


def parse_lockfile(format_id: str, data: bytes | str) -> DependencyGraph:
    """Parse a resolved lockfile into a dependency graph.

    Direct edges run from the product root to the lockfile's roots; every
    other edge is transitive. Raises :class:`UnknownFormat` for unknown
    format ids and :class:`SchemaError` for malformed content.
    """
    parser = LOCKFILE_FORMATS.get(format_id)
    if parser is None:
        raise UnknownFormat(format_id)
    return parser(data)


# --- reachability ---------------------------------------------------------------


def resolve_transitive(
    graph: DependencyGraph,
    roots: list[Coordinates] | None = None,
    scopes: frozenset[str] | None = None,
) -> list[Coordinates]:
    """Nodes reachable from the roots, in lexicographic order.

    ``roots`` defaults to the graph's direct dependencies. ``scopes``
    restricts traversal to edges in the given scopes (``None`` = all),
    including the root edges themselves. Cycles terminate; the product
    root pseudo-node is never returned.
    """
    if roots is None:
        roots = sorted(
            {
                e.dst
                for e in graph.edges
                if e.src is None and (scopes is None or e.scope in scopes)
            }
        )
    adjacency: dict[Coordinates, list[Coordinates]] = {}
    for edge in graph.edges:
        if edge.src is None:
            continue
        if scopes is not None and edge.scope not in scopes:
            continue
        adjacency.setdefault(edge.src, []).append(edge.dst)

    seen: set[Coordinates] = set()
    stack = [r for r in roots if r in graph.nodes]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency.get(node, ()))
    return sorted(seen)
