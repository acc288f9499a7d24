"""HTTP API over the inventory: clearance queue, decisions, verdicts.

The backend for the review console and for pipeline automation. Static
bearer tokens map to an identity and a role; only reviewer tokens may
record decisions. All mutations pass through the single journal writer
under a lock, and reads see the writer's current state (read-your-writes).

Error bodies are ``{"code", "message", "details"}``; the path prefix is
versioned (``/api/v1``).
"""

from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Depends, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .gate import GateConfig, GateInputError, load_inputs
from .inventory import (
    ClearanceDecision,
    CorruptJournal,
    IllegalTransition,
    InventoryStore,
    ReleaseRecord,
    ReleaseRef,
    ReleaseState,
    Unauthorized,
)
from .licexpr import render
from .policy import evaluate_product, load_policy

__all__ = ["ApiSession", "ProductSpec", "ServiceConfig", "create_app", "serve", "load_service_config"]

MAX_PAGE_SIZE = 100
DEFAULT_PAGE_SIZE = 50

VALID_ROLES = ("developer", "reviewer")


@dataclass(frozen=True)
class ApiSession:
    token: str
    identity: str
    role: str


@dataclass(frozen=True)
class ProductSpec:
    manifest_path: Path
    lockfiles: tuple[tuple[str, Path], ...] = ()
    sbom_in: Path | None = None


@dataclass
class ServiceConfig:
    journal_path: Path
    token_file: Path
    listen: str = "127.0.0.1:8030"
    policy_path: Path | None = None
    cors_origins: tuple[str, ...] = ()
    products: dict[str, ProductSpec] = field(default_factory=dict)


def load_service_config(path: Path | str) -> ServiceConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    base = Path(path).parent

    def resolve(p):
        return (base / p).resolve() if p else None

    products = {}
    for product_id, spec in doc.get("products", {}).items():
        lockfiles = []
        for entry in spec.get("lockfiles", []):
            format_id, _, lock_path = entry.partition(":")
            lockfiles.append((format_id, resolve(lock_path)))
        products[product_id] = ProductSpec(
            manifest_path=resolve(spec["manifest"]),
            lockfiles=tuple(lockfiles),
            sbom_in=resolve(spec.get("sbom_in")),
        )
    return ServiceConfig(
        journal_path=resolve(doc["journal"]),
        token_file=resolve(doc["tokens"]),
        listen=doc.get("listen", "127.0.0.1:8030"),
        policy_path=resolve(doc.get("policy")),
        cors_origins=tuple(doc.get("cors_origins", ())),
        products=products,
    )


def _error(status: int, code: str, message: str, details: dict | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details or {}},
    )


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: dict | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.details = details or {}


def _load_tokens(path: Path) -> dict[str, ApiSession]:
    table = json.loads(Path(path).read_text(encoding="utf-8"))
    sessions = {}
    for token, entry in table.items():
        role = entry.get("role")
        if role not in VALID_ROLES:
            raise ValueError(f"token file: role {role!r} not one of {VALID_ROLES}")
        sessions[token] = ApiSession(token=token, identity=entry["identity"], role=role)
    return sessions


def _coords_dict(ref: ReleaseRef, store: InventoryStore) -> dict:
    component = store.component(ref.component_id)
    alias = sorted(component.aliases)[0] if component.aliases else None
    return {
        "ecosystem": alias.ecosystem if alias else "generic",
        "name": alias.name if alias else component.canonical_name,
        "version": ref.version,
    }


def _mentions_license(release: ReleaseRecord, license_id: str) -> bool:
    from .licexpr import licenses_mentioned

    for expr in (release.declared_license, release.detected_license):
        if expr is None:
            continue
        if any(t.license_id == license_id for t in licenses_mentioned(expr)):
            return True
    return False


def _release_payload(ref: ReleaseRef, release: ReleaseRecord, store: InventoryStore) -> dict:
    component = store.component(ref.component_id)
    top_findings = sorted(release.findings, key=lambda f: (-f.score, f.path))[:5]
    return {
        "release_id": ref.release_id(),
        "component_id": ref.component_id,
        "canonical_name": component.canonical_name,
        "coords": _coords_dict(ref, store),
        "state": release.state.value,
        "requested_at": release.requested_at.isoformat() if release.requested_at else None,
        "declared_license": render(release.declared_license) if release.declared_license else None,
        "detected_license": render(release.detected_license) if release.detected_license else None,
        "findings_summary": [
            {
                "path": f.path,
                "method": f.method,
                "expression": render(f.expression),
                "score": f.score,
                "span": list(f.span),
            }
            for f in top_findings
        ],
        "decisions": [d.to_dict() for d in release.decisions],
    }


def create_app(config: ServiceConfig) -> FastAPI:
    """Assemble the API around one journal-backed store instance."""
    store = InventoryStore.open(config.journal_path)
    write_lock = threading.Lock()
    sessions = _load_tokens(config.token_file)
    policy = None
    if config.policy_path is not None:
        policy = load_policy(Path(config.policy_path).read_bytes())
    policy_version = policy.policy_version if policy else "unspecified"

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        store.close()  # graceful shutdown flushes the journal

    app = FastAPI(title="complygate inventory service", version="1", lifespan=lifespan)
    app.state.store = store

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["GET", "POST"],
            allow_headers=["Authorization", "Content-Type"],
        )

    @app.exception_handler(_ApiError)
    async def api_error_handler(request: Request, exc: _ApiError):
        return _error(exc.status, exc.code, exc.message, exc.details)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(422, "VALIDATION", "invalid request", {"errors": exc.errors()})

    def authenticate(request: Request) -> ApiSession:
        header = request.headers.get("Authorization", "")
        token = header.removeprefix("Bearer ").strip()
        session = sessions.get(token)
        if session is None:
            raise _ApiError(401, "UNAUTHENTICATED", "missing or unknown bearer token")
        return session

    def require_reviewer(session: ApiSession = Depends(authenticate)) -> ApiSession:
        if session.role != "reviewer":
            raise _ApiError(
                403, "FORBIDDEN", "clearance decisions require the reviewer role",
                {"role": session.role},
            )
        return session

    def locate_release(release_id: str) -> tuple[ReleaseRef, ReleaseRecord]:
        found = store.find_release(release_id)
        if found is None:
            raise _ApiError(404, "NOT_FOUND", f"no release {release_id!r}")
        return found

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "components": len(store.components)}

    @app.get("/api/v1/components")
    def list_components(session: ApiSession = Depends(authenticate)):
        items = []
        for component_id in sorted(store.components):
            component = store.components[component_id]
            items.append(
                {
                    "component_id": component_id,
                    "canonical_name": component.canonical_name,
                    "homepage": component.homepage,
                    "aliases": [str(a) for a in sorted(component.aliases)],
                    "releases": {
                        version: component.releases[version].state.value
                        for version in sorted(component.releases)
                    },
                }
            )
        return {"items": items, "total": len(items)}

    @app.get("/api/v1/components/{component_id}")
    def get_component(component_id: str, session: ApiSession = Depends(authenticate)):
        component = store.component(component_id)
        if component is None:
            raise _ApiError(404, "NOT_FOUND", f"no component {component_id!r}")
        return {
            "component_id": component_id,
            "canonical_name": component.canonical_name,
            "homepage": component.homepage,
            "aliases": [str(a) for a in sorted(component.aliases)],
            "releases": {
                version: _release_payload(
                    ReleaseRef(component_id, version), component.releases[version], store
                )
                for version in sorted(component.releases)
            },
        }

    @app.get("/api/v1/clearance-queue")
    def clearance_queue(
        session: ApiSession = Depends(authenticate),
        state: str | None = Query(default=None),
        ecosystem: str | None = Query(default=None),
        license: str | None = Query(default=None),
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=DEFAULT_PAGE_SIZE, ge=1, le=MAX_PAGE_SIZE),
    ):
        if state is None:
            pairs = store.pending_queue()
        else:
            try:
                wanted = ReleaseState(state)
            except ValueError:
                raise _ApiError(422, "VALIDATION", f"unknown state {state!r}")
            pairs = store.releases_in_state(wanted)
        if ecosystem is not None:
            pairs = [
                (ref, release)
                for ref, release in pairs
                if any(a.ecosystem == ecosystem for a in store.component(ref.component_id).aliases)
            ]
        if license is not None:
            pairs = [
                (ref, release)
                for ref, release in pairs
                if _mentions_license(release, license)
            ]
        total = len(pairs)
        start = (page - 1) * page_size
        window = pairs[start : start + page_size]
        return {
            "items": [_release_payload(ref, release, store) for ref, release in window],
            "total": total,
            "page": page,
            "page_size": page_size,
        }

    @app.post("/api/v1/releases/{release_id}/clearance-request")
    def post_clearance_request(release_id: str, session: ApiSession = Depends(authenticate)):
        ref, _ = locate_release(release_id)
        with write_lock:
            try:
                request_id = store.request_clearance(ref)
            except IllegalTransition as err:
                raise _ApiError(409, "ILLEGAL_TRANSITION", str(err),
                                {"state": err.state.value}) from None
        _, release = locate_release(release_id)
        return {"request_id": request_id, "release": _release_payload(ref, release, store)}

    @app.post("/api/v1/releases/{release_id}/decision")
    def post_decision(
        release_id: str, body: dict, session: ApiSession = Depends(require_reviewer)
    ):
        verdict = body.get("verdict")
        rationale = body.get("rationale", "")
        if verdict not in ("cleared", "rejected"):
            raise _ApiError(422, "VALIDATION", "verdict must be 'cleared' or 'rejected'")
        if verdict == "rejected" and not rationale.strip():
            raise _ApiError(422, "VALIDATION", "a rejection requires a rationale")
        ref, _ = locate_release(release_id)
        decision = ClearanceDecision(
            reviewer=session.identity,
            role=session.role,
            timestamp=datetime.now(timezone.utc),
            verdict=verdict,
            rationale=rationale,
            policy_version=policy_version,
        )
        with write_lock:
            try:
                release = store.decide(ref, decision)
            except IllegalTransition as err:
                raise _ApiError(409, "ILLEGAL_TRANSITION", str(err),
                                {"state": err.state.value}) from None
            except Unauthorized as err:
                raise _ApiError(403, "FORBIDDEN", str(err)) from None
        return {"release": _release_payload(ref, release, store)}

    @app.get("/api/v1/releases/{release_id}/findings")
    def get_findings(release_id: str, session: ApiSession = Depends(authenticate)):
        ref, release = locate_release(release_id)
        return {
            "release_id": release_id,
            "findings": [
                {
                    "path": f.path,
                    "method": f.method,
                    "expression": render(f.expression),
                    "score": f.score,
                    "span": list(f.span),
                    "copyright_lines": list(f.copyright_lines),
                }
                for f in release.findings
            ],
        }

    @app.get("/api/v1/products/{product_id}/verdict")
    def product_verdict(product_id: str, session: ApiSession = Depends(authenticate)):
        spec = config.products.get(product_id)
        if spec is None:
            raise _ApiError(404, "NOT_FOUND", f"no product {product_id!r} configured")
        if policy is None:
            raise _ApiError(409, "NO_POLICY", "service started without a policy document")
        gate_config = GateConfig(
            manifest_path=spec.manifest_path,
            policy_path=config.policy_path,
            journal_path=config.journal_path,
            out_dir=Path("."),
            lockfiles=spec.lockfiles,
            sbom_in=spec.sbom_in,
        )
        try:
            manifest, graph, _, _, warnings = load_inputs(gate_config)
        except GateInputError as err:
            raise _ApiError(409, "BAD_PRODUCT_INPUTS", str(err)) from None
        evaluation = evaluate_product(manifest, graph, store, policy)
        return {
            "product_id": product_id,
            "policy_version": policy.policy_version,
            "product": evaluation.product.to_dict(),
            "nodes": [v.to_dict() for v in evaluation.nodes],
            "warnings": warnings,
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted (journal flushed on shutdown)."""
    import uvicorn

    host, _, port = config.listen.partition(":")
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8030), log_level="info")
