"""Optional client for an external license knowledge base.

Given coordinates, fetch curated declared-license data to pre-fill
inventory records. Lookups degrade, never fail: remote, then disk cache
(fresh within the TTL, stale as a fallback), then a local fixture file,
then an empty result with a warning. Fully operable offline.

Curated licenses only ever land in an empty ``declared_license`` field;
reviewer decisions and scan evidence always outrank remote curation.
"""

from __future__ import annotations

import hashlib
import json
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable

from .inventory import Coordinates, InventoryStore, ReleaseState
from .licexpr import ExpressionSyntaxError, LicenseExpression, parse_expression, render

__all__ = ["EnrichmentConfig", "EnrichmentResult", "enrich", "enrich_many", "apply_enrichment"]


@dataclass(frozen=True)
class EnrichmentConfig:
    """Knowledge-base endpoint and fallback configuration.

    ``base_url`` is a template with ``{ecosystem}``, ``{name}`` and
    ``{version}`` placeholders; the endpoint must answer JSON carrying the
    license expression under ``response_key``.
    """

    base_url: str | None = None
    offline: bool = False
    ttl_days: float = 7.0
    timeout_secs: float = 5.0
    cache_dir: Path | None = None
    fixture_path: Path | None = None
    response_key: str = "license"
    parallelism: int = 4


@dataclass(frozen=True)
class EnrichmentResult:
    coords: Coordinates
    curated_license: LicenseExpression | None
    source: str  # "remote" | "cache" | "fixture" | "miss"
    fetched_at: datetime
    warning: str | None = None


_cache_write_lock = threading.Lock()


def _fixture_key(coords: Coordinates) -> str:
    return f"{coords.ecosystem}/{coords.name}/{coords.version or ''}"


def _cache_file(config: EnrichmentConfig, coords: Coordinates) -> Path | None:
    if config.cache_dir is None:
        return None
    digest = hashlib.sha256(str(coords).encode("utf-8")).hexdigest()[:24]
    return Path(config.cache_dir) / f"{digest}.json"


def _read_cache(config: EnrichmentConfig, coords: Coordinates) -> tuple[str | None, datetime] | None:
    path = _cache_file(config, coords)
    if path is None or not path.exists():
        return None
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        fetched_at = datetime.fromisoformat(doc["fetched_at"])
        return doc.get("license"), fetched_at
    except (json.JSONDecodeError, KeyError, ValueError):
        return None


def _write_cache(
    config: EnrichmentConfig, coords: Coordinates, license_text: str | None, now: datetime
) -> None:
    path = _cache_file(config, coords)
    if path is None:
        return
    with _cache_write_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(
                {
                    "coords": coords.to_dict(),
                    "license": license_text,
                    "fetched_at": now.isoformat(),
                },
                sort_keys=True,
            ),
            encoding="utf-8",
        )


def _read_fixture(config: EnrichmentConfig, coords: Coordinates) -> str | None:
    if config.fixture_path is None or not Path(config.fixture_path).exists():
        return None
    try:
        table = json.loads(Path(config.fixture_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return None
    return table.get(_fixture_key(coords))


def _fetch_remote(config: EnrichmentConfig, coords: Coordinates) -> str | None:
    url = config.base_url.format(
        ecosystem=coords.ecosystem, name=coords.name, version=coords.version or ""
    )
    with urllib.request.urlopen(url, timeout=config.timeout_secs) as response:
        doc = json.loads(response.read().decode("utf-8"))
    value = doc.get(config.response_key)
    return value if isinstance(value, str) and value else None


def _parse_or_none(text: str | None) -> LicenseExpression | None:
    if not text:
        return None
    try:
        return parse_expression(text)
    except ExpressionSyntaxError:
        return None


def enrich(
    coords: Coordinates,
    config: EnrichmentConfig,
    clock: Callable[[], datetime] | None = None,
) -> EnrichmentResult:
    """Look up curated license data for one set of coordinates.

    Never raises on lookup problems; the worst outcome is an empty result
    with a warning attached.
    """
    now = (clock or (lambda: datetime.now(timezone.utc)))()

    if config.offline:
        fixture = _read_fixture(config, coords)
        if fixture is not None:
            return EnrichmentResult(coords, _parse_or_none(fixture), "fixture", now)
        return EnrichmentResult(
            coords, None, "miss", now, warning=f"{coords}: not in offline fixture"
        )

    cached = _read_cache(config, coords)
    if cached is not None:
        license_text, fetched_at = cached
        if now - fetched_at <= timedelta(days=config.ttl_days):
            return EnrichmentResult(coords, _parse_or_none(license_text), "cache", fetched_at)

    remote_error: str | None = None
    if config.base_url:
        try:
            license_text = _fetch_remote(config, coords)
        except (urllib.error.URLError, OSError, json.JSONDecodeError, ValueError) as err:
            remote_error = f"{coords}: remote lookup failed ({err})"
        else:
            _write_cache(config, coords, license_text, now)
            return EnrichmentResult(coords, _parse_or_none(license_text), "remote", now)
    else:
        remote_error = f"{coords}: no knowledge-base endpoint configured"

    if cached is not None:  # stale cache beats nothing
        license_text, fetched_at = cached
        return EnrichmentResult(
            coords, _parse_or_none(license_text), "cache", fetched_at, warning=remote_error
        )
    fixture = _read_fixture(config, coords)
    if fixture is not None:
        return EnrichmentResult(coords, _parse_or_none(fixture), "fixture", now, warning=remote_error)
    return EnrichmentResult(coords, None, "miss", now, warning=remote_error)


def enrich_many(
    coords_list: list[Coordinates],
    config: EnrichmentConfig,
    clock: Callable[[], datetime] | None = None,
) -> list[EnrichmentResult]:
    """Concurrent lookups with the configured parallelism cap."""
    if not coords_list:
        return []
    with ThreadPoolExecutor(max_workers=max(1, config.parallelism)) as pool:
        return list(pool.map(lambda c: enrich(c, config, clock), coords_list))


def apply_enrichment(store: InventoryStore, result: EnrichmentResult) -> bool:
    """Record a curated license in the inventory, if the field is empty.

    CLEARED and REJECTED releases are never touched; returns whether the
    inventory changed.
    """
    if result.curated_license is None or result.coords.version is None:
        return False
    located = store.lookup(result.coords)
    if located is not None:
        ref, state = located
        if state in (ReleaseState.CLEARED, ReleaseState.REJECTED):
            return False
        if store.release(ref).declared_license is not None:
            return False
    store.register_component(result.coords, declared_license=result.curated_license)
    return True
