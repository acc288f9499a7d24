"""Tests for the inventory HTTP service."""

from __future__ import annotations

import json
import random
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from complygate.gate import EXIT_PASS, EXIT_REVIEW, run_check, sync_inventory
from complygate.inventory import Coordinates, InventoryStore, ReleaseState
from complygate.service import ProductSpec, ServiceConfig, create_app

DOCS = Path(__file__).parent.parent / "docs"

TOKENS = {
    "dev-token": {"identity": "dana", "role": "developer"},
    "rev-token": {"identity": "alice", "role": "reviewer"},
}

DEV = {"Authorization": "Bearer dev-token"}
REV = {"Authorization": "Bearer rev-token"}


@pytest.fixture
def api_schema():
    with open(DOCS / "api-schema.json", encoding="utf-8") as fh:
        return json.load(fh)


def check_schema(payload, schema_root, def_name):
    jsonschema.validate(
        payload, {"$ref": f"#/$defs/{def_name}", "$defs": schema_root["$defs"]}
    )


def make_client(gate_env, products=None) -> TestClient:
    token_file = gate_env.root / "tokens.json"
    token_file.write_text(json.dumps(TOKENS))
    config = ServiceConfig(
        journal_path=gate_env.journal_path,
        token_file=token_file,
        policy_path=gate_env.policy_path,
        products=products or {},
    )
    app = create_app(config)
    return TestClient(app)


def pending_release(gate_env, name="widget", version="1.0.0"):
    coords = Coordinates("npm", name, version)
    gate_env.populate_inventory([(coords, "MIT", False)])
    with InventoryStore.open(gate_env.journal_path, clock=gate_env.clock) as store:
        ref, _ = store.lookup(coords)
        store.request_clearance(ref)
        return ref.release_id()


class TestAuth:
    def test_healthz_is_open(self, gate_env):
        client = make_client(gate_env)
        assert client.get("/healthz").status_code == 200

    def test_missing_token_is_401(self, gate_env, api_schema):
        client = make_client(gate_env)
        response = client.get("/api/v1/clearance-queue")
        assert response.status_code == 401
        check_schema(response.json(), api_schema, "error")

    def test_unknown_token_is_401(self, gate_env):
        client = make_client(gate_env)
        response = client.get(
            "/api/v1/clearance-queue", headers={"Authorization": "Bearer nope"}
        )
        assert response.status_code == 401

    def test_developer_cannot_decide(self, gate_env, api_schema):
        client = make_client(gate_env)
        release_id = pending_release(gate_env)
        response = client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "cleared", "rationale": ""},
            headers=DEV,
        )
        assert response.status_code == 403
        body = response.json()
        check_schema(body, api_schema, "error")
        assert body["code"] == "FORBIDDEN"


class TestQueue:
    def test_empty_queue(self, gate_env, api_schema):
        client = make_client(gate_env)
        response = client.get("/api/v1/clearance-queue", headers=DEV)
        assert response.status_code == 200
        body = response.json()
        check_schema(body, api_schema, "queuePage")
        assert body["items"] == [] and body["total"] == 0

    def test_two_pending_oldest_first(self, gate_env, api_schema):
        first = pending_release(gate_env, "older")
        second = pending_release(gate_env, "newer")
        client = make_client(gate_env)
        body = client.get("/api/v1/clearance-queue", headers=DEV).json()
        check_schema(body, api_schema, "queuePage")
        assert [item["release_id"] for item in body["items"]] == [first, second]

    def test_filter_by_state(self, gate_env):
        pending_release(gate_env, "pending-one")
        coords = Coordinates("npm", "done", "2.0.0")
        gate_env.populate_inventory([(coords, "MIT", True)])
        client = make_client(gate_env)
        body = client.get("/api/v1/clearance-queue?state=CLEARED", headers=DEV).json()
        assert [item["state"] for item in body["items"]] == ["CLEARED"]
        assert body["items"][0]["coords"]["name"] == "done"

    def test_filter_by_ecosystem(self, gate_env):
        pending_release(gate_env, "npm-dep")
        coords = Coordinates("pypi", "py-dep", "1.0.0")
        gate_env.populate_inventory([(coords, "MIT", False)])
        with InventoryStore.open(gate_env.journal_path, clock=gate_env.clock) as store:
            ref, _ = store.lookup(coords)
            store.request_clearance(ref)
        client = make_client(gate_env)
        body = client.get("/api/v1/clearance-queue?ecosystem=pypi", headers=DEV).json()
        assert len(body["items"]) == 1
        assert body["items"][0]["coords"]["ecosystem"] == "pypi"

    def test_filter_by_license_id(self, gate_env):
        pending_release(gate_env, "mit-dep")  # declared/detected MIT
        coords = Coordinates("npm", "apache-dep", "1.0.0")
        gate_env.populate_inventory([(coords, "Apache-2.0 OR MIT", False)])
        with InventoryStore.open(gate_env.journal_path, clock=gate_env.clock) as store:
            ref, _ = store.lookup(coords)
            store.request_clearance(ref)
        client = make_client(gate_env)
        body = client.get("/api/v1/clearance-queue?license=Apache-2.0", headers=DEV).json()
        assert [item["coords"]["name"] for item in body["items"]] == ["apache-dep"]
        both = client.get("/api/v1/clearance-queue?license=MIT", headers=DEV).json()
        assert len(both["items"]) == 2

    def test_page_beyond_end_is_empty_with_total(self, gate_env):
        pending_release(gate_env)
        client = make_client(gate_env)
        body = client.get("/api/v1/clearance-queue?page=5", headers=DEV).json()
        assert body["items"] == []
        assert body["total"] == 1

    def test_page_size_capped_at_100(self, gate_env):
        client = make_client(gate_env)
        response = client.get("/api/v1/clearance-queue?page_size=500", headers=DEV)
        assert response.status_code == 422


class TestDecision:
    def test_reviewer_clears_pending_release(self, gate_env, api_schema):
        release_id = pending_release(gate_env)
        client = make_client(gate_env)
        response = client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "cleared", "rationale": "scan is clean"},
            headers=REV,
        )
        assert response.status_code == 200
        check_schema(response.json()["release"], api_schema, "release")
        assert response.json()["release"]["state"] == "CLEARED"

        # Read-your-writes: the queue no longer lists it.
        queue = client.get("/api/v1/clearance-queue", headers=REV).json()
        assert queue["total"] == 0
        # The decision is attributed to the token's identity.
        component = response.json()["release"]
        assert component["decisions"][-1]["reviewer"] == "alice"

    def test_rejection_requires_rationale(self, gate_env):
        release_id = pending_release(gate_env)
        client = make_client(gate_env)
        response = client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "rejected", "rationale": "  "},
            headers=REV,
        )
        assert response.status_code == 422

    def test_decide_on_cleared_release_conflicts(self, gate_env):
        release_id = pending_release(gate_env)
        client = make_client(gate_env)
        first = client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "cleared", "rationale": "ok"},
            headers=REV,
        )
        assert first.status_code == 200
        second = client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "rejected", "rationale": "changed my mind"},
            headers=REV,
        )
        assert second.status_code == 409
        assert second.json()["code"] == "ILLEGAL_TRANSITION"

    def test_unknown_release_404(self, gate_env):
        client = make_client(gate_env)
        response = client.post(
            "/api/v1/releases/ghost@9.9.9/decision",
            json={"verdict": "cleared", "rationale": ""},
            headers=REV,
        )
        assert response.status_code == 404

    def test_mutations_are_journaled_and_replayable(self, gate_env):
        release_id = pending_release(gate_env)
        client = make_client(gate_env)
        client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "cleared", "rationale": "ok"},
            headers=REV,
        )
        client.app.state.store.close()
        replayed = InventoryStore.replay(gate_env.journal_path)
        found = replayed.find_release(release_id)
        assert found is not None and found[1].state is ReleaseState.CLEARED

    def test_clearance_request_endpoint(self, gate_env):
        coords = Coordinates("npm", "fresh", "1.0.0")
        gate_env.populate_inventory([(coords, "MIT", False)])  # SCANNED
        with InventoryStore.open(gate_env.journal_path) as store:
            ref, _ = store.lookup(coords)
        client = make_client(gate_env)
        response = client.post(
            f"/api/v1/releases/{ref.release_id()}/clearance-request", headers=DEV
        )
        assert response.status_code == 200
        assert response.json()["release"]["state"] == "PENDING_REVIEW"
        assert response.json()["request_id"]


class TestComponentsAndFindings:
    def test_components_listing(self, gate_env):
        gate_env.populate_inventory(
            [(Coordinates("npm", "a", "1.0.0"), "MIT", True)]
        )
        client = make_client(gate_env)
        body = client.get("/api/v1/components", headers=DEV).json()
        assert body["total"] == 1
        assert body["items"][0]["canonical_name"] == "npm/a"
        detail = client.get(
            f"/api/v1/components/{body['items'][0]['component_id']}", headers=DEV
        ).json()
        assert "1.0.0" in detail["releases"]

    def test_findings_endpoint(self, gate_env):
        release_id = pending_release(gate_env)
        client = make_client(gate_env)
        body = client.get(f"/api/v1/releases/{release_id}/findings", headers=DEV).json()
        assert body["release_id"] == release_id
        assert isinstance(body["findings"], list)


class TestProductVerdict:
    def test_decision_through_api_unblocks_gate(self, gate_env, api_schema):
        # End-to-end: a pending release keeps the gate at review; clearing it
        # through the API (same effect as the in-process decide oracle)
        # removes the UNCLEARED reason on the next run.
        deps = [("npm", "app-core"), ("npm", "helper")]
        coords = [Coordinates(eco, name, "1.0.0") for eco, name in deps]
        gate_env.chain_lockfile(deps)
        gate_env.populate_inventory([(coords[0], "MIT", True), (coords[1], "MIT", False)])
        with InventoryStore.open(gate_env.journal_path, clock=gate_env.clock) as store:
            ref, _ = store.lookup(coords[1])
            store.request_clearance(ref)
            release_id = ref.release_id()

        exit_code, report = run_check(gate_env.config(strict=True))
        assert exit_code == EXIT_REVIEW

        products = {
            "shop": ProductSpec(
                manifest_path=gate_env.manifest_path,
                lockfiles=(("neutral", gate_env.lockfile_path),),
            )
        }
        client = make_client(gate_env, products=products)
        before = client.get("/api/v1/products/shop/verdict", headers=DEV).json()
        check_schema(before, api_schema, "productVerdict")
        assert before["product"]["status"] == "NEEDS_REVIEW"

        response = client.post(
            f"/api/v1/releases/{release_id}/decision",
            json={"verdict": "cleared", "rationale": "reviewed, fine"},
            headers=REV,
        )
        assert response.status_code == 200

        after = client.get("/api/v1/products/shop/verdict", headers=DEV).json()
        assert after["product"]["status"] == "PASS"

        client.app.state.store.close()
        exit_code, report = run_check(gate_env.config(strict=True))
        assert exit_code == EXIT_PASS
        assert all(
            reason.code != "UNCLEARED"
            for verdict in report.nodes
            for reason in verdict.reasons
        )


class TestDeveloperCannotMutate:
    def test_random_developer_requests_never_change_state(self, gate_env):
        release_id = pending_release(gate_env)
        client = make_client(gate_env)

        def snapshot():
            return client.app.state.store.snapshot_json()

        rng = random.Random(1234)
        before = snapshot()
        endpoints = [
            ("POST", f"/api/v1/releases/{release_id}/decision",
             {"verdict": "cleared", "rationale": "x"}),
            ("POST", f"/api/v1/releases/{release_id}/decision",
             {"verdict": "rejected", "rationale": "x"}),
            ("GET", "/api/v1/clearance-queue", None),
            ("GET", "/api/v1/components", None),
            ("GET", f"/api/v1/releases/{release_id}/findings", None),
        ]
        for _ in range(40):
            method, url, body = rng.choice(endpoints)
            if method == "POST":
                response = client.post(url, json=body, headers=DEV)
                assert response.status_code == 403
            else:
                client.get(url, headers=DEV)
            assert snapshot() == before
