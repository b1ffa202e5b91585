import json
import threading

import pytest
import requests

from conftest import random_valid_procedure, wrap_think
from procrew import render_procedure
from procrew.jsonio import canonical_json_bytes
from procrew.rewards import RewardConfig, batch_reward
from procrew.service import ServiceConfig, make_server


@pytest.fixture
def service():
    running = []

    def start(**kwargs):
        kwargs.setdefault("keepalive_timeout", 1.0)
        cfg = ServiceConfig(port=0, **kwargs)
        server = make_server(cfg)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        running.append((server, thread))
        return f"http://127.0.0.1:{server.server_address[1]}"

    yield start
    for server, thread in running:
        server.shutdown()
        server.server_close()
        thread.join(timeout=2)


def test_healthz(service):
    base = service()
    resp = requests.get(f"{base}/healthz", timeout=5)
    assert resp.status_code == 200
    assert resp.headers["Content-Type"] == "application/json"
    doc = resp.json()
    assert doc["status"] == "ok"
    assert "version" in doc


def test_reward_batch_perfect_match(service, rng):
    base = service()
    ref = render_procedure(random_valid_procedure(rng))
    body = {"items": [{"reference": ref, "prediction_raw": wrap_think(ref)}]}
    resp = requests.post(f"{base}/v1/reward/batch", json=body, timeout=5)
    assert resp.status_code == 200
    doc = resp.json()
    assert all(step["total"] == 3.0 for step in doc["results"][0]["steps"])


def test_reward_batch_config_overrides(service):
    base = service()
    ref = "wait(time_period=1 h);"
    body = {
        "items": [{"reference": ref, "prediction_raw": wrap_think(ref)}],
        "config_overrides": {"sequence_aggregation": "sum"},
    }
    doc = requests.post(f"{base}/v1/reward/batch", json=body, timeout=5).json()
    assert doc["results"][0]["sequence_reward"] == 3.0
    bad = requests.post(
        f"{base}/v1/reward/batch",
        json={"items": body["items"], "config_overrides": {"nonsense": 1}},
        timeout=5,
    )
    assert bad.status_code == 400
    assert bad.json()["error"]["code"] == "bad_config"


def test_validate_endpoint(service):
    base = service()
    resp = requests.post(f"{base}/v1/validate", json={"procedure": "wait(time_period=1 h);"}, timeout=5)
    doc = resp.json()
    assert resp.status_code == 200
    assert doc["ok"] is False
    assert any(d["code"] == "MissingYield" for d in doc["diagnostics"])


def test_metrics_endpoint_identity(service):
    base = service()
    text = "wait(time_period=1 h);\nyield_statement(product=chem(\"x\"), target=mix(1));"
    resp = requests.post(
        f"{base}/v1/metrics/corpus",
        json={"pairs": [{"reference": text, "prediction": text}]},
        timeout=5,
    )
    doc = resp.json()
    assert doc["bleu2"] == pytest.approx(100.0)
    assert doc["lev_avg"] == pytest.approx(100.0)


def test_batch_cap_413(service):
    base = service(batch_cap=2)
    items = [{"reference": "wait(time_period=1 h);", "prediction_raw": "x"}] * 3
    resp = requests.post(f"{base}/v1/reward/batch", json={"items": items}, timeout=5)
    assert resp.status_code == 413
    assert resp.json()["error"]["code"] == "batch_too_large"


def test_bad_json_400(service):
    base = service()
    resp = requests.post(
        f"{base}/v1/reward/batch",
        data=b"{nope",
        headers={"Content-Type": "application/json"},
        timeout=5,
    )
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "bad_json"


def test_unknown_route_404(service):
    base = service()
    assert requests.post(f"{base}/v1/unknown", json={}, timeout=5).status_code == 404
    assert requests.get(f"{base}/nope", timeout=5).status_code == 404


def test_bad_reference_400(service):
    base = service()
    resp = requests.post(
        f"{base}/v1/reward/batch",
        json={"items": [{"reference": "garbage((", "prediction_raw": "x"}]},
        timeout=5,
    )
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "bad_reference"


def test_service_body_matches_library_bytes(service, rng):
    # the wire bytes must be exactly what the library+canonical serializer give
    base = service()
    refs = [random_valid_procedure(rng) for _ in range(3)]
    items = [
        {"reference": render_procedure(p), "prediction_raw": wrap_think(render_procedure(p))} for p in refs
    ]
    resp = requests.post(f"{base}/v1/reward/batch", json={"items": items}, timeout=5)
    expected = canonical_json_bytes(
        batch_reward(refs, [item["prediction_raw"] for item in items], cfg=RewardConfig()).to_json_dict()
    )
    assert resp.content == expected


def test_stateless_repeated_requests(service):
    base = service()
    body = {"procedure": "wait(time_period=1 h);"}
    first = requests.post(f"{base}/v1/validate", json=body, timeout=5).content
    second = requests.post(f"{base}/v1/validate", json=body, timeout=5).content
    assert first == second


def test_concurrent_requests(service, rng):
    base = service(workers=4)
    ref = render_procedure(random_valid_procedure(rng))
    body = {"items": [{"reference": ref, "prediction_raw": wrap_think(ref)}]}
    results = []

    def hit():
        results.append(requests.post(f"{base}/v1/reward/batch", json=body, timeout=10).content)

    threads = [threading.Thread(target=hit) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1


def test_service_config_validation():
    with pytest.raises(ValueError):
        ServiceConfig(port=70000)
    with pytest.raises(ValueError):
        ServiceConfig(max_body=1024)
