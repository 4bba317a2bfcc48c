import io
import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from fastapi.testclient import TestClient

from simsearch.codec import CodecConfig
from simsearch.io import write_sirv
from simsearch.service import ServiceConfig, create_app
from simsearch.store import RollingStore, StoreConfig

CODEC = CodecConfig(dim=16, code_bits=64, subcode_count=8, projection_seed=5)
NOW = datetime.now(timezone.utc)


def _jsonl_records(n, dim=16, prefix="it", start=0):
    rng = np.random.default_rng(42 + start)
    lines = []
    for i in range(start, start + n):
        lines.append(json.dumps({
            "id": f"{prefix}{i:03d}",
            "product_id": f"p{i:03d}",
            "title": f"widget number {i}",
            "timestamp": (NOW - timedelta(days=1)).isoformat(),
            "embedding": rng.standard_normal(dim).tolist(),
        }))
    return "\n".join(lines)


@pytest.fixture()
def client(tmp_path):
    config = ServiceConfig(store_dir=str(tmp_path / "store"), codec=CODEC)
    app = create_app(config)
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def loaded(client):
    r = client.post("/items", content=_jsonl_records(30),
                    headers={"content-type": "application/jsonl"})
    assert r.status_code == 200
    return client


class TestStatus:
    def test_empty(self, client):
        body = client.get("/status").json()
        assert body["item_count"] == 0
        assert body["codec"] == {"D": 16, "B": 64, "m": 8, "seed": 5}

    def test_after_ingest(self, loaded):
        body = loaded.get("/status").json()
        assert body["item_count"] == 30
        assert body["segment_count"] >= 1


class TestItems:
    def test_jsonl_ingest(self, client):
        r = client.post("/items", content=_jsonl_records(5),
                        headers={"content-type": "application/jsonl"})
        assert r.json()["ingested"] == 5

    def test_malformed_lines_counted(self, client):
        body = _jsonl_records(3) + "\nnot json\n" + json.dumps({"id": "x"})
        r = client.post("/items", content=body,
                        headers={"content-type": "application/jsonl"})
        out = r.json()
        assert out["ingested"] == 3
        assert out["malformed"] == 2

    def test_out_of_window_rejected(self, client):
        stale = json.dumps({
            "id": "old", "product_id": "p", "title": "t",
            "timestamp": (NOW - timedelta(days=400)).isoformat(),
            "embedding": [0.1] * 16,
        })
        r = client.post("/items", content=stale,
                        headers={"content-type": "application/jsonl"})
        assert r.json()["out_of_window"] == 1

    def test_multipart_upload(self, client, tmp_path):
        rng = np.random.default_rng(0)
        vecs = [(f"m{i}", rng.standard_normal(16)) for i in range(4)]
        vpath = tmp_path / "v.sirv"
        write_sirv(vpath, 16, vecs)
        meta = "\n".join(json.dumps({
            "id": f"m{i}", "product_id": f"p{i}", "title": f"thing {i}",
            "timestamp": (NOW - timedelta(days=2)).isoformat(),
        }) for i in range(4))
        r = client.post("/items", files={
            "vectors": ("v.sirv", io.BytesIO(vpath.read_bytes())),
            "meta": ("meta.jsonl", io.BytesIO(meta.encode())),
        })
        assert r.json()["ingested"] == 4

    def test_idempotency_key_replays(self, client):
        hdrs = {"content-type": "application/jsonl", "Idempotency-Key": "abc"}
        first = client.post("/items", content=_jsonl_records(3), headers=hdrs).json()
        again = client.post("/items", content=_jsonl_records(3), headers=hdrs).json()
        assert first == again
        assert client.get("/status").json()["item_count"] == 3


class TestSearch:
    def test_by_item_id(self, loaded):
        r = loaded.post("/search", json={"item_id": "it005", "k": 5, "radius": 8})
        hits = r.json()["hits"]
        assert hits[0]["item_id"] == "it005"
        assert hits[0]["hamming_distance"] == 0

    def test_by_embedding(self, loaded):
        r = loaded.post("/search", json={"embedding": [0.2] * 16, "k": 3, "radius": 8})
        assert len(r.json()["hits"]) == 3

    def test_missing_item_404(self, loaded):
        r = loaded.post("/search", json={"item_id": "nope", "k": 3})
        assert r.status_code == 404
        assert set(r.json()) == {"code", "message"}

    def test_needs_query(self, loaded):
        r = loaded.post("/search", json={"k": 3})
        assert r.status_code == 400

    def test_filter_restricts(self, loaded):
        r = loaded.post("/search", json={
            "embedding": [0.2] * 16, "k": 30, "radius": 8,
            "filter": {"any_of": [{"all_of": ["number", "7"]}]},
        })
        ids = [h["item_id"] for h in r.json()["hits"]]
        assert ids == ["it007"]


class TestRules:
    def _create(self, client, **extra):
        body = {"name": "r1", "seeds": [{"item_id": "it001"}], "tau": 10}
        body.update(extra)
        r = client.post("/rules", json=body)
        assert r.status_code == 200, r.text
        return r.json()

    def test_lifecycle(self, loaded):
        rule = self._create(loaded)
        rid = rule["rule_id"]
        assert loaded.get(f"/rules/{rid}").json()["status"] == "draft"
        sim = loaded.post(f"/rules/{rid}/simulate").json()
        assert sim["sample_size"] == 30
        assert sim["hit_count"] >= 1
        fin = loaded.post(f"/rules/{rid}/finalize").json()
        assert fin["status"] == "finalized"

    def test_unknown_rule_404(self, loaded):
        assert loaded.get("/rules/zzz").status_code == 404

    def test_seed_by_embedding(self, loaded):
        rule = self._create(loaded, seeds=[{"embedding": [0.3] * 16}])
        assert len(rule["seeds"]) == 1

    def test_rules_persist_across_restart(self, tmp_path):
        config = ServiceConfig(store_dir=str(tmp_path / "store"), codec=CODEC)
        with TestClient(create_app(config)) as c:
            c.post("/items", content=_jsonl_records(5),
                   headers={"content-type": "application/jsonl"})
            rid = self._create(c)["rule_id"]
        with TestClient(create_app(config)) as c:
            assert c.get(f"/rules/{rid}").json()["rule_id"] == rid


class TestSweeps:
    def test_sweep_over_store(self, loaded):
        rule = loaded.post("/rules", json={
            "name": "r", "seeds": [{"item_id": "it000"}], "tau": 64,
        }).json()
        rid = rule["rule_id"]
        loaded.post(f"/rules/{rid}/finalize")
        job = loaded.post("/sweeps", json={"rule_ids": [rid]}).json()
        import time
        for _ in range(100):
            out = loaded.get(f"/sweeps/{job['job_id']}").json()
            if out.get("done"):
                break
            time.sleep(0.05)
        assert out["done"]
        assert out["scanned"] == 30
        assert len(out["flagged"]) == 30  # tau = B flags everything

    def test_draft_rule_rejected(self, loaded):
        rule = loaded.post("/rules", json={
            "name": "r", "seeds": [{"item_id": "it000"}], "tau": 5,
        }).json()
        r = loaded.post("/sweeps", json={"rule_ids": [rule["rule_id"]]})
        assert r.status_code == 400

    def test_unknown_job_404(self, loaded):
        assert loaded.get("/sweeps/nope").status_code == 404


class TestVariants:
    def test_generate(self, loaded):
        r = loaded.post("/variants/generate", json={"item_id": "it003", "n": 5, "k": 1})
        body = r.json()
        assert body["query_id"] == "it003"
        assert all(c["item_id"] != "it003" for c in body["candidates"])


class TestBench:
    def test_bench_endpoint(self, client):
        r = client.post("/bench", json={
            "corpus": {"cluster_count": 5, "cluster_size": 4, "dim": 16, "seed": 1},
            "codec": CODEC.to_json(),
            "search": {"k": 10, "radius": 3},
        })
        body = r.json()
        assert 0.0 <= body["metrics"]["map@10"] <= 1.0
        assert body["quality_csv"].startswith("embedding_type,")


class TestStartup:
    def test_codec_conflict_refused(self, tmp_path):
        store_dir = tmp_path / "store"
        store = RollingStore(StoreConfig(codec=CODEC))
        store.persist(store_dir)
        other = CodecConfig(dim=16, code_bits=64, subcode_count=8, projection_seed=99)
        from simsearch.errors import InvalidConfigError
        with pytest.raises(InvalidConfigError):
            create_app(ServiceConfig(store_dir=str(store_dir), codec=other))

    def test_persists_on_shutdown(self, tmp_path):
        config = ServiceConfig(store_dir=str(tmp_path / "store"), codec=CODEC)
        with TestClient(create_app(config)) as c:
            c.post("/items", content=_jsonl_records(7),
                   headers={"content-type": "application/jsonl"})
        with TestClient(create_app(config)) as c:
            assert c.get("/status").json()["item_count"] == 7
