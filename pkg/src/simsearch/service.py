"""HTTP boundary: ingestion, search, rules, sweeps, variants, benchmarks.

JSON over HTTP.  Mutating endpoints honor an Idempotency-Key header so
at-least-once clients can retry safely; sweeps run as background jobs with a
polling endpoint.  Errors are returned as {"code", "message"}.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import JSONResponse

from .codec import CodecConfig, EmbeddingVector
from .errors import (
    IntegrityError,
    InvalidConfigError,
    NotFoundError,
    OutOfWindowError,
    ShapeError,
    SimSearchError,
    UnsupportedVersionError,
)
from .evaluation import latency_csv, quality_csv, run_benchmark
from .index import SearchParams
from .query import Query, run_query
from .rules import Rule, SweepJob, make_rule, rule_from_json, simulate
from .store import RollingStore, StoreConfig, consume, records_from_files
from .synthetic import CorpusSpec, build_store, make_synthetic_corpus
from .textfilter import TextPredicate
from .variants import SoSParams, generate


@dataclass
class ServiceConfig:
    store_dir: str
    codec: CodecConfig
    window_days: int = 90
    bucket_days: int = 7
    store_embeddings: bool = True
    sample_store_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    static_dir: str | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "ServiceConfig":
        listen = obj.get("listen", "127.0.0.1:8080")
        host, _, port = listen.rpartition(":")
        return cls(
            store_dir=obj["store_dir"],
            codec=CodecConfig.from_json(obj["codec"]),
            window_days=int(obj.get("window_days", 90)),
            bucket_days=int(obj.get("bucket_days", 7)),
            store_embeddings=bool(obj.get("store_embeddings", True)),
            sample_store_dir=obj.get("sample_store_dir"),
            host=host or "127.0.0.1",
            port=int(port or 8080),
            static_dir=obj.get("static_dir"),
        )

    def store_config(self) -> StoreConfig:
        return StoreConfig(
            codec=self.codec,
            window_days=self.window_days,
            bucket_days=self.bucket_days,
            store_embeddings=self.store_embeddings,
        )


@dataclass
class _SweepHandle:
    job: SweepJob
    thread: threading.Thread | None = None
    error: str | None = None


@dataclass
class AppState:
    config: ServiceConfig
    store: RollingStore
    sample_store: RollingStore | None
    rules: dict[str, Rule] = field(default_factory=dict)
    sweeps: dict[str, _SweepHandle] = field(default_factory=dict)
    idempotency: dict[str, dict] = field(default_factory=dict)
    ingest_lock: threading.Lock = field(default_factory=threading.Lock)


_STATUS = {
    InvalidConfigError: 400,
    ShapeError: 400,
    OutOfWindowError: 400,
    NotFoundError: 404,
    IntegrityError: 409,
    UnsupportedVersionError: 409,
}


def _error_response(exc: Exception) -> JSONResponse:
    status = _STATUS.get(type(exc), 500)
    return JSONResponse(
        status_code=status,
        content={"code": type(exc).__name__, "message": str(exc)},
    )


def _parse_search_params(body: dict, code_bits: int) -> tuple[SearchParams, TextPredicate | None, int | None]:
    params = SearchParams(
        k=int(body.get("k", 10)),
        radius=int(body.get("radius", 0)),
        rerank_depth=int(body.get("rerank_depth", 0)),
    )
    pred = TextPredicate.from_json(body["filter"]) if body.get("filter") else None
    threshold = body.get("threshold")
    if threshold is not None:
        threshold = int(threshold)
    return params, pred, threshold


def _load_rules(state: AppState) -> None:
    rules_dir = Path(state.config.store_dir) / "rules"
    if not rules_dir.is_dir():
        return
    for path in sorted(rules_dir.glob("*.json")):
        obj = json.loads(path.read_text())
        rule = rule_from_json(state.store.plan, obj)
        state.rules[rule.rule_id] = rule


def _save_rule(state: AppState, rule: Rule) -> None:
    rules_dir = Path(state.config.store_dir) / "rules"
    rules_dir.mkdir(parents=True, exist_ok=True)
    (rules_dir / f"{rule.rule_id}.json").write_text(json.dumps(rule.to_json(), indent=2))


def create_app(config: ServiceConfig) -> FastAPI:
    store = RollingStore.load(config.store_dir, default_config=config.store_config())
    sample = None
    if config.sample_store_dir:
        sample = RollingStore.load(config.sample_store_dir, default_config=config.store_config())
    state = AppState(config=config, store=store, sample_store=sample)
    _load_rules(state)

    app = FastAPI(title="simsearch", version="0.1.0")
    app.state.engine = state

    @app.exception_handler(SimSearchError)
    async def handle_engine_error(request: Request, exc: SimSearchError):
        return _error_response(exc)

    @app.on_event("shutdown")
    def persist_on_shutdown():
        with state.ingest_lock:
            state.store.persist(config.store_dir)

    def idempotent(request: Request, compute) -> dict:
        key = request.headers.get("Idempotency-Key")
        if key and key in state.idempotency:
            return state.idempotency[key]
        result = compute()
        if key:
            state.idempotency[key] = result
        return result

    @app.get("/status")
    def status():
        c = config.codec
        return {
            "item_count": len(state.store),
            "segment_count": len(state.store.segments()),
            "window_days": config.window_days,
            "codec": {"D": c.dim, "B": c.code_bits, "m": c.subcode_count, "seed": c.projection_seed},
        }

    @app.post("/items")
    async def post_items(request: Request):
        content_type = request.headers.get("content-type", "")
        now = datetime.now(timezone.utc)

        if content_type.startswith("multipart/"):
            form = await request.form()
            vectors: UploadFile = form["vectors"]
            meta: UploadFile = form["meta"]
            import tempfile

            with tempfile.TemporaryDirectory() as tmp:
                vpath = Path(tmp) / "vectors.sirv"
                mpath = Path(tmp) / "meta.jsonl"
                vpath.write_bytes(await vectors.read())
                mpath.write_bytes(await meta.read())
                records = list(records_from_files(vpath, mpath))
                with state.ingest_lock:
                    report = consume(state.store, records, now=now)
        else:
            body = (await request.body()).decode("utf-8")
            lines = [ln for ln in body.splitlines() if ln.strip()]
            with state.ingest_lock:
                report = consume(state.store, lines, now=now)

        def result():
            return {
                "ingested": report.ingested,
                "rejected": report.rejected + report.malformed,
                "out_of_window": report.rejected,
                "malformed": report.malformed,
            }

        return idempotent(request, result)

    @app.post("/search")
    async def search(request: Request):
        body = await request.json()
        params, pred, threshold = _parse_search_params(body, config.codec.code_bits)
        if body.get("item_id") is not None:
            q = Query(params=params, item_ref=str(body["item_id"]), predicate=pred, threshold=threshold)
        elif body.get("embedding") is not None:
            emb = EmbeddingVector(np.asarray(body["embedding"], dtype=np.float64))
            q = Query(params=params, embedding=emb, predicate=pred, threshold=threshold)
        else:
            raise InvalidConfigError("search needs item_id or embedding")
        return run_query(state.store, q).to_json()

    @app.post("/rules")
    async def create_rule(request: Request):
        body = await request.json()

        def compute():
            seeds = []
            for s in body.get("seeds", []):
                if "item_id" in s:
                    emb = state.store.embedding_of(str(s["item_id"]))
                    if emb is None:
                        raise NotFoundError(f"seed item {s['item_id']!r} not found")
                    seeds.append(emb)
                else:
                    seeds.append(np.asarray(s["embedding"], dtype=np.float64))
            pred = TextPredicate.from_json(body["predicate"]) if body.get("predicate") else None
            from .rules import Combine

            rule = make_rule(
                state.store.plan,
                name=str(body.get("name", "unnamed")),
                seed_embeddings=seeds,
                tau=body.get("tau"),
                sigma=body.get("sigma"),
                predicate=pred,
                combine=Combine(body.get("combine", "AND")),
            )
            state.rules[rule.rule_id] = rule
            _save_rule(state, rule)
            return rule.to_json()

        return idempotent(request, compute)

    def _get_rule(rule_id: str) -> Rule:
        rule = state.rules.get(rule_id)
        if rule is None:
            raise NotFoundError(f"rule {rule_id!r} not found")
        return rule

    @app.get("/rules/{rule_id}")
    def get_rule(rule_id: str):
        return _get_rule(rule_id).to_json()

    @app.post("/rules/{rule_id}/simulate")
    async def simulate_rule(rule_id: str, request: Request):
        body = await request.json() if int(request.headers.get("content-length") or 0) else {}
        rule = _get_rule(rule_id)
        target = state.sample_store or state.store
        report = simulate(rule, target, limit=int(body.get("limit", 20)))
        return report.to_json()

    @app.post("/rules/{rule_id}/finalize")
    async def finalize_rule(rule_id: str, request: Request):
        def compute():
            rule = _get_rule(rule_id).finalize()
            state.rules[rule_id] = rule
            _save_rule(state, rule)
            return rule.to_json()

        return idempotent(request, compute)

    @app.post("/sweeps")
    async def start_sweep(request: Request):
        body = await request.json()

        def compute():
            rules = [_get_rule(rid) for rid in body.get("rule_ids", [])]
            corpus_ref = body.get("corpus_ref", "store")
            if corpus_ref == "store":
                records = list(state.store.iter_records())
            else:
                records = list(
                    records_from_files(corpus_ref["vectors"], corpus_ref["meta"])
                )
            job = SweepJob(rules, state.store.plan, total=len(records))
            job_id = uuid.uuid4().hex[:12]
            handle = _SweepHandle(job=job)

            def run():
                try:
                    job.run(records)
                except Exception as exc:  # surfaced via polling
                    handle.error = f"{type(exc).__name__}: {exc}"

            handle.thread = threading.Thread(target=run, daemon=True)
            state.sweeps[job_id] = handle
            handle.thread.start()
            return {"job_id": job_id}

        return idempotent(request, compute)

    @app.get("/sweeps/{job_id}")
    def poll_sweep(job_id: str):
        handle = state.sweeps.get(job_id)
        if handle is None:
            raise NotFoundError(f"sweep job {job_id!r} not found")
        out = handle.job.report.to_json()
        out["done"] = handle.thread is not None and not handle.thread.is_alive()
        if handle.error:
            out["error"] = handle.error
        return out

    @app.post("/variants/generate")
    async def variants_generate(request: Request):
        body = await request.json()
        params = SoSParams(
            n_text=int(body.get("n", 10)),
            k_image=int(body.get("k", 0)),
            radius=int(body.get("radius", 8)),
        )
        return generate(state.store, str(body["item_id"]), params).to_json()

    @app.post("/bench")
    async def bench(request: Request):
        body = await request.json()
        spec = CorpusSpec.from_json(body.get("corpus", {}))
        codec = CodecConfig.from_json(body["codec"]) if body.get("codec") else config.codec
        search_cfg = body.get("search", {})
        params = SearchParams(
            k=int(search_cfg.get("k", 100)),
            radius=int(search_cfg.get("radius", 3)),
        )
        corpus = make_synthetic_corpus(spec)
        bench_store = build_store(corpus, codec)
        metrics, latency = run_benchmark(bench_store, corpus.judged, params)
        label = f"B={codec.code_bits}"
        return {
            "metrics": metrics.to_json(),
            "latency": latency.to_json(),
            "quality_csv": quality_csv([(label, metrics)]),
            "latency_csv": latency_csv([(label, latency)]),
        }

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
