"""Command-line surface: ingest, search, rules, sweeps, benchmarks, variants, serve."""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from .codec import CodecConfig, EmbeddingVector
from .errors import SimSearchError
from .evaluation import latency_csv, quality_csv, run_benchmark
from .index import SearchParams
from .query import Query, run_query
from .rules import Combine, make_rule, rule_from_json, simulate, sweep
from .store import RollingStore, StoreConfig, consume, records_from_files
from .synthetic import CorpusSpec, build_store, load_groups, make_synthetic_corpus
from .textfilter import TextPredicate
from .variants import SoSParams, generate, recall_curve

DEFAULT_CODEC = {"dim": 64, "code_bits": 256, "subcode_count": 16, "projection_seed": 0}


def _fail(message: str) -> "click.exceptions.Exit":
    click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(1)


def _load_store(store_dir: str, codec_json: str | None = None) -> RollingStore:
    codec = CodecConfig.from_json(json.loads(codec_json) if codec_json else DEFAULT_CODEC)
    try:
        return RollingStore.load(store_dir, default_config=StoreConfig(codec=codec))
    except SimSearchError as exc:
        raise _fail(str(exc))


@click.group()
@click.option("--store", "store_dir", envvar="SIMSEARCH_STORE", default="./store",
              show_default=True, help="Store directory.")
@click.option("--codec", "codec_json", default=None,
              help='Codec config JSON, e.g. \'{"dim":64,"code_bits":256,"subcode_count":16,"projection_seed":0}\'.')
@click.pass_context
def main(ctx, store_dir, codec_json):
    """Similar-item retrieval engine over binarized embedding fingerprints."""
    ctx.ensure_object(dict)
    ctx.obj["store_dir"] = store_dir
    ctx.obj["codec_json"] = codec_json


@main.command()
@click.argument("vectors", type=click.Path(exists=True))
@click.argument("meta", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def ingest(ctx, vectors, meta, as_json):
    """Ingest a SIRV vector file plus its JSONL metadata sidecar."""
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    try:
        records = list(records_from_files(vectors, meta))
    except SimSearchError as exc:
        raise _fail(str(exc))
    report = consume(store, records, now=datetime.now(timezone.utc))
    store.persist(ctx.obj["store_dir"])
    out = {"ingested": report.ingested, "rejected": report.rejected, "malformed": report.malformed}
    click.echo(json.dumps(out) if as_json else
               f"ingested {out['ingested']}, rejected {out['rejected']}, malformed {out['malformed']}")


@main.command()
@click.option("--item", "item_id", default=None, help="Query by indexed item id.")
@click.option("--vector-file", type=click.Path(exists=True), default=None,
              help="Query with the first record of a SIRV file.")
@click.option("--k", default=10, show_default=True)
@click.option("--radius", default=3, show_default=True)
@click.option("--threshold", type=int, default=None, help="Max Hamming distance.")
@click.option("--filter", "filter_json", default=None, help="Predicate JSON {\"any_of\": ...}.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def search(ctx, item_id, vector_file, k, radius, threshold, filter_json, as_json):
    """Nearest-neighbor search against the store."""
    if (item_id is None) == (vector_file is None):
        raise click.UsageError("exactly one of --item / --vector-file is required")
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    pred = TextPredicate.from_json(json.loads(filter_json)) if filter_json else None
    params = SearchParams(k=k, radius=radius)
    try:
        if item_id is not None:
            q = Query(params=params, item_ref=item_id, predicate=pred, threshold=threshold)
        else:
            from .io import read_sirv

            _, recs = read_sirv(vector_file)
            if not recs:
                raise _fail(f"{vector_file}: no vectors")
            q = Query(
                params=params,
                embedding=EmbeddingVector(recs[0][1].astype(np.float64)),
                predicate=pred,
                threshold=threshold,
            )
        page = run_query(store, q)
    except SimSearchError as exc:
        raise _fail(str(exc))
    if as_json:
        click.echo(json.dumps(page.to_json()))
    else:
        for h in page.hits:
            click.echo(f"{h.item_id}\td={h.hamming_distance}\t{h.title}")


@main.group()
def rule():
    """Create, simulate, and finalize analyst rules."""


def _rules_dir(ctx) -> Path:
    d = Path(ctx.obj["store_dir"]) / "rules"
    d.mkdir(parents=True, exist_ok=True)
    return d


@rule.command("create")
@click.option("--name", required=True)
@click.option("--seed-item", "seed_items", multiple=True, help="Seed by indexed item id.")
@click.option("--seed-vector-file", type=click.Path(exists=True), default=None,
              help="Seed with every record of a SIRV file.")
@click.option("--tau", type=int, default=None, help="Max Hamming distance threshold.")
@click.option("--sigma", type=float, default=None, help="Min cosine threshold.")
@click.option("--predicate", "predicate_json", default=None)
@click.option("--combine", type=click.Choice([c.value for c in Combine]), default="AND")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def rule_create(ctx, name, seed_items, seed_vector_file, tau, sigma, predicate_json, combine, as_json):
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    seeds = []
    for item in seed_items:
        emb = store.embedding_of(item)
        if emb is None:
            raise _fail(f"seed item {item!r} not found (or embeddings not stored)")
        seeds.append(emb)
    if seed_vector_file:
        from .io import read_sirv

        _, recs = read_sirv(seed_vector_file)
        seeds.extend(v.astype(np.float64) for _, v in recs)
    if not seeds:
        raise click.UsageError("at least one seed is required")
    pred = TextPredicate.from_json(json.loads(predicate_json)) if predicate_json else None
    try:
        r = make_rule(store.plan, name, seeds, tau=tau, sigma=sigma,
                      predicate=pred, combine=Combine(combine))
    except SimSearchError as exc:
        raise _fail(str(exc))
    (_rules_dir(ctx) / f"{r.rule_id}.json").write_text(json.dumps(r.to_json(), indent=2))
    click.echo(json.dumps(r.to_json()) if as_json else f"created rule {r.rule_id}")


def _read_rule(ctx, store, rule_id):
    path = _rules_dir(ctx) / f"{rule_id}.json"
    if not path.exists():
        raise _fail(f"rule {rule_id!r} not found")
    return rule_from_json(store.plan, json.loads(path.read_text()))


@rule.command("simulate")
@click.argument("rule_id")
@click.option("--limit", default=20, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def rule_simulate(ctx, rule_id, limit, as_json):
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    r = _read_rule(ctx, store, rule_id)
    try:
        report = simulate(r, store, limit=limit)
    except SimSearchError as exc:
        raise _fail(str(exc))
    if as_json:
        click.echo(json.dumps(report.to_json()))
    else:
        click.echo(f"hits {report.hit_count}/{report.sample_size} "
                   f"(selectivity {report.selectivity:.4f}, {report.elapsed_ms:.1f} ms)")


@rule.command("finalize")
@click.argument("rule_id")
@click.pass_context
def rule_finalize(ctx, rule_id):
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    r = _read_rule(ctx, store, rule_id).finalize()
    (_rules_dir(ctx) / f"{rule_id}.json").write_text(json.dumps(r.to_json(), indent=2))
    click.echo(f"finalized rule {rule_id}")


@main.command("sweep")
@click.option("--rules", "rules_file", type=click.Path(exists=True), required=True,
              help="JSONL file of finalized rule documents.")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True,
              help="Directory with vectors.sirv + meta.jsonl.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def sweep_cmd(ctx, rules_file, corpus_dir, as_json):
    """Evaluate finalized rules exhaustively over a corpus."""
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    rules = []
    with open(rules_file, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rules.append(rule_from_json(store.plan, json.loads(line)))
    corpus = Path(corpus_dir)
    try:
        records = list(records_from_files(corpus / "vectors.sirv", corpus / "meta.jsonl"))
        report = sweep(rules, records, store.plan, total=len(records))
    except SimSearchError as exc:
        raise _fail(str(exc))
    if as_json:
        click.echo(json.dumps(report.to_json()))
    else:
        click.echo(f"scanned {report.scanned}, flagged {len(report.flagged)}, "
                   f"malformed {report.malformed}")


@main.command()
@click.option("--spec", "spec_file", type=click.Path(exists=True), required=True,
              help="Benchmark spec JSON (corpus / codec / search sections).")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Write CSVs here instead of stdout.")
@click.pass_context
def bench(ctx, spec_file, out_dir):
    """Run a synthetic search-quality + latency benchmark."""
    spec = json.loads(Path(spec_file).read_text())
    corpus = make_synthetic_corpus(CorpusSpec.from_json(spec.get("corpus", {})))
    search_cfg = spec.get("search", {})
    params = SearchParams(k=int(search_cfg.get("k", 100)), radius=int(search_cfg.get("radius", 3)))
    codecs = spec.get("codecs") or [spec.get("codec") or DEFAULT_CODEC]
    qrows, lrows = [], []
    for codec_obj in codecs:
        codec = CodecConfig.from_json({**DEFAULT_CODEC, **codec_obj, "dim": corpus.spec.dim})
        bench_store = build_store(corpus, codec)
        metrics, latency = run_benchmark(bench_store, corpus.judged, params)
        label = f"B={codec.code_bits}"
        qrows.append((label, metrics))
        lrows.append((label, latency))
    quality = quality_csv(qrows)
    latency_out = latency_csv(lrows)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "quality.csv").write_text(quality)
        (out / "latency.csv").write_text(latency_out)
        click.echo(f"wrote {out / 'quality.csv'} and {out / 'latency.csv'}")
    else:
        click.echo(quality, nl=False)
        click.echo(latency_out, nl=False)


@main.command()
@click.option("--groups", "groups_file", type=click.Path(exists=True), default=None,
              help="Ground-truth variant groups JSONL.")
@click.option("--n-grid", default="50,100,200", show_default=True)
@click.option("--k-grid", default="0,1,2,3", show_default=True)
@click.option("--radius", default=8, show_default=True)
@click.option("--item", "item_id", default=None, help="Generate candidates for one item instead.")
@click.option("--n", default=50, show_default=True, help="Text candidates (single-item mode).")
@click.option("--k", default=2, show_default=True, help="Image neighbors (single-item mode).")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def variants(ctx, groups_file, n_grid, k_grid, radius, item_id, n, k, as_json):
    """Variant candidate generation and recall curves."""
    store = _load_store(ctx.obj["store_dir"], ctx.obj["codec_json"])
    try:
        if item_id is not None:
            cs = generate(store, item_id, SoSParams(n_text=n, k_image=k, radius=radius))
            click.echo(json.dumps(cs.to_json()))
            return
        if groups_file is None:
            raise click.UsageError("either --item or --groups is required")
        groups = load_groups(groups_file)
        curve = recall_curve(
            store,
            groups,
            n_grid=[int(x) for x in n_grid.split(",")],
            k_grid=[int(x) for x in k_grid.split(",")],
            radius=radius,
        )
    except SimSearchError as exc:
        raise _fail(str(exc))
    if as_json:
        click.echo(json.dumps([vars(p) for p in curve.points]))
    else:
        click.echo(curve.to_csv(), nl=False)


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), required=True)
def serve(config_file):
    """Run the HTTP service."""
    from .service import ServiceConfig, serve as run_service

    cfg = ServiceConfig.from_json(json.loads(Path(config_file).read_text()))
    try:
        run_service(cfg)
    except SimSearchError as exc:
        raise _fail(str(exc))


if __name__ == "__main__":
    main()
