"""Command line: batch extraction and vector-file verification."""

from __future__ import annotations

import json

import click

from .extract import ExtractionError, extract as run_extract
from .manifest import ExtractionManifest
from .sirv import SirvIntegrityError, verify_sirv


@click.group()
def main():
    """Image fingerprint extraction for the similar-item search engine."""


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--json", "as_json", is_flag=True)
def extract(manifest_path, out_dir, as_json):
    """Extract fingerprints for every image listed in the manifest."""
    try:
        manifest = ExtractionManifest.load(manifest_path)
        report = run_extract(manifest, out_dir)
    except (ExtractionError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        raise click.exceptions.Exit(1)
    if as_json:
        click.echo(json.dumps(report.to_json()))
    else:
        click.echo(f"wrote {report.written} vectors to {report.vectors_path}; "
                   f"skipped {len(report.skipped)}")


@main.command()
@click.argument("vectors", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def verify(vectors, as_json):
    """Check SIRV framing and report per-record norms and non-finite values."""
    try:
        report = verify_sirv(vectors)
    except SirvIntegrityError as exc:
        click.echo(f"error: {exc}", err=True)
        raise click.exceptions.Exit(1)
    if as_json:
        click.echo(json.dumps(report.to_json()))
    else:
        status = "clean" if report.clean else f"non-finite records {report.nonfinite_records}"
        click.echo(f"{report.count} records, dim {report.dim}: {status}")


if __name__ == "__main__":
    main()
