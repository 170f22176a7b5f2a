"""Command-line entry point: apt-adapter export|convert."""

from __future__ import annotations

import sys

import click

from .config import AdapterConfig
from .convert import convert as run_convert
from .errors import ModelLoadError, SchemaError
from .export import export_logprobs


@click.group()
def main() -> None:
    """Bridge external causal LMs and dataset dumps into toolkit JSONL."""


@main.command()
@click.option("--model", "model_spec", required=True, help="Policy model: hf:<path-or-id>.")
@click.option("--reference", "reference_spec", required=True, help="Frozen reference model.")
@click.option("--prefs", "prefs_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--device", default="cpu", show_default=True)
@click.option("--batch-size", default=8, show_default=True)
@click.option("--max-seq-len", default=512, show_default=True)
def export(model_spec, reference_spec, prefs_path, out_path, device, batch_size, max_seq_len):
    """Score chosen/rejected continuations and write scored.jsonl."""
    config = AdapterConfig(
        model_id=model_spec, device=device, batch_size=batch_size, max_seq_len=max_seq_len
    )
    try:
        report = export_logprobs(model_spec, prefs_path, reference_spec, out_path, config)
    except ModelLoadError as exc:
        click.echo(f"model load error: {exc}", err=True)
        sys.exit(3)
    except (SchemaError, FileNotFoundError) as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {report.written} scored records, {len(report.rejects)} rejects")
    for rec_id, reason in report.rejects:
        click.echo(f"reject {rec_id}: {reason}", err=True)


@main.command(name="convert")
@click.option("--format", "fmt", required=True, type=click.Choice(["etpc", "apty", "qqp", "labelstudio"]))
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def convert_cmd(fmt, in_path, out_path):
    """Convert a dataset dump into toolkit JSONL."""
    try:
        report = run_convert(fmt, in_path, out_path)
    except (SchemaError, FileNotFoundError) as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(2)
    click.echo(
        f"{report.records_in} records in -> {report.written} written, "
        f"{len(report.rejects)} rejects"
    )
    for label in sorted(report.counts_by_type):
        click.echo(f"{label}\t{report.counts_by_type[label]}")
    if report.unknown_fields:
        click.echo(f"unknown fields: {sorted(report.unknown_fields)}", err=True)
    for rec_id, reason in report.rejects:
        click.echo(f"reject {rec_id}: {reason}", err=True)


if __name__ == "__main__":
    main()
