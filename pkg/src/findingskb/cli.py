"""Command line interface.

  findingskb serve   run the HTTP service
  findingskb ingest  parse a report file straight into a project store
  findingskb stats   print the weekly indicator snapshot
  findingskb export  dump the belief log as NDJSON
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, load_config
from .knowledge import KnowledgeError
from .metrics import compute_snapshot
from .model import ToolCategory, ToolDescriptor, ValidationError, to_timestamp, utc_now
from .parsers import detect_format, parse_report
from .pipeline import ProjectPipeline
from .store import DocumentStore


def open_pipeline(config: AppConfig, project_id: str) -> ProjectPipeline:
    if config.storage_path == ":memory:":
        store = DocumentStore(":memory:")
    else:
        root = Path(config.storage_path)
        root.mkdir(parents=True, exist_ok=True)
        store = DocumentStore(str(root / f"{project_id}.db"))
    pipeline = ProjectPipeline(project_id, store, config.pipeline_config())
    pipeline.kb.replay()
    return pipeline


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON configuration file.")
@click.pass_context
def main(ctx, config_path):
    """Security findings knowledge base."""
    ctx.obj = load_config(config_path)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int, help="Overrides the configured port.")
@click.pass_obj
def serve(config: AppConfig, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(config), host=host, port=port or config.port)


@main.command()
@click.option("--project", required=True, help="Project id the report belongs to.")
@click.option("--file", "path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_tag", default=None,
              help="Declared format when the document has no recognizable markers.")
@click.option("--tool", default=None, help="Tool name for formats without embedded tool metadata.")
@click.option("--tool-category", default="other",
              type=click.Choice([c.value for c in ToolCategory]), show_default=True)
@click.option("--scope", default="main", show_default=True)
@click.option("--received-at", default=None, help="ISO timestamp; defaults to now.")
@click.pass_obj
def ingest(config: AppConfig, project, path, format_tag, tool, tool_category, scope, received_at):
    """Parse a report file and run it through the pipeline."""
    document = Path(path).read_bytes()
    try:
        tag = detect_format(document, declared=format_tag)
        descriptor = ToolDescriptor(tool, "", ToolCategory(tool_category)) if tool else None
        at = to_timestamp(received_at) if received_at else utc_now()
        parsed = parse_report(tag, document, project, tool=descriptor,
                              scan_scope=scope, received_at=at)
    except ValidationError as exc:
        for err in exc.errors:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)

    pipeline = open_pipeline(config, project)
    if pipeline.kb.get("SecurityReport", parsed.report.report_id) is not None:
        click.echo(f"error: duplicate report_id {parsed.report.report_id}", err=True)
        sys.exit(1)
    before = {cls: pipeline.kb.count(cls) for cls in ("RawFinding", "AggregatedFinding")}
    _, trace = pipeline.ingest_report(parsed.report)
    if trace.errors:
        for err in trace.errors:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)
    for warning in parsed.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(json.dumps({
        "report_id": parsed.report.report_id,
        "new_raw": pipeline.kb.count("RawFinding") - before["RawFinding"],
        "new_agg": pipeline.kb.count("AggregatedFinding") - before["AggregatedFinding"],
    }, indent=2))


@main.command()
@click.option("--project", required=True)
@click.option("--as-of", default=None, help="ISO timestamp; defaults to now.")
@click.pass_obj
def stats(config: AppConfig, project, as_of):
    """Print the weekly indicator snapshot for a project."""
    pipeline = open_pipeline(config, project)
    try:
        snap = compute_snapshot(pipeline.kb, project, as_of or utc_now())
        snap.check_identities()
    except KnowledgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(snap.to_dict(), indent=2))


@main.command()
@click.option("--project", required=True)
@click.option("--out", type=click.Path(), default=None, help="Output file; stdout by default.")
@click.pass_obj
def export(config: AppConfig, project, out):
    """Dump the project's belief log as NDJSON."""
    pipeline = open_pipeline(config, project)
    lines = [json.dumps(entry, sort_keys=True) for entry in pipeline.kb.store.export_log()]
    text = "\n".join(lines) + ("\n" if lines else "")
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {len(lines)} entries to {out}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
