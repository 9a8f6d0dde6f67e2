from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest

from findingskb import DocumentStore, PipelineConfig, ProjectPipeline
from findingskb.model import validate_report

T0 = datetime(2023, 1, 2, 12, 0, 0, tzinfo=timezone.utc)


def native_document(findings, tool_name="scanny", category="static-analysis", scope="main", at=None):
    return json.dumps(
        {
            "schema_version": "1",
            "tool": {"name": tool_name, "version": "1.0", "category": category},
            "scan": {
                "project_id": "proj",
                "scope": scope,
                "commit": "abc123",
                "started_at": (at or T0).isoformat(),
            },
            "findings": findings,
        }
    ).encode()


def native_entry(rule_id="R1", path="src/a.py", line=10, title="Hardcoded password",
                 description="A hardcoded password was found in the source file.",
                 **extra_fields):
    entry = {
        "rule_id": rule_id,
        "title": title,
        "description": description,
        "location": {"path": path, "line": line},
    }
    entry.update(extra_fields)
    return entry


def week(n: int) -> datetime:
    return T0 + timedelta(days=7 * n)


@pytest.fixture
def pipeline():
    return ProjectPipeline("proj", DocumentStore(":memory:"), PipelineConfig())


def make_pipeline(config: PipelineConfig | None = None, project_id: str = "proj") -> ProjectPipeline:
    return ProjectPipeline(project_id, DocumentStore(":memory:"), config or PipelineConfig())


def ingest_native(pipeline, findings, at=None, tool_name="scanny",
                  category="static-analysis", scope="main", salt=""):
    """Build, validate and ingest one native report; returns (change, trace)."""
    doc = native_document(findings, tool_name=tool_name, category=category, scope=scope, at=at)
    if salt:
        # vary the document bytes so otherwise identical scans get distinct report ids
        doc = doc[:-1] + (',"salt":"%s"}' % salt).encode()
    report = validate_report(doc, "native", pipeline.project_id, received_at=at or T0)
    return pipeline.ingest_report(report)
