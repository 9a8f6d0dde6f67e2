"""HTTP interface: report uploads, finding triage, queries, metrics, dashboards.

All writes funnel through the per-project knowledge-base writer; handlers
never mutate state directly. Reads serve the last committed fixpoint.
"""

from __future__ import annotations

import base64
import json
import threading
from datetime import timedelta
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request, Response

from . import scoring
from .config import AppConfig
from .knowledge import KnowledgeError
from .metrics import compute_snapshot, snapshot_series
from .model import (
    StatusValue,
    ToolCategory,
    ToolDescriptor,
    ValidationError,
    to_timestamp,
    utc_now,
)
from .parsers import detect_format, known_formats, parse_report
from .pipeline import SEVERITY_BAND_ORDER, ProjectPipeline
from .store import DocumentStore

PAGE_SIZE_DEFAULT = 50

SORT_FIELDS = ("severity", "priority", "first_seen", "last_seen")


class ServiceState:
    """Per-project pipelines plus their single-writer locks."""

    def __init__(self, config: AppConfig):
        self.config = config
        self.pipelines: dict[str, ProjectPipeline] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def pipeline(self, project_id: str) -> ProjectPipeline:
        with self._registry_lock:
            if project_id not in self.pipelines:
                self.pipelines[project_id] = ProjectPipeline(
                    project_id, self._open_store(project_id), self.config.pipeline_config()
                )
                self.locks[project_id] = threading.Lock()
                if self.config.storage_path != ":memory:":
                    # rebuild in-memory clustering context from the belief log
                    self.pipelines[project_id].kb.replay()
            return self.pipelines[project_id]

    def writer_lock(self, project_id: str) -> threading.Lock:
        self.pipeline(project_id)
        return self.locks[project_id]

    def _open_store(self, project_id: str) -> DocumentStore:
        if self.config.storage_path == ":memory:":
            return DocumentStore(":memory:")
        root = Path(self.config.storage_path)
        root.mkdir(parents=True, exist_ok=True)
        return DocumentStore(str(root / f"{project_id}.db"))


def create_app(config: AppConfig | None = None) -> FastAPI:
    config = config or AppConfig()
    state = ServiceState(config)
    app = FastAPI(title="findingskb", version="0.1.0")
    app.state.service = state

    def bearer_token(authorization: Optional[str]) -> Optional[str]:
        if authorization and authorization.startswith("Bearer "):
            return authorization.split(" ", 1)[1]
        return None

    def require_ci(authorization: Optional[str] = Header(None)):
        token = bearer_token(authorization)
        if token not in config.ci_tokens:
            raise HTTPException(401, "valid CI token required")
        return token

    def require_user(authorization: Optional[str] = Header(None)) -> str:
        token = bearer_token(authorization)
        role = config.user_tokens.get(token or "")
        if role is None:
            raise HTTPException(401, "valid user token required")
        return role

    # -- health and discovery -----------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/formats")
    def formats():
        return {"formats": known_formats()}

    # -- report upload -------------------------------------------------

    @app.post("/projects/{project_id}/reports", status_code=201)
    async def upload_report(
        project_id: str,
        request: Request,
        format: Optional[str] = Query(None),
        scope: str = Query("main"),
        received_at: Optional[str] = Query(None),
        tool: Optional[str] = Query(None),
        tool_version: str = Query(""),
        tool_category: str = Query("other"),
        _token: str = Depends(require_ci),
    ):
        document = await request.body()
        try:
            tag = detect_format(document, declared=format)
        except ValidationError as exc:
            raise HTTPException(422, str(exc))
        try:
            descriptor = (
                ToolDescriptor(tool, tool_version, ToolCategory(tool_category)) if tool else None
            )
            at = to_timestamp(received_at) if received_at else utc_now()
            parsed = parse_report(
                tag, document, project_id, tool=descriptor, scan_scope=scope, received_at=at
            )
        except ValidationError as exc:
            raise HTTPException(400, {"errors": exc.errors})
        except ValueError as exc:
            raise HTTPException(400, {"errors": [str(exc)]})

        pipeline = state.pipeline(project_id)
        kb = pipeline.kb
        with state.writer_lock(project_id):
            if kb.get("SecurityReport", parsed.report.report_id) is not None:
                raise HTTPException(409, f"duplicate report_id {parsed.report.report_id}")
            before = {cls: kb.count(cls) for cls in ("RawFinding", "AggregatedFinding", "StatusChange")}
            _, trace = pipeline.ingest_report(parsed.report)
            if trace.errors:
                raise HTTPException(400, {"errors": trace.errors})
            return {
                "report_id": parsed.report.report_id,
                "new_raw": kb.count("RawFinding") - before["RawFinding"],
                "new_agg": kb.count("AggregatedFinding") - before["AggregatedFinding"],
                "status_changes": kb.count("StatusChange") - before["StatusChange"],
                "warnings": parsed.warnings,
            }

    # -- findings ------------------------------------------------------

    def aggregate_summary(kb, agg: dict) -> dict:
        members = [kb.get("RawFinding", rid).payload for rid in agg["member_raw_ids"]]
        status_counts: dict[str, int] = {}
        for m in members:
            status_counts[m["status"]] = status_counts.get(m["status"], 0) + 1
        last_seen = max(m["last_seen"] for m in members)
        return {
            "agg_id": agg["agg_id"],
            "title": agg["canonical_title"],
            "severity": agg.get("severity"),
            "effective_priority": scoring.effective_priority(agg),
            "priority": agg.get("priority"),
            "suggested_priority": agg.get("suggested_priority"),
            "status_counts": status_counts,
            "tools": sorted({m["tool"]["name"] for m in members}),
            "tool_category": agg["tool_category"],
            "n_members": len(members),
            "first_seen": agg["first_seen"],
            "last_seen": last_seen,
            "new_7d": False,  # filled by the caller, relative to its as_of
        }

    def encode_cursor(doc: dict) -> str:
        return base64.urlsafe_b64encode(json.dumps(doc).encode()).decode()

    def decode_cursor(cursor: str) -> dict:
        try:
            return json.loads(base64.urlsafe_b64decode(cursor.encode()))
        except Exception:
            raise HTTPException(400, "malformed cursor")

    @app.get("/projects/{project_id}/findings")
    def list_findings(
        project_id: str,
        status: Optional[str] = Query(None),
        severity: Optional[str] = Query(None),
        tool: Optional[str] = Query(None),
        new_since: Optional[str] = Query(None),
        sort: str = Query("severity"),
        order: str = Query("desc"),
        cursor: Optional[str] = Query(None),
        page_size: int = Query(PAGE_SIZE_DEFAULT, ge=1, le=500),
        _role: str = Depends(require_user),
    ):
        if sort not in SORT_FIELDS:
            raise HTTPException(400, f"unknown sort field {sort!r} (known: {', '.join(SORT_FIELDS)})")
        if order not in ("asc", "desc"):
            raise HTTPException(400, "order must be asc or desc")
        if status is not None and status not in {s.value for s in StatusValue}:
            raise HTTPException(400, f"unknown status {status!r}")
        if severity is not None and severity not in SEVERITY_BAND_ORDER:
            raise HTTPException(400, f"unknown severity band {severity!r}")

        cur = decode_cursor(cursor) if cursor else None
        if cur is not None and (cur.get("sort") != sort or cur.get("order") != order):
            raise HTTPException(400, "cursor does not match the requested sort")
        as_of = cur["as_of"] if cur else utc_now().isoformat()

        kb = state.pipeline(project_id).kb
        items = []
        for rec in kb.iter_class("AggregatedFinding"):
            agg = rec.payload
            # cursor pins the snapshot: later arrivals don't tear pagination
            if agg["first_seen"] > as_of:
                continue
            summary = aggregate_summary(kb, agg)
            if status is not None and summary["status_counts"].get(status, 0) == 0:
                continue
            if severity is not None and (summary["severity"] or {}).get("band") != severity:
                continue
            if tool is not None and tool not in summary["tools"]:
                continue
            if new_since is not None and summary["first_seen"] < to_timestamp(new_since).isoformat():
                continue
            window_start = (to_timestamp(as_of) - timedelta(days=7)).isoformat()
            summary["new_7d"] = summary["first_seen"] > window_start
            items.append(summary)

        def sort_value(item):
            if sort == "severity":
                return (item["severity"] or {}).get("score", -1.0)
            if sort == "priority":
                return item["effective_priority"]
            return item[sort]

        items.sort(key=lambda i: (sort_value(i), i["agg_id"]), reverse=(order == "desc"))
        if cur and cur.get("after"):
            after = tuple(cur["after"])
            def before_cursor(item):
                key = (sort_value(item), item["agg_id"])
                return key >= after if order == "desc" else key <= after
            items = [i for i in items if not before_cursor(i)]

        page = items[:page_size]
        next_cursor = None
        if len(items) > page_size:
            last = page[-1]
            next_cursor = encode_cursor(
                {"as_of": as_of, "after": [sort_value(last), last["agg_id"]],
                 "sort": sort, "order": order}
            )
        return {"items": page, "next_cursor": next_cursor, "as_of": as_of}

    def get_aggregate(kb, agg_id: str):
        rec = kb.get("AggregatedFinding", agg_id)
        if rec is None:
            raise HTTPException(404, f"unknown finding {agg_id}")
        return rec

    @app.get("/projects/{project_id}/findings/{agg_id}")
    def finding_detail(project_id: str, agg_id: str, _role: str = Depends(require_user)):
        kb = state.pipeline(project_id).kb
        rec = get_aggregate(kb, agg_id)
        agg = rec.payload
        members = [kb.get("RawFinding", rid).payload for rid in agg["member_raw_ids"]]
        member_ids = set(agg["member_raw_ids"])
        audit = sorted(
            (c.payload | {"change_id": c.belief_id}
             for c in kb.iter_class("StatusChange") if c.payload["raw_id"] in member_ids),
            key=lambda c: (c["changed_at"], c["change_id"]),
        )
        summary = aggregate_summary(kb, agg)
        return {
            **summary,
            "description": agg["canonical_description"],
            "enrichment_notes": agg["enrichment_notes"],
            "members": members,
            "audit": audit,
            "provenance": sorted(rec.derived_from),
        }

    def submit_input(project_id: str, payload: dict):
        pipeline = state.pipeline(project_id)
        with state.writer_lock(project_id):
            _, trace = pipeline.submit_user_input(payload, at=utc_now().isoformat())
        if trace.errors:
            raise HTTPException(400, {"errors": trace.errors})
        return trace

    @app.patch("/projects/{project_id}/findings/{agg_id}/status")
    async def patch_status(project_id: str, agg_id: str, request: Request,
                           role: str = Depends(require_user)):
        body = await request.json()
        status = body.get("status")
        if status == StatusValue.DISAPPEARED.value:
            raise HTTPException(403, "Disappeared cannot be assigned by users")
        try:
            StatusValue(status)
        except ValueError:
            raise HTTPException(400, f"unknown status {status!r}")
        kb = state.pipeline(project_id).kb
        agg = get_aggregate(kb, agg_id).payload
        actor = body.get("actor", role)
        raw_ids = [body["raw_id"]] if body.get("raw_id") else agg["member_raw_ids"]
        for raw_id in raw_ids:
            if raw_id not in agg["member_raw_ids"]:
                raise HTTPException(404, f"{raw_id} is not a member of {agg_id}")
            submit_input(project_id, {"kind": "status", "raw_id": raw_id,
                                      "status": status, "actor": actor})
        return {"agg_id": agg_id, "status": status, "changed_locations": len(raw_ids)}

    @app.patch("/projects/{project_id}/findings/{agg_id}/priority")
    async def patch_priority(project_id: str, agg_id: str, request: Request,
                             role: str = Depends(require_user)):
        body = await request.json()
        try:
            value = scoring.validate_priority(body.get("value"))
        except (ValidationError, TypeError) as exc:
            raise HTTPException(400, str(exc))
        kb = state.pipeline(project_id).kb
        get_aggregate(kb, agg_id)
        submit_input(project_id, {"kind": "priority", "agg_id": agg_id,
                                  "value": value, "actor": body.get("actor", role)})
        return {"agg_id": agg_id, "priority": value}

    @app.post("/projects/{project_id}/findings/bulk-status")
    async def bulk_status(project_id: str, request: Request, role: str = Depends(require_user)):
        body = await request.json()
        status = body.get("status")
        if status == StatusValue.DISAPPEARED.value:
            raise HTTPException(403, "Disappeared cannot be assigned by users")
        band = body.get("severity_at_most")
        if band not in SEVERITY_BAND_ORDER:
            raise HTTPException(400, f"severity_at_most must be one of {SEVERITY_BAND_ORDER}")
        kb = state.pipeline(project_id).kb
        before = kb.count("StatusChange")
        submit_input(project_id, {"kind": "bulk_status", "severity_at_most": band,
                                  "status": status, "actor": body.get("actor", role)})
        return {"changed_locations": kb.count("StatusChange") - before}

    # -- queries, metrics, dashboards ---------------------------------

    @app.get("/projects/{project_id}/queries/{query_name}")
    def run_query(project_id: str, query_name: str, request: Request,
                  _role: str = Depends(require_user)):
        kb = state.pipeline(project_id).kb
        params = dict(request.query_params)
        try:
            return {"query": query_name, "result": kb.evaluate_query(query_name, params)}
        except KnowledgeError as exc:
            raise HTTPException(400, str(exc))

    @app.get("/projects/{project_id}/metrics/weekly")
    def weekly_metrics(project_id: str, as_of: Optional[str] = Query(None),
                       _role: str = Depends(require_user)):
        kb = state.pipeline(project_id).kb
        snap = compute_snapshot(kb, project_id, as_of or utc_now())
        snap.check_identities()
        return snap.to_dict()

    @app.get("/projects/{project_id}/dashboard")
    def dashboard(project_id: str, role: str = Query(...), _role: str = Depends(require_user)):
        kb = state.pipeline(project_id).kb
        now = utc_now()
        if role == "developer":
            new_ids = kb.evaluate_query("new_findings", {"as_of": now.isoformat()})
            newest = []
            for agg_id in new_ids[:10]:
                agg = kb.get("AggregatedFinding", agg_id).payload
                newest.append(
                    {
                        "agg_id": agg_id,
                        "title": agg["canonical_title"],
                        "severity": agg.get("severity"),
                        "solution_notes": agg["enrichment_notes"],
                    }
                )
            widgets = [
                {"type": "newest_findings", "items": newest},
                {"type": "top_priority", "items": kb.evaluate_query("top_priority", {"n": 10})},
            ]
        elif role == "manager":
            reports = list(kb.iter_class("SecurityReport"))
            if reports:
                start = min(r.payload["received_at"] for r in reports)
                snaps = snapshot_series(kb, project_id, start, now)
            else:
                snaps = []
            widgets = [{"type": "weekly_trend", "snapshots": [s.to_dict() for s in snaps[-12:]]}]
        elif role == "security":
            widgets = [
                {"type": "severity_distribution", "counts": kb.evaluate_query("severity_counts")},
                {"type": "status_breakdown", "counts": kb.evaluate_query("status_counts")},
                {"type": "open_count", "count": kb.evaluate_query("open_count")},
            ]
        else:
            raise HTTPException(400, f"unknown role {role!r}")
        return {"role": role, "widgets": widgets}

    # -- audit / export ------------------------------------------------

    @app.get("/projects/{project_id}/export")
    def export_beliefs(project_id: str, _role: str = Depends(require_user)):
        kb = state.pipeline(project_id).kb
        lines = "\n".join(json.dumps(e, sort_keys=True) for e in kb.store.export_log())
        return Response(content=lines + ("\n" if lines else ""), media_type="application/x-ndjson")

    return app
