from __future__ import annotations

import json
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from findingskb.config import AppConfig
from findingskb.model import utc_now
from findingskb.service import create_app
from tests.conftest import native_document, native_entry, week

CI = {"Authorization": "Bearer ci-token"}
USER = {"Authorization": "Bearer user-token"}


@pytest.fixture
def client():
    config = AppConfig(user_tokens={"user-token": "developer",
                                    "mgr-token": "manager",
                                    "sec-token": "security"})
    with TestClient(create_app(config)) as c:
        yield c


def upload(client, findings, at=None, salt="", **kwargs):
    doc = native_document(findings, at=at, **kwargs)
    if salt:
        doc = doc[:-1] + (',"salt":"%s"}' % salt).encode()
    params = {"received_at": (at or week(0)).isoformat()}
    return client.post("/projects/proj/reports", content=doc, params=params, headers=CI)


def first_agg_id(client):
    return client.get("/projects/proj/findings", headers=USER).json()["items"][0]["agg_id"]


def test_healthz_public(client):
    assert client.get("/healthz").json() == {"status": "ok"}


def test_formats_lists_adapters(client):
    formats = client.get("/formats").json()["formats"]
    assert set(formats) == {"native", "sarif", "dep-scan", "secret-scan"}


def test_upload_requires_ci_token(client):
    r = client.post("/projects/proj/reports", content=b"{}")
    assert r.status_code == 401
    r = client.post("/projects/proj/reports", content=b"{}", headers=USER)
    assert r.status_code == 401


def test_reads_require_user_token(client):
    assert client.get("/projects/proj/findings").status_code == 401
    assert client.get("/projects/proj/findings", headers=CI).status_code == 401


def test_upload_counts_new_beliefs(client):
    r = upload(client, [native_entry(), native_entry(rule_id="R2", path="b.py")])
    assert r.status_code == 201
    body = r.json()
    assert body["new_raw"] == 2
    assert body["status_changes"] == 2
    assert body["warnings"] == []


def test_duplicate_report_conflict(client):
    assert upload(client, [native_entry()]).status_code == 201
    assert upload(client, [native_entry()]).status_code == 409


def test_invalid_document_rejected_with_errors(client):
    doc = json.dumps({"schema_version": "2", "tool": {}}).encode()
    r = client.post("/projects/proj/reports", content=doc,
                    params={"format": "native"}, headers=CI)
    assert r.status_code == 400
    assert len(r.json()["detail"]["errors"]) >= 2


def test_undetectable_format_rejected(client):
    r = client.post("/projects/proj/reports", content=b'{"just": "json"}', headers=CI)
    assert r.status_code == 422


def test_findings_list_and_filters(client):
    upload(client, [
        native_entry(rule_id="R1", path="a.py", severity_raw="critical",
                     title="remote code execution via eval"),
        native_entry(rule_id="R2", path="b.py", severity_raw="low",
                     title="completely unrelated weak file permissions"),
    ])
    items = client.get("/projects/proj/findings", headers=USER).json()["items"]
    assert len(items) == 2
    # default sort: severity descending
    assert items[0]["severity"]["band"] == "Critical"
    crit = client.get("/projects/proj/findings", params={"severity": "Critical"},
                      headers=USER).json()["items"]
    assert len(crit) == 1
    none = client.get("/projects/proj/findings", params={"status": "Solved"},
                      headers=USER).json()["items"]
    assert none == []


def test_findings_unknown_filter_values_rejected(client):
    assert client.get("/projects/proj/findings", params={"status": "Fixed"},
                      headers=USER).status_code == 400
    assert client.get("/projects/proj/findings", params={"sort": "color"},
                      headers=USER).status_code == 400


def test_pagination_snapshot_isolation(client):
    titles = [
        "sql injection in login handler",
        "path traversal when unpacking archives",
        "weak tls cipher configuration",
        "cleartext credentials logged to disk",
        "unbounded recursion parsing yaml",
    ]
    for i, title in enumerate(titles):
        upload(client, [native_entry(rule_id=f"R{i}", path=f"f{i}.py", title=title,
                                     description=f"details about {title}")],
               at=week(0), salt=str(i))
    page1 = client.get("/projects/proj/findings",
                       params={"page_size": 2, "sort": "first_seen", "order": "asc"},
                       headers=USER).json()
    assert len(page1["items"]) == 2 and page1["next_cursor"]
    # a concurrent upload (received after the cursor was issued) must not
    # tear the cursor's snapshot
    upload(client, [native_entry(rule_id="R99", path="late.py",
                                 title="a very late and different arrival")],
           at=utc_now() + timedelta(days=1))
    seen = [i["agg_id"] for i in page1["items"]]
    cursor = page1["next_cursor"]
    while cursor:
        page = client.get("/projects/proj/findings",
                          params={"cursor": cursor, "page_size": 2, "sort": "first_seen",
                                  "order": "asc"},
                          headers=USER).json()
        seen += [i["agg_id"] for i in page["items"]]
        cursor = page["next_cursor"]
    assert len(seen) == len(set(seen)) == 5  # late arrival excluded, no dup/skip


def test_finding_detail_members_and_audit(client):
    upload(client, [native_entry()])
    agg_id = first_agg_id(client)
    detail = client.get(f"/projects/proj/findings/{agg_id}", headers=USER).json()
    assert detail["n_members"] == len(detail["members"]) == 1
    assert detail["audit"][0]["old"] is None and detail["audit"][0]["new"] == "Open"
    assert any("identified" in n["text"] or "reported" in n["text"]
               for n in detail["enrichment_notes"])
    assert detail["provenance"]
    assert client.get("/projects/proj/findings/agg-nope", headers=USER).status_code == 404


def test_status_patch_and_audit_trail(client):
    upload(client, [native_entry()])
    agg_id = first_agg_id(client)
    r = client.patch(f"/projects/proj/findings/{agg_id}/status",
                     json={"status": "InWork", "actor": "alice"}, headers=USER)
    assert r.status_code == 200
    detail = client.get(f"/projects/proj/findings/{agg_id}", headers=USER).json()
    assert detail["status_counts"] == {"InWork": 1}
    assert detail["audit"][-1]["actor"] == "alice"


def test_disappeared_write_forbidden(client):
    upload(client, [native_entry()])
    agg_id = first_agg_id(client)
    r = client.patch(f"/projects/proj/findings/{agg_id}/status",
                     json={"status": "Disappeared"}, headers=USER)
    assert r.status_code == 403
    r = client.post("/projects/proj/findings/bulk-status",
                    json={"status": "Disappeared", "severity_at_most": "Critical"},
                    headers=USER)
    assert r.status_code == 403


def test_unknown_status_rejected(client):
    upload(client, [native_entry()])
    agg_id = first_agg_id(client)
    r = client.patch(f"/projects/proj/findings/{agg_id}/status",
                     json={"status": "Fixed"}, headers=USER)
    assert r.status_code == 400


def test_priority_patch_and_range(client):
    upload(client, [native_entry(severity_raw="critical")])
    agg_id = first_agg_id(client)
    r = client.patch(f"/projects/proj/findings/{agg_id}/priority",
                     json={"value": 3.5}, headers=USER)
    assert r.status_code == 200
    item = client.get("/projects/proj/findings", headers=USER).json()["items"][0]
    assert item["effective_priority"] == 3.5
    r = client.patch(f"/projects/proj/findings/{agg_id}/priority",
                     json={"value": 12}, headers=USER)
    assert r.status_code == 400


def test_bulk_status_counts_locations(client):
    upload(client, [
        native_entry(rule_id="R1", path="a.py", severity_raw="low",
                     title="weak random number generator used here"),
        native_entry(rule_id="R2", path="b.py", severity_raw="critical",
                     title="sql injection through unsanitized user input"),
    ])
    r = client.post("/projects/proj/findings/bulk-status",
                    json={"status": "Accepted", "severity_at_most": "Medium"},
                    headers=USER)
    assert r.json()["changed_locations"] == 1


def test_query_endpoint(client):
    upload(client, [native_entry()])
    r = client.get("/projects/proj/queries/open_count", headers=USER)
    assert r.json()["result"] == 1
    assert client.get("/projects/proj/queries/nope", headers=USER).status_code == 400


def test_weekly_metrics_identities(client):
    upload(client, [native_entry(), native_entry(rule_id="R2", path="b.py")], at=week(0))
    snap = client.get("/projects/proj/metrics/weekly",
                      params={"as_of": week(0).isoformat()}, headers=USER).json()
    assert snap["n_raw_cum"] == sum(snap["status_counts"].values()) == 2
    assert snap["n_agg_cum"] == sum(snap["severity_counts"].values())


def test_dashboards_per_role(client):
    upload(client, [native_entry(severity_raw="high")])
    for role in ("developer", "manager", "security"):
        r = client.get("/projects/proj/dashboard", params={"role": role}, headers=USER)
        assert r.status_code == 200
        assert r.json()["role"] == role
    dev = client.get("/projects/proj/dashboard", params={"role": "developer"},
                     headers=USER).json()
    widgets = {w["type"] for w in dev["widgets"]}
    assert {"newest_findings", "top_priority"} <= widgets
    assert client.get("/projects/proj/dashboard", params={"role": "intern"},
                      headers=USER).status_code == 400


def test_export_ndjson(client):
    upload(client, [native_entry()])
    r = client.get("/projects/proj/export", headers=USER)
    assert r.status_code == 200
    lines = [json.loads(l) for l in r.text.strip().splitlines()]
    assert any(e["op"] == "assert" for e in lines)
    assert any(e["op"] == "derive" for e in lines)


def test_writes_only_through_knowledge_core(client):
    # every stored mutation shows up in the belief log with a rule-driven op
    upload(client, [native_entry()])
    agg_id = first_agg_id(client)
    client.patch(f"/projects/proj/findings/{agg_id}/status",
                 json={"status": "Solved"}, headers=USER)
    log = client.get("/projects/proj/export", headers=USER).text
    ops = {json.loads(l)["op"] for l in log.strip().splitlines()}
    assert ops <= {"assert", "derive", "revise", "quarantine"}
