"""Per-project processing pipeline on top of the knowledge base.

Registers the derivation rules in their fixed strata:

  0  external beliefs (SecurityReport, UserInput)
  1  parse       report document -> parsed findings
  2  dedup       exact grouping by fingerprint + semantic clustering
  3  enrich      rule-based notes on aggregates
  4  lifecycle   occurrence history, status machine, user status input
  5  scoring     severity assessment, priority suggestion + assignment

plus the standard queries (top_priority, open_count, status and severity
breakdowns, new findings).
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

from . import lifecycle, scoring
from .dedup import SemanticClusterer, exact_group, finding_text
from .enrich import (
    EnrichmentRule,
    apply_enrichment,
    builtin_tool_explanation_rule,
    default_tool_explanation,
)
from .knowledge import KnowledgeBase, KnowledgeError
from .model import (
    SecurityReport,
    StatusValue,
    ToolDescriptor,
    canonical_fingerprint,
    to_timestamp,
)
from .parsers import parse_report
from .store import BeliefRecord, DocumentStore


@dataclass
class PipelineConfig:
    similarity_threshold: float = 0.75
    lsi_rank: int = 100
    rebuild_every: int = 50
    enrichment_rules: list[EnrichmentRule] = field(default_factory=list)


SEVERITY_BAND_ORDER = ["Info", "Low", "Medium", "High", "Critical"]


class ProjectPipeline:
    """One project's knowledge base with the full rule set attached."""

    def __init__(self, project_id: str, store: DocumentStore, config: PipelineConfig | None = None):
        self.project_id = project_id
        self.config = config or PipelineConfig()
        self.clusterer = SemanticClusterer(
            threshold=self.config.similarity_threshold,
            lsi_rank=self.config.lsi_rank,
            rebuild_every=self.config.rebuild_every,
        )
        self.kb = KnowledgeBase(store, reset_context=self.clusterer.reset)
        self._register_rules()
        self._register_queries()

    # -- ingestion entry points ---------------------------------------

    def report_belief(self, report: SecurityReport) -> BeliefRecord:
        payload = report.to_meta_dict()
        payload["document_b64"] = base64.b64encode(report.raw_document).decode("ascii")
        return BeliefRecord(
            cls="SecurityReport",
            belief_id=report.report_id,
            payload=payload,
            asserted_at=report.received_at.isoformat(),
        )

    def user_input_belief(self, payload: dict, at: str) -> BeliefRecord:
        base = self.kb.count("UserInput") + 1
        belief_id = f"ui-{base:06d}"
        while self.kb.get("UserInput", belief_id) is not None:
            base += 1
            belief_id = f"ui-{base:06d}"
        return BeliefRecord(
            cls="UserInput",
            belief_id=belief_id,
            payload=dict(payload, at=at),
            asserted_at=at,
        )

    def ingest_report(self, report: SecurityReport):
        """Assert a report and run to fixpoint; returns (change, trace)."""
        change = self.kb.assert_beliefs([self.report_belief(report)])
        trace = self.kb.run_to_fixpoint()
        return change, trace

    def submit_user_input(self, payload: dict, at: str):
        change = self.kb.assert_beliefs([self.user_input_belief(payload, at)])
        trace = self.kb.run_to_fixpoint()
        return change, trace

    # -- rules ---------------------------------------------------------

    def _register_rules(self) -> None:
        self.kb.register_rule("parse", {"SecurityReport"}, 1, self._rule_parse)
        self.kb.register_rule("dedup", {"ParsedFinding"}, 2, self._rule_dedup)
        self.kb.register_rule("enrich", {"AggregatedFinding"}, 3, self._rule_enrich)
        self.kb.register_rule("lifecycle", {"SecurityReport", "ParsedFinding"}, 4, self._rule_lifecycle)
        self.kb.register_rule("user_status", {"UserInput"}, 4, self._rule_user_status)
        self.kb.register_rule("scoring", {"AggregatedFinding"}, 5, self._rule_scoring)
        self.kb.register_rule("user_priority", {"UserInput"}, 5, self._rule_user_priority)

    def _rule_parse(self, kb: KnowledgeBase, new_beliefs):
        outputs = []
        for rec in new_beliefs:
            meta = rec.payload
            document = base64.b64decode(meta["document_b64"])
            tool = ToolDescriptor.from_dict(meta["tool"])
            result = parse_report(
                meta["format_tag"],
                document,
                self.project_id,
                tool=tool,
                scan_scope=meta["scan_scope"],
                commit_ref=meta.get("commit_ref"),
                received_at=to_timestamp(meta["received_at"]),
            )
            for i, draft in enumerate(result.drafts):
                tool_name = draft.extra.get("tool_name") or tool.name
                raw_id = canonical_fingerprint(
                    self.project_id, tool_name, draft.rule_id, draft.location, draft.cve_ids
                )
                outputs.append(
                    BeliefRecord(
                        cls="ParsedFinding",
                        belief_id=f"pf-{rec.belief_id[:12]}-{i:04d}",
                        payload={
                            "raw_id": raw_id,
                            "report_id": rec.belief_id,
                            "received_at": meta["received_at"],
                            "stream": lifecycle.stream_key(tool.name, meta["scan_scope"]),
                            "tool": dict(tool.to_dict(), name=tool_name),
                            "rule_id": draft.rule_id,
                            "title": draft.title,
                            "description": draft.description,
                            "location": draft.location.to_dict(),
                            "severity": draft.severity.to_dict(),
                            "severity_raw": draft.severity_raw,
                            "cvss": draft.cvss,
                            "cwe_ids": draft.cwe_ids,
                            "cve_ids": draft.cve_ids,
                            "extra": draft.extra,
                        },
                        derived_from=[rec.key()],
                        asserted_at=rec.asserted_at,
                    )
                )
        return outputs

    def _rule_dedup(self, kb: KnowledgeBase, new_beliefs):
        outputs = []
        groups = exact_group([(b.payload["raw_id"], b) for b in new_beliefs])
        to_cluster = []
        created: dict[str, BeliefRecord] = {}
        for raw_id, parsed in groups.items():
            if kb.get("RawFinding", raw_id) is not None or raw_id in created:
                continue  # known location: history is updated by the lifecycle rule
            first = parsed[0]
            p = first.payload
            rec = BeliefRecord(
                cls="RawFinding",
                belief_id=raw_id,
                payload={
                    "raw_id": raw_id,
                    "project_id": self.project_id,
                    "tool": p["tool"],
                    "rule_id": p["rule_id"],
                    "title": p["title"],
                    "description": p["description"],
                    "location": p["location"],
                    "severity": p["severity"],
                    "severity_raw": p["severity_raw"],
                    "cvss": p["cvss"],
                    "cwe_ids": p["cwe_ids"],
                    "cve_ids": p["cve_ids"],
                    "extra": p["extra"],
                    "status": StatusValue.OPEN.value,
                    "status_set_by": lifecycle.SYSTEM_ACTOR,
                    "first_seen": p["received_at"],
                    "last_seen": p["received_at"],
                    "occurrence_count": 0,
                    "report_ids": [],
                    "streams": {},
                    "change_seq": 0,
                    "agg_id": None,
                },
                derived_from=[b.key() for b in parsed],
                asserted_at=first.asserted_at,
            )
            created[raw_id] = rec
            to_cluster.append(
                (
                    raw_id,
                    finding_text(p["title"], p["description"], p["rule_id"]),
                    self.project_id,
                    p["tool"]["category"],
                )
            )

        aggregates: dict[str, BeliefRecord] = {}
        for assignment in self.clusterer.assign_batch(to_cluster):
            raw_rec = created[assignment.raw_id]
            raw_rec.payload["agg_id"] = assignment.agg_id
            if assignment.is_new_cluster:
                p = raw_rec.payload
                aggregates[assignment.agg_id] = BeliefRecord(
                    cls="AggregatedFinding",
                    belief_id=assignment.agg_id,
                    payload={
                        "agg_id": assignment.agg_id,
                        "project_id": self.project_id,
                        "member_raw_ids": [assignment.raw_id],
                        "canonical_title": p["title"],
                        "canonical_description": p["description"],
                        "tool_category": p["tool"]["category"],
                        "first_seen": p["first_seen"],
                        "enrichment_notes": [],
                        "severity": None,
                        "suggested_priority": None,
                        "priority": None,
                        "priority_set_by": None,
                    },
                    derived_from=[f"RawFinding:{assignment.raw_id}"],
                    asserted_at=raw_rec.asserted_at,
                )
            else:
                agg = aggregates.get(assignment.agg_id)
                if agg is None:
                    agg = kb.get("AggregatedFinding", assignment.agg_id)
                    aggregates[assignment.agg_id] = agg
                agg.payload["member_raw_ids"].append(assignment.raw_id)
                agg.payload["first_seen"] = min(agg.payload["first_seen"], raw_rec.payload["first_seen"])
                agg.derived_from = sorted(set(agg.derived_from) | {f"RawFinding:{assignment.raw_id}"})

        outputs.extend(created.values())
        outputs.extend(aggregates.values())
        return outputs

    def _rule_enrich(self, kb: KnowledgeBase, new_beliefs):
        rules = [builtin_tool_explanation_rule()] + list(self.config.enrichment_rules)
        outputs = []
        for rec in new_beliefs:
            agg = rec.payload
            founder = kb.get("RawFinding", agg["member_raw_ids"][0])
            tool = ToolDescriptor.from_dict(founder.payload["tool"]) if founder else None
            fields = {
                "title": agg["canonical_title"],
                "description": agg["canonical_description"],
                "category": agg["tool_category"],
                "tool": tool.name if tool else "",
                "explanation": default_tool_explanation(tool) if tool else "",
                "rule_id": founder.payload["rule_id"] if founder else "",
                "path": founder.payload["location"]["path"] if founder else "",
            }
            notes = apply_enrichment(agg["enrichment_notes"], fields, rules)
            if notes != agg["enrichment_notes"]:
                rec.payload = dict(agg, enrichment_notes=notes)
                outputs.append(rec)
        return outputs

    def _rule_lifecycle(self, kb: KnowledgeBase, new_beliefs):
        reports = [b for b in new_beliefs if b.cls == "SecurityReport"]
        parsed = [b for b in new_beliefs if b.cls == "ParsedFinding"]
        by_report: dict[str, list] = {}
        for b in parsed:
            by_report.setdefault(b.payload["report_id"], []).append(b)

        touched: dict[str, BeliefRecord] = {}
        changes: list[BeliefRecord] = []

        def get_finding(raw_id: str) -> BeliefRecord:
            if raw_id not in touched:
                touched[raw_id] = kb.get("RawFinding", raw_id)
            return touched[raw_id]

        def log_change(finding: BeliefRecord, old, new, actor: str, at: str, cause_key: str):
            finding.payload["change_seq"] += 1
            changes.append(
                BeliefRecord(
                    cls="StatusChange",
                    belief_id=f"chg-{finding.belief_id}-{finding.payload['change_seq']:04d}",
                    payload={
                        "raw_id": finding.belief_id,
                        "old": old,
                        "new": new,
                        "actor": actor,
                        "changed_at": at,
                    },
                    derived_from=[cause_key],
                    asserted_at=at,
                )
            )

        for report in sorted(reports, key=lambda r: (r.payload["received_at"], r.belief_id)):
            meta = report.payload
            received_at = meta["received_at"]
            stream = lifecycle.stream_key(meta["tool"]["name"], meta["scan_scope"])
            present_ids = []
            for pf in by_report.get(report.belief_id, []):
                raw_id = pf.payload["raw_id"]
                present_ids.append(raw_id)
                finding = get_finding(raw_id)
                if finding is None:
                    continue
                if finding.payload["occurrence_count"] == 0:
                    log_change(finding, None, finding.payload["status"],
                               lifecycle.SYSTEM_ACTOR, received_at, report.key())
                else:
                    new_status = lifecycle.presence_transition(finding.payload)
                    if new_status is not None:
                        old = finding.payload["status"]
                        finding.payload["status"] = new_status
                        finding.payload["status_set_by"] = lifecycle.SYSTEM_ACTOR
                        log_change(finding, old, new_status, lifecycle.SYSTEM_ACTOR,
                                   received_at, report.key())
                    lifecycle.reset_absence_counters(finding.payload)
                lifecycle.record_occurrence(finding.payload, report.belief_id, received_at, stream)

            present = set(present_ids)
            for existing in kb.iter_class("RawFinding"):
                if existing.belief_id in present:
                    continue
                finding = get_finding(existing.belief_id)
                if finding is None or stream not in finding.payload.get("streams", {}):
                    continue
                old = finding.payload["status"]
                new_status = lifecycle.absence_transition(finding.payload, stream)
                if new_status is not None:
                    finding.payload["status"] = new_status
                    finding.payload["status_set_by"] = lifecycle.SYSTEM_ACTOR
                    log_change(finding, old, new_status, lifecycle.SYSTEM_ACTOR,
                               received_at, report.key())

        return [f for f in touched.values() if f is not None] + changes

    def _rule_user_status(self, kb: KnowledgeBase, new_beliefs):
        outputs = []
        for rec in new_beliefs:
            p = rec.payload
            if p.get("kind") == "status":
                outputs.extend(self._apply_user_status(kb, p["raw_id"], p["status"], p["actor"], p["at"], rec.key()))
            elif p.get("kind") == "bulk_status":
                outputs.extend(self._apply_bulk_status(kb, p, rec.key()))
        return outputs

    def _apply_user_status(self, kb, raw_id, status, actor, at, cause_key):
        new_status = lifecycle.validate_user_status(status).value
        finding = kb.get("RawFinding", raw_id)
        if finding is None:
            raise KnowledgeError(f"unknown raw finding: {raw_id}")
        if finding.payload["status"] == new_status:
            return []
        old = finding.payload["status"]
        finding.payload["status"] = new_status
        finding.payload["status_set_by"] = "user"
        lifecycle.reset_absence_counters(finding.payload)
        finding.payload["change_seq"] += 1
        change = BeliefRecord(
            cls="StatusChange",
            belief_id=f"chg-{raw_id}-{finding.payload['change_seq']:04d}",
            payload={"raw_id": raw_id, "old": old, "new": new_status, "actor": actor, "changed_at": at},
            derived_from=[cause_key],
            asserted_at=at,
        )
        return [finding, change]

    def _apply_bulk_status(self, kb, p, cause_key):
        """One request applied to every location of a severity-filtered set."""
        max_band = p["severity_at_most"]
        cutoff = SEVERITY_BAND_ORDER.index(max_band)
        outputs = []
        for agg in kb.iter_class("AggregatedFinding"):
            severity = agg.payload.get("severity")
            if severity is None or SEVERITY_BAND_ORDER.index(severity["band"]) > cutoff:
                continue
            for raw_id in agg.payload["member_raw_ids"]:
                outputs.extend(
                    self._apply_user_status(kb, raw_id, p["status"], p["actor"], p["at"], cause_key)
                )
        return outputs

    def _rule_scoring(self, kb: KnowledgeBase, new_beliefs):
        outputs = []
        for rec in new_beliefs:
            agg = rec.payload
            members = []
            for raw_id in agg["member_raw_ids"]:
                rf = kb.get("RawFinding", raw_id)
                if rf is None:
                    continue
                members.append(
                    {
                        "score": rf.payload["severity"]["score"],
                        "category": rf.payload["tool"]["category"],
                        "fix_version": (rf.payload.get("extra") or {}).get("fix_version"),
                    }
                )
            if not members:
                continue
            assessment = scoring.compute_severity(members)
            severity = {"band": assessment["band"], "score": assessment["score"], "flags": []}
            if agg.get("severity") != severity or agg.get("suggested_priority") != assessment["score"]:
                rec.payload = dict(
                    agg, severity=severity, suggested_priority=scoring.suggest_priority(assessment["score"])
                )
                outputs.append(rec)
            outputs.append(
                BeliefRecord(
                    cls="SeverityAssessment",
                    belief_id=f"sev-{agg['agg_id']}",
                    payload=dict(assessment, agg_id=agg["agg_id"]),
                    derived_from=[rec.key()],
                    asserted_at=rec.asserted_at,
                )
            )
        return outputs

    def _rule_user_priority(self, kb: KnowledgeBase, new_beliefs):
        outputs = []
        for rec in new_beliefs:
            p = rec.payload
            if p.get("kind") != "priority":
                continue
            value = scoring.validate_priority(p["value"])
            agg = kb.get("AggregatedFinding", p["agg_id"])
            if agg is None:
                raise KnowledgeError(f"unknown aggregated finding: {p['agg_id']}")
            agg.payload = dict(agg.payload, priority=value, priority_set_by=p["actor"])
            outputs.append(agg)
            outputs.append(
                BeliefRecord(
                    cls="PriorityAssignment",
                    belief_id=f"prio-{p['agg_id']}",
                    payload={"agg_id": p["agg_id"], "value": value, "actor": p["actor"], "assigned_at": p["at"]},
                    derived_from=[rec.key()],
                    asserted_at=p["at"],
                )
            )
        return outputs

    # -- queries -------------------------------------------------------

    def _register_queries(self) -> None:
        self.kb.register_query("top_priority", self._query_top_priority)
        self.kb.register_query("open_count", self._query_open_count)
        self.kb.register_query("status_counts", self._query_status_counts)
        self.kb.register_query("severity_counts", self._query_severity_counts)
        self.kb.register_query("new_findings", self._query_new_findings)

    def _query_top_priority(self, kb: KnowledgeBase, params: dict):
        n = int(params.get("n", 10))
        aggs = [rec.payload for rec in kb.iter_class("AggregatedFinding")]
        aggs.sort(
            key=lambda a: (
                -scoring.effective_priority(a),
                -(a.get("suggested_priority") or 0.0),
                a["agg_id"],
            )
        )
        return [
            {
                "agg_id": a["agg_id"],
                "title": a["canonical_title"],
                "severity": a.get("severity"),
                "effective_priority": scoring.effective_priority(a),
            }
            for a in aggs[:n]
        ]

    def _query_open_count(self, kb: KnowledgeBase, params: dict):
        return sum(1 for rec in kb.iter_class("RawFinding") if rec.payload["status"] == StatusValue.OPEN.value)

    def _query_status_counts(self, kb: KnowledgeBase, params: dict):
        counts = {s.value: 0 for s in StatusValue}
        for rec in kb.iter_class("RawFinding"):
            counts[rec.payload["status"]] += 1
        return counts

    def _query_severity_counts(self, kb: KnowledgeBase, params: dict):
        counts = {band: 0 for band in SEVERITY_BAND_ORDER}
        for rec in kb.iter_class("AggregatedFinding"):
            severity = rec.payload.get("severity")
            if severity is not None:
                counts[severity["band"]] += 1
        return counts

    def _query_new_findings(self, kb: KnowledgeBase, params: dict):
        from datetime import timedelta

        as_of = to_timestamp(params["as_of"]) if params.get("as_of") else None
        days = int(params.get("days", 7))
        out = []
        for rec in kb.iter_class("AggregatedFinding"):
            first_seen = to_timestamp(rec.payload["first_seen"])
            if as_of is None or (as_of - timedelta(days=days)) < first_seen <= as_of:
                out.append(rec.payload["agg_id"])
        return sorted(out)
