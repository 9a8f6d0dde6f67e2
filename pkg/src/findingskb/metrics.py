"""Weekly indicator snapshots.

A snapshot is the indicator vector of one project at one timestamp:
activity/tool counts, cumulative report/raw/aggregate counts, new
findings in the trailing seven days, the status and severity breakdowns,
and recent user input. Two accounting identities must hold at every
snapshot:

  sum of the 8 status buckets   = cumulative raw findings
  sum of the 5 severity buckets = cumulative aggregated findings

and all cumulative fields are non-decreasing over time. Statuses are
reconstructed from the status-change audit log, so a snapshot can be
taken for any past timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

from .knowledge import KnowledgeBase, KnowledgeError
from .model import StatusValue, to_timestamp
from .pipeline import SEVERITY_BAND_ORDER

NEW_FINDING_WINDOW = timedelta(days=7)


@dataclass
class WeeklySnapshot:
    project_id: str
    as_of: datetime
    n_activities: int = 0
    n_tools: int = 0
    n_reports_cum: int = 0
    n_raw_cum: int = 0
    n_agg_cum: int = 0
    n_new_7d: int = 0
    status_counts: dict = field(default_factory=dict)
    severity_counts: dict = field(default_factory=dict)
    n_user_inputs_7d: int = 0

    def status_total(self) -> int:
        return sum(self.status_counts.values())

    def severity_total(self) -> int:
        return sum(self.severity_counts.values())

    def check_identities(self) -> None:
        if self.status_total() != self.n_raw_cum:
            raise KnowledgeError(
                f"status-sum identity violated: {self.status_total()} != {self.n_raw_cum}"
            )
        if self.severity_total() != self.n_agg_cum:
            raise KnowledgeError(
                f"severity-sum identity violated: {self.severity_total()} != {self.n_agg_cum}"
            )

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "as_of": self.as_of.isoformat(),
            "n_activities": self.n_activities,
            "n_tools": self.n_tools,
            "n_reports_cum": self.n_reports_cum,
            "n_raw_cum": self.n_raw_cum,
            "n_agg_cum": self.n_agg_cum,
            "n_new_7d": self.n_new_7d,
            "status_counts": self.status_counts,
            "severity_counts": self.severity_counts,
            "n_user_inputs_7d": self.n_user_inputs_7d,
        }


def status_at(kb: KnowledgeBase, raw_id: str, as_of: datetime) -> str | None:
    """Status a finding held at a timestamp, from the audit log."""
    last = None
    for rec in kb.iter_class("StatusChange"):
        if rec.payload["raw_id"] != raw_id:
            continue
        changed_at = to_timestamp(rec.payload["changed_at"])
        if changed_at <= as_of:
            key = (changed_at, rec.belief_id)
            if last is None or key >= last[0]:
                last = (key, rec.payload["new"])
    return last[1] if last else None


def compute_snapshot(kb: KnowledgeBase, project_id: str, as_of) -> WeeklySnapshot:
    as_of = to_timestamp(as_of)
    window_start = as_of - NEW_FINDING_WINDOW
    snap = WeeklySnapshot(project_id=project_id, as_of=as_of)
    snap.status_counts = {s.value: 0 for s in StatusValue}
    snap.severity_counts = {band: 0 for band in SEVERITY_BAND_ORDER}

    tools = set()
    for rec in kb.iter_class("SecurityReport"):
        if to_timestamp(rec.payload["received_at"]) <= as_of:
            snap.n_reports_cum += 1
            tools.add(rec.payload["tool"]["name"])
    snap.n_tools = len(tools)
    snap.n_activities = len(tools)

    # Last status change per finding, in one pass over the audit log.
    last_change: dict[str, tuple] = {}
    for rec in kb.iter_class("StatusChange"):
        changed_at = to_timestamp(rec.payload["changed_at"])
        if changed_at > as_of:
            continue
        key = (changed_at, rec.belief_id)
        raw_id = rec.payload["raw_id"]
        if raw_id not in last_change or key >= last_change[raw_id][0]:
            last_change[raw_id] = (key, rec.payload["new"])

    for rec in kb.iter_class("RawFinding"):
        if to_timestamp(rec.payload["first_seen"]) > as_of:
            continue
        snap.n_raw_cum += 1
        entry = last_change.get(rec.belief_id)
        snap.status_counts[entry[1] if entry else rec.payload["status"]] += 1

    for rec in kb.iter_class("AggregatedFinding"):
        first_seen = to_timestamp(rec.payload["first_seen"])
        if first_seen > as_of:
            continue
        snap.n_agg_cum += 1
        if window_start < first_seen <= as_of:
            snap.n_new_7d += 1
        severity = rec.payload.get("severity")
        if severity is None:
            raise KnowledgeError(f"aggregate {rec.belief_id} has no severity assessment")
        snap.severity_counts[severity["band"]] += 1

    for rec in kb.iter_class("UserInput"):
        at = to_timestamp(rec.payload["at"])
        if window_start < at <= as_of:
            snap.n_user_inputs_7d += 1

    return snap


def snapshot_series(kb: KnowledgeBase, project_id: str, start, end, step_days: int = 7) -> list[WeeklySnapshot]:
    start, end = to_timestamp(start), to_timestamp(end)
    out = []
    t = start
    while t <= end:
        out.append(compute_snapshot(kb, project_id, t))
        t += timedelta(days=step_days)
    return out


def check_monotonic(snapshots: list[WeeklySnapshot]) -> None:
    """Cumulative fields can only increase over time."""
    for prev, cur in zip(snapshots, snapshots[1:]):
        for f in ("n_reports_cum", "n_raw_cum", "n_agg_cum"):
            if getattr(cur, f) < getattr(prev, f):
                raise KnowledgeError(
                    f"{f} decreased between {prev.as_of} and {cur.as_of}"
                )
