"""Status state machine and history tracking for raw findings.

Every finding location carries its own status. Statuses persist either
permanently or until the finding stays absent from fresh reports of the
streams (tool + scan scope) that reported it:

  Open               absent from 1 report        -> Disappeared
  InWork, OnHold     absent from 2 consecutive   -> Disappeared
  Solved             absent from 1 report        -> Disappeared
  Solved, Disappeared  present again             -> Open
  FalsePositive, Invalid, Accepted               permanent

Disappeared is system-only; it can never arrive through a user channel.
"""

from __future__ import annotations

from .model import StatusValue, ValidationError

SYSTEM_ACTOR = "system"

PERMANENT_STATUSES = frozenset(
    {StatusValue.FALSE_POSITIVE, StatusValue.INVALID, StatusValue.ACCEPTED}
)

#: Consecutive absent reports (per stream) after which a status becomes Disappeared.
ABSENCE_THRESHOLDS = {
    StatusValue.OPEN: 1,
    StatusValue.IN_WORK: 2,
    StatusValue.ON_HOLD: 2,
    StatusValue.SOLVED: 1,
}

#: Statuses that reopen when the finding shows up in a new report.
REOPEN_ON_PRESENCE = frozenset({StatusValue.DISAPPEARED, StatusValue.SOLVED})


def stream_key(tool_name: str, scan_scope: str) -> str:
    return f"{tool_name}|{scan_scope}"


def validate_user_status(status: str) -> StatusValue:
    """Check a status value arriving from a user channel."""
    try:
        value = StatusValue(status)
    except ValueError:
        raise ValidationError(f"unknown status: {status!r}")
    if value is StatusValue.DISAPPEARED:
        raise ValidationError("Disappeared cannot be assigned by users")
    return value


def record_occurrence(finding: dict, report_id: str, received_at: str, stream: str) -> None:
    """Update history fields for a finding present in a report.

    first_seen is set at creation only; here only last_seen, the
    occurrence list and the per-stream absence counter move.
    """
    if report_id in finding["report_ids"]:
        return
    finding["report_ids"].append(report_id)
    finding["occurrence_count"] = len(finding["report_ids"])
    finding["last_seen"] = received_at
    finding.setdefault("streams", {})[stream] = 0


def presence_transition(finding: dict) -> str | None:
    """New status (if any) for a finding present in a fresh report."""
    status = StatusValue(finding["status"])
    if status in REOPEN_ON_PRESENCE:
        return StatusValue.OPEN.value
    return None


def absence_transition(finding: dict, stream: str) -> str | None:
    """Process one absence event for a finding on a reporting stream.

    Increments the stream's consecutive-absence counter and returns
    "Disappeared" once every stream that ever reported the finding has
    been absent often enough for the current status.
    """
    status = StatusValue(finding["status"])
    streams = finding.setdefault("streams", {})
    if stream not in streams:
        return None
    if status in PERMANENT_STATUSES or status is StatusValue.DISAPPEARED:
        return None
    streams[stream] = streams.get(stream, 0) + 1
    threshold = ABSENCE_THRESHOLDS[status]
    if all(count >= threshold for count in streams.values()):
        return StatusValue.DISAPPEARED.value
    return None


def reset_absence_counters(finding: dict) -> None:
    for stream in finding.get("streams", {}):
        finding["streams"][stream] = 0
