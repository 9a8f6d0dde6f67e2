"""Severity and priority scoring for aggregated findings.

Severity: numeric score = max over the members' normalized scores plus a
per-category activity adjustment, capped at 10. The band follows from
the numeric score; ordering in queries always uses the numeric score,
never band labels.

Activity adjustments (model "flama-approx-1"):
  secret-scan       +2.0   (a matched secret is live credential exposure)
  dependency-scan   +0.0 with a known fix version, else +0.5
  static-analysis   +0.0
  dynamic-test      +0.0
  other             +0.0

Priority: the suggested priority equals the severity score and is used
for ordering only until a user assignment exists; a user assignment
always takes precedence.
"""

from __future__ import annotations

from .model import SeverityLevel, ToolCategory, ValidationError

MODEL_VERSION = "flama-approx-1"

SECRET_SCAN_ADJUSTMENT = 2.0
DEP_SCAN_NO_FIX_ADJUSTMENT = 0.5


def member_adjustment(category: ToolCategory, has_fix_version: bool) -> float:
    if category is ToolCategory.SECRET_SCAN:
        return SECRET_SCAN_ADJUSTMENT
    if category is ToolCategory.DEPENDENCY_SCAN and not has_fix_version:
        return DEP_SCAN_NO_FIX_ADJUSTMENT
    return 0.0


def compute_severity(members: list[dict]) -> dict:
    """Severity assessment for an aggregate from its member findings.

    Each member dict needs: score (normalized 0-10), category, and
    optionally fix_version. Returns the assessment payload.
    """
    if not members:
        raise ValidationError("cannot score an empty aggregate")
    inputs = []
    for m in members:
        adjusted = min(10.0, m["score"] + member_adjustment(
            ToolCategory(m["category"]), bool(m.get("fix_version"))
        ))
        inputs.append(round(adjusted, 2))
    score = max(inputs)
    level = SeverityLevel.from_score(score)
    return {
        "band": level.band.value,
        "score": level.score,
        "inputs": inputs,
        "model_version": MODEL_VERSION,
    }


def suggest_priority(severity_score: float) -> float:
    """Pre-refinement priority: identical to the severity score."""
    return severity_score


def effective_priority(aggregate: dict) -> float:
    """User assignment if present, else the suggestion."""
    if aggregate.get("priority") is not None:
        return float(aggregate["priority"])
    return float(aggregate.get("suggested_priority") or 0.0)


def validate_priority(value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 10.0:
        raise ValidationError(f"priority {value} outside [0, 10]")
    return value
