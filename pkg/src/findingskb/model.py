"""Unified data model for security findings.

Every other module builds on the types defined here: tool metadata,
immutable report envelopes, raw findings (one weakness at one location),
aggregated findings (clusters of semantically equivalent raw findings),
the eight-value status scale and the five-band severity scale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional


class ValidationError(ValueError):
    """Raised when input data violates a model contract."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ToolCategory(str, Enum):
    SECRET_SCAN = "secret-scan"
    STATIC_ANALYSIS = "static-analysis"
    DEPENDENCY_SCAN = "dependency-scan"
    DYNAMIC_TEST = "dynamic-test"
    OTHER = "other"


class FormatTag(str, Enum):
    NATIVE = "native"
    SARIF = "sarif"
    DEP_SCAN = "dep-scan"
    SECRET_SCAN = "secret-scan"


class StatusValue(str, Enum):
    OPEN = "Open"
    IN_WORK = "InWork"
    FALSE_POSITIVE = "FalsePositive"
    INVALID = "Invalid"
    ACCEPTED = "Accepted"
    SOLVED = "Solved"
    ON_HOLD = "OnHold"
    DISAPPEARED = "Disappeared"


#: Statuses a user channel may assign. Disappeared is system-only.
USER_ASSIGNABLE_STATUSES = tuple(s for s in StatusValue if s is not StatusValue.DISAPPEARED)


class SeverityBand(str, Enum):
    INFO = "Info"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    CRITICAL = "Critical"


# Numeric score for each text label a tool may report.
LABEL_SCORES = {
    "critical": 9.5,
    "blocker": 9.5,
    "high": 7.5,
    "error": 7.5,
    "medium": 5.0,
    "warning": 5.0,
    "moderate": 5.0,
    "low": 2.0,
    "minor": 2.0,
    "info": 0.0,
    "note": 0.0,
}


def band_for_score(score: float) -> SeverityBand:
    """CVSS v3.1 qualitative band for a numeric score in [0, 10]."""
    if score >= 9.0:
        return SeverityBand.CRITICAL
    if score >= 7.0:
        return SeverityBand.HIGH
    if score >= 4.0:
        return SeverityBand.MEDIUM
    if score > 0.0:
        return SeverityBand.LOW
    return SeverityBand.INFO


@dataclass(frozen=True)
class SeverityLevel:
    band: SeverityBand
    score: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"band": self.band.value, "score": self.score, "flags": list(self.flags)}

    @classmethod
    def from_dict(cls, d: dict) -> "SeverityLevel":
        return cls(SeverityBand(d["band"]), float(d["score"]), tuple(d.get("flags", ())))

    @classmethod
    def from_score(cls, score: float, flags: tuple[str, ...] = ()) -> "SeverityLevel":
        score = round(float(score), 2)  # band derived after rounding, keeps band/score consistent
        return cls(band_for_score(score), score, flags)


def normalize_severity(severity_raw: Optional[str], cvss: Optional[float]) -> SeverityLevel:
    """Map tool-reported severity data onto the common scale.

    A CVSS score takes precedence over a text label. With neither input
    the finding lands in Medium, flagged "unscored" so the fallback is
    visible downstream.
    """
    if cvss is not None:
        cvss = float(cvss)
        if not 0.0 <= cvss <= 10.0:
            raise ValidationError(f"cvss {cvss} outside [0, 10]")
        return SeverityLevel.from_score(cvss)
    if severity_raw is not None and severity_raw.strip():
        label = severity_raw.strip().lower()
        if label in LABEL_SCORES:
            return SeverityLevel.from_score(LABEL_SCORES[label])
        return SeverityLevel.from_score(5.0, flags=("unknown-label",))
    return SeverityLevel.from_score(5.0, flags=("unscored",))


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    version: str = ""
    category: ToolCategory = ToolCategory.OTHER

    def __post_init__(self):
        if not self.name:
            raise ValidationError("tool name must be non-empty")

    def to_dict(self) -> dict:
        return {"name": self.name, "version": self.version, "category": self.category.value}

    @classmethod
    def from_dict(cls, d: dict) -> "ToolDescriptor":
        return cls(d["name"], d.get("version", ""), ToolCategory(d.get("category", "other")))


@dataclass(frozen=True)
class Location:
    path: str
    line: Optional[int] = None
    component: Optional[str] = None
    component_version: Optional[str] = None

    def __post_init__(self):
        if not self.path:
            raise ValidationError("location path must be non-empty")
        if self.line is not None and self.line < 1:
            raise ValidationError(f"location line must be >= 1, got {self.line}")

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "line": self.line,
            "component": self.component,
            "component_version": self.component_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Location":
        return cls(d["path"], d.get("line"), d.get("component"), d.get("component_version"))


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def to_timestamp(value) -> datetime:
    """Parse an ISO-8601 string or pass a datetime through, always UTC."""
    if isinstance(value, datetime):
        dt = value
    else:
        dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class SecurityReport:
    """One raw tool output document as received. Immutable evidence."""

    report_id: str
    project_id: str
    tool: ToolDescriptor
    scan_scope: str
    received_at: datetime
    raw_document: bytes
    format_tag: FormatTag
    commit_ref: Optional[str] = None

    def to_meta_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "project_id": self.project_id,
            "tool": self.tool.to_dict(),
            "scan_scope": self.scan_scope,
            "commit_ref": self.commit_ref,
            "received_at": self.received_at.isoformat(),
            "format_tag": self.format_tag.value,
        }


@dataclass
class FindingDraft:
    """A parsed raw-finding candidate, before identity and grouping."""

    rule_id: str
    title: str
    description: str
    location: Location
    severity: SeverityLevel
    severity_raw: Optional[str] = None
    cvss: Optional[float] = None
    cwe_ids: list[str] = field(default_factory=list)
    cve_ids: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class RawFinding:
    """One tool-reported weakness at one location; the unit that carries status."""

    raw_id: str
    project_id: str
    tool: ToolDescriptor
    rule_id: str
    title: str
    description: str
    location: Location
    status: StatusValue
    status_set_by: str  # "system" | "user"
    first_seen: datetime
    last_seen: datetime
    severity_raw: Optional[str] = None
    cvss: Optional[float] = None
    cwe_ids: list[str] = field(default_factory=list)
    cve_ids: list[str] = field(default_factory=list)
    occurrence_count: int = 0
    report_ids: list[str] = field(default_factory=list)

    def check(self):
        if self.first_seen > self.last_seen:
            raise ValidationError("first_seen must be <= last_seen")
        if self.occurrence_count != len(self.report_ids):
            raise ValidationError("occurrence_count must equal len(report_ids)")
        if self.status is StatusValue.DISAPPEARED and self.status_set_by != "system":
            raise ValidationError("Disappeared can only be set by the system")


@dataclass
class AggregatedFinding:
    """Cluster of semantically equivalent raw findings; carries severity and priority."""

    agg_id: str
    project_id: str
    member_raw_ids: list[str]
    canonical_title: str
    canonical_description: str
    tool_category: ToolCategory
    first_seen: datetime
    enrichment_notes: list[dict] = field(default_factory=list)
    severity: Optional[SeverityLevel] = None
    priority: Optional[float] = None
    priority_set_by: Optional[str] = None


_FINGERPRINT_FIELDS = ("tool name", "rule_id", "location path")


def canonical_fingerprint(
    project_id: str,
    tool_name: str,
    rule_id: str,
    location: Location,
    cve_ids: Optional[list[str]] = None,
) -> str:
    """Stable identity hash for a raw finding.

    Line numbers are deliberately excluded so the identity survives code
    movement; the current line stays on the finding as mutable metadata.
    """
    missing = []
    if not tool_name:
        missing.append("tool name")
    if not rule_id:
        missing.append("rule_id")
    if location is None or not location.path:
        missing.append("location path")
    if missing:
        raise ValidationError([f"missing mandatory field: {f}" for f in missing])
    key = [
        project_id,
        tool_name,
        rule_id,
        location.path,
        location.component or "",
        location.component_version or "",
        sorted(cve_ids or []),
    ]
    # json framing keeps the key unambiguous for arbitrary field contents
    digest = hashlib.sha256(json.dumps(key, ensure_ascii=True).encode("utf-8")).hexdigest()
    return digest[:24]


def compute_report_id(project_id: str, tool_name: str, scan_scope: str, document: bytes) -> str:
    """Content-derived report id; re-sending identical bytes maps to the same id."""
    h = hashlib.sha256()
    for part in (project_id, tool_name, scan_scope):
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    h.update(document)
    return h.hexdigest()[:24]


def validate_report(
    document: bytes,
    format_tag: str,
    project_id: str,
    tool: Optional[ToolDescriptor] = None,
    scan_scope: str = "main",
    commit_ref: Optional[str] = None,
    received_at: Optional[datetime] = None,
) -> SecurityReport:
    """Schema-check a report document and wrap it in an immutable envelope.

    Raises ValidationError with one entry per problem; nothing is stored
    for invalid documents.
    """
    errors = []
    if not document:
        raise ValidationError("empty document")
    try:
        tag = FormatTag(format_tag)
    except ValueError:
        raise ValidationError(f"unknown format_tag: {format_tag!r}")

    try:
        doc = json.loads(document)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"malformed document: {exc}")

    if tag is FormatTag.NATIVE:
        if not isinstance(doc, dict):
            raise ValidationError("native document: top level must be an object")
        if doc.get("schema_version") != "1":
            errors.append("native document: schema_version must be \"1\"")
        tool_doc = doc.get("tool")
        if not isinstance(tool_doc, dict) or not tool_doc.get("name"):
            errors.append("native document: tool.name is mandatory")
        else:
            tool = ToolDescriptor.from_dict(tool_doc)
        scan = doc.get("scan", {})
        if isinstance(scan, dict):
            scan_scope = scan.get("scope") or scan_scope
            commit_ref = scan.get("commit") or commit_ref
        if not isinstance(doc.get("findings", []), list):
            errors.append("native document: findings must be a list")
    elif tag is FormatTag.SARIF:
        if not isinstance(doc, dict) or "runs" not in doc:
            errors.append("sarif document: missing runs[]")
        elif tool is None:
            runs = doc.get("runs") or []
            try:
                name = runs[0]["tool"]["driver"]["name"]
                tool = ToolDescriptor(name=name, category=ToolCategory.STATIC_ANALYSIS)
            except (KeyError, IndexError, TypeError):
                errors.append("sarif document: runs[0].tool.driver.name is mandatory")
    else:
        if tool is None:
            tool_doc = doc.get("tool") if isinstance(doc, dict) else None
            if not isinstance(tool_doc, dict) or not tool_doc.get("name"):
                errors.append(f"{tag.value} document: tool.name is mandatory")
            else:
                tool = ToolDescriptor.from_dict(tool_doc)

    if tool is None and not errors:
        errors.append("tool descriptor missing")
    if errors:
        raise ValidationError(errors)

    return SecurityReport(
        report_id=compute_report_id(project_id, tool.name, scan_scope, document),
        project_id=project_id,
        tool=tool,
        scan_scope=scan_scope,
        received_at=to_timestamp(received_at) if received_at else utc_now(),
        raw_document=document,
        format_tag=tag,
        commit_ref=commit_ref,
    )
