"""Format adapters turning tool reports into normalized finding drafts.

Each adapter maps one report format onto the common data model. Adapters
are pure functions registered under a unique format tag; parsing the same
bytes twice yields identical drafts.

Bundled adapters:
  native       the service's own JSON report schema
  sarif        SARIF 2.1.0 static-analysis results
  dep-scan     dependency-audit JSON (component, version, CVE list, cvss)
  secret-scan  secret scanner JSON (path, line, rule, secret hash)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .model import (
    FindingDraft,
    FormatTag,
    Location,
    SecurityReport,
    ToolCategory,
    ToolDescriptor,
    ValidationError,
    normalize_severity,
    validate_report,
)


@dataclass
class ParseResult:
    report: SecurityReport
    drafts: list[FindingDraft]
    warnings: list[str] = field(default_factory=list)


def detect_format(document: bytes, declared: str | None = None) -> FormatTag:
    """Identify a report format from document markers.

    The native schema_version marker and the SARIF $schema/version pair
    are recognized; anything else falls back to the declared tag rather
    than guessing.
    """
    try:
        doc = json.loads(document) if document else None
    except (UnicodeDecodeError, json.JSONDecodeError):
        doc = None
    if isinstance(doc, dict):
        if doc.get("schema_version") == "1" and "tool" in doc:
            return FormatTag.NATIVE
        if "runs" in doc and ("$schema" in doc or "version" in doc):
            return FormatTag.SARIF
    if declared:
        try:
            return FormatTag(declared)
        except ValueError:
            raise ValidationError(
                f"unknown format_tag: {declared!r} (known: {', '.join(t.value for t in FormatTag)})"
            )
    raise ValidationError("format undetectable: no recognizable markers and no declared tag")


def _draft_from_entry(entry: dict, default_severity_label: str | None = None) -> FindingDraft:
    if not entry.get("rule_id"):
        raise ValidationError("entry missing rule_id")
    loc = entry.get("location") or {}
    if not loc.get("path"):
        raise ValidationError("entry missing location.path")
    severity_raw = entry.get("severity_raw", default_severity_label)
    cvss = entry.get("cvss")
    return FindingDraft(
        rule_id=entry["rule_id"],
        title=entry.get("title", entry["rule_id"]),
        description=entry.get("description", ""),
        location=Location.from_dict(loc),
        severity=normalize_severity(severity_raw, cvss),
        severity_raw=severity_raw,
        cvss=cvss,
        cwe_ids=list(entry.get("cwe_ids", [])),
        cve_ids=list(entry.get("cve_ids", [])),
        extra=dict(entry.get("extra", {})),
    )


def parse_native(document: bytes, project_id: str, **kwargs) -> ParseResult:
    """Parse the native report format (see README for the schema)."""
    report = validate_report(document, "native", project_id, **kwargs)
    doc = json.loads(document)
    drafts, warnings = [], []
    for i, entry in enumerate(doc.get("findings", [])):
        try:
            drafts.append(_draft_from_entry(entry))
        except ValidationError as exc:
            warnings.append(f"findings[{i}] rejected: {exc}")
    return ParseResult(report, drafts, warnings)


def parse_sarif(document: bytes, project_id: str, **kwargs) -> ParseResult:
    """Parse a SARIF 2.1.0 document; one draft per result, tool taken per run."""
    report = validate_report(document, "sarif", project_id, **kwargs)
    doc = json.loads(document)
    version = doc.get("version")
    if version != "2.1.0":
        raise ValidationError(f"unsupported SARIF version: {version!r} (expected 2.1.0)")
    drafts, warnings = [], []
    for ri, run in enumerate(doc.get("runs", [])):
        try:
            tool_name = run["tool"]["driver"]["name"]
        except (KeyError, TypeError):
            warnings.append(f"runs[{ri}] rejected: missing tool.driver.name")
            continue
        for i, result in enumerate(run.get("results", [])):
            rule_id = result.get("ruleId")
            if not rule_id:
                warnings.append(f"runs[{ri}].results[{i}] rejected: missing ruleId")
                continue
            path, line = "<unknown>", None
            for loc in result.get("locations", []):
                phys = loc.get("physicalLocation") or {}
                art = phys.get("artifactLocation") or {}
                if art.get("uri"):
                    path = art["uri"]
                    line = (phys.get("region") or {}).get("startLine")
                    break
            message = (result.get("message") or {}).get("text", "")
            level = result.get("level", "warning")
            drafts.append(
                FindingDraft(
                    rule_id=rule_id,
                    title=message.splitlines()[0] if message else rule_id,
                    description=message,
                    location=Location(path=path, line=line),
                    severity=normalize_severity(level, None),
                    severity_raw=level,
                    extra={"sarif_run": ri, "tool_name": tool_name},
                )
            )
    return ParseResult(report, drafts, warnings)


def parse_dep_scan(document: bytes, project_id: str, **kwargs) -> ParseResult:
    """Parse dependency-audit JSON.

    The dependency coordinate lands in location.component so fingerprints
    stay stable across lockfile layouts; the path mirrors the coordinate.
    """
    report = validate_report(document, "dep-scan", project_id, **kwargs)
    doc = json.loads(document)
    drafts, warnings = [], []
    for ci, comp in enumerate(doc.get("components", [])):
        name = comp.get("component")
        version = comp.get("version", "")
        if not name:
            warnings.append(f"components[{ci}] rejected: missing component name")
            continue
        for vi, vuln in enumerate(comp.get("vulnerabilities", [])):
            vuln_id = vuln.get("id")
            if not vuln_id:
                warnings.append(f"components[{ci}].vulnerabilities[{vi}] rejected: missing id")
                continue
            cve_ids = [vuln_id] if vuln_id.upper().startswith("CVE-") else list(vuln.get("cve_ids", []))
            drafts.append(
                FindingDraft(
                    rule_id=vuln_id,
                    title=vuln.get("title", f"{vuln_id} in {name}"),
                    description=vuln.get("description", ""),
                    location=Location(
                        path=f"{name}@{version}" if version else name,
                        component=name,
                        component_version=version or None,
                    ),
                    severity=normalize_severity(vuln.get("severity"), vuln.get("cvss")),
                    severity_raw=vuln.get("severity"),
                    cvss=vuln.get("cvss"),
                    cwe_ids=list(vuln.get("cwe_ids", [])),
                    cve_ids=cve_ids,
                    extra={"fix_version": vuln.get("fix_version")},
                )
            )
    return ParseResult(report, drafts, warnings)


def parse_secret_scan(document: bytes, project_id: str, **kwargs) -> ParseResult:
    """Parse secret-scanner JSON.

    The secret digest is folded into the rule id so two different secrets
    matched by the same rule keep distinct, stable fingerprints.
    """
    report = validate_report(document, "secret-scan", project_id, **kwargs)
    doc = json.loads(document)
    drafts, warnings = [], []
    for i, entry in enumerate(doc.get("findings", [])):
        rule = entry.get("rule")
        path = entry.get("path")
        if not rule or not path:
            warnings.append(f"findings[{i}] rejected: rule and path are mandatory")
            continue
        digest = entry.get("secret_hash", "")
        drafts.append(
            FindingDraft(
                rule_id=f"{rule}:{digest}" if digest else rule,
                title=entry.get("title", f"Secret detected by rule {rule}"),
                description=entry.get("description", ""),
                location=Location(path=path, line=entry.get("line")),
                severity=normalize_severity(entry.get("severity", "high"), None),
                severity_raw=entry.get("severity", "high"),
            )
        )
    return ParseResult(report, drafts, warnings)


ADAPTERS = {
    FormatTag.NATIVE: parse_native,
    FormatTag.SARIF: parse_sarif,
    FormatTag.DEP_SCAN: parse_dep_scan,
    FormatTag.SECRET_SCAN: parse_secret_scan,
}


def parse_report(format_tag: str | FormatTag, document: bytes, project_id: str, **kwargs) -> ParseResult:
    """Dispatch to the adapter registered for format_tag."""
    try:
        tag = FormatTag(format_tag)
    except ValueError:
        tag = None
    if tag not in ADAPTERS:
        known = ", ".join(t.value for t in ADAPTERS)
        raise ValidationError(f"no adapter registered for {format_tag!r} (known: {known})")
    return ADAPTERS[tag](document, project_id, **kwargs)


def known_formats() -> list[str]:
    return [t.value for t in ADAPTERS]
