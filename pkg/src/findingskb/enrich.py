"""Rule-based enrichment of aggregated findings.

Enrichment rules follow an if-then structure: a condition over finding
fields and a list of notes to append when it matches. Rules are
project-local configuration; the only rule shipped by default explains,
per tool category, how the reporting tool identified the finding.

Rule file format (JSON):
  {"rules": [{"name", "if": {"field", "op", "value"}, "add": [{"title", "text"}]}]}
with op one of equals | contains | matches.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .model import ToolCategory, ToolDescriptor

logger = logging.getLogger(__name__)

OPERATORS = ("equals", "contains", "matches")

TOOL_EXPLANATIONS = {
    ToolCategory.DEPENDENCY_SCAN: (
        "The tool <Tool> identified this finding, by querying each of your "
        "dependencies in public vulnerability databases. If a vulnerability "
        "is found for a component, it creates a finding."
    ),
    ToolCategory.SECRET_SCAN: (
        "The tool <Tool> identified this finding, by scanning the repository "
        "content for patterns that look like credentials, keys or other "
        "secrets. Each match becomes a finding."
    ),
    ToolCategory.STATIC_ANALYSIS: (
        "The tool <Tool> identified this finding, by statically analyzing "
        "the source code for patterns known to cause security problems, "
        "without executing the program."
    ),
    ToolCategory.DYNAMIC_TEST: (
        "The tool <Tool> identified this finding, by exercising the running "
        "application with test inputs and observing its behavior."
    ),
    ToolCategory.OTHER: "The tool <Tool> reported this finding.",
}


def default_tool_explanation(tool: ToolDescriptor) -> str:
    """Fixed per-category explanation with <Tool> substituted."""
    template = TOOL_EXPLANATIONS.get(tool.category, TOOL_EXPLANATIONS[ToolCategory.OTHER])
    return template.replace("<Tool>", tool.name)


@dataclass(frozen=True)
class EnrichmentRule:
    rule_name: str
    condition_field: str
    condition_op: str
    condition_value: str
    additions: tuple[tuple[str, str], ...]  # (note_title, note_text)

    def matches(self, fields: dict) -> bool:
        value = fields.get(self.condition_field)
        if value is None:
            return False
        value = str(value)
        if self.condition_op == "equals":
            return value == self.condition_value
        if self.condition_op == "contains":
            return self.condition_value in value
        if self.condition_op == "matches":
            return re.search(self.condition_value, value) is not None
        return False


def load_rules(text: str) -> list[EnrichmentRule]:
    """Parse a rule file; malformed rules are skipped with a warning."""
    doc = json.loads(text)
    rules = []
    for i, raw in enumerate(doc.get("rules", [])):
        try:
            cond = raw["if"]
            op = cond["op"]
            if op not in OPERATORS:
                raise ValueError(f"unknown operator {op!r}")
            if op == "matches":
                re.compile(cond["value"])
            rules.append(
                EnrichmentRule(
                    rule_name=raw["name"],
                    condition_field=cond["field"],
                    condition_op=op,
                    condition_value=str(cond["value"]),
                    additions=tuple((a["title"], a["text"]) for a in raw["add"]),
                )
            )
        except (KeyError, TypeError, ValueError, re.error) as exc:
            logger.warning("skipping malformed enrichment rule #%d: %s", i, exc)
    return rules


def expand_placeholders(text: str, fields: dict) -> str:
    """Replace <Tool>-style placeholders with field values; total, unknown
    placeholders are left as-is."""
    def sub(match):
        key = match.group(1).lower()
        value = fields.get(key)
        return str(value) if value is not None else match.group(0)

    return re.sub(r"<([A-Za-z_]+)>", sub, text)


def apply_enrichment(notes: list[dict], fields: dict, rules: list[EnrichmentRule]) -> list[dict]:
    """Return the updated notes list for a finding.

    Every matching rule appends exactly one note per addition, in rule
    registration order; notes already present (same rule and title) are
    not duplicated, making re-runs idempotent. Only the notes list is
    produced; callers never hand over mutable finding fields.
    """
    existing = {(n["rule_name"], n["title"]) for n in notes}
    out = list(notes)
    for rule in rules:
        if not rule.matches(fields):
            continue
        for title, text in rule.additions:
            expanded_title = expand_placeholders(title, fields)
            if (rule.rule_name, expanded_title) in existing:
                continue
            out.append(
                {
                    "rule_name": rule.rule_name,
                    "title": expanded_title,
                    "text": expand_placeholders(text, fields),
                }
            )
            existing.add((rule.rule_name, expanded_title))
    return out


def builtin_tool_explanation_rule() -> EnrichmentRule:
    """The default rule: every finding gets its tool's explanation."""
    return EnrichmentRule(
        rule_name="tool-explanation",
        condition_field="tool",
        condition_op="matches",
        condition_value=".",
        additions=(("How was this identified?", "<Explanation>"),),
    )
