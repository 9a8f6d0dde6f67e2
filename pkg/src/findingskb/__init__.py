"""Knowledge-base service for managing security findings.

Ingests heterogeneous security-tool reports, normalizes and deduplicates
findings, tracks their lifecycle, scores severity and priority, and
serves the results to humans and machines.
"""

from .knowledge import ChangeSet, DerivationTrace, KnowledgeBase, KnowledgeError
from .model import (
    AggregatedFinding,
    FindingDraft,
    FormatTag,
    Location,
    RawFinding,
    SecurityReport,
    SeverityBand,
    SeverityLevel,
    StatusValue,
    ToolCategory,
    ToolDescriptor,
    ValidationError,
    canonical_fingerprint,
    normalize_severity,
    validate_report,
)
from .pipeline import PipelineConfig, ProjectPipeline
from .store import BeliefRecord, DocumentStore

__version__ = "0.1.0"

__all__ = [
    "AggregatedFinding",
    "BeliefRecord",
    "ChangeSet",
    "DerivationTrace",
    "DocumentStore",
    "FindingDraft",
    "FormatTag",
    "KnowledgeBase",
    "KnowledgeError",
    "Location",
    "PipelineConfig",
    "ProjectPipeline",
    "RawFinding",
    "SecurityReport",
    "SeverityBand",
    "SeverityLevel",
    "StatusValue",
    "ToolCategory",
    "ToolDescriptor",
    "ValidationError",
    "canonical_fingerprint",
    "normalize_severity",
    "validate_report",
]
