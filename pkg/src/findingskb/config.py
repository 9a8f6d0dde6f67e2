"""Service configuration.

JSON file, all sections optional:

  {
    "storage": {"path": "./data"},
    "server": {"port": 8000},
    "tokens": {"ci": ["ci-token"], "users": {"dev-token": "developer"}},
    "dedup": {"similarity_threshold": 0.75, "lsi_rank": 100, "rebuild_every": 50},
    "enrichment": {"rules_path": "enrichment-rules.json"}
  }

User tokens map onto one of the roles: developer, manager, security.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .enrich import EnrichmentRule, load_rules
from .pipeline import PipelineConfig

ROLES = ("developer", "manager", "security")


@dataclass
class AppConfig:
    storage_path: str = ":memory:"
    port: int = 8000
    ci_tokens: list[str] = field(default_factory=lambda: ["ci-token"])
    user_tokens: dict[str, str] = field(default_factory=lambda: {"user-token": "developer"})
    similarity_threshold: float = 0.75
    lsi_rank: int = 100
    rebuild_every: int = 50
    enrichment_rules: list[EnrichmentRule] = field(default_factory=list)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            similarity_threshold=self.similarity_threshold,
            lsi_rank=self.lsi_rank,
            rebuild_every=self.rebuild_every,
            enrichment_rules=list(self.enrichment_rules),
        )


def load_config(path: str | Path | None) -> AppConfig:
    cfg = AppConfig()
    if path is None:
        return cfg
    doc = json.loads(Path(path).read_text())
    storage = doc.get("storage", {})
    cfg.storage_path = storage.get("path", cfg.storage_path)
    cfg.port = doc.get("server", {}).get("port", cfg.port)
    tokens = doc.get("tokens", {})
    cfg.ci_tokens = list(tokens.get("ci", cfg.ci_tokens))
    cfg.user_tokens = dict(tokens.get("users", cfg.user_tokens))
    for role in cfg.user_tokens.values():
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r} (known: {', '.join(ROLES)})")
    dedup = doc.get("dedup", {})
    cfg.similarity_threshold = dedup.get("similarity_threshold", cfg.similarity_threshold)
    cfg.lsi_rank = dedup.get("lsi_rank", cfg.lsi_rank)
    cfg.rebuild_every = dedup.get("rebuild_every", cfg.rebuild_every)
    rules_path = doc.get("enrichment", {}).get("rules_path")
    if rules_path:
        cfg.enrichment_rules = load_rules(Path(rules_path).read_text())
    return cfg
