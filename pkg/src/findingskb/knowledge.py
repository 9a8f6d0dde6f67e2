"""Stratified forward-chaining knowledge base.

Beliefs are documents; rules derive new beliefs from existing ones and
run to a fixpoint whenever external data changes. Rules are grouped into
strata executed in ascending order, which makes derivation deterministic
and guarantees termination. Queries are read-only computed views.

Consistency under change is handled by re-derivation: revising or
retracting an external belief wipes all derived beliefs and replays the
external batches in their original order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .store import BeliefRecord, DocumentStore


class KnowledgeError(ValueError):
    pass


@dataclass(frozen=True)
class RuleDef:
    rule_name: str
    trigger_classes: frozenset
    stratum: int
    body: Callable  # (kb, new_beliefs: list[BeliefRecord]) -> list[BeliefRecord]


@dataclass(frozen=True)
class QueryDef:
    query_name: str
    evaluator: Callable  # (kb, params: dict) -> result document


@dataclass
class Firing:
    rule: str
    inputs: list[str]
    outputs: list[str]


@dataclass
class DerivationTrace:
    firings: list[Firing] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def firing_count(self) -> int:
        return len(self.firings)

    def rules_fired(self) -> list[str]:
        return [f.rule for f in self.firings]


@dataclass
class ChangeSet:
    added: list[str] = field(default_factory=list)
    changed: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (self.added or self.changed or self.removed)


class KnowledgeBase:
    """Single-writer knowledge base over a document store.

    All mutation goes through assert_beliefs / revise followed by
    run_to_fixpoint; rule bodies and query evaluators only ever receive
    read access.
    """

    # Safety net against non-terminating rule sets; the stratified
    # pipeline stays far below this.
    MAX_FIRINGS_PER_BATCH = 10_000

    def __init__(
        self,
        store: DocumentStore,
        external_classes: tuple[str, ...] = ("SecurityReport", "UserInput"),
        reset_context: Optional[Callable[[], None]] = None,
    ):
        self.store = store
        self.external_classes = set(external_classes)
        self.reset_context = reset_context
        self.rules: list[RuleDef] = []
        self.queries: dict[str, QueryDef] = {}
        self._pending: list[list[str]] = []  # batches of belief keys awaiting fixpoint

    # -- registration --------------------------------------------------

    def register_rule(self, rule_name: str, trigger_classes, stratum: int, body: Callable) -> None:
        if stratum < 1:
            raise KnowledgeError("derivation rules must live in stratum >= 1")
        self.rules.append(RuleDef(rule_name, frozenset(trigger_classes), stratum, body))

    def register_query(self, query_name: str, evaluator: Callable) -> None:
        self.queries[query_name] = QueryDef(query_name, evaluator)

    # -- read access ---------------------------------------------------

    def get(self, cls: str, belief_id: str) -> Optional[BeliefRecord]:
        return self.store.get(cls, belief_id)

    def iter_class(self, cls: str):
        return self.store.iter_class(cls)

    def count(self, cls: str) -> int:
        return self.store.count(cls)

    # -- mutation ------------------------------------------------------

    def assert_beliefs(self, batch: list[BeliefRecord]) -> ChangeSet:
        """Persist a batch of external beliefs and queue it for derivation."""
        if not batch:
            raise KnowledgeError("empty belief batch")
        seen = set()
        for rec in batch:
            if rec.cls not in self.external_classes:
                raise KnowledgeError(f"unknown external class: {rec.cls}")
            if rec.key() in seen or self.store.get(rec.cls, rec.belief_id) is not None:
                raise KnowledgeError(f"duplicate belief id: {rec.belief_id}")
            seen.add(rec.key())
        self.store.begin()
        try:
            for rec in batch:
                rec.origin = "external"
                self.store.put(rec)
            keys = [rec.key() for rec in batch]
            self.store.record_batch(keys)
            self.store.commit()
        except Exception:
            self.store.rollback()
            raise
        self._pending.append(keys)
        return ChangeSet(added=keys)

    def run_to_fixpoint(self) -> DerivationTrace:
        """Process all pending batches through the rule strata.

        Within each stratum, rules fire on new or changed beliefs until
        nothing new can be derived; strata run in ascending order. A rule
        failure rolls the batch back and quarantines its reports.
        """
        trace = DerivationTrace()
        while self._pending:
            keys = self._pending.pop(0)
            batch = [self._resolve_key(k) for k in keys]
            batch = [b for b in batch if b is not None]
            self.store.begin()
            try:
                self._derive_batch(batch, trace)
                self.store.commit()
            except Exception as exc:
                self.store.rollback()
                self._quarantine(batch, str(exc))
                trace.errors.append(f"batch rolled back: {exc}")
        return trace

    def _derive_batch(self, batch: list[BeliefRecord], trace: DerivationTrace) -> None:
        # pending[rule_name] holds beliefs the rule has not consumed yet
        pending: dict[str, list[BeliefRecord]] = {r.rule_name: [] for r in self.rules}
        firings_in_batch = 0

        def feed(beliefs, min_stratum):
            for rule in self.rules:
                if rule.stratum < min_stratum:
                    continue
                matches = [b for b in beliefs if b.cls in rule.trigger_classes]
                pending[rule.rule_name].extend(matches)

        feed(batch, 1)
        for stratum in sorted({r.stratum for r in self.rules}):
            progressed = True
            while progressed:
                progressed = False
                for rule in self.rules:
                    if rule.stratum != stratum or not pending[rule.rule_name]:
                        continue
                    inputs = pending[rule.rule_name]
                    pending[rule.rule_name] = []
                    outputs = rule.body(self, inputs) or []
                    firings_in_batch += 1
                    if firings_in_batch > self.MAX_FIRINGS_PER_BATCH:
                        raise KnowledgeError("fixpoint firing bound exceeded")
                    written = []
                    for out in outputs:
                        out.origin = "derived"
                        existing = self.store.get(out.cls, out.belief_id)
                        if existing is not None:
                            out.derived_from = sorted(set(existing.derived_from) | set(out.derived_from))
                            if (
                                existing.payload == out.payload
                                and sorted(existing.derived_from) == out.derived_from
                            ):
                                continue  # nothing new derived
                        self.store.put(out, log_op="derive")
                        written.append(out)
                    trace.firings.append(
                        Firing(rule.rule_name, [b.key() for b in inputs], [b.key() for b in written])
                    )
                    if written:
                        # outputs feed later strata; same-stratum rules may
                        # also react, driving the within-stratum loop
                        feed(written, stratum)
                        progressed = True

    def _quarantine(self, batch: list[BeliefRecord], error: str) -> None:
        self.store.begin()
        for rec in batch:
            if rec.cls == "SecurityReport":
                rec.payload = dict(rec.payload, quarantined=True, quarantine_error=error)
                self.store.put(rec, log_op="quarantine")
        self.store.commit()

    def revise(self, belief_id: str, payload: Optional[dict]) -> ChangeSet:
        """Replace (or retract, with payload=None) an external belief.

        Everything transitively derived from it is invalidated and
        re-derived by replaying the external batches in original order.
        """
        rec = self.store.find_by_id(belief_id)
        if rec is None:
            raise KnowledgeError(f"no such belief: {belief_id}")
        if rec.origin != "external":
            raise KnowledgeError("derived beliefs are recomputed, not edited")
        if payload is not None and json.dumps(payload, sort_keys=True) == json.dumps(rec.payload, sort_keys=True):
            return ChangeSet()

        batches = list(self.store.iter_batches())
        self.store.begin()
        try:
            if payload is None:
                self.store.delete(rec.cls, rec.belief_id)
                new_batches = []
                for _, keys in batches:
                    kept = [k for k in keys if k != rec.key()]
                    if kept:
                        new_batches.append(kept)
                self.store.rewrite_batches(new_batches)
                change = ChangeSet(removed=[rec.key()])
            else:
                rec.payload = payload
                self.store.put(rec, log_op="revise")
                change = ChangeSet(changed=[rec.key()])
            self.store.commit()
        except Exception:
            self.store.rollback()
            raise
        self.replay()
        return change

    def replay(self) -> DerivationTrace:
        """Rebuild all derived state from the external belief log."""
        self.store.begin()
        for cls in self.store.classes():
            if cls not in self.external_classes:
                self.store.clear_class(cls)
        self.store.commit()
        if self.reset_context is not None:
            self.reset_context()
        self._pending = [keys for _, keys in self.store.iter_batches()]
        return self.run_to_fixpoint()

    # -- queries -------------------------------------------------------

    def evaluate_query(self, query_name: str, params: Optional[dict] = None):
        if query_name not in self.queries:
            raise KnowledgeError(f"unknown query: {query_name}")
        return self.queries[query_name].evaluator(self, params or {})

    # -- integrity helpers ---------------------------------------------

    def canonical_state(self, ignore_classes: tuple[str, ...] = ()) -> dict:
        """Store contents in a canonical, comparable form."""
        state = {}
        for cls in self.store.classes():
            if cls in ignore_classes:
                continue
            docs = []
            for rec in self.store.iter_class(cls):
                docs.append(
                    {
                        "belief_id": rec.belief_id,
                        "payload": rec.payload,
                        "derived_from": sorted(rec.derived_from),
                        "origin": rec.origin,
                    }
                )
            state[cls] = sorted(docs, key=lambda d: d["belief_id"])
        return state

    def check_provenance_dag(self) -> None:
        """Every derived belief's derived_from chain must end at external beliefs."""
        records = {}
        for cls in self.store.classes():
            for rec in self.store.iter_class(cls):
                records[rec.key()] = rec
        for key, rec in records.items():
            if rec.origin == "external":
                if rec.derived_from:
                    raise KnowledgeError(f"external belief {key} has provenance")
                continue
            if not rec.derived_from:
                raise KnowledgeError(f"derived belief {key} lacks provenance")
            seen = set()
            frontier = list(rec.derived_from)
            while frontier:
                parent_key = frontier.pop()
                if parent_key in seen:
                    continue
                seen.add(parent_key)
                if parent_key == key:
                    raise KnowledgeError(f"provenance cycle at {key}")
                parent = records.get(parent_key)
                if parent is None:
                    raise KnowledgeError(f"dangling provenance {parent_key} from {key}")
                frontier.extend(parent.derived_from)

    def _resolve_key(self, key: str) -> Optional[BeliefRecord]:
        cls, _, belief_id = key.partition(":")
        return self.store.get(cls, belief_id)
