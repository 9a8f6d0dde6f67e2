"""Grouping of raw findings into aggregated findings.

Two layers: exact grouping by the canonical fingerprint (identical
findings across reports collapse without any content comparison), then
semantic clustering of the remaining distinct findings via latent
semantic indexing over their text.

Text pipeline, in this order:
  1. text = title + description + rule_id, lowercased
  2. split on non-alphanumeric characters, drop stop words
  3. tf-idf with smoothed idf: idf(t) = ln((1 + n) / (1 + df(t))) + 1,
     document vectors l2-normalized, terms ordered lexicographically
  4. truncated SVD to rank k = min(configured rank, matrix rank); sign
     convention: first nonzero component of each right-singular vector
     is non-negative

A new finding joins the candidate cluster (same project, same tool
category) with the highest centroid cosine at or above the threshold,
ties going to the oldest cluster; otherwise it opens a new cluster.
Cluster membership is never changed retroactively by an index rebuild.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

STOP_WORDS = frozenset(
    """a an and are as at be by for from has have in is it its of on or that the
    this to was were will with not no your you each if then than via""".split()
)

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t and t not in STOP_WORDS]


def finding_text(title: str, description: str, rule_id: str) -> str:
    return f"{title} {description} {rule_id}"


def exact_group(drafts_with_ids: list[tuple[str, object]]) -> dict[str, list]:
    """Group (raw_id, draft) pairs by fingerprint; no content comparison."""
    groups: dict[str, list] = {}
    for raw_id, draft in drafts_with_ids:
        groups.setdefault(raw_id, []).append(draft)
    return groups


@dataclass
class SemanticIndex:
    """TF-IDF vocabulary, idf weights and the rank-k projection basis."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    basis: np.ndarray  # (n_terms, k) right-singular vectors
    rank: int

    @classmethod
    def empty(cls) -> "SemanticIndex":
        return cls({}, np.zeros(0), np.zeros((0, 0)), 0)

    @classmethod
    def build(cls, texts: list[str], max_rank: int) -> "SemanticIndex":
        if not texts:
            return cls.empty()
        token_lists = [tokenize(t) for t in texts]
        terms = sorted({t for toks in token_lists for t in toks})
        if not terms:
            return cls.empty()
        vocabulary = {t: i for i, t in enumerate(terms)}
        n = len(texts)
        df = np.zeros(len(terms))
        for toks in token_lists:
            for t in set(toks):
                df[vocabulary[t]] += 1
        idf = np.log((1.0 + n) / (1.0 + df)) + 1.0

        matrix = np.zeros((n, len(terms)))
        for row, toks in enumerate(token_lists):
            for t in toks:
                matrix[row, vocabulary[t]] += 1.0
        matrix *= idf
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        matrix /= norms

        _, s, vt = np.linalg.svd(matrix, full_matrices=False)
        rank = int(np.sum(s > 1e-10))
        k = min(max_rank, rank) if rank > 0 else 0
        basis = vt[:k].T.copy()
        # deterministic sign: first nonzero component of each basis vector >= 0
        for j in range(basis.shape[1]):
            col = basis[:, j]
            nz = np.nonzero(np.abs(col) > 1e-12)[0]
            if nz.size and col[nz[0]] < 0:
                basis[:, j] = -col
        return cls(vocabulary, idf, basis, k)

    def vectorize(self, text: str) -> np.ndarray:
        """Raw l2-normalized tf-idf vector over the index vocabulary."""
        vec = np.zeros(len(self.vocabulary))
        for t in tokenize(text):
            i = self.vocabulary.get(t)
            if i is not None:
                vec[i] += 1.0
        vec *= self.idf
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def project(self, raw_vec: np.ndarray) -> np.ndarray:
        """Unit-normalized projection of a raw tf-idf vector into the LSI space."""
        if self.rank == 0 or raw_vec.size == 0:
            return np.zeros(0)
        proj = raw_vec @ self.basis
        norm = np.linalg.norm(proj)
        return proj / norm if norm > 0 else proj


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 or b.size == 0 or a.size != b.size:
        return 0.0
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass
class Cluster:
    agg_id: str
    project_id: str
    category: str
    members: list[str] = field(default_factory=list)
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    centroid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    created_seq: int = 0

    def recompute_centroid(self) -> None:
        vecs = [self.vectors[m] for m in self.members if self.vectors[m].size]
        if not vecs:
            self.centroid = np.zeros(0)
            return
        mean = np.mean(vecs, axis=0)
        norm = np.linalg.norm(mean)
        self.centroid = mean / norm if norm > 0 else mean


@dataclass
class Assignment:
    raw_id: str
    agg_id: str
    is_new_cluster: bool
    similarity: float


class SemanticClusterer:
    """Incremental cluster assignment against centroids.

    The index is rebuilt over the full corpus whenever `rebuild_every`
    new documents have accumulated (or on first use); rebuilds recompute
    vectors and centroids but keep every existing assignment.
    """

    def __init__(self, threshold: float = 0.75, lsi_rank: int = 100, rebuild_every: int = 50):
        if not 0.0 < threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")
        self.threshold = threshold
        self.lsi_rank = lsi_rank
        self.rebuild_every = rebuild_every
        self.index = SemanticIndex.empty()
        self.texts: dict[str, str] = {}  # raw_id -> canonical text
        self.clusters: dict[str, Cluster] = {}
        self._docs_since_rebuild = 0
        self._seq = 0

    def reset(self) -> None:
        self.index = SemanticIndex.empty()
        self.texts.clear()
        self.clusters.clear()
        self._docs_since_rebuild = 0
        self._seq = 0

    def assign_batch(self, items: list[tuple[str, str, str, str]]) -> list[Assignment]:
        """Assign (raw_id, text, project_id, category) items in order.

        The whole batch is registered before the rebuild decision so a
        fresh index always covers the vocabulary of the findings it is
        about to place.
        """
        for raw_id, text, _, _ in items:
            self.texts[raw_id] = text
        self._docs_since_rebuild += len(items)
        # While the corpus is small a stale basis is degenerate (a rank-1
        # space makes everything look identical), so rebuild on every batch
        # until the corpus outgrows the rebuild interval.
        if (
            self.index.rank == 0
            or len(self.texts) <= self.rebuild_every
            or self._docs_since_rebuild >= self.rebuild_every
        ):
            self._rebuild()

        out = []
        for raw_id, text, project_id, category in items:
            out.append(self._assign_one(raw_id, text, project_id, category))
        return out

    def _rebuild(self) -> None:
        ordered = list(self.texts.items())
        self.index = SemanticIndex.build([t for _, t in ordered], self.lsi_rank)
        for cluster in self.clusters.values():
            for member in cluster.members:
                cluster.vectors[member] = self.index.project(self.index.vectorize(self.texts[member]))
            cluster.recompute_centroid()
        self._docs_since_rebuild = 0

    def _assign_one(self, raw_id: str, text: str, project_id: str, category: str) -> Assignment:
        vec = self.index.project(self.index.vectorize(text))
        best: Optional[Cluster] = None
        best_sim = 0.0
        for cluster in sorted(self.clusters.values(), key=lambda c: c.created_seq):
            if cluster.project_id != project_id or cluster.category != category:
                continue
            sim = cosine(vec, cluster.centroid)
            if sim >= self.threshold and sim > best_sim + 1e-12:
                best, best_sim = cluster, sim
        if best is not None:
            best.members.append(raw_id)
            best.vectors[raw_id] = vec
            best.recompute_centroid()
            return Assignment(raw_id, best.agg_id, False, best_sim)
        agg_id = f"agg-{raw_id}"
        self._seq += 1
        cluster = Cluster(
            agg_id=agg_id,
            project_id=project_id,
            category=category,
            members=[raw_id],
            vectors={raw_id: vec},
            created_seq=self._seq,
        )
        cluster.recompute_centroid()
        self.clusters[agg_id] = cluster
        return Assignment(raw_id, agg_id, True, 1.0)

    def raw_cosine(self, text_a: str, text_b: str) -> float:
        """Cosine over full tf-idf vectors, bypassing the projection."""
        return cosine(self.index.vectorize(text_a), self.index.vectorize(text_b))
