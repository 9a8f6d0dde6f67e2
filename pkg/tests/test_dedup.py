from __future__ import annotations

import math
import random

from findingskb.dedup import (
    STOP_WORDS,
    SemanticClusterer,
    SemanticIndex,
    cosine,
    exact_group,
    tokenize,
)

# ---------------------------------------------------------------------------
# Independent oracle: plain-python tf-idf over full vectors, no SVD.
# Same stated formulas (smooth idf, l2 norm) but a separate implementation.
# ---------------------------------------------------------------------------


def oracle_tfidf(texts):
    docs = [tokenize(t) for t in texts]
    n = len(docs)
    terms = sorted({t for d in docs for t in d})
    df = {t: sum(1 for d in docs if t in d) for t in terms}
    idf = {t: math.log((1 + n) / (1 + df[t])) + 1 for t in terms}
    vectors = []
    for d in docs:
        vec = {}
        for t in d:
            vec[t] = vec.get(t, 0.0) + 1.0
        for t in vec:
            vec[t] *= idf[t]
        norm = math.sqrt(sum(v * v for v in vec.values()))
        if norm > 0:
            vec = {t: v / norm for t, v in vec.items()}
        vectors.append(vec)
    return vectors


def oracle_cosine(a, b):
    dot = sum(v * b.get(t, 0.0) for t, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def oracle_threshold_clustering(items, threshold):
    """Sequential brute-force clustering over full tf-idf vectors.

    items: (raw_id, text, project, category), processed in order; at each
    step the tf-idf corpus is every document seen so far, mirroring the
    per-batch index freshness of the incremental path.
    """
    clusters = []  # dicts: members (ids), texts, project, category
    seen_texts = []
    seen_meta = []
    for raw_id, text, project, category in items:
        seen_texts.append(text)
        seen_meta.append((raw_id, project, category))
        vectors = oracle_tfidf(seen_texts)
        by_id = {meta[0]: vec for meta, vec in zip(seen_meta, vectors)}
        vec = by_id[raw_id]
        best, best_sim = None, 0.0
        for cluster in clusters:
            if cluster["project"] != project or cluster["category"] != category:
                continue
            centroid = centroid_of([by_id[m] for m in cluster["members"]])
            sim = oracle_cosine(vec, centroid)
            if sim >= threshold and sim > best_sim + 1e-12:
                best, best_sim = cluster, sim
        if best is not None:
            best["members"].append(raw_id)
        else:
            clusters.append({"members": [raw_id], "project": project, "category": category})
    return [tuple(c["members"]) for c in clusters]


def centroid_of(vectors):
    total = {}
    for vec in vectors:
        for t, v in vec.items():
            total[t] = total.get(t, 0.0) + v
    k = len(vectors)
    mean = {t: v / k for t, v in total.items()}
    norm = math.sqrt(sum(v * v for v in mean.values()))
    if norm > 0:
        mean = {t: v / norm for t, v in mean.items()}
    return mean


def test_exact_group_merges_equal_fingerprints():
    groups = exact_group([("a", 1), ("a", 2), ("b", 3)])
    assert groups == {"a": [1, 2], "b": [3]}


def test_tokenize_lowercases_and_strips_stopwords():
    toks = tokenize("The Tool found a Hard-Coded PASSWORD in config.py!")
    assert "the" not in toks and "a" not in toks and "in" not in toks
    assert "password" in toks and "config" in toks and "py" in toks
    assert all(t == t.lower() for t in toks)
    assert STOP_WORDS.isdisjoint(toks)


def test_identical_documents_cosine_one():
    index = SemanticIndex.build(["sql injection in login", "sql injection in login"], 100)
    a = index.project(index.vectorize("sql injection in login"))
    b = index.project(index.vectorize("sql injection in login"))
    assert abs(cosine(a, b) - 1.0) < 1e-9


def test_empty_corpus_always_opens_new_cluster():
    clusterer = SemanticClusterer()
    assert clusterer.index.rank == 0
    assignments = clusterer.assign_batch([("r1", "first finding text", "p", "static-analysis")])
    assert assignments[0].is_new_cluster


def test_full_rank_projection_preserves_cosines():
    rng = random.Random(7)
    words = ["injection", "sql", "xss", "overflow", "buffer", "auth", "token", "leak",
             "password", "header", "cookie", "tls", "cipher", "weak", "random"]
    texts = [" ".join(rng.choices(words, k=rng.randint(4, 12))) for _ in range(50)]
    index = SemanticIndex.build(texts, max_rank=10_000)  # k = full rank
    oracle_vecs = oracle_tfidf(texts)
    for i in range(len(texts)):
        for j in range(i + 1, len(texts)):
            raw = oracle_cosine(oracle_vecs[i], oracle_vecs[j])
            vi = index.project(index.vectorize(texts[i]))
            vj = index.project(index.vectorize(texts[j]))
            assert abs(cosine(vi, vj) - raw) < 1e-9


def test_paraphrased_description_joins_cluster():
    base = (
        "CVE-2021-44228 remote code execution vulnerability in the log4j logging "
        "component allows attackers to run arbitrary code via crafted lookup strings"
    )
    paraphrase = (
        "CVE-2021-44228 remote code execution vulnerability in the log4j logging "
        "component lets attackers execute arbitrary code using crafted lookup strings"
    )
    clusterer = SemanticClusterer(threshold=0.75, rebuild_every=1)
    first = clusterer.assign_batch([("r1", base, "p", "dependency-scan")])[0]
    second = clusterer.assign_batch([("r2", paraphrase, "p", "dependency-scan")])[0]
    assert first.is_new_cluster
    assert second.agg_id == first.agg_id
    # oracle: brute-force tf-idf cosine over full vectors
    vecs = oracle_tfidf([base, paraphrase])
    assert oracle_cosine(vecs[0], vecs[1]) >= 0.75


def test_category_gate_prevents_cross_category_merge():
    text = "hardcoded credentials found in configuration"
    clusterer = SemanticClusterer(rebuild_every=1)
    a = clusterer.assign_batch([("r1", text, "p", "secret-scan")])[0]
    b = clusterer.assign_batch([("r2", text, "p", "dependency-scan")])[0]
    assert a.agg_id != b.agg_id
    assert b.is_new_cluster


def test_incremental_matches_bruteforce_oracle():
    rng = random.Random(21)
    seeds = [
        "sql injection in user login form parameter",
        "cross site scripting reflected in search results page",
        "hardcoded aws secret key committed to repository",
        "outdated openssl version with known heap overflow",
        "missing http security headers on api responses",
        "weak password hashing algorithm md5 in auth service",
        "directory traversal in file download endpoint",
        "server side request forgery in webhook handler",
    ]
    items = []
    for i in range(40):
        seed = rng.choice(seeds)
        words = seed.split()
        if rng.random() < 0.5:
            k = rng.randrange(len(words))
            words[k] = rng.choice(["issue", "detected", "problem", "alert"])
        items.append((f"r{i:03d}", " ".join(words), "p", "static-analysis"))

    clusterer = SemanticClusterer(threshold=0.75, lsi_rank=10_000, rebuild_every=1)
    partitions = {}
    for item in items:
        a = clusterer.assign_batch([item])[0]
        partitions.setdefault(a.agg_id, []).append(a.raw_id)

    expected = oracle_threshold_clustering(items, threshold=0.75)
    got = [tuple(members) for members in partitions.values()]
    assert sorted(got) == sorted(expected)


def test_partition_properties():
    rng = random.Random(5)
    items = [
        (f"r{i}", " ".join(rng.choices(["alpha", "beta", "gamma", "delta", "leak"], k=6)),
         "p", "static-analysis")
        for i in range(30)
    ]
    clusterer = SemanticClusterer(rebuild_every=10)
    for item in items:
        clusterer.assign_batch([item])
    members = [m for c in clusterer.clusters.values() for m in c.members]
    assert sorted(members) == sorted(i[0] for i in items)  # partition covers all, disjoint
    assert len(clusterer.clusters) <= len(items)


def test_determinism_across_runs():
    rng = random.Random(11)
    items = [
        (f"r{i}", " ".join(rng.choices(["query", "token", "leak", "header", "unsafe", "eval"], k=7)),
         "p", "static-analysis")
        for i in range(25)
    ]

    def run():
        c = SemanticClusterer(rebuild_every=5)
        for item in items:
            c.assign_batch([item])
        return sorted(tuple(c.members) for c in c.clusters.values())

    assert run() == run()


def test_rebuild_keeps_existing_assignments():
    clusterer = SemanticClusterer(rebuild_every=3)
    texts = ["unique alpha beta", "unique alpha beta", "totally different gamma delta",
             "unrelated epsilon zeta", "more words eta theta"]
    assigned = []
    for i, text in enumerate(texts):
        assigned.append(clusterer.assign_batch([(f"r{i}", text, "p", "static-analysis")])[0].agg_id)
    # later rebuilds must not move r0/r1 out of their shared cluster
    assert assigned[0] == assigned[1]
    cluster = clusterer.clusters[assigned[0]]
    assert cluster.members == ["r0", "r1"]
