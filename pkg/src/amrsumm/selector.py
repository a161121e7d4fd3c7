"""Choosing groups of source sentences to fuse.

At test time sentences are grouped by spectral clustering.  For training,
each reference summary sentence is paired with the source sentences most
similar to it under one of four measures.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .amr import AmrError, AmrGraph
from .features import CorpusStats, extract_features
from .graph_builder import MentionClusters, build_source_graph, collapse_entities, merge_key
from .kernels import kmeans_assign, lcs_length
from .metrics import smatch
from .text import default_stopwords, tokenize
from .trainer import TrainingInstance, project_gold

KMEANS_RESTARTS = 50
KMEANS_MAX_ITER = 300


class TooFewSentences(AmrError):
    pass


class Metric(str, Enum):
    LCS = "lcs"
    VSM = "vsm"
    SMATCH = "smatch"
    COVERAGE = "cov"


@dataclass(frozen=True)
class SentenceRecord:
    document: int
    index: int
    text: str
    amr: AmrGraph | None = None
    tokens: tuple[str, ...] = field(default=())
    sentence_id: str = ""

    def __post_init__(self):
        if not self.tokens:
            object.__setattr__(self, "tokens", tuple(tokenize(self.text)))
        if not self.sentence_id:
            object.__setattr__(self, "sentence_id", f"d{self.document}.s{self.index}")


# ---------------------------------------------------------------- similarities


def lcs_similarity(a: Sequence[str], b: Sequence[str]) -> float:
    """Longest common subsequence length over the longer length."""
    if not a and not b:
        return 0.0
    vocab: dict[str, int] = {}
    xa = np.array([vocab.setdefault(t, len(vocab)) for t in a], dtype=np.int64)
    xb = np.array([vocab.setdefault(t, len(vocab)) for t in b], dtype=np.int64)
    return int(lcs_length(xa, xb)) / max(len(a), len(b))


@dataclass(frozen=True)
class TermStats:
    """Document frequencies for TF-IDF sentence vectors (stopwords dropped).

    IDF is ``log(1 + n / df)``, which stays positive for terms found in every
    sentence, so a sentence never has an all-zero vector just for being typical.
    """
    doc_freq: dict[str, int]
    n: int
    stopwords: frozenset[str]

    @classmethod
    def fit(cls, token_lists: Iterable[Sequence[str]], stopwords: frozenset[str] | None = None) -> "TermStats":
        stop = default_stopwords() if stopwords is None else frozenset(stopwords)
        df: Counter = Counter()
        n = 0
        for toks in token_lists:
            df.update({t for t in toks if t not in stop})
            n += 1
        return cls(dict(df), n, stop)

    def idf(self, term: str) -> float:
        return math.log(1.0 + max(self.n, 1) / max(self.doc_freq.get(term, 0), 1))

    def vector(self, tokens: Sequence[str]) -> dict[str, float]:
        tf = Counter(t for t in tokens if t not in self.stopwords)
        return {t: c * self.idf(t) for t, c in tf.items()}


def cosine(u: dict[str, float], v: dict[str, float]) -> float:
    if len(u) > len(v):
        u, v = v, u
    dot = math.fsum(w * v[t] for t, w in u.items() if t in v)
    nu = math.sqrt(math.fsum(w * w for w in u.values()))
    nv = math.sqrt(math.fsum(w * w for w in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / (nu * nv)))


def vsm_similarity(a: Sequence[str], b: Sequence[str], stats: TermStats | None = None) -> float:
    """Cosine of TF-IDF vectors; 0 when either has no content terms."""
    if stats is None:
        stats = TermStats.fit([a, b])
    return cosine(stats.vector(a), stats.vector(b))


def smatch_similarity(a: AmrGraph, b: AmrGraph, seed: int = 0) -> float:
    return smatch(a, b, seed=seed).f1


def affinity_matrix(records: Sequence[SentenceRecord], stats: TermStats | None = None) -> np.ndarray:
    """Pairwise VSM cosine with a unit diagonal."""
    if stats is None:
        stats = TermStats.fit(r.tokens for r in records)
    vecs = [stats.vector(r.tokens) for r in records]
    n = len(records)
    a = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            a[i, j] = a[j, i] = cosine(vecs[i], vecs[j])
    return a


# ---------------------------------------------------------------- clustering


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(points: np.ndarray, k: int, seed: int = 0, restarts: int = KMEANS_RESTARTS) -> np.ndarray:
    """Lloyd's algorithm from ``restarts`` k-means++ seedings; lowest inertia wins."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    labels = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(restarts):
        centers = _kmeans_pp(points, k, rng)
        prev = None
        for _ in range(KMEANS_MAX_ITER):
            inertia = kmeans_assign(points, centers, labels)
            if prev is not None and np.array_equal(prev, labels):
                break
            prev = labels.copy()
            for c in range(k):
                members = points[labels == c]
                if len(members):
                    centers[c] = members.mean(axis=0)
        if inertia < best_inertia - 1e-12:
            best_inertia, best_labels = inertia, labels.copy()
    return best_labels


def spectral_embedding(affinity: np.ndarray, k: int) -> np.ndarray:
    """Rows of the top-``k`` eigenvectors of D^-1/2 A D^-1/2, normalized to unit length."""
    d = affinity.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    lap = inv[:, None] * affinity * inv[None, :]
    vals, vecs = np.linalg.eigh((lap + lap.T) / 2)
    top = vecs[:, np.argsort(-vals, kind="stable")[:k]]
    # fix each eigenvector's sign so results do not depend on the solver
    for c in range(top.shape[1]):
        j = int(np.argmax(np.abs(top[:, c])))
        if top[j, c] < 0:
            top[:, c] = -top[:, c]
    norms = np.linalg.norm(top, axis=1, keepdims=True)
    return np.divide(top, norms, out=np.zeros_like(top), where=norms > 0)


def _centrality(affinity: np.ndarray, members: list[int]) -> list[float]:
    if len(members) == 1:
        return [1.0]
    sub = affinity[np.ix_(members, members)]
    return [(sub[i].sum() - sub[i, i]) / (len(members) - 1) for i in range(len(members))]


def cluster_sentences(affinity: np.ndarray, m: int, seed: int = 0) -> list[list[int]]:
    """Spectral clusters of sentence indices, largest first (ties: lower minimum index)."""
    n = affinity.shape[0]
    if m == 1:
        return [list(range(n))]
    labels = kmeans(spectral_embedding(affinity, m), m, seed)
    groups: dict[int, list[int]] = {}
    for i, c in enumerate(labels):
        groups.setdefault(int(c), []).append(i)
    return sorted(groups.values(), key=lambda g: (-len(g), g[0]))


def spectral_select(sentences: Sequence[SentenceRecord], m: int = 5, n: int = 5, seed: int = 0,
                    stats: TermStats | None = None) -> list[list[SentenceRecord]]:
    """The ``m`` largest spectral clusters, each cut to its ``n`` most central sentences.

    Sentences inside a cluster keep their input order.
    """
    if m < 1 or n < 1:
        raise ValueError("M and N must be >= 1")
    if len(sentences) < m:
        raise TooFewSentences(f"{len(sentences)} sentences cannot form {m} clusters")
    affinity = affinity_matrix(sentences, stats)
    out = []
    for members in cluster_sentences(affinity, m, seed)[:m]:
        cent = _centrality(affinity, members)
        ranked = sorted(range(len(members)), key=lambda t: (-cent[t], members[t]))[:n]
        out.append([sentences[members[t]] for t in sorted(ranked)])
    return out


def adjusted_rand_index(a: Sequence[int], b: Sequence[int]) -> float:
    """Agreement of two partitions, corrected for chance (1.0 means identical)."""
    if len(a) != len(b):
        raise ValueError("label sequences differ in length")

    def comb2(x):
        return x * (x - 1) / 2

    pairs = Counter(zip(a, b))
    sum_ij = sum(comb2(v) for v in pairs.values())
    sum_a = sum(comb2(v) for v in Counter(a).values())
    sum_b = sum(comb2(v) for v in Counter(b).values())
    total = comb2(len(a))
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


# ---------------------------------------------------------------- training data


def concept_keys(g: AmrGraph) -> frozenset[str]:
    """Merge keys of the concepts (not literals) of ``g`` after entity collapsing."""
    return frozenset(merge_key(c) for c in collapse_entities(g).nodes if not c.is_literal)


def concept_coverage_select(reference: AmrGraph, candidates: Sequence[SentenceRecord], n: int) -> list[SentenceRecord]:
    """Greedy set cover of the reference's concepts by candidate sentences.

    Picks the candidate adding the most uncovered concepts (ties: earlier
    document, then sentence).  Once nothing adds coverage, remaining slots
    go to candidates with the largest total overlap, in the same tie order.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    target = concept_keys(reference)
    keysets = [concept_keys(c.amr) & target if c.amr is not None else frozenset() for c in candidates]
    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].document, candidates[i].index, i))
    chosen: list[int] = []
    covered: set[str] = set()
    while len(chosen) < min(n, len(candidates)):
        best, best_gain = None, 0
        for i in order:
            if i in chosen:
                continue
            gain = len(keysets[i] - covered)
            if gain > best_gain:
                best, best_gain = i, gain
        if best is None:
            break
        chosen.append(best)
        covered |= keysets[best]
    rest = sorted((i for i in order if i not in chosen), key=lambda i: -len(keysets[i]))
    chosen.extend(rest[:n - len(chosen)])
    return [candidates[i] for i in chosen]


def rank_candidates(reference: SentenceRecord, candidates: Sequence[SentenceRecord], metric: Metric,
                    stats: TermStats | None = None, seed: int = 0) -> list[tuple[float, SentenceRecord]]:
    """Candidates with their similarity to ``reference``, best first (ties: input order)."""
    metric = Metric(metric)
    if metric is Metric.LCS:
        scores = [lcs_similarity(reference.tokens, c.tokens) for c in candidates]
    elif metric is Metric.VSM:
        if stats is None:
            stats = TermStats.fit([reference.tokens, *(c.tokens for c in candidates)])
        scores = [vsm_similarity(reference.tokens, c.tokens, stats) for c in candidates]
    elif metric is Metric.SMATCH:
        if reference.amr is None:
            raise ValueError("smatch ranking needs reference AMR")
        scores = [smatch_similarity(c.amr, reference.amr, seed) if c.amr is not None else 0.0 for c in candidates]
    else:
        raise ValueError("concept coverage selects greedily; use concept_coverage_select")
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    return [(scores[i], candidates[i]) for i in order]


def select_for_reference(reference: SentenceRecord, candidates: Sequence[SentenceRecord], metric: Metric,
                         n: int, stats: TermStats | None = None, seed: int = 0) -> list[SentenceRecord]:
    metric = Metric(metric)
    if metric is Metric.COVERAGE:
        if reference.amr is None:
            raise ValueError("concept coverage needs reference AMR")
        return concept_coverage_select(reference.amr, candidates, n)
    return [c for _, c in rank_candidates(reference, candidates, metric, stats, seed)[:n]]


def build_source(records: Sequence[SentenceRecord], corefs: MentionClusters | None = None,
                 record_index: dict[int, int] | None = None):
    """Source graph over ``records`` (sorted into document order).

    ``corefs`` refers to sentences by their position in the full sentence
    list; ``record_index`` maps ``id(record)`` to that position.
    """
    records = sorted(records, key=lambda r: (r.document, r.index))
    if any(r.amr is None for r in records):
        raise ValueError("every selected sentence needs an AMR")
    local = None
    if corefs is not None and record_index is not None:
        local = corefs.remap({record_index[id(r)]: s for s, r in enumerate(records)})
    return build_source_graph([r.amr for r in records], local,
                              positions=[r.index for r in records],
                              documents=[r.document for r in records])


def build_training_instances(references: Sequence[SentenceRecord], sources: Sequence[SentenceRecord],
                             metric: Metric, n: int = 5, corefs: MentionClusters | None = None,
                             event_lexicon: Iterable[str] = (), stopwords: frozenset[str] | None = None,
                             seed: int = 0) -> list[TrainingInstance]:
    """One training instance per reference sentence.

    The ``n`` best-matching source sentences are merged into a source graph
    and the reference AMR is projected onto it as the gold selection.
    """
    metric = Metric(metric)
    lexicon = frozenset(event_lexicon)
    stats = TermStats.fit((r.tokens for r in [*references, *sources]), stopwords) if metric is Metric.VSM else None
    index = {id(r): s for s, r in enumerate(sources)}
    out = []
    for k, ref in enumerate(references):
        if ref.amr is None:
            raise ValueError(f"reference {ref.sentence_id} has no AMR")
        chosen = select_for_reference(ref, sources, metric, n, stats, seed)
        if not chosen:
            continue
        g = build_source(chosen, corefs, index)
        gold, coverage = project_gold(ref.amr, g)
        feats = extract_features(g, CorpusStats.from_source_graph(g, lexicon))
        out.append(TrainingInstance(g, gold, ref.sentence_id or f"ref{k}", feats, coverage))
    return out
