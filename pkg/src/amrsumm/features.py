"""Binary features for source-graph nodes and edges."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .amr import AmrGraph, ConceptKind
from .graph_builder import SourceGraph, collapse_entities, merge_key, surface_words


class UnknownNode(KeyError):
    pass


class UnknownEdge(KeyError):
    pass


def _clean(name: str) -> str:
    return name.replace("\t", "_").replace("\n", "_").replace("\r", "_")


class FeatureVector(Mapping[str, int]):
    """Sparse binary vector: present features have value 1, absent ones 0."""

    __slots__ = ("_names",)

    def __init__(self, names: Iterable[str] = ()):
        self._names = tuple(sorted({_clean(n) for n in names}))

    def __getitem__(self, name: str) -> int:
        if name in self._names:
            return 1
        raise KeyError(name)

    def get(self, name, default=0):
        return 1 if name in self._names else default

    def __contains__(self, name) -> bool:
        return name in self._names

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other):
        if isinstance(other, FeatureVector):
            return self._names == other._names
        return super().__eq__(other)

    def __hash__(self):
        return hash(self._names)

    def __repr__(self):
        return f"FeatureVector({list(self._names)!r})"

    def dot(self, weights: Mapping[str, float]) -> float:
        return math.fsum(weights.get(f, 0.0) for f in self._names)


@dataclass(frozen=True)
class GraphFeatures:
    nodes: tuple[FeatureVector, ...]
    edges: tuple[FeatureVector, ...]


@dataclass(frozen=True)
class CorpusStats:
    """Concept statistics of one document set.

    ``term_freq`` counts merge keys over the whole set, ``doc_freq`` counts
    documents containing them.  TF-IDF is ``tf * log(n_docs / df)``, bucketed
    into quartiles of the values observed in this set.
    """
    term_freq: Mapping[str, int]
    doc_freq: Mapping[str, int]
    n_docs: int
    event_lexicon: frozenset[str] = frozenset()

    @classmethod
    def from_documents(cls, documents: Sequence[Sequence[AmrGraph]], event_lexicon: Iterable[str] = ()) -> "CorpusStats":
        tf: Counter = Counter()
        df: Counter = Counter()
        for doc in documents:
            seen = set()
            for g in doc:
                for c in collapse_entities(g).nodes:
                    key = merge_key(c)
                    tf[key] += 1
                    seen.add(key)
            df.update(seen)
        return cls(dict(tf), dict(df), max(len(documents), 1), frozenset(w.lower() for w in event_lexicon))

    @classmethod
    def from_source_graph(cls, g: SourceGraph, event_lexicon: Iterable[str] = ()) -> "CorpusStats":
        """Stats over the cluster itself, grouping sentences by ``g.documents``.

        Counts follow merged nodes, so coreferent mentions with different
        surface forms count as one term.
        """
        tf: Counter = Counter()
        docs: dict[str, set[int]] = {}
        for i, node in enumerate(g.nodes):
            if i == g.root:
                continue
            tf[node.merge_key] += len(node.provenance)
            docs.setdefault(node.merge_key, set()).update(g.documents[s] for s, _ in node.provenance)
        df = {k: len(v) for k, v in docs.items()}
        n_docs = max(len(set(g.documents)), 1)
        return cls(dict(tf), df, n_docs, frozenset(w.lower() for w in event_lexicon))

    def tfidf(self, key: str) -> float:
        tf = self.term_freq.get(key, 0)
        if tf == 0:
            return 0.0
        return tf * math.log(self.n_docs / self.doc_freq[key])

    @property
    def quartiles(self) -> tuple[float, float, float]:
        q = self.__dict__.get("_quartiles")
        if q is None:
            values = [self.tfidf(k) for k in self.term_freq]
            q = tuple(float(x) for x in np.percentile(values, [25, 50, 75])) if values else (0.0, 0.0, 0.0)
            object.__setattr__(self, "_quartiles", q)
        return q

    def tfidf_bucket(self, key: str) -> str:
        v = self.tfidf(key)
        q1, q2, q3 = self.quartiles
        if v <= q1:
            return "q1"
        if v <= q2:
            return "q2"
        if v <= q3:
            return "q3"
        return "q4"


def count_bucket(count: int) -> str:
    if count <= 1:
        return "1"
    if count == 2:
        return "2"
    if count <= 4:
        return "3-4"
    return "5+"


def depth_bucket(avg_depth: float) -> str:
    d = math.floor(avg_depth + 0.5)
    return str(d) if d < 3 else "3+"


def position_bucket(pos: int) -> str:
    if pos <= 0:
        return "first"
    if pos <= 3:
        return "1-3"
    return "4+"


def span_bucket(span: int) -> str:
    return str(span) if span < 3 else "3+"


def node_features(n: int, g: SourceGraph, stats: CorpusStats) -> FeatureVector:
    if not 0 <= n < len(g.nodes):
        raise UnknownNode(n)
    if n == g.root:
        return FeatureVector()
    node = g.nodes[n]
    c = node.concept
    depths = g.sentence_depths
    occ = sorted(node.provenance)
    avg_depth = sum(depths[s][i] for s, i in occ) / len(occ)
    first_pos = min(g.positions[s] for s, _ in occ)
    feats = [
        f"label={node.merge_key}",
        f"freq={count_bucket(len(occ))}",
        f"depth={depth_bucket(avg_depth)}",
        f"pos={position_bucket(first_pos)}",
        f"tfidf={stats.tfidf_bucket(node.merge_key)}",
        f"span={span_bucket(c.span)}",
    ]
    if c.kind is ConceptKind.MEGA:
        feats.append("date-entity" if c.label.startswith("date-entity") else "named-entity")
    words = surface_words(c)
    if stats.event_lexicon and (" ".join(words) in stats.event_lexicon or node.merge_key.lower() in stats.event_lexicon):
        feats.append("event")
    return FeatureVector(feats)


def edge_features(e: int, g: SourceGraph, stats: CorpusStats) -> FeatureVector:
    if not 0 <= e < len(g.edges):
        raise UnknownEdge(e)
    edge = g.edges[e]
    if edge.is_snt_root:
        return FeatureVector(["snt-root"])
    first_pos = min(g.positions[s] for s in edge.provenance)
    return FeatureVector([
        f"rel={edge.label}",
        f"relfreq={count_bucket(len(edge.provenance))}",
        f"pos={position_bucket(first_pos)}",
        f"rel={edge.label}^src={g.nodes[edge.source].merge_key}",
    ])


def extract_features(g: SourceGraph, stats: CorpusStats | None = None) -> GraphFeatures:
    """Feature vectors for every node and edge of ``g``."""
    if stats is None:
        stats = CorpusStats.from_source_graph(g)
    return GraphFeatures(
        nodes=tuple(node_features(i, g, stats) for i in range(len(g.nodes))),
        edges=tuple(edge_features(k, g, stats) for k in range(len(g.edges))),
    )
