"""Evaluation: Smatch, node/edge P/R/F, ROUGE-1/2/SU4 and n-gram abstractiveness."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .amr import AmrGraph
from .decoder import Selection
from .graph_builder import SourceGraph, collapse_entities, merge_key
from .kernels import smatch_hill_climb, smatch_match_count
from .text import tokenize

DEFAULT_RESTARTS = 4
SU_WINDOW = 4


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matched: float, n_predicted: float, n_gold: float) -> "PRF":
        p = matched / n_predicted if n_predicted else 0.0
        r = matched / n_gold if n_gold else 0.0
        return cls(p, r, f_score(p, r))

    def as_tuple(self) -> tuple[float, float, float]:
        return self.precision, self.recall, self.f1


ZERO = PRF(0.0, 0.0, 0.0)


def f_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


# ---------------------------------------------------------------- smatch


@dataclass(frozen=True)
class SmatchTriples:
    """Triples of one graph over its concept (non-literal) nodes."""
    variables: tuple[int, ...]
    labels: tuple[str, ...]
    attributes: tuple[frozenset[tuple[str, str]], ...]
    relations: frozenset[tuple[str, int, int]]
    top: int

    @property
    def count(self) -> int:
        return len(self.variables) + sum(len(a) for a in self.attributes) + len(self.relations)


def smatch_triples(g: AmrGraph) -> SmatchTriples:
    variables = tuple(i for i, c in enumerate(g.nodes) if not c.is_literal)
    pos = {v: t for t, v in enumerate(variables)}
    attrs: list[set] = [set() for _ in variables]
    rels = set()
    for r in g.edges:
        target = g.nodes[r.target]
        if target.is_literal:
            attrs[pos[r.source]].add((r.label.lower(), target.label.lower()))
        else:
            rels.add((r.label.lower(), pos[r.source], pos[r.target]))
    attrs[pos[g.root]].add(("TOP", "top"))
    return SmatchTriples(
        variables=variables,
        labels=tuple(g.nodes[v].label.lower() for v in variables),
        attributes=tuple(frozenset(a) for a in attrs),
        relations=frozenset(rels),
        top=pos[g.root],
    )


def _smatch_arrays(a: SmatchTriples, b: SmatchTriples):
    n1, n2 = len(a.variables), len(b.variables)
    unary = np.zeros((n1, n2), dtype=np.int64)
    for i in range(n1):
        for j in range(n2):
            unary[i, j] = (a.labels[i] == b.labels[j]) + len(a.attributes[i] & b.attributes[j])
    rel_ids: dict[str, int] = {}
    for label, _, _ in sorted(a.relations | b.relations):
        rel_ids.setdefault(label, len(rel_ids))
    rel_a = np.array([[rel_ids[l], i, k] for l, i, k in sorted(a.relations)], dtype=np.int64).reshape(-1, 3)
    rel_b = np.zeros((max(len(rel_ids), 1), n2, n2), dtype=np.int64)
    for l, j, k in b.relations:
        rel_b[rel_ids[l], j, k] = 1
    rel_b_list = np.array([[rel_ids[l], j, k] for l, j, k in sorted(b.relations)], dtype=np.int64).reshape(-1, 3)
    return unary, rel_a, rel_b, rel_b_list


@dataclass(frozen=True)
class SmatchResult:
    # node index in the first graph -> node index in the second graph
    mapping: Mapping[int, int]
    matched: int
    prf: PRF
    restarts: int

    @property
    def f1(self) -> float:
        return self.prf.f1


def _greedy_start(a: SmatchTriples, b: SmatchTriples, unary: np.ndarray) -> np.ndarray:
    mapping = np.full(len(a.variables), -1, dtype=np.int64)
    used = set()
    for i in range(len(a.variables)):
        best, best_j = 0, -1
        for j in range(len(b.variables)):
            if j not in used and a.labels[i] == b.labels[j] and unary[i, j] > best:
                best, best_j = unary[i, j], j
        if best_j >= 0:
            mapping[i] = best_j
            used.add(best_j)
    return mapping


def _random_start(rng: np.random.Generator, n1: int, n2: int) -> np.ndarray:
    perm = rng.permutation(max(n1, n2))
    return np.array([p if p < n2 else -1 for p in perm[:n1]], dtype=np.int64)


def _canonical(t: SmatchTriples):
    return (len(t.variables), t.count, t.labels, tuple(sorted(map(sorted, t.attributes))), tuple(sorted(t.relations)))


def smatch(a: AmrGraph, b: AmrGraph, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> SmatchResult:
    """Smatch of ``a`` (predicted) against ``b`` (gold).

    Hill-climbs from one greedy start (concepts with equal labels) and
    ``restarts`` seeded random starts; the best matched-triple count wins.
    The search always runs with the graphs in a canonical order, so the
    matched count does not depend on argument order.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    ta, tb = smatch_triples(a), smatch_triples(b)
    swapped = _canonical(tb) < _canonical(ta)
    if swapped:
        ta, tb = tb, ta
    unary, rel_a, rel_b, rel_b_list = _smatch_arrays(ta, tb)
    rng = np.random.default_rng(seed)
    starts = [_greedy_start(ta, tb, unary)]
    starts += [_random_start(rng, len(ta.variables), len(tb.variables)) for _ in range(restarts)]
    best_map, best = None, -1
    for mapping in starts:
        score = int(smatch_hill_climb(mapping, unary, rel_a, rel_b, rel_b_list))
        if score > best:
            best, best_map = score, mapping.copy()
    pairs = {ta.variables[i]: tb.variables[j] for i, j in enumerate(best_map) if j >= 0}
    n_a, n_b = ta.count, tb.count
    if swapped:
        pairs = {v: k for k, v in pairs.items()}
        n_a, n_b = n_b, n_a
    return SmatchResult(pairs, best, PRF.from_counts(best, n_a, n_b), restarts)


def smatch_exhaustive(a: AmrGraph, b: AmrGraph) -> int:
    """Best matched-triple count over all partial injections; exponential, for checks only."""
    ta, tb = smatch_triples(a), smatch_triples(b)
    unary, rel_a, rel_b, _ = _smatch_arrays(ta, tb)
    n1, n2 = len(ta.variables), len(tb.variables)
    mapping = np.full(n1, -1, dtype=np.int64)
    used = [False] * n2
    best = 0

    def rec(i):
        nonlocal best
        if i == n1:
            best = max(best, int(smatch_match_count(mapping, unary, rel_a, rel_b)))
            return
        for j in range(-1, n2):
            if j >= 0 and used[j]:
                continue
            mapping[i] = j
            if j >= 0:
                used[j] = True
            rec(i + 1)
            if j >= 0:
                used[j] = False
        mapping[i] = -1

    rec(0)
    return best


# ---------------------------------------------------------------- node / edge


def _graph_items(g: AmrGraph) -> tuple[Counter, Counter]:
    g = collapse_entities(g)
    keys = [merge_key(c) for c in g.nodes]
    return Counter(keys), Counter((keys[r.source], r.label, keys[r.target]) for r in g.edges)


def _selection_items(sel: Selection, g: SourceGraph) -> tuple[Counter, Counter]:
    nodes = Counter(g.nodes[i].merge_key for i in sel.content_nodes(g.root))
    edges = Counter()
    for k in sel.edges:
        e = g.edges[k]
        if not e.is_snt_root:
            edges[(g.nodes[e.source].merge_key, e.label, g.nodes[e.target].merge_key)] += 1
    return nodes, edges


def node_edge_prf(predicted: AmrGraph | Selection, gold: AmrGraph,
                  source: SourceGraph | None = None) -> tuple[PRF, PRF]:
    """Node and edge P/R/F by multiset intersection of merge keys.

    ``predicted`` is either an AMR graph or a selection of ``source``.
    """
    if isinstance(predicted, Selection):
        if source is None:
            raise ValueError("a Selection needs its SourceGraph")
        pn, pe = _selection_items(predicted, source)
    else:
        pn, pe = _graph_items(predicted)
    gn, ge = _graph_items(gold)
    nodes = PRF.from_counts(sum((pn & gn).values()), sum(pn.values()), sum(gn.values()))
    edges = PRF.from_counts(sum((pe & ge).values()), sum(pe.values()), sum(ge.values()))
    return nodes, edges


# ---------------------------------------------------------------- ROUGE


def _tokens(x: str | Sequence[str]) -> list[str]:
    if isinstance(x, str):
        return tokenize(x)
    return [t.lower() for t in x]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def skip_bigrams(tokens: Sequence[str], window: int = SU_WINDOW) -> Counter:
    """Ordered pairs with at most ``window`` words between them."""
    out = Counter()
    for i in range(len(tokens)):
        for j in range(i + 1, min(len(tokens), i + window + 2)):
            out[(tokens[i], tokens[j])] += 1
    return out


def _micro(cand: Counter, refs: list[Counter]) -> PRF:
    n_cand = sum(cand.values())
    if n_cand == 0 or not refs:
        return ZERO
    matched = sum(sum((cand & r).values()) for r in refs)
    return PRF.from_counts(matched, n_cand * len(refs), sum(sum(r.values()) for r in refs))


def rouge_n(candidate: str | Sequence[str], references: Sequence[str | Sequence[str]], n: int) -> PRF:
    """Clipped n-gram overlap, micro-averaged over references (n is 1 or 2)."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    cand = ngrams(_tokens(candidate), n)
    return _micro(cand, [ngrams(_tokens(r), n) for r in references])


def _su(tokens: list[str]) -> Counter:
    grams = skip_bigrams(tokens)
    grams.update(ngrams(tokens, 1))
    return grams


def rouge_su4(candidate: str | Sequence[str], references: Sequence[str | Sequence[str]]) -> PRF:
    """Skip bigrams with up to four words in between, plus unigrams."""
    return _micro(_su(_tokens(candidate)), [_su(_tokens(r)) for r in references])


def abstractiveness(summary: str | Sequence[str], sources: Sequence[str | Sequence[str]], n: int) -> float:
    """Fraction of the summary's distinct n-grams found in the concatenated sources."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grams = set(ngrams(_tokens(summary), n))
    if not grams:
        return 0.0
    joined: list[str] = []
    for s in sources:
        joined.extend(_tokens(s))
    source_grams = set(ngrams(joined, n))
    return len(grams & source_grams) / len(grams)


# ---------------------------------------------------------------- reports


REPORT_HEADER = ("instance", "metric", "P", "R", "F")


def format_report(rows: Iterable[tuple[str, str, PRF]]) -> str:
    """Tab-separated per-instance table with a macro-averaged footer per metric."""
    rows = list(rows)
    lines = ["\t".join(REPORT_HEADER)]
    by_metric: dict[str, list[PRF]] = {}
    for inst, metric, prf in rows:
        lines.append(f"{inst}\t{metric}\t{prf.precision:.6f}\t{prf.recall:.6f}\t{prf.f1:.6f}")
        by_metric.setdefault(metric, []).append(prf)
    for metric, prfs in by_metric.items():
        p = math.fsum(x.precision for x in prfs) / len(prfs)
        r = math.fsum(x.recall for x in prfs) / len(prfs)
        f = math.fsum(x.f1 for x in prfs) / len(prfs)
        lines.append(f"MACRO\t{metric}\t{p:.6f}\t{r:.6f}\t{f:.6f}")
    return "\n".join(lines) + "\n"
