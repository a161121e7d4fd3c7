"""Summary-graph decoding: the best rooted subtree of a source graph.

A selection is scored as the sum of ``theta . f(i)`` over chosen nodes plus
``phi . g(i, j)`` over chosen edges.  ``:snt-root`` edges score 0.  Decoding
maximizes the score, optionally plus or minus the Hamming cost to a gold
selection, over subtrees rooted at ROOT with at most ``budget`` content nodes.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .amr import AmrError, AmrGraph, Concept, Relation
from .features import GraphFeatures
from .graph_builder import SourceGraph
from .kernels import bnb_max_subtree

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 15
DEFAULT_MAX_EXPANSIONS = 10**6
TIE_EPS = 1e-9


class InvalidSelection(AmrError):
    pass


class Infeasible(AmrError):
    pass


class TooLarge(AmrError):
    pass


class DecodeTimeout(AmrError):
    def __init__(self, best: "Selection", expansions: int):
        self.best = best
        self.expansions = expansions
        super().__init__(f"search stopped after {expansions} expansions; best found is not certified optimal")


@dataclass
class Model:
    node_weights: dict[str, float] = field(default_factory=dict)
    edge_weights: dict[str, float] = field(default_factory=dict)
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if int(self.budget) != self.budget or self.budget < 1:
            raise ValueError("budget L must be a positive integer")
        for w in (self.node_weights, self.edge_weights):
            for name, value in w.items():
                if not math.isfinite(value):
                    raise ValueError(f"weight for {name!r} is not finite")


@dataclass(frozen=True)
class Selection:
    nodes: frozenset[int]
    edges: frozenset[int]
    optimal: bool = field(default=True, compare=False)

    @classmethod
    def root_only(cls, root: int = 0) -> "Selection":
        return cls(frozenset([root]), frozenset())

    def content_nodes(self, root: int = 0) -> frozenset[int]:
        return self.nodes - {root}

    def sort_key(self):
        return sorted(self.nodes), sorted(self.edges)


class CostMode(str, Enum):
    PLUS = "plus"
    MINUS = "minus"
    ONLY = "only"


@dataclass(frozen=True)
class CostSpec:
    gold: Selection
    sign: CostMode


def cost(a: Selection, b: Selection) -> int:
    """Nodes plus edges on which two selections disagree."""
    return len(a.nodes ^ b.nodes) + len(a.edges ^ b.edges)


def check_selection(sel: Selection, g: SourceGraph, budget: int | None = None) -> None:
    """Raise InvalidSelection unless ``sel`` is a rooted tree of ``g`` within budget."""
    n, m = len(g.nodes), len(g.edges)
    if g.root not in sel.nodes:
        raise InvalidSelection("ROOT is not selected")
    if any(not 0 <= i < n for i in sel.nodes) or any(not 0 <= k < m for k in sel.edges):
        raise InvalidSelection("selection refers to unknown nodes or edges")
    incoming = {i: 0 for i in sel.nodes}
    children: dict[int, list[int]] = {i: [] for i in sel.nodes}
    for k in sel.edges:
        e = g.edges[k]
        if e.source not in sel.nodes or e.target not in sel.nodes:
            raise InvalidSelection(f"edge {k} has an unselected endpoint")
        incoming[e.target] += 1
        children[e.source].append(e.target)
    for i, count in incoming.items():
        want = 0 if i == g.root else 1
        if count != want:
            raise InvalidSelection(f"node {i} has {count} selected incoming edges, expected {want}")
    seen = {g.root}
    stack = [g.root]
    while stack:
        for v in children[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if seen != set(sel.nodes):
        raise InvalidSelection("selection is not connected to ROOT")
    if budget is not None and len(sel.nodes) - 1 > budget:
        raise InvalidSelection(f"{len(sel.nodes) - 1} content nodes exceed budget {budget}")


def is_valid_selection(sel: Selection, g: SourceGraph, budget: int | None = None) -> bool:
    try:
        check_selection(sel, g, budget)
    except InvalidSelection:
        return False
    return True


def weight_arrays(g: SourceGraph, m: Model, feats: GraphFeatures) -> tuple[np.ndarray, np.ndarray]:
    """Per-node and per-edge scores under ``m``."""
    node_w = np.array([0.0 if i == g.root else feats.nodes[i].dot(m.node_weights)
                       for i in range(len(g.nodes))], dtype=np.float64)
    edge_w = np.array([0.0 if e.is_snt_root else feats.edges[k].dot(m.edge_weights)
                       for k, e in enumerate(g.edges)], dtype=np.float64)
    return node_w, edge_w


def _fold_cost(g: SourceGraph, node_w, edge_w, spec: CostSpec | None):
    if spec is None:
        return node_w, edge_w, 0.0
    gold_nodes = spec.gold.content_nodes(g.root)
    node_s = np.array([0.0 if i == g.root else (-1.0 if i in gold_nodes else 1.0) for i in range(len(g.nodes))])
    edge_s = np.array([-1.0 if k in spec.gold.edges else 1.0 for k in range(len(g.edges))])
    const = float(len(gold_nodes) + len(spec.gold.edges))
    if spec.sign is CostMode.PLUS:
        return node_w + node_s, edge_w + edge_s, const
    if spec.sign is CostMode.MINUS:
        return node_w - node_s, edge_w - edge_s, -const
    return -node_s, -edge_s, -const


def _sum(node_w, edge_w, sel: Selection) -> float:
    return math.fsum([node_w[i] for i in sel.nodes] + [edge_w[k] for k in sel.edges])


def score_arrays(sel: Selection, node_w, edge_w) -> float:
    return _sum(node_w, edge_w, sel)


def score(sel: Selection, g: SourceGraph, m: Model, feats: GraphFeatures) -> float:
    check_selection(sel, g)
    node_w, edge_w = weight_arrays(g, m, feats)
    return _sum(node_w, edge_w, sel)


def objective(sel: Selection, g: SourceGraph, m: Model, feats: GraphFeatures, spec: CostSpec | None = None) -> float:
    """Score adjusted by the cost term of ``spec`` (the quantity decoding maximizes)."""
    node_w, edge_w = weight_arrays(g, m, feats)
    return objective_arrays(sel, g, node_w, edge_w, spec)


def objective_arrays(sel: Selection, g: SourceGraph, node_w, edge_w, spec: CostSpec | None = None) -> float:
    s = _sum(node_w, edge_w, sel)
    if spec is None:
        return s
    c = cost(sel, spec.gold)
    if spec.sign is CostMode.PLUS:
        return s + c
    if spec.sign is CostMode.MINUS:
        return s - c
    return float(-c)


def decode_arrays(g: SourceGraph, node_w, edge_w, budget: int, spec: CostSpec | None = None,
                  max_expansions: int = DEFAULT_MAX_EXPANSIONS, strict: bool = False) -> Selection:
    if spec is not None:
        check_selection(spec.gold, g)
    w_n, w_e, _ = _fold_cost(g, np.asarray(node_w, dtype=np.float64), np.asarray(edge_w, dtype=np.float64), spec)
    a = g.arrays
    mask, parent, expansions, timed_out = bnb_max_subtree(
        w_n, a["src"], a["dst"], w_e, a["out_ptr"], a["out_idx"], a["in_ptr"], a["in_idx"],
        int(budget), int(max_expansions), TIE_EPS,
    )
    nodes = frozenset(int(i) for i in np.flatnonzero(mask))
    edges = frozenset(int(parent[i]) for i in nodes if i != g.root)
    sel = Selection(nodes, edges, optimal=not timed_out)
    if timed_out:
        if strict:
            raise DecodeTimeout(sel, int(expansions))
        log.warning("decode\ttimeout\texpansions\t%d", expansions)
    return sel


def decode(g: SourceGraph, m: Model, feats: GraphFeatures, cost: CostSpec | None = None, *,
           max_expansions: int = DEFAULT_MAX_EXPANSIONS, strict: bool = False) -> Selection:
    """Exact argmax of the (cost-adjusted) score by branch and bound.

    On hitting ``max_expansions`` the best selection found so far is returned
    with ``optimal=False``, or :class:`DecodeTimeout` is raised if ``strict``.
    """
    node_w, edge_w = weight_arrays(g, m, feats)
    return decode_arrays(g, node_w, edge_w, m.budget, cost, max_expansions, strict)


def brute_force_arrays(g: SourceGraph, node_w, edge_w, budget: int, spec: CostSpec | None = None,
                       max_nodes: int = 14) -> Selection:
    if len(g.nodes) > max_nodes:
        raise TooLarge(f"{len(g.nodes)} nodes exceeds the brute-force limit of {max_nodes}")
    w_n, w_e, _ = _fold_cost(g, np.asarray(node_w, dtype=np.float64), np.asarray(edge_w, dtype=np.float64), spec)
    content = [i for i in range(len(g.nodes)) if i != g.root]
    best, best_val, best_key = None, -math.inf, None
    for size in range(0, min(budget, len(content)) + 1):
        for chosen in itertools.combinations(content, size):
            members = {g.root, *chosen}
            options = [[k for k in g.in_edges(v) if g.edges[k].source in members and g.edges[k].source != v]
                       for v in chosen]
            if any(not o for o in options):
                continue
            for parents in itertools.product(*options):
                sel = Selection(frozenset(members), frozenset(parents))
                if not _connected(g, sel, chosen, parents):
                    continue
                val = _sum(w_n, w_e, sel)
                key = sel.sort_key()
                if val > best_val + TIE_EPS or (abs(val - best_val) <= TIE_EPS and key < best_key):
                    best, best_val, best_key = sel, val, key
    if best is None:
        raise Infeasible("no rooted subtree exists")
    return best


def _connected(g: SourceGraph, sel: Selection, chosen, parents) -> bool:
    parent_of = {v: g.edges[k].source for v, k in zip(chosen, parents)}
    for v in chosen:
        steps = 0
        while v != g.root:
            v = parent_of[v]
            steps += 1
            if steps > len(chosen):
                return False
    return True


def brute_force_decode(g: SourceGraph, m: Model, feats: GraphFeatures, cost: CostSpec | None = None,
                       max_nodes: int = 14) -> Selection:
    """Exhaustive search over every rooted subtree; a test oracle for :func:`decode`."""
    node_w, edge_w = weight_arrays(g, m, feats)
    return brute_force_arrays(g, node_w, edge_w, m.budget, cost, max_nodes)


def summary_graph(sel: Selection, g: SourceGraph) -> AmrGraph:
    """The selected subtree as an AMR graph, without the synthetic ROOT.

    A selection hanging off ROOT through several sentence roots is joined
    under a ``multi-sentence`` concept with ``:snt1``, ``:snt2``, ... edges;
    an empty selection becomes a lone ``multi-sentence`` node.
    """
    content = sorted(sel.content_nodes(g.root))
    tops = sorted(g.edges[k].target for k in sel.edges if g.edges[k].source == g.root)
    nodes: list[Concept] = []
    edges: list[Relation] = []
    offset = 0
    if len(tops) != 1:
        nodes.append(Concept.make("multi-sentence"))
        offset = 1
    index = {v: t + offset for t, v in enumerate(content)}
    for v in content:
        c = g.nodes[v].concept
        nodes.append(Concept(c.label, c.kind, None, c.quoted, c.span))
    if offset:
        for t, v in enumerate(tops, start=1):
            edges.append(Relation(0, f"snt{t}", index[v]))
    for k in sorted(sel.edges, key=lambda k: (g.edges[k].source, g.edges[k].target, k)):
        e = g.edges[k]
        if e.source != g.root:
            edges.append(Relation(index[e.source], e.label, index[e.target]))
    root = 0 if offset else index[tops[0]]
    return AmrGraph(nodes, edges, root)
