"""Learning node and edge weights with structured perceptron or ramp loss."""
from __future__ import annotations

import logging
import math
import random
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .amr import AmrGraph
from .decoder import (DEFAULT_BUDGET, DEFAULT_MAX_EXPANSIONS, CostMode, CostSpec, Model, Selection,
                      check_selection, decode_arrays, objective_arrays, weight_arrays)
from .features import GraphFeatures, extract_features
from .graph_builder import SourceGraph, collapse_entities, merge_key

log = logging.getLogger(__name__)

MODEL_HEADER = "amr-summ-model v1"


class Loss(str, Enum):
    PERCEPTRON = "perc"
    RAMP = "ramp"


@dataclass
class TrainingInstance:
    source: SourceGraph
    gold: Selection
    instance_id: str = ""
    features: GraphFeatures | None = None
    # fraction of gold concepts found in the source graph
    coverage: float = 1.0

    def __post_init__(self):
        check_selection(self.gold, self.source)
        if self.features is None:
            self.features = extract_features(self.source)

    @property
    def reachable(self) -> bool:
        return self.coverage >= 1.0


@dataclass(frozen=True)
class TrainConfig:
    loss: Loss = Loss.RAMP
    epochs: int = 20
    step_size: float = 0.1
    seed: int = 0
    averaging: bool = True
    budget: int = DEFAULT_BUDGET
    max_expansions: int = DEFAULT_MAX_EXPANSIONS
    batch_size: int = 1
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss(self.loss))
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ValueError("step size must be positive")
        if self.budget < 1:
            raise ValueError("budget L must be >= 1")
        if self.batch_size < 1 or self.jobs < 1:
            raise ValueError("batch size and jobs must be >= 1")


@dataclass
class Gradient:
    """Sparse subgradient with respect to node weights and edge weights."""
    node: dict[str, float] = field(default_factory=dict)
    edge: dict[str, float] = field(default_factory=dict)

    def is_zero(self) -> bool:
        return not any(self.node.values()) and not any(self.edge.values())

    def add(self, other: "Gradient") -> None:
        for mine, theirs in ((self.node, other.node), (self.edge, other.edge)):
            for k, v in theirs.items():
                mine[k] = mine.get(k, 0.0) + v


def selection_features(sel: Selection, g: SourceGraph, feats: GraphFeatures) -> tuple[Counter, Counter]:
    """Summed node and edge feature counts of a selection (``:snt-root`` edges excluded)."""
    nodes: Counter = Counter()
    edges: Counter = Counter()
    for i in sel.nodes:
        nodes.update(feats.nodes[i])
    for k in sel.edges:
        if not g.edges[k].is_snt_root:
            edges.update(feats.edges[k])
    return nodes, edges


def _difference(a: Selection, b: Selection, g: SourceGraph, feats: GraphFeatures) -> Gradient:
    na, ea = selection_features(a, g, feats)
    nb, eb = selection_features(b, g, feats)
    grad = Gradient()
    for mine, x, y in ((grad.node, na, nb), (grad.edge, ea, eb)):
        for k in set(x) | set(y):
            d = x.get(k, 0) - y.get(k, 0)
            if d:
                mine[k] = float(d)
    return grad


def _decode(inst: TrainingInstance, m: Model, spec, max_expansions: int):
    node_w, edge_w = weight_arrays(inst.source, m, inst.features)
    sel = decode_arrays(inst.source, node_w, edge_w, m.budget, spec, max_expansions)
    if not sel.optimal:
        log.warning("train\ttimeout\tinstance\t%s", inst.instance_id)
    return sel, node_w, edge_w


def perceptron_loss(inst: TrainingInstance, m: Model,
                    max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> tuple[float, Gradient]:
    """score(decoded) - score(gold) and its subgradient."""
    pred, node_w, edge_w = _decode(inst, m, None, max_expansions)
    if pred == inst.gold:
        return 0.0, Gradient()
    loss = objective_arrays(pred, inst.source, node_w, edge_w) - objective_arrays(inst.gold, inst.source, node_w, edge_w)
    return loss, _difference(pred, inst.gold, inst.source, inst.features)


def ramp_loss(inst: TrainingInstance, m: Model,
              max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> tuple[float, Gradient]:
    """max(score + cost) - max(score - cost) and its subgradient."""
    plus_spec = CostSpec(inst.gold, CostMode.PLUS)
    minus_spec = CostSpec(inst.gold, CostMode.MINUS)
    g_plus, node_w, edge_w = _decode(inst, m, plus_spec, max_expansions)
    g_minus, _, _ = _decode(inst, m, minus_spec, max_expansions)
    loss = (objective_arrays(g_plus, inst.source, node_w, edge_w, plus_spec)
            - objective_arrays(g_minus, inst.source, node_w, edge_w, minus_spec))
    if g_plus == g_minus:
        return loss, Gradient()
    return loss, _difference(g_plus, g_minus, inst.source, inst.features)


LOSSES = {Loss.PERCEPTRON: perceptron_loss, Loss.RAMP: ramp_loss}


class _AveragedWeights:
    """Weights plus the bookkeeping for a lazily computed running average."""

    def __init__(self, initial: dict[str, float]):
        self.w = dict(initial)
        self.u: dict[str, float] = {}

    def step(self, grad: dict[str, float], eta: float, s: int) -> None:
        # the update made at step s is absent from the s - 1 earlier snapshots
        for k, g in grad.items():
            delta = -eta * g
            self.w[k] = self.w.get(k, 0.0) + delta
            self.u[k] = self.u.get(k, 0.0) + (s - 1) * delta

    def average(self, steps: int) -> dict[str, float]:
        """Mean of the weights after each of ``steps`` steps."""
        out = {}
        for k, v in self.w.items():
            a = v - self.u.get(k, 0.0) / steps
            if a != 0.0:
                out[k] = a
        return out

    def current(self) -> dict[str, float]:
        return {k: v for k, v in self.w.items() if v != 0.0}


def train(instances: Sequence[TrainingInstance], config: TrainConfig = TrainConfig(),
          initial: Model | None = None) -> Model:
    """Subgradient descent over shuffled instances; returns the (averaged) model.

    Each epoch logs ``epoch<TAB>k<TAB>loss<TAB>mean loss``.
    """
    if not instances:
        raise ValueError("no training instances")
    loss_fn = LOSSES[config.loss]
    rng = random.Random(config.seed)
    node = _AveragedWeights(initial.node_weights if initial else {})
    edge = _AveragedWeights(initial.edge_weights if initial else {})
    order = list(range(len(instances)))
    steps = 0
    pool = ThreadPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            rng.shuffle(order)
            losses = []
            for start in range(0, len(order), config.batch_size):
                batch = [instances[i] for i in order[start:start + config.batch_size]]
                m = Model(node.current(), edge.current(), config.budget)
                if pool is not None and len(batch) > 1:
                    results = list(pool.map(lambda inst: loss_fn(inst, m, config.max_expansions), batch))
                else:
                    results = [loss_fn(inst, m, config.max_expansions) for inst in batch]
                grad = Gradient()
                for loss, g in results:
                    losses.append(loss)
                    grad.add(g)
                steps += 1
                if not grad.is_zero():
                    node.step(grad.node, config.step_size, steps)
                    edge.step(grad.edge, config.step_size, steps)
            log.info("epoch\t%d\tloss\t%r", epoch, math.fsum(losses) / len(losses))
    finally:
        if pool is not None:
            pool.shutdown()
    if config.averaging:
        return Model(node.average(steps), edge.average(steps), config.budget)
    return Model(node.current(), edge.current(), config.budget)


# ---------------------------------------------------------------- gold projection


def project_gold(gold: AmrGraph, g: SourceGraph) -> tuple[Selection, float]:
    """Map a reference AMR onto ``g`` and repair it into a rooted tree.

    Concepts map by merge key and gold edges are kept when the same relation
    joins the mapped nodes in ``g``.  Kept nodes are then connected to ROOT
    along a shortest-path tree that prefers kept edges.  Returns the selection
    and the fraction of (collapsed) gold concepts that were mapped.
    """
    cg = collapse_entities(gold)
    keys = g.key_index()
    mapped: dict[int, int] = {}
    for i, c in enumerate(cg.nodes):
        if not c.is_literal and merge_key(c) in keys:
            mapped[i] = keys[merge_key(c)]
    kept_edges: set[int] = set()
    for r in cg.edges:
        a = mapped.get(r.source)
        if a is None:
            continue
        want = merge_key(cg.nodes[r.target])
        for k in g.out_edges(a):
            e = g.edges[k]
            if e.label != r.label or g.nodes[e.target].merge_key != want:
                continue
            if cg.nodes[r.target].is_literal:
                mapped.setdefault(r.target, e.target)
            if mapped.get(r.target) == e.target:
                kept_edges.add(k)
                break
    coverage = len(mapped) / len(cg.nodes)
    targets = set(mapped.values())
    if not targets:
        return Selection.root_only(g.root), coverage

    # 0-1 BFS: kept edges are free, any other edge costs one
    n = len(g.nodes)
    dist = [math.inf] * n
    parent = [-1] * n
    dist[g.root] = 0
    dq = deque([g.root])
    while dq:
        u = dq.popleft()
        for k in g.out_edges(u):
            v = g.edges[k].target
            w = 0 if k in kept_edges else 1
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                parent[v] = k
                if w == 0:
                    dq.appendleft(v)
                else:
                    dq.append(v)
    nodes, edges = {g.root}, set()
    for t in sorted(targets):
        v = t
        while v != g.root and v not in nodes:
            nodes.add(v)
            edges.add(parent[v])
            v = g.edges[parent[v]].source
    return Selection(frozenset(nodes), frozenset(edges)), coverage


# ---------------------------------------------------------------- model files


class ModelFormatError(ValueError):
    pass


def format_model(m: Model) -> str:
    """Model file text; weights use ``repr`` so they reload bit-identically."""
    lines = [MODEL_HEADER, f"L\t{m.budget}"]
    for kind, weights in (("node", m.node_weights), ("edge", m.edge_weights)):
        for name in sorted(weights):
            lines.append(f"{kind}\t{name}\t{weights[name]!r}")
    return "\n".join(lines) + "\n"


def save_model(m: Model, path: str | Path) -> None:
    Path(path).write_text(format_model(m), encoding="utf-8")


def load_model(path: str | Path) -> Model:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != MODEL_HEADER:
        raise ModelFormatError(f"{path}: missing header {MODEL_HEADER!r}")
    node, edge, budget = {}, {}, None
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            if parts[0] == "L" and len(parts) == 2:
                budget = int(parts[1])
            elif parts[0] in ("node", "edge") and len(parts) == 3:
                (node if parts[0] == "node" else edge)[parts[1]] = float(parts[2])
            else:
                raise ValueError(line)
        except ValueError:
            raise ModelFormatError(f"{path}:{lineno}: malformed line") from None
    try:
        return Model(node, edge, DEFAULT_BUDGET if budget is None else budget)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
