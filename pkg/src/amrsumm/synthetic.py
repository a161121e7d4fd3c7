"""Seeded random data: AMR graphs, source graphs, topic corpora and training sets.

Used by the test-suite, the acceptance checks and the benchmarks.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .amr import AmrGraph, Concept, ConceptKind, Relation
from .decoder import Selection
from .features import FeatureVector, GraphFeatures
from .graph_builder import SNT_ROOT, SourceEdge, SourceGraph, SourceNode, merge_key
from .trainer import TrainingInstance

FRAMES = ["state-01", "say-01", "attack-01", "launch-01", "test-01", "want-01", "warn-01",
          "develop-02", "meet-03", "sign-01", "report-01", "visit-01"]
WORDS = ["boy", "girl", "warhead", "missile", "country", "city", "official", "weapon",
         "government", "treaty", "army", "island", "ship", "plan", "year"]
RELATIONS = ["ARG0", "ARG1", "ARG2", "mod", "time", "location", "manner", "op1", "op2", "poss"]
LITERALS = ["Japan", "Korea", "2002", "5", "Hello world", 'say "hi"', "New York"]


def random_amr(rng: random.Random, max_nodes: int = 20, p_reentrancy: float = 0.3,
               p_literal: float = 0.3) -> AmrGraph:
    """A random rooted DAG: a random tree plus optional extra forward edges."""
    n = rng.randint(1, max_nodes)
    nodes: list[Concept] = [Concept.make(rng.choice(FRAMES + WORDS))]
    edges: list[Relation] = []
    seen = set()
    for i in range(1, n):
        parents = [j for j in range(i) if not nodes[j].is_literal]
        p = rng.choice(parents)
        if rng.random() < p_literal / 2:
            value = rng.choice(LITERALS)
            nodes.append(Concept.literal(value, quoted=not value.isdigit()))
        else:
            nodes.append(Concept.make(rng.choice(FRAMES + WORDS)))
        label = rng.choice(RELATIONS)
        seen.add((p, label, i))
        edges.append(Relation(p, label, i))
    if rng.random() < p_literal and not any(c.is_literal for c in nodes):
        p = rng.choice([j for j in range(len(nodes)) if not nodes[j].is_literal])
        nodes.append(Concept.literal(rng.choice(LITERALS)))
        edges.append(Relation(p, "value", len(nodes) - 1))
    if rng.random() < p_reentrancy:
        # forward edges between concepts keep the graph acyclic
        candidates = [(a, b) for a in range(len(nodes)) for b in range(a + 1, len(nodes))
                      if not nodes[a].is_literal and not nodes[b].is_literal]
        rng.shuffle(candidates)
        for a, b in candidates[:rng.randint(1, 2)]:
            label = rng.choice(RELATIONS)
            if (a, label, b) not in seen:
                seen.add((a, label, b))
                edges.append(Relation(a, label, b))
    return AmrGraph(nodes, edges, 0)


def random_source_graph(rng: random.Random, n_nodes: int, n_sentences: int = 2,
                        extra_edges: int | None = None) -> SourceGraph:
    """A random connected source graph with ``n_nodes`` nodes including ROOT.

    Cycles and parallel edges with distinct labels may occur, as they can
    after merging real sentences.
    """
    n_nodes = max(n_nodes, 2)
    n_sentences = max(1, min(n_sentences, n_nodes - 1))
    labels = rng.sample(FRAMES + WORDS, k=min(n_nodes - 1, len(FRAMES + WORDS)))
    while len(labels) < n_nodes - 1:
        labels.append(f"concept{len(labels)}")
    nodes = [SourceNode(Concept("ROOT", ConceptKind.KEYWORD), frozenset(), "ROOT")]
    for i, label in enumerate(labels, start=1):
        c = Concept.make(label)
        nodes.append(SourceNode(c, frozenset({(0, i)}), merge_key(c)))
    edges: list[SourceEdge] = []
    seen = set()

    def add(label, a, b):
        if a != b and (label, a, b) not in seen:
            seen.add((label, a, b))
            edges.append(SourceEdge(label, a, b, frozenset({0})))

    for s in range(1, n_sentences + 1):
        add(SNT_ROOT, 0, s)
    for v in range(n_sentences + 1, n_nodes):
        add(rng.choice(RELATIONS), rng.randint(1, v - 1), v)
    if extra_edges is None:
        extra_edges = rng.randint(0, n_nodes)
    for _ in range(extra_edges):
        if n_nodes > 2:
            a, b = rng.sample(range(1, n_nodes), 2)
            add(rng.choice(RELATIONS), a, b)
    return SourceGraph(tuple(nodes), tuple(edges), 0)


def unique_features(g: SourceGraph) -> GraphFeatures:
    """One private feature per node and per edge, so weights act per item."""
    return GraphFeatures(
        nodes=tuple(FeatureVector() if i == g.root else FeatureVector([f"n{i}"]) for i in range(len(g.nodes))),
        edges=tuple(FeatureVector(["snt-root"]) if e.is_snt_root else FeatureVector([f"e{k}"])
                    for k, e in enumerate(g.edges)),
    )


def random_subtree(rng: random.Random, g: SourceGraph, max_nodes: int) -> Selection:
    """A random rooted subtree of ``g`` with between 1 and ``max_nodes`` content nodes."""
    target = rng.randint(1, max(1, max_nodes))
    nodes, edges = {g.root}, set()
    while len(nodes) - 1 < target:
        frontier = [k for k, e in enumerate(g.edges) if e.source in nodes and e.target not in nodes]
        if not frontier:
            break
        k = rng.choice(frontier)
        nodes.add(g.edges[k].target)
        edges.add(k)
    return Selection(frozenset(nodes), frozenset(edges))


def separable_features(g: SourceGraph, gold: Selection) -> GraphFeatures:
    """Features that mark gold membership, plus a per-label feature.

    The weights ``tag=in`` > 0 and ``tag=out`` < 0 decode exactly ``gold``.
    """
    nodes = []
    for i, node in enumerate(g.nodes):
        if i == g.root:
            nodes.append(FeatureVector())
        else:
            nodes.append(FeatureVector([f"label={node.merge_key}", "tag=in" if i in gold.nodes else "tag=out"]))
    edges = []
    for k, e in enumerate(g.edges):
        if e.is_snt_root:
            edges.append(FeatureVector(["snt-root"]))
        else:
            edges.append(FeatureVector([f"rel={e.label}", "etag=in" if k in gold.edges else "etag=out"]))
    return GraphFeatures(tuple(nodes), tuple(edges))


def separable_training_set(rng: random.Random, n: int = 10, n_nodes: tuple[int, int] = (6, 12),
                           budget: int = 5) -> list[TrainingInstance]:
    """Instances whose gold subtrees are reachable and marked by separable features."""
    out = []
    for i in range(n):
        g = random_source_graph(rng, rng.randint(*n_nodes), n_sentences=rng.randint(1, 3))
        gold = random_subtree(rng, g, budget)
        out.append(TrainingInstance(g, gold, f"syn{i}", separable_features(g, gold)))
    return out


def _label_pool(rng: random.Random, k: int) -> list[str]:
    pool = FRAMES + WORDS + [f"thing{i}" for i in range(k)]
    return rng.sample(pool, k)


def synthetic_cluster(rng: random.Random, n_gold: tuple[int, int] = (4, 7), n_sentences: tuple[int, int] = (3, 5),
                      n_missing: tuple[int, int] = (0, 2), n_noise: int = 4) -> tuple[list[AmrGraph], AmrGraph]:
    """Sentence AMRs for one cluster and a reference summary AMR.

    The summary is a random tree.  Each sentence repeats a rooted fragment of
    it and adds concepts of its own; up to ``n_missing`` summary leaves never
    appear in any sentence, so the reference is only partly reachable.
    """
    k = rng.randint(*n_gold)
    s = rng.randint(*n_sentences)
    labels = _label_pool(rng, k + s * n_noise)
    gold_labels, noise = labels[:k], labels[k:]
    parent = [-1] + [rng.randrange(i) for i in range(1, k)]
    rel = [""] + [rng.choice(RELATIONS) for _ in range(1, k)]
    gold = AmrGraph([Concept.make(x) for x in gold_labels], [Relation(parent[i], rel[i], i) for i in range(1, k)], 0)
    leaves = [i for i in range(1, k) if i not in parent]
    missing = set(rng.sample(leaves, min(len(leaves), rng.randint(*n_missing))))
    sentences = []
    for j in range(s):
        keep = {0}
        for i in range(1, k):
            if i not in missing and parent[i] in keep and rng.random() < 0.75:
                keep.add(i)
        order = sorted(keep)
        index = {i: pos for pos, i in enumerate(order)}
        nodes = [Concept.make(gold_labels[i]) for i in order]
        edges = [Relation(index[parent[i]], rel[i], index[i]) for i in order[1:]]
        for x in noise[j * n_noise:(j + 1) * n_noise][:rng.randint(1, n_noise)]:
            edges.append(Relation(rng.randrange(len(nodes)), rng.choice(RELATIONS), len(nodes)))
            nodes.append(Concept.make(x))
        sentences.append(AmrGraph(nodes, edges, 0))
    return sentences, gold


# ---------------------------------------------------------------- text corpora


TOPIC_VOCABULARIES = [
    ["missile", "warhead", "launch", "rocket", "test", "range", "nuclear", "ballistic", "silo", "payload"],
    ["election", "vote", "ballot", "candidate", "campaign", "poll", "senate", "party", "turnout", "debate"],
    ["storm", "flood", "rain", "river", "evacuate", "shelter", "wind", "damage", "coast", "levee"],
    ["market", "stock", "trader", "price", "index", "bond", "investor", "shares", "profit", "dividend"],
    ["vaccine", "virus", "clinic", "doctor", "patient", "trial", "dose", "infection", "hospital", "nurse"],
]


@dataclass(frozen=True)
class PlantedCorpus:
    sentences: tuple[str, ...]
    topics: tuple[int, ...]


def planted_topic_corpus(rng: random.Random, n_topics: int = 3, per_topic: int = 10,
                         length: tuple[int, int] = (6, 10)) -> PlantedCorpus:
    """Sentences drawn from disjoint topic vocabularies, in shuffled order."""
    if n_topics > len(TOPIC_VOCABULARIES):
        raise ValueError(f"at most {len(TOPIC_VOCABULARIES)} topics available")
    items = []
    for t in range(n_topics):
        vocab = TOPIC_VOCABULARIES[t]
        for _ in range(per_topic):
            words = [rng.choice(vocab) for _ in range(rng.randint(*length))]
            items.append((" ".join(words).capitalize() + ".", t))
    rng.shuffle(items)
    return PlantedCorpus(tuple(s for s, _ in items), tuple(t for _, t in items))


def topic_amr(words: list[str]) -> AmrGraph:
    """A small AMR for a bag of topic words: the first word heads the rest."""
    uniq = list(dict.fromkeys(words))
    nodes = [Concept.make(w) for w in uniq]
    edges = [Relation(0, f"op{i}", i) for i in range(1, len(uniq))]
    return AmrGraph(nodes, edges, 0)
