"""Merging sentence AMR graphs into one connected source graph."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .amr import AmrGraph, Concept, ConceptKind, EmptyInput, InvalidGraph, Relation
from .text import tokenize

ROOT_LABEL = "ROOT"
SNT_ROOT = "snt-root"
_SENSE_RE = re.compile(r"-\d\d$")
_UNSAFE_RE = re.compile(r'[\s()"/]+')


def merge_key(c: Concept) -> str:
    """Surface form used to decide which concepts merge."""
    if c.kind is ConceptKind.FRAME:
        return _SENSE_RE.sub("", c.label)
    if c.kind is ConceptKind.LITERAL:
        return "lit:" + c.label
    if c.kind is ConceptKind.MEGA:
        return c.label
    return c.label.lower()


def surface_words(c: Concept) -> list[str]:
    """Rough surface words of a concept, for lexicon lookups and mention matching."""
    if c.kind is ConceptKind.MEGA:
        ops, values = [], []
        for part in c.label.split("_:")[1:]:
            rel, _, value = part.partition("_")
            words = [w for w in value.lower().split("_") if w]
            values.extend(words)
            if rel.startswith("op"):
                ops.extend(words)
        return ops or values
    if c.kind is ConceptKind.LITERAL:
        return c.label.lower().split()
    return [merge_key(c).lower()]


# ---------------------------------------------------------------- entities


def _descendants(g: AmrGraph, start: int, taken: set[int]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for k in g.out_edges(u):
            v = g.edges[k].target
            if v not in seen and v not in taken:
                seen.add(v)
                stack.append(v)
    return seen


def _entity_groups(g: AmrGraph) -> list[tuple[int, set[int], int]]:
    """(head, members, literal word count) for each date or named entity."""
    groups = []
    taken: set[int] = set()
    for i, c in enumerate(g.nodes):
        if i in taken or c.is_literal:
            continue
        if c.label == "date-entity":
            members = _descendants(g, i, taken)
            span = sum(1 for x in members if g.nodes[x].is_literal)
        else:
            name_targets = [g.edges[k].target for k in g.out_edges(i)
                            if g.edges[k].label == "name" and g.nodes[g.edges[k].target].label == "name"]
            if not name_targets:
                continue
            members = {i}
            for t in name_targets:
                members |= _descendants(g, t, taken | {i})
            span = sum(1 for x in members if g.nodes[x].is_literal)
            for k in g.out_edges(i):
                r = g.edges[k]
                if r.label == "wiki" and g.nodes[r.target].is_literal:
                    members.add(r.target)
        taken |= members
        groups.append((i, members, max(span, 1)))
    return groups


def _mega_label(g: AmrGraph, head: int, members: set[int]) -> str:
    parts = [_UNSAFE_RE.sub("_", g.nodes[head].label)]
    seen = {head}

    def walk(u):
        for k in sorted(g.out_edges(u), key=lambda k: (g.edges[k].target, k)):
            r = g.edges[k]
            if r.target not in members or r.target in seen:
                continue
            seen.add(r.target)
            parts.append(f":{r.label}")
            parts.append(_UNSAFE_RE.sub("_", g.nodes[r.target].label))
            walk(r.target)

    walk(head)
    return "_".join(parts)


def collapse_with_mapping(g: AmrGraph) -> tuple[AmrGraph, list[int]]:
    """Collapse entity subtrees; also return old node index -> new node index."""
    groups = _entity_groups(g)
    if not groups:
        return g, list(range(len(g.nodes)))
    owner = {}
    for head, members, span in groups:
        for x in members:
            owner[x] = head
    spans = {head: span for head, _, span in groups}
    heads = {head: members for head, members, _ in groups}
    mapping = [-1] * len(g.nodes)
    nodes: list[Concept] = []
    for i, c in enumerate(g.nodes):
        if i in owner and owner[i] != i:
            continue
        mapping[i] = len(nodes)
        if i in heads:
            label = _mega_label(g, i, heads[i])
            nodes.append(Concept(label=label, kind=ConceptKind.MEGA, variable=c.variable, span=spans[i]))
        else:
            nodes.append(c)
    for i in range(len(g.nodes)):
        if mapping[i] < 0:
            mapping[i] = mapping[owner[i]]
    edges, seen = [], set()
    for r in g.edges:
        if r.source in owner and owner.get(r.target) == owner[r.source]:
            continue
        s, t = mapping[r.source], mapping[r.target]
        if s == t or (s, r.label, t) in seen:
            continue
        seen.add((s, r.label, t))
        edges.append(Relation(s, r.label, t))
    return AmrGraph(nodes, edges, mapping[g.root], metadata=g.metadata), mapping


def collapse_entities(g: AmrGraph) -> AmrGraph:
    """Replace date-entity subtrees and named entities by single mega-nodes.

    >>> from amrsumm.amr import parse_penman
    >>> collapse_entities(parse_penman('(d / date-entity :year 2002 :month 1 :day 5)')).nodes[0].label
    'date-entity_:year_2002_:month_1_:day_5'
    """
    return collapse_with_mapping(g)[0]


# ---------------------------------------------------------------- coreference


@dataclass(frozen=True)
class MentionClusters:
    """Coreferent mentions as (sentence index, (start token, end token exclusive))."""
    clusters: tuple[frozenset[tuple[int, tuple[int, int]]], ...]

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(frozenset(c) for c in self.clusters))
        seen = set()
        for c in self.clusters:
            if seen & c:
                raise ValueError("mention clusters must be pairwise disjoint")
            seen |= c

    def remap(self, sentence_map: Mapping[int, int]) -> "MentionClusters":
        """Renumber sentences, dropping mentions of sentences not in ``sentence_map``."""
        out = []
        for c in self.clusters:
            kept = frozenset((sentence_map[s], span) for s, span in c if s in sentence_map)
            if len(kept) >= 2:
                out.append(kept)
        return MentionClusters(tuple(out))


def read_mention_clusters(path: str | Path) -> MentionClusters:
    """One cluster per line, entries ``sentence:start-end`` separated by spaces."""
    clusters = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cluster = set()
        for item in line.split():
            m = re.fullmatch(r"(\d+):(\d+)-(\d+)", item)
            if m is None:
                raise ValueError(f"line {lineno}: bad mention {item!r}")
            s, a, b = map(int, m.groups())
            if b <= a:
                raise ValueError(f"line {lineno}: empty span {item!r}")
            cluster.add((s, (a, b)))
        clusters.append(frozenset(cluster))
    return MentionClusters(tuple(clusters))


def _resolve_address(g: AmrGraph, address: str) -> int | None:
    parts = address.split(".")
    if parts[0] != "0":
        return None
    node = g.root
    for p in parts[1:]:
        kids = g.out_edges(node)
        if not p.isdigit() or int(p) >= len(kids):
            return None
        node = g.edges[kids[int(p)]].target
    return node


def _aligned_nodes(g: AmrGraph, start: int, end: int) -> list[int]:
    # JAMR-style "a-b|0.1+0.1.0"; address steps index outgoing edges in order
    found = []
    for item in g.metadata.get("alignments", "").split():
        span, _, addresses = item.partition("|")
        m = re.fullmatch(r"(\d+)-(\d+)", span)
        if m is None:
            continue
        a, b = int(m.group(1)), int(m.group(2))
        if a < end and start < b:
            for addr in addresses.split("+"):
                node = _resolve_address(g, addr)
                if node is not None:
                    found.append((addr.count("."), node))
    return [node for _, node in sorted(found)]


def _mention_node(original: AmrGraph, collapsed: AmrGraph, mapping: list[int], span: tuple[int, int]) -> int | None:
    start, end = span
    aligned = _aligned_nodes(original, start, end)
    if aligned:
        return mapping[aligned[0]]
    text = original.metadata.get("tok") or original.metadata.get("snt") or ""
    words = set(tokenize(text)[start:end])
    if not words:
        return None
    best, best_hits = None, 0
    for i, c in enumerate(collapsed.nodes):
        if c.is_literal:
            continue
        sw = surface_words(c)
        hits = sum(1 for w in sw if w in words)
        if sw and hits == len(sw) and hits > best_hits:
            best, best_hits = i, hits
    return best


# ---------------------------------------------------------------- source graph


@dataclass(frozen=True)
class SourceNode:
    concept: Concept
    provenance: frozenset[tuple[int, int]]
    merge_key: str

    @property
    def label(self) -> str:
        return self.concept.label


@dataclass(frozen=True)
class SourceEdge:
    label: str
    source: int
    target: int
    provenance: frozenset[int]

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.source, self.target

    @property
    def is_snt_root(self) -> bool:
        return self.label == SNT_ROOT


@dataclass(frozen=True)
class SourceGraph:
    """Merged graph of a sentence cluster; node 0 is the synthetic ROOT."""
    nodes: tuple[SourceNode, ...]
    edges: tuple[SourceEdge, ...]
    root: int = 0
    sentences: tuple[AmrGraph, ...] = ()
    positions: tuple[int, ...] = ()
    documents: tuple[int, ...] = ()
    # (sentence index, collapsed node index) -> source node id
    node_of: Mapping[tuple[int, int], int] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        for name in ("nodes", "edges", "sentences", "positions", "documents"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.nodes)
        if self.root != 0 or n == 0:
            raise InvalidGraph("node 0 must be the ROOT")
        for i, node in enumerate(self.nodes):
            if i != self.root and not node.provenance:
                raise InvalidGraph(f"node {i} has empty provenance")
        for e in self.edges:
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise InvalidGraph(f"edge {e} has an endpoint out of range")
            if not e.provenance:
                raise InvalidGraph(f"edge {e} has empty provenance")
        if len(self.reachable()) != n:
            raise InvalidGraph("source graph is not connected from ROOT")

    def __len__(self):
        return len(self.nodes)

    @cached_property
    def _adjacency(self):
        out = [[] for _ in self.nodes]
        inc = [[] for _ in self.nodes]
        for k, e in enumerate(self.edges):
            out[e.source].append(k)
            inc[e.target].append(k)
        return out, inc

    def out_edges(self, i: int) -> list[int]:
        return self._adjacency[0][i]

    def in_edges(self, i: int) -> list[int]:
        return self._adjacency[1][i]

    def reachable(self) -> set[int]:
        seen = {self.root}
        stack = [self.root]
        out = self._adjacency[0]
        while stack:
            u = stack.pop()
            for k in out[u]:
                v = self.edges[k].target
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        """Edge lists and CSR adjacency as int64 arrays, for the decoding kernel."""
        src = np.array([e.source for e in self.edges], dtype=np.int64)
        dst = np.array([e.target for e in self.edges], dtype=np.int64)
        n = len(self.nodes)
        out_ptr, out_idx = _csr(src, n)
        in_ptr, in_idx = _csr(dst, n)
        return dict(src=src, dst=dst, out_ptr=out_ptr, out_idx=out_idx, in_ptr=in_ptr, in_idx=in_idx)

    @cached_property
    def sentence_depths(self) -> tuple[list[int], ...]:
        return tuple(g.depths() for g in self.sentences)

    def key_index(self) -> dict[str, int]:
        return {n.merge_key: i for i, n in enumerate(self.nodes) if i != self.root and not n.concept.is_literal}

    def content_nodes(self) -> range:
        return range(1, len(self.nodes))


def _csr(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable").astype(np.int64)
    counts = np.bincount(keys, minlength=n) if keys.size else np.zeros(n, dtype=np.int64)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, order


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the earliest occurrence as representative
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _root_node() -> SourceNode:
    return SourceNode(Concept(ROOT_LABEL, ConceptKind.KEYWORD), frozenset(), ROOT_LABEL)


def build_source_graph(
    graphs: Sequence[AmrGraph],
    corefs: MentionClusters | None = None,
    positions: Sequence[int] | None = None,
    documents: Sequence[int] | None = None,
) -> SourceGraph:
    """Merge sentence graphs by surface form and coreference under a synthetic ROOT.

    ``positions`` are sentence positions within their documents and
    ``documents`` the document index of each sentence; both default to the
    list index.  Without ``corefs``, named entities whose name strings agree
    case-insensitively are treated as coreferent.
    """
    if not graphs:
        raise EmptyInput("cannot build a source graph from zero sentences")
    positions = tuple(range(len(graphs))) if positions is None else tuple(positions)
    documents = tuple(range(len(graphs))) if documents is None else tuple(documents)
    if len(positions) != len(graphs) or len(documents) != len(graphs):
        raise ValueError("positions/documents must align with graphs")
    collapsed = [collapse_with_mapping(g) for g in graphs]

    uf = _UnionFind()
    first_by_key: dict[str, tuple[int, int]] = {}
    for s, (cg, _) in enumerate(collapsed):
        for i, c in enumerate(cg.nodes):
            if c.is_literal:
                continue
            occ = (s, i)
            uf.find(occ)
            key = merge_key(c)
            if key in first_by_key:
                uf.union(first_by_key[key], occ)
            else:
                first_by_key[key] = occ

    if corefs is None:
        by_name: dict[str, tuple[int, int]] = {}
        for s, (cg, _) in enumerate(collapsed):
            for i, c in enumerate(cg.nodes):
                if c.kind is not ConceptKind.MEGA or c.label.startswith("date-entity"):
                    continue
                name = " ".join(surface_words(c))
                if name in by_name:
                    uf.union(by_name[name], (s, i))
                else:
                    by_name[name] = (s, i)
    else:
        for cluster in corefs.clusters:
            occs = []
            for s, span in sorted(cluster):
                if 0 <= s < len(graphs):
                    node = _mention_node(graphs[s], collapsed[s][0], collapsed[s][1], span)
                    if node is not None:
                        occs.append((s, node))
            for occ in occs[1:]:
                uf.union(occs[0], occ)

    def group_key(s, i, cg):
        c = cg.nodes[i]
        if not c.is_literal:
            return ("node", uf.find((s, i)))
        r = cg.edges[cg.in_edges(i)[0]]
        # literals only merge under the same merged parent and relation
        return ("lit", uf.find((s, r.source)), r.label, c.label)

    ids: dict[tuple, int] = {}
    concepts: list[Concept] = []
    provenance: list[set] = []
    node_of: dict[tuple[int, int], int] = {}
    for s, (cg, _) in enumerate(collapsed):
        for i, c in enumerate(cg.nodes):
            key = group_key(s, i, cg)
            if key not in ids:
                ids[key] = len(concepts) + 1
                concepts.append(c)
                provenance.append(set())
            nid = ids[key]
            provenance[nid - 1].add((s, i))
            node_of[(s, i)] = nid

    nodes = [_root_node()]
    nodes += [SourceNode(c, frozenset(p), merge_key(c)) for c, p in zip(concepts, provenance)]

    edge_prov: dict[tuple[str, int, int], set[int]] = {}
    for s, (cg, _) in enumerate(collapsed):
        key = (SNT_ROOT, 0, node_of[(s, cg.root)])
        edge_prov.setdefault(key, set()).add(s)
    for s, (cg, _) in enumerate(collapsed):
        for r in cg.edges:
            a, b = node_of[(s, r.source)], node_of[(s, r.target)]
            if a == b:
                continue
            edge_prov.setdefault((r.label, a, b), set()).add(s)
    edges = [SourceEdge(label, a, b, frozenset(p)) for (label, a, b), p in edge_prov.items()]
    return SourceGraph(
        nodes=tuple(nodes), edges=tuple(edges), root=0,
        sentences=tuple(cg for cg, _ in collapsed),
        positions=positions, documents=documents, node_of=node_of,
    )


def strip_root(g: SourceGraph) -> AmrGraph:
    """The source graph without ROOT, as an AmrGraph (needs exactly one sentence root)."""
    roots = [e.target for e in g.edges if e.source == g.root]
    if len(roots) != 1:
        raise InvalidGraph("ROOT must have exactly one child")
    keep = [i for i in range(len(g.nodes)) if i != g.root]
    remap = {old: new for new, old in enumerate(keep)}
    nodes = [g.nodes[i].concept for i in keep]
    edges = [Relation(remap[e.source], e.label, remap[e.target]) for e in g.edges if e.source != g.root]
    return AmrGraph(nodes, edges, remap[roots[0]])
