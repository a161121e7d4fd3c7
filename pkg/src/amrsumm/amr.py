"""AMR graphs and the PENMAN notation.

A graph is an ordered list of :class:`Concept` nodes, an ordered list of
:class:`Relation` edges between node indices, and a root index.  Node indices
follow insertion order; the parser assigns them in textual pre-order.

String literals and other constants (``"Japan"``, ``2002``, ``-``) are nodes of
kind ``LITERAL`` without a variable, so an attribute is just an edge to a leaf.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx


class ConceptKind(str, Enum):
    FRAME = "frame"
    WORD = "word"
    KEYWORD = "keyword"
    LITERAL = "literal"
    MEGA = "mega"


FRAME_RE = re.compile(r"^\S+-\d\d$")
VARIABLE_RE = re.compile(r"^[a-z]\d*$")
KEYWORDS = frozenset({
    "and", "or", "multi-sentence", "name", "amr-unknown", "amr-choice",
    "date-entity", "date-interval", "thing", "person", "product",
    "rate-entity-91", "have-org-role-91", "have-rel-role-91", "byline-91",
    "score-entity", "ordinal-entity", "percentage-entity", "phone-number-entity",
    "email-address-entity", "url-entity", "string-entity", "value-interval",
})
_MEGA_MARK = "_:"


def classify(label: str) -> ConceptKind:
    if _MEGA_MARK in label:
        return ConceptKind.MEGA
    if label in KEYWORDS or label.endswith("-entity") or label.endswith("-quantity"):
        return ConceptKind.KEYWORD
    if FRAME_RE.match(label):
        return ConceptKind.FRAME
    return ConceptKind.WORD


@dataclass(frozen=True)
class Concept:
    label: str
    kind: ConceptKind
    variable: str | None = None
    quoted: bool = False
    # number of surface words a collapsed entity stands for
    span: int = 1

    @classmethod
    def make(cls, label: str, variable: str | None = None) -> "Concept":
        return cls(label=label, kind=classify(label), variable=variable)

    @classmethod
    def literal(cls, value: str, quoted: bool = True) -> "Concept":
        return cls(label=value, kind=ConceptKind.LITERAL, quoted=quoted)

    @property
    def is_literal(self) -> bool:
        return self.kind is ConceptKind.LITERAL


@dataclass(frozen=True)
class Relation:
    source: int
    label: str
    target: int


class AmrError(Exception):
    """Base class for errors raised by this package."""


class InvalidGraph(AmrError):
    pass


class CyclicGraph(InvalidGraph):
    pass


class PenmanError(AmrError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class UnbalancedBrackets(PenmanError):
    pass


class DuplicateVariableDefinition(PenmanError):
    pass


class UndefinedVariableReference(PenmanError):
    pass


class EmptyInput(PenmanError):
    pass


class CorpusError(AmrError):
    def __init__(self, block: int, cause: Exception):
        self.block = block
        self.cause = cause
        super().__init__(f"block {block}: {cause}")


@dataclass(frozen=True)
class AmrGraph:
    nodes: tuple[Concept, ...]
    edges: tuple[Relation, ...]
    root: int = 0
    metadata: Mapping[str, str] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        self._validate()

    def _validate(self):
        n = len(self.nodes)
        if n == 0:
            raise InvalidGraph("graph has no nodes")
        if not 0 <= self.root < n:
            raise InvalidGraph(f"root {self.root} out of range")
        if self.nodes[self.root].is_literal:
            raise InvalidGraph("root cannot be a literal")
        indeg = [0] * n
        for r in self.edges:
            if not (0 <= r.source < n and 0 <= r.target < n):
                raise InvalidGraph(f"edge {r} has an endpoint out of range")
            if not r.label or r.label.startswith(":"):
                raise InvalidGraph(f"bad relation label {r.label!r}")
            if self.nodes[r.source].is_literal:
                raise InvalidGraph("literals cannot have outgoing edges")
            indeg[r.target] += 1
        for i, c in enumerate(self.nodes):
            if c.is_literal and indeg[i] > 1:
                raise InvalidGraph("a literal cannot be shared by several parents")
        seen = self.reachable()
        if len(seen) != n:
            raise InvalidGraph(f"{n - len(seen)} node(s) unreachable from the root")

    def out_edges(self, i: int) -> list[int]:
        return self._adjacency()[0][i]

    def in_edges(self, i: int) -> list[int]:
        return self._adjacency()[1][i]

    def _adjacency(self):
        adj = self.__dict__.get("_adj")
        if adj is None:
            out = [[] for _ in self.nodes]
            inc = [[] for _ in self.nodes]
            for k, r in enumerate(self.edges):
                out[r.source].append(k)
                inc[r.target].append(k)
            adj = (out, inc)
            object.__setattr__(self, "_adj", adj)
        return adj

    def reachable(self) -> set[int]:
        seen = {self.root}
        queue = deque([self.root])
        out, _ = self._adjacency()
        while queue:
            u = queue.popleft()
            for k in out[u]:
                v = self.edges[k].target
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    def is_acyclic(self) -> bool:
        out, _ = self._adjacency()
        state = [0] * len(self.nodes)
        for start in range(len(self.nodes)):
            if state[start]:
                continue
            stack = [(start, iter(out[start]))]
            state[start] = 1
            while stack:
                u, it = stack[-1]
                for k in it:
                    v = self.edges[k].target
                    if state[v] == 1:
                        return False
                    if state[v] == 0:
                        state[v] = 1
                        stack.append((v, iter(out[v])))
                        break
                else:
                    state[u] = 2
                    stack.pop()
        return True

    def depths(self) -> list[int]:
        """Shortest distance from the root, per node."""
        depth = [-1] * len(self.nodes)
        depth[self.root] = 0
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for k in self.out_edges(u):
                v = self.edges[k].target
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    queue.append(v)
        return depth

    def reentrancies(self) -> list[int]:
        _, inc = self._adjacency()
        return [i for i in range(len(self.nodes)) if len(inc[i]) >= 2]


def isomorphic(a: AmrGraph, b: AmrGraph) -> bool:
    """Label-, relation- and root-preserving graph isomorphism."""
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    return nx.is_isomorphic(
        _to_nx(a), _to_nx(b),
        node_match=lambda x, y: x["key"] == y["key"],
        edge_match=_multi_edge_match,
    )


def _to_nx(g: AmrGraph) -> nx.MultiDiGraph:
    h = nx.MultiDiGraph()
    for i, c in enumerate(g.nodes):
        h.add_node(i, key=(c.label, c.kind, c.quoted, i == g.root))
    for r in g.edges:
        h.add_edge(r.source, r.target, label=r.label)
    return h


def _multi_edge_match(x, y):
    return sorted(d["label"] for d in x.values()) == sorted(d["label"] for d in y.values())


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<slash>/)
  | (?P<role>:[^\s()"]*)
  | (?P<string>"(?:\\"|[^"])*")
  | (?P<symbol>[^\s()"/:][^\s()"/]*)
""", re.VERBOSE)
_METADATA_RE = re.compile(r"::(\S+)(?:[ \t]+(.*?))?(?=\s+::\S|\s*$)")


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def parse_metadata(lines: Iterable[str]) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in lines:
        line = line.strip()
        if not line.startswith("#"):
            continue
        for key, value in _METADATA_RE.findall(line[1:]):
            meta[key] = value.strip()
    return meta


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        comments = []
        pos = 0
        while pos < len(text):
            mt = _TOKEN_RE.match(text, pos)
            if mt is None:
                line, col = _line_col(text, pos)
                if text[pos] == '"':
                    raise PenmanError("unterminated string literal", line, col)
                raise PenmanError(f"unexpected character {text[pos]!r}", line, col)
            kind = mt.lastgroup
            if kind == "comment":
                comments.append(mt.group())
            elif kind != "ws":
                self.tokens.append((kind, mt.group(), pos))
            pos = mt.end()
        self.metadata = parse_metadata(comments)
        self.i = 0
        self.nodes: list[Concept] = []
        self.edges: list[Relation] = []
        self.defined: dict[str, int] = {}
        # (edge slot, symbol, offset): resolved once every variable is known
        self.pending: list[tuple[int, str, int]] = []

    def _where(self, pos):
        return _line_col(self.text, pos)

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self, expected: str, opening: int | None = None):
        tok = self._peek()
        if tok is None:
            if opening is not None:
                raise UnbalancedBrackets("missing ')'", *self._where(opening))
            raise PenmanError(f"unexpected end of input, expected {expected}", *self._where(len(self.text)))
        if tok[0] != expected:
            raise PenmanError(f"expected {expected}, found {tok[1]!r}", *self._where(tok[2]))
        self.i += 1
        return tok

    def parse(self) -> AmrGraph:
        if not self.tokens:
            raise EmptyInput("no PENMAN expression found", 1, 1)
        first = self._peek()
        if first[0] == "rpar":
            raise UnbalancedBrackets("unexpected ')'", *self._where(first[2]))
        self._node()
        extra = self._peek()
        if extra is not None:
            if extra[0] == "rpar":
                raise UnbalancedBrackets("unexpected ')'", *self._where(extra[2]))
            raise PenmanError(f"trailing content {extra[1]!r}", *self._where(extra[2]))
        # symbols are variables if defined anywhere, otherwise constants
        drop = set()
        for slot, symbol, pos in self.pending:
            src, label, placeholder = self.edges[slot].source, self.edges[slot].label, self.edges[slot].target
            if symbol in self.defined:
                self.edges[slot] = Relation(src, label, self.defined[symbol])
                drop.add(placeholder)
            elif VARIABLE_RE.match(symbol):
                raise UndefinedVariableReference(f"variable {symbol!r} is never defined", *self._where(pos))
        keep = [i for i in range(len(self.nodes)) if i not in drop]
        remap = {old: new for new, old in enumerate(keep)}
        nodes = [self.nodes[i] for i in keep]
        edges = [Relation(remap[r.source], r.label, remap[r.target]) for r in self.edges]
        g = AmrGraph(nodes, edges, 0, metadata=self.metadata)
        if not g.is_acyclic():
            raise CyclicGraph("PENMAN expression encodes a directed cycle")
        return g

    def _node(self) -> int:
        opening = self._next("lpar")[2]
        var_tok = self._peek()
        if var_tok is None:
            raise UnbalancedBrackets("missing ')'", *self._where(opening))
        var_tok = self._next("symbol")
        variable = var_tok[1]
        if variable in self.defined:
            raise DuplicateVariableDefinition(f"variable {variable!r} defined twice", *self._where(var_tok[2]))
        self._next("slash", opening)
        tok = self._peek()
        if tok is None:
            raise UnbalancedBrackets("missing ')'", *self._where(opening))
        if tok[0] not in ("symbol", "string"):
            raise PenmanError(f"expected a concept, found {tok[1]!r}", *self._where(tok[2]))
        self.i += 1
        label = _unquote(tok[1]) if tok[0] == "string" else tok[1]
        idx = len(self.nodes)
        self.nodes.append(Concept.make(label, variable))
        self.defined[variable] = idx
        while True:
            tok = self._peek()
            if tok is None:
                raise UnbalancedBrackets("missing ')'", *self._where(opening))
            if tok[0] == "rpar":
                self.i += 1
                return idx
            role = self._next("role")
            label = role[1][1:]
            if not label:
                raise PenmanError("empty role", *self._where(role[2]))
            tok = self._peek()
            if tok is None:
                raise UnbalancedBrackets("missing ')'", *self._where(opening))
            if tok[0] == "lpar":
                slot = len(self.edges)
                self.edges.append(Relation(idx, label, -1))
                child = self._node()
                self.edges[slot] = Relation(idx, label, child)
            elif tok[0] == "string":
                self.i += 1
                lit = len(self.nodes)
                self.nodes.append(Concept.literal(_unquote(tok[1]), quoted=True))
                self.edges.append(Relation(idx, label, lit))
            elif tok[0] == "symbol":
                self.i += 1
                placeholder = len(self.nodes)
                self.nodes.append(Concept.literal(tok[1], quoted=False))
                self.pending.append((len(self.edges), tok[1], tok[2]))
                self.edges.append(Relation(idx, label, placeholder))
            else:
                raise PenmanError(f"expected a role target, found {tok[1]!r}", *self._where(tok[2]))


def _unquote(s: str) -> str:
    return s[1:-1].replace('\\"', '"')


def _quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def parse_penman(text: str) -> AmrGraph:
    """Parse one PENMAN expression; ``# ::key value`` lines go to ``metadata``."""
    return _Parser(text).parse()


# ---------------------------------------------------------------- serialization

_SYMBOL_OK = re.compile(r'^[^\s()"/:][^\s()"/]*$')


def _variable_names(g: AmrGraph, fresh: bool | None) -> list[str | None]:
    concepts = [c for c in g.nodes if not c.is_literal]
    given = [c.variable for c in concepts]
    usable = all(v is not None and VARIABLE_RE.match(v) for v in given) and len(set(given)) == len(given)
    if fresh is None:
        fresh = not usable
    names: list[str | None] = []
    counter = 0
    for c in g.nodes:
        if c.is_literal:
            names.append(None)
        elif fresh:
            names.append(f"n{counter}")
            counter += 1
        else:
            names.append(c.variable)
    return names


def _sorted_paths(g: AmrGraph) -> list[list[tuple[int | None, int]]]:
    """Root-to-leaf paths in lexicographic order of (node index, edge index) steps.

    A path that arrives at an already-introduced node stops there: the rest
    of it was written out under the node's first occurrence.
    """
    paths = []
    seen = {g.root}

    def children(u):
        return sorted(g.out_edges(u), key=lambda k: (g.edges[k].target, k))

    def walk(prefix):
        u = prefix[-1][1]
        kids = children(u)
        if not kids:
            paths.append(list(prefix))
            return
        for k in kids:
            v = g.edges[k].target
            prefix.append((k, v))
            if v in seen:
                paths.append(list(prefix))
            else:
                seen.add(v)
                walk(prefix)
            prefix.pop()

    walk([(None, g.root)])
    return paths


def serialize_penman(g: AmrGraph, fresh_variables: bool | None = None) -> str:
    """Write ``g`` in PENMAN notation, one concept per line, tab-indented.

    Paths from the root to every leaf are visited in sorted order.  A
    concept seen for the first time opens a bracket; a literal or a second
    visit to a concept (reentrancy) is written inline as ``:rel value``.
    After each path, brackets are closed back to the nearest ancestor that
    still has an unwritten relation.

    Original variables are kept when they are complete and unique, otherwise
    fresh ones ``n0, n1, ...`` are assigned in node order.
    """
    if not g.is_acyclic():
        raise CyclicGraph("cannot serialize a cyclic graph")
    names = _variable_names(g, fresh_variables)
    for c in g.nodes:
        if not c.is_literal and not _SYMBOL_OK.match(c.label):
            raise InvalidGraph(f"concept label {c.label!r} cannot be written in PENMAN")
    visited_c = [False] * len(g.nodes)
    visited_r = [False] * len(g.edges)
    out: list[str] = []
    for path in _sorted_paths(g):
        special = False
        k = 0
        while k < len(path):
            k += 1
            e, node = path[k - 1]
            c = g.nodes[node]
            rel = f":{g.edges[e].label} " if e is not None else ""
            if not visited_c[node]:
                visited_c[node] = True
                if e is not None:
                    visited_r[e] = True
                out.append("\t" * (k - 1))
                if c.is_literal:
                    out.append(rel + _literal_text(c))
                    special = True
                    break
                elif k < len(path):
                    out.append(f"{rel}({names[node]} / {c.label}\n")
                else:
                    out.append(f"{rel}({names[node]} / {c.label}")
            elif e is not None and not visited_r[e]:
                visited_r[e] = True
                out.append("\t" * (k - 1) + rel + names[node])
                special = True
                break
        k_open = 0
        for j in range(k - 1, 0, -1):
            anc = path[j - 1][1]
            if any(not visited_r[x] for x in g.out_edges(anc)):
                k_open = j
                break
        closing = k - k_open - 1 if special else k - k_open
        out.append(")" * closing + "\n")
    return "".join(out).rstrip("\n")


def _literal_text(c: Concept) -> str:
    if c.quoted or not _SYMBOL_OK.match(c.label) or VARIABLE_RE.match(c.label):
        return _quote(c.label)
    return c.label


# ---------------------------------------------------------------- corpus files


def _split_blocks(text: str) -> list[str]:
    blocks, cur = [], []
    for line in text.splitlines():
        if line.strip():
            cur.append(line)
        elif cur:
            blocks.append("\n".join(cur))
            cur = []
    if cur:
        blocks.append("\n".join(cur))
    return blocks


def _has_graph(block: str) -> bool:
    return any(line.strip() and not line.lstrip().startswith("#") for line in block.splitlines())


def read_corpus(path: str | Path) -> list[tuple[dict[str, str], AmrGraph]]:
    """Read blank-line separated PENMAN blocks; comment-only blocks are skipped.

    Block numbers in errors are 1-based and count every non-empty block.
    """
    text = Path(path).read_text(encoding="utf-8")
    entries = []
    for number, block in enumerate(_split_blocks(text), start=1):
        if not _has_graph(block):
            continue
        try:
            g = parse_penman(block)
        except AmrError as exc:
            raise CorpusError(number, exc) from exc
        entries.append((dict(g.metadata), g))
    return entries


def format_block(g: AmrGraph, metadata: Mapping[str, str] | None = None, fresh_variables: bool | None = None) -> str:
    meta = g.metadata if metadata is None else metadata
    head = "".join(f"# ::{k} {v}\n" for k, v in meta.items())
    return head + serialize_penman(g, fresh_variables)


def write_corpus(path: str | Path, graphs: Sequence[AmrGraph], metadata: Sequence[Mapping[str, str]] | None = None) -> None:
    blocks = []
    for i, g in enumerate(graphs):
        blocks.append(format_block(g, None if metadata is None else metadata[i]))
    Path(path).write_text("\n\n".join(blocks) + ("\n" if blocks else ""), encoding="utf-8")
