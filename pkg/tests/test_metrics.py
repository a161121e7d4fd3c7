import random

import pytest
from hypothesis import given, settings, strategies as st

from amrsumm.amr import parse_penman
from amrsumm.decoder import Selection
from amrsumm.graph_builder import build_source_graph
from amrsumm.metrics import (PRF, abstractiveness, f_score, format_report, ngrams, node_edge_prf, rouge_n, rouge_su4,
                             skip_bigrams, smatch, smatch_exhaustive, smatch_triples)
from amrsumm.synthetic import random_amr
from oracles import amr_triples, grams, prf, smatch_exhaustive_f


def _pair(seed, max_nodes=6):
    rng = random.Random(seed)
    return random_amr(rng, max_nodes), random_amr(rng, max_nodes)


# ---------------------------------------------------------------- PRF


def test_prf_from_counts():
    assert PRF.from_counts(2, 3, 4).as_tuple() == pytest.approx((2 / 3, 1 / 2, 4 / 7))
    assert PRF.from_counts(0, 0, 0).as_tuple() == (0.0, 0.0, 0.0)
    assert f_score(0.0, 0.0) == 0.0


# ---------------------------------------------------------------- smatch


def test_triples_match_oracle_counts():
    g = parse_penman('(s / say-01 :ARG0 (c / country :name (n / name :op1 "Japan")) :ARG1 (h / hello))')
    assert smatch_triples(g).count == len(amr_triples(g)) == 4 + 1 + 3 + 1


def test_identical_graphs():
    g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))")
    assert smatch(g, g).f1 == 1.0


def test_disjoint_labels():
    a = parse_penman("(x / apple :mod (y / red))")
    b = parse_penman("(p / pear :poss (q / farmer))")
    r = smatch(a, b)
    # only the TOP attribute can match
    assert r.matched == 1
    assert smatch(parse_penman("(x / apple)"), parse_penman("(p / pear)")).matched == 1


def test_four_node_pair_matches_exhaustive():
    a = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b) :time (n / now))")
    b = parse_penman("(w / want-01 :ARG0 (g / girl) :ARG1 (l / leave-11 :ARG0 g) :time (n / now))")
    matched, f = smatch_exhaustive_f(a, b)
    r = smatch(a, b)
    assert r.matched == matched == smatch_exhaustive(a, b)
    assert r.f1 == pytest.approx(f, abs=1e-12)


def test_result_invariants():
    a, b = _pair(11, 10)
    r = smatch(a, b)
    assert r.matched <= min(smatch_triples(a).count, smatch_triples(b).count)
    assert len(set(r.mapping.values())) == len(r.mapping)
    assert r.restarts == 4


def test_restarts_validated():
    g = parse_penman("(a / b)")
    with pytest.raises(ValueError):
        smatch(g, g, restarts=0)


@given(st.integers(0, 2**32 - 1))
def test_self_match(seed):
    g = random_amr(random.Random(seed), 20)
    assert smatch(g, g).f1 == 1.0


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_never_above_exhaustive(seed):
    a, b = _pair(seed)
    matched, _ = smatch_exhaustive_f(a, b)
    assert smatch(a, b).matched <= matched


@given(st.integers(0, 2**32 - 1))
def test_symmetric(seed):
    a, b = _pair(seed, 8)
    ab, ba = smatch(a, b), smatch(b, a)
    assert ab.matched == ba.matched
    assert ab.f1 == pytest.approx(ba.f1, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_seed_determinism(seed):
    a, b = _pair(seed, 10)
    assert smatch(a, b, seed=3) == smatch(a, b, seed=3)


# ---------------------------------------------------------------- node / edge


def test_node_edge_identity():
    g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02))")
    nodes, edges = node_edge_prf(g, g)
    assert nodes.f1 == 1.0 and edges.f1 == 1.0


def test_node_partial_overlap():
    gold = parse_penman("(a / and :op1 (x / xa) :op2 (y / ya) :op3 (z / za))")
    pred = parse_penman("(x / xa :mod (y / ya) :mod (q / qa))")
    nodes, _ = node_edge_prf(pred, gold)
    assert nodes.as_tuple() == pytest.approx((2 / 3, 2 / 4, 4 / 7), abs=1e-12)
    assert nodes.f1 == pytest.approx(0.571, abs=1e-3)


def test_empty_prediction():
    source = build_source_graph([parse_penman("(b / boy)")])
    nodes, edges = node_edge_prf(Selection.root_only(), parse_penman("(b / boy)"), source)
    assert nodes.as_tuple() == (0.0, 0.0, 0.0) and edges.as_tuple() == (0.0, 0.0, 0.0)


def test_selection_edges_skip_snt_root():
    text = "(w / want-01 :ARG0 (b / boy))"
    source = build_source_graph([parse_penman(text)])
    sel = Selection(frozenset({0, 1, 2}), frozenset({0, 1}))
    nodes, edges = node_edge_prf(sel, parse_penman(text), source)
    assert nodes.f1 == 1.0 and edges.f1 == 1.0


def test_selection_requires_source():
    with pytest.raises(ValueError):
        node_edge_prf(Selection.root_only(), parse_penman("(b / boy)"))


# ---------------------------------------------------------------- ROUGE


def test_rouge_identical():
    assert rouge_n("the cat sat", ["the cat sat"], 1).as_tuple() == (1.0, 1.0, 1.0)
    assert rouge_n("the cat sat", ["the cat sat"], 2).as_tuple() == (1.0, 1.0, 1.0)
    assert rouge_su4("the cat sat", ["the cat sat"]).f1 == 1.0


def test_rouge_bigram_hand_count():
    assert rouge_n("a b c", ["a b d"], 2).as_tuple() == pytest.approx((0.5, 0.5, 0.5), abs=1e-12)


def test_rouge_rejects_n3():
    with pytest.raises(ValueError):
        rouge_n("a b c", ["a b c"], 3)


def test_rouge_empty_candidate():
    assert rouge_n("", ["a b"], 1).as_tuple() == (0.0, 0.0, 0.0)
    assert rouge_su4([], ["a b"]).as_tuple() == (0.0, 0.0, 0.0)


def test_skip_bigrams_the_cat_sat():
    sb = skip_bigrams(["the", "cat", "sat"])
    assert set(sb) == {("the", "cat"), ("the", "sat"), ("cat", "sat")}
    assert sum(sb.values()) == 3


def test_skip_bigram_window():
    tokens = list("abcdefg")
    sb = skip_bigrams(tokens)
    assert ("a", "f") in sb and ("a", "g") not in sb
    assert sum(sb.values()) == 5 + 5 + 4 + 3 + 2 + 1


def test_su4_disjoint():
    assert rouge_su4("a b c", ["x y z"]).f1 == 0.0


@given(st.lists(st.sampled_from("abcdef"), min_size=0, max_size=12),
       st.lists(st.lists(st.sampled_from("abcdefg"), max_size=12), min_size=1, max_size=3),
       st.sampled_from([1, 2]))
def test_rouge_against_oracle(cand, refs, n):
    c = grams(cand, n)
    matched = sum(sum((c & grams(r, n)).values()) for r in refs)
    n_c = sum(c.values())
    want = prf(matched, n_c * len(refs), sum(sum(grams(r, n).values()) for r in refs)) if n_c else (0.0, 0.0, 0.0)
    got = rouge_n(cand, refs, n)
    assert got.as_tuple() == pytest.approx(want, abs=1e-12)
    assert 0.0 <= got.f1 <= max(got.precision, got.recall) + 1e-12


@given(st.lists(st.sampled_from("abcdef"), min_size=2, max_size=12))
def test_rouge_self(tokens):
    assert rouge_n(tokens, [tokens], 1).f1 == 1.0
    assert rouge_n(tokens, [tokens], 2).f1 == 1.0


def test_ngrams():
    assert ngrams(["a", "b", "a", "b"], 2) == {("a", "b"): 2, ("b", "a"): 1}


# ---------------------------------------------------------------- abstractiveness


def test_copied_summary():
    src = "North Korea launched a missile over Japan on Tuesday ."
    assert abstractiveness("launched a missile over Japan", [src], 3) == 1.0


def test_novel_summary():
    assert abstractiveness("completely unrelated words here", ["north korea launched a missile"], 1) == 0.0


def test_mixed_trigrams():
    # summary trigrams: the-cat-sat, cat-sat-on, sat-on-the, on-the-mat; first two occur in the source
    assert abstractiveness("the cat sat on the mat", ["the cat sat on a rug"], 3) == 0.5


def test_sources_are_concatenated():
    assert abstractiveness("a b", ["x a", "b y"], 2) == 1.0


def test_short_summary():
    assert abstractiveness("a", ["a b"], 2) == 0.0
    with pytest.raises(ValueError):
        abstractiveness("a", ["a"], 0)


# ---------------------------------------------------------------- report


def test_report_macro_footer():
    rows = [("d1", "nodes", PRF(1.0, 0.5, 2 / 3)), ("d2", "nodes", PRF(0.0, 0.0, 0.0))]
    lines = format_report(rows).splitlines()
    assert lines[0] == "instance\tmetric\tP\tR\tF"
    assert lines[-1] == "MACRO\tnodes\t0.500000\t0.250000\t0.333333"
