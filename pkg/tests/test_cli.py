import random
import subprocess
import sys

import pytest

from amrsumm.amr import format_block, isomorphic, parse_penman, read_corpus, serialize_penman
from amrsumm.cli import evaluate, main, read_cluster_files, read_config_file, read_document_corpus
from amrsumm.decoder import Model, brute_force_decode
from amrsumm.features import CorpusStats, extract_features
from amrsumm.metrics import node_edge_prf, rouge_n, smatch
from amrsumm.synthetic import planted_topic_corpus, topic_amr
from amrsumm.selector import adjusted_rand_index, build_source
from amrsumm.text import read_word_list
from amrsumm.trainer import format_model, load_model, save_model


def run(toy_dir, out, *args):
    return main([args[0], "--config", str(toy_dir / "toy.cfg"), "--set", f"output_dir={out}",
                 "--set", f"model={out / 'model.txt'}", *args[1:]])


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def _epoch_losses(stderr):
    return [float(l.split("\t")[4]) for l in stderr.splitlines() if l.startswith("info\tepoch\t")]


# ---------------------------------------------------------------- config


def test_config_file_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nM = 3  # trailing\n\nmetric=vsm\n")
    assert read_config_file(p) == {"M": "3", "metric": "vsm"}


def test_bad_config_line(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("just words\n")
    assert main(["select", "--config", str(p)]) == 2
    assert capsys.readouterr().err.startswith("error\tconfig\t")


def test_missing_corpus_dir(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("corpus_dir = nowhere\n")
    assert main(["select", "--config", str(p)]) == 2


@pytest.mark.parametrize("override", ["M=0", "L=0", "loss=hinge", "epochs=x"])
def test_invalid_values(toy_dir, out, override):
    assert run(toy_dir, out, "select", "--set", override) == 2


# ---------------------------------------------------------------- select


def test_select_writes_m_files(toy_dir, out):
    assert run(toy_dir, out, "select") == 0
    files = sorted(out.glob("cluster_*.tsv"))
    assert [f.name for f in files] == ["cluster_0.tsv", "cluster_1.tsv", "cluster_2.tsv"]
    for f in files:
        rows = [l for l in f.read_text().splitlines() if not l.startswith("#")]
        assert 1 <= len(rows) <= 4
        assert all(":" in r.split("\t")[0] for r in rows)


def test_select_planted_partition(tmp_path):
    corpus = planted_topic_corpus(random.Random(0), n_topics=3, per_topic=10)
    docs = tmp_path / "docs"
    docs.mkdir()
    blocks = []
    for s in corpus.sentences:
        words = s.rstrip(".").lower().split()
        g = topic_amr(words)
        blocks.append(format_block(g, {"snt": s}, fresh_variables=True))
    (docs / "all.amr").write_text("\n\n".join(blocks) + "\n")
    out = tmp_path / "out"
    assert main(["select", "--set", f"corpus_dir={docs}", "--set", f"output_dir={out}",
                 "--set", "M=3", "--set", "N=30"]) == 0
    labels = [None] * 30
    for k in range(3):
        for line in (out / f"cluster_{k}.tsv").read_text().splitlines()[1:]:
            labels[int(line.split("\t")[0].split(":")[1])] = k
    assert adjusted_rand_index(labels, corpus.topics) == 1.0


def test_select_missing_amr_files(tmp_path):
    (tmp_path / "docs").mkdir()
    assert main(["select", "--set", f"corpus_dir={tmp_path / 'docs'}", "--set", f"output_dir={tmp_path}"]) == 3


# ---------------------------------------------------------------- train


def test_train_model_round_trip(toy_dir, out, capsys):
    assert run(toy_dir, out, "train", "--set", "epochs=5") == 0
    err = capsys.readouterr().err
    assert len(_epoch_losses(err)) == 5
    path = out / "model.txt"
    m = load_model(path)
    assert format_model(m) == path.read_text()
    assert m.budget == 6


def test_toy_ramp_loss_non_increasing(toy_dir, out, capsys):
    assert run(toy_dir, out, "train", "--loss", "ramp", "--set", "epochs=5") == 0
    losses = _epoch_losses(capsys.readouterr().err)
    assert len(losses) == 5
    assert all(b <= a for a, b in zip(losses, losses[1:])), losses


@pytest.mark.parametrize("loss", ["perc", "ramp"])
def test_train_loss_flag(toy_dir, out, loss):
    assert run(toy_dir, out, "train", "--loss", loss, "--set", "epochs=2") == 0


@pytest.mark.parametrize("metric", ["lcs", "vsm", "smatch", "cov"])
def test_train_metric_flag(toy_dir, out, metric):
    assert run(toy_dir, out, "train", "--metric", metric, "--set", "epochs=2") == 0


def test_train_unwritable_model(toy_dir, out, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["train", "--config", str(toy_dir / "toy.cfg"), "--set", f"output_dir={out}",
                 "--set", f"model={blocker / 'model.txt'}", "--set", "epochs=1"])
    assert code == 3


def test_train_without_instances(toy_dir, out, tmp_path):
    empty = tmp_path / "refs.amr"
    empty.write_text("")
    assert run(toy_dir, out, "train", "--set", f"references={empty}") == 4


def test_train_deterministic(toy_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(toy_dir, a, "train", "--set", "epochs=3") == 0
    assert run(toy_dir, b, "train", "--set", "epochs=3") == 0
    assert (a / "model.txt").read_text() == (b / "model.txt").read_text()


def test_train_jobs(toy_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(toy_dir, a, "train", "--set", "epochs=3", "--set", "batch_size=3") == 0
    assert run(toy_dir, b, "train", "--set", "epochs=3", "--set", "batch_size=3", "--jobs", "3") == 0
    assert (a / "model.txt").read_text() == (b / "model.txt").read_text()


# ---------------------------------------------------------------- summarize


def _hand_model(path, budget):
    # every concept fires exactly one freq= feature, so all but the two favourites cost 0.5
    weights = {f"freq={b}": -0.5 for b in ("1", "2", "3-4", "5+")}
    weights.update({"label=launch": 5.0, "label=missile": 5.0})
    save_model(Model(weights, {}, budget), path)


def test_summarize_dominant_concepts(toy_dir, out):
    assert run(toy_dir, out, "select") == 0
    _hand_model(out / "model.txt", 6)
    assert run(toy_dir, out, "summarize") == 0
    blocks = read_corpus(out / "summaries.amr")
    assert [m["cluster"] for m, _ in blocks] == ["0", "1", "2"]
    model = load_model(out / "model.txt")
    corpus = read_document_corpus(toy_dir / "docs")
    lexicon = read_word_list(toy_dir / "events.txt")
    for (meta, g), members in zip(blocks, read_cluster_files(out, corpus)):
        source = build_source(members)
        feats = extract_features(source, CorpusStats.from_source_graph(source, lexicon))
        best = brute_force_decode(source, model, feats, max_nodes=64)
        want = {source.nodes[i].label for i in best.content_nodes()}
        got = {c.label for c in g.nodes} - {"multi-sentence"}
        assert got == want
        present = {n.merge_key for n in source.nodes}
        assert {"launch", "missile"} & present <= {source.nodes[i].merge_key for i in best.content_nodes()}
        assert int(meta["nodes"]) == len(want)


def test_summarize_budget_one(toy_dir, out):
    assert run(toy_dir, out, "select") == 0
    _hand_model(out / "model.txt", 6)
    assert run(toy_dir, out, "summarize", "--set", "L=1") == 0
    for _, g in read_corpus(out / "summaries.amr"):
        assert len(g.nodes) == 1 and not g.edges


def test_summarize_needs_clusters(toy_dir, out):
    out.mkdir()
    _hand_model(out / "model.txt", 6)
    assert run(toy_dir, out, "summarize") == 4


def test_summarize_bad_model(toy_dir, out):
    assert run(toy_dir, out, "select") == 0
    (out / "model.txt").write_text("not a model\n")
    assert run(toy_dir, out, "summarize") == 3


def test_summarize_strict_timeout(toy_dir, out):
    assert run(toy_dir, out, "select") == 0
    save_model(Model({"label=launch": 1.0, "label=missile": 1.0, "label=warhead": 1.0, "label=nucleus": 1.0},
                     {}, 6), out / "model.txt")
    assert run(toy_dir, out, "summarize", "--set", "max_expansions=1") == 0
    assert run(toy_dir, out, "summarize", "--set", "max_expansions=1", "--strict") == 5


# ---------------------------------------------------------------- evaluate


def test_evaluate_identity(toy_dir, out, tmp_path, capsys):
    refs = toy_dir / "references.amr"
    texts = tmp_path / "summary.txt"
    texts.write_text("\n".join(m["snt"] for m, _ in read_corpus(refs)) + "\n")
    assert run(toy_dir, out, "evaluate", "--predictions", str(refs), "--summary-text", str(texts)) == 0
    text = capsys.readouterr().out
    rows = [l.split("\t") for l in text.splitlines() if l.startswith("MACRO")]
    assert {r[1] for r in rows} == {"nodes", "edges", "smatch", "rouge-1", "rouge-2", "rouge-su4"}
    assert all(r[4] == "1.000000" for r in rows)
    assert (out / "evaluation.tsv").read_text() == text
    assert "text\tn=1\tn=2\tn=3\tn=4" in text


def test_evaluate_without_summary_text(toy_dir, out, capsys):
    assert run(toy_dir, out, "evaluate", "--predictions", str(toy_dir / "references.amr")) == 0
    rows = [l.split("\t") for l in capsys.readouterr().out.splitlines() if l.startswith("MACRO")]
    assert {r[1] for r in rows} == {"nodes", "edges", "smatch"}


def test_evaluate_empty_predictions(toy_dir, out, tmp_path, capsys):
    empty = tmp_path / "empty.amr"
    empty.write_text("")
    assert run(toy_dir, out, "evaluate", "--predictions", str(empty)) == 0
    rows = [l.split("\t") for l in capsys.readouterr().out.splitlines() if l.startswith("MACRO")]
    for r in rows:
        if r[1] in ("nodes", "edges", "smatch"):
            assert r[2:] == ["0.000000"] * 3


def test_evaluate_misaligned(toy_dir, out, tmp_path):
    one = tmp_path / "one.amr"
    one.write_text("(b / boy)\n")
    assert run(toy_dir, out, "evaluate", "--predictions", str(one)) == 3


def test_evaluate_matches_metrics_module():
    pred = parse_penman("(l / launch-01 :ARG1 (m / missile))")
    gold = parse_penman("(l / launch-01 :ARG0 (c / country) :ARG1 (m / missile))")
    report = evaluate([pred], [gold], ["korea launched a missile"], ["north korea launched a missile"])
    values = {l.split("\t")[1]: tuple(float(x) for x in l.split("\t")[2:])
              for l in report.splitlines() if l.startswith("0\t")}
    nodes, edges = node_edge_prf(pred, gold)
    assert values["nodes"] == pytest.approx(nodes.as_tuple(), abs=1e-6)
    assert values["edges"] == pytest.approx(edges.as_tuple(), abs=1e-6)
    assert values["smatch"] == pytest.approx(smatch(pred, gold).prf.as_tuple(), abs=1e-6)
    want = rouge_n("korea launched a missile", ["north korea launched a missile"], 2)
    assert values["rouge-2"] == pytest.approx(want.as_tuple(), abs=1e-6)


# ---------------------------------------------------------------- penman


def test_penman_round_trip(toy_dir, capsys):
    assert main(["penman", str(toy_dir / "references.amr")]) == 0
    assert capsys.readouterr().out.splitlines() == ["1\tok", "2\tok", "3\tok"]


def test_penman_bad_file(tmp_path):
    p = tmp_path / "bad.amr"
    p.write_text("(a / b :op1 (c / d)\n")
    assert main(["penman", str(p)]) == 3


# ---------------------------------------------------------------- full chain


def test_module_entry_point(toy_dir, tmp_path):
    out = tmp_path / "out"
    for step in ("select", "train", "summarize", "evaluate"):
        proc = subprocess.run([sys.executable, "-m", "amrsumm", step, "--config", str(toy_dir / "toy.cfg"),
                               "--set", f"output_dir={out}", "--set", f"model={out / 'model.txt'}"],
                              capture_output=True, text=True, cwd=tmp_path)
        assert proc.returncode == 0, proc.stderr
    text = (out / "summaries.amr").read_text()
    blocks = [b for b in text.split("\n\n") if b.strip()]
    assert len(blocks) == 3
    for block in blocks:
        g = parse_penman(block)
        assert isomorphic(parse_penman(serialize_penman(g)), g)
