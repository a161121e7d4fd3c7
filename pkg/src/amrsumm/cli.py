"""Command-line pipeline: select, train, summarize, evaluate, penman.

Exit codes: 0 success, 2 configuration error, 3 I/O or data error,
4 nothing to do, 5 decode timeout in strict mode.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .amr import AmrError, AmrGraph, format_block, isomorphic, parse_penman, read_corpus, serialize_penman
from .decoder import DecodeTimeout, decode_arrays, summary_graph, weight_arrays
from .features import CorpusStats, extract_features
from .graph_builder import MentionClusters, read_mention_clusters
from .metrics import ZERO, abstractiveness, format_report, node_edge_prf, rouge_n, rouge_su4, smatch
from .selector import Metric, SentenceRecord, TermStats, build_source, build_training_instances, spectral_select
from .text import read_word_list, tokenize
from .trainer import Loss, ModelFormatError, TrainConfig, format_model, load_model, train

log = logging.getLogger("amrsumm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_EMPTY, EXIT_TIMEOUT = 0, 2, 3, 4, 5
CLUSTER_GLOB = "cluster_*.tsv"
SUMMARY_FILE = "summaries.amr"


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class EmptyWork(Exception):
    pass


# ---------------------------------------------------------------- config


@dataclass
class PipelineConfig:
    base: Path = Path(".")
    corpus_dir: Path | None = None
    references: Path | None = None
    coref: Path | None = None
    event_lexicon: Path | None = None
    stoplist: Path | None = None
    model: Path | None = None
    output_dir: Path = Path("out")
    M: int = 5
    N: int = 5
    L: int | None = None
    loss: str = "ramp"
    metric: str = "cov"
    epochs: int = 20
    step_size: float = 0.1
    averaging: bool = True
    batch_size: int = 1
    max_expansions: int = 10**6
    seed: int = 0
    jobs: int = 1
    strict: bool = False
    extra: dict[str, str] = field(default_factory=dict)


_PATH_KEYS = ("corpus_dir", "references", "coref", "event_lexicon", "stoplist", "model", "output_dir")
_INPUT_KEYS = ("corpus_dir", "references", "coref", "event_lexicon", "stoplist")
_INT_KEYS = ("M", "N", "L", "epochs", "batch_size", "max_expansions", "seed", "jobs")


def _parse_bool(key: str, value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def read_config_file(path: Path) -> dict[str, str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def build_config(values: dict[str, str], base: Path) -> PipelineConfig:
    cfg = PipelineConfig(base=base)
    for key, value in values.items():
        if key in _PATH_KEYS:
            p = Path(value).expanduser()
            setattr(cfg, key, p if p.is_absolute() else base / p)
        elif key in _INT_KEYS:
            try:
                setattr(cfg, key, int(value))
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
        elif key == "step_size":
            try:
                cfg.step_size = float(value)
            except ValueError:
                raise ConfigError(f"step_size: expected a number, got {value!r}") from None
        elif key in ("averaging", "strict"):
            setattr(cfg, key, _parse_bool(key, value))
        elif key in ("loss", "metric"):
            setattr(cfg, key, value)
        else:
            cfg.extra[key] = value
    return cfg


def validate_config(cfg: PipelineConfig, need: Sequence[str] = ()) -> None:
    for key in ("M", "N"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be >= 1")
    if cfg.L is not None and cfg.L < 1:
        raise ConfigError("L must be >= 1")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    try:
        Loss(cfg.loss)
    except ValueError:
        raise ConfigError(f"loss must be one of {[l.value for l in Loss]}") from None
    try:
        Metric(cfg.metric)
    except ValueError:
        raise ConfigError(f"metric must be one of {[m.value for m in Metric]}") from None
    for key in need:
        if getattr(cfg, key) is None:
            raise ConfigError(f"missing config key {key!r}")
    for key in _INPUT_KEYS:
        p = getattr(cfg, key)
        if p is not None and not p.exists():
            raise ConfigError(f"{key}: path does not exist: {p}")


# ---------------------------------------------------------------- files


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise DataError(f"cannot write {path}: {exc}") from None


@dataclass(frozen=True)
class Corpus:
    names: tuple[str, ...]
    sentences: tuple[SentenceRecord, ...]

    def lookup(self) -> dict[str, SentenceRecord]:
        return {r.sentence_id: r for r in self.sentences}


def read_document_corpus(directory: Path) -> Corpus:
    """Documents as ``name.amr`` (PENMAN blocks) with optional parallel ``name.txt``."""
    amr_files = sorted(directory.glob("*.amr"))
    if not amr_files:
        raise DataError(f"no .amr files in {directory}")
    records = []
    names = []
    for d, path in enumerate(amr_files):
        blocks = read_corpus(path)
        txt = path.with_suffix(".txt")
        if txt.exists():
            lines = [l for l in txt.read_text(encoding="utf-8").splitlines() if l.strip()]
            if len(lines) != len(blocks):
                raise DataError(f"{txt.name}: {len(lines)} sentences but {path.name} has {len(blocks)} AMRs")
        else:
            lines = [meta.get("snt", "") for meta, _ in blocks]
        names.append(path.stem)
        for s, ((meta, g), text) in enumerate(zip(blocks, lines)):
            records.append(SentenceRecord(d, s, text, g, sentence_id=f"{path.stem}:{s}"))
    return Corpus(tuple(names), tuple(records))


def read_references(path: Path) -> list[SentenceRecord]:
    out = []
    for k, (meta, g) in enumerate(read_corpus(path)):
        out.append(SentenceRecord(-1, k, meta.get("snt", ""), g, sentence_id=meta.get("id", f"ref{k}")))
    return out


def _lexicon(cfg: PipelineConfig) -> frozenset[str]:
    return read_word_list(cfg.event_lexicon) if cfg.event_lexicon else frozenset()


def _stopwords(cfg: PipelineConfig):
    return read_word_list(cfg.stoplist) if cfg.stoplist else None


def _corefs(cfg: PipelineConfig) -> MentionClusters | None:
    if cfg.coref is None:
        return None
    try:
        return read_mention_clusters(cfg.coref)
    except ValueError as exc:
        raise DataError(f"{cfg.coref}: {exc}") from None


def write_cluster_file(path: Path, k: int, members: Sequence[SentenceRecord]) -> None:
    lines = [f"# cluster {k}"]
    for r in members:
        lines.append(f"{r.sentence_id}\t{r.text}")
    atomic_write(path, "\n".join(lines) + "\n")


def read_cluster_files(directory: Path, corpus: Corpus) -> list[list[SentenceRecord]]:
    lookup = corpus.lookup()
    files = sorted(directory.glob(CLUSTER_GLOB), key=lambda p: int(p.stem.split("_")[1]))
    clusters = []
    for path in files:
        members = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            sid = line.split("\t", 1)[0]
            if sid not in lookup:
                raise DataError(f"{path.name}: unknown sentence id {sid!r}")
            members.append(lookup[sid])
        clusters.append(members)
    return clusters


# ---------------------------------------------------------------- commands


def cmd_select(cfg: PipelineConfig) -> int:
    validate_config(cfg, ["corpus_dir"])
    corpus = read_document_corpus(cfg.corpus_dir)
    stop = _stopwords(cfg)
    stats = TermStats.fit((r.tokens for r in corpus.sentences), stop)
    clusters = spectral_select(corpus.sentences, cfg.M, cfg.N, cfg.seed, stats)
    for old in cfg.output_dir.glob(CLUSTER_GLOB) if cfg.output_dir.exists() else ():
        old.unlink()
    for k, members in enumerate(clusters):
        write_cluster_file(cfg.output_dir / f"cluster_{k}.tsv", k, members)
        log.info("select\tcluster\t%d\tsize\t%d", k, len(members))
    return EXIT_OK


def _train_config(cfg: PipelineConfig, budget: int) -> TrainConfig:
    try:
        return TrainConfig(loss=Loss(cfg.loss), epochs=cfg.epochs, step_size=cfg.step_size, seed=cfg.seed,
                           averaging=cfg.averaging, budget=budget, max_expansions=cfg.max_expansions,
                           batch_size=cfg.batch_size, jobs=cfg.jobs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_train(cfg: PipelineConfig) -> int:
    validate_config(cfg, ["corpus_dir", "references", "model"])
    train_cfg = _train_config(cfg, cfg.L or 15)
    corpus = read_document_corpus(cfg.corpus_dir)
    refs = read_references(cfg.references)
    instances = build_training_instances(refs, corpus.sentences, Metric(cfg.metric), cfg.N, _corefs(cfg),
                                         _lexicon(cfg), _stopwords(cfg), cfg.seed)
    if not instances:
        raise EmptyWork("no training instances could be built")
    for inst in instances:
        log.info("instance\t%s\tnodes\t%d\tcoverage\t%.4f", inst.instance_id, len(inst.source.nodes), inst.coverage)
    model = train(instances, train_cfg)
    atomic_write(cfg.model, format_model(model))
    log.info("train\tmodel\t%s", cfg.model)
    return EXIT_OK


def _load_model(cfg: PipelineConfig):
    try:
        return load_model(cfg.model)
    except (OSError, ModelFormatError) as exc:
        raise DataError(f"cannot load model: {exc}") from None


def cmd_summarize(cfg: PipelineConfig) -> int:
    validate_config(cfg, ["corpus_dir", "model"])
    model = _load_model(cfg)
    budget = cfg.L or model.budget
    corpus = read_document_corpus(cfg.corpus_dir)
    clusters = read_cluster_files(cfg.output_dir, corpus) if cfg.output_dir.exists() else []
    if not clusters:
        raise EmptyWork(f"no cluster files in {cfg.output_dir}; run select first")
    lexicon = _lexicon(cfg)
    corefs = _corefs(cfg)
    index = {id(r): s for s, r in enumerate(corpus.sentences)}

    def run(members):
        g = build_source(members, corefs, index)
        feats = extract_features(g, CorpusStats.from_source_graph(g, lexicon))
        node_w, edge_w = weight_arrays(g, model, feats)
        sel = decode_arrays(g, node_w, edge_w, budget, None, cfg.max_expansions, cfg.strict)
        score = sum(node_w[i] for i in sel.nodes) + sum(edge_w[k] for k in sel.edges)
        return g, sel, score

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(run, clusters))
    else:
        results = [run(c) for c in clusters]
    blocks, report = [], ["cluster\tscore\tnodes\toptimal"]
    for k, (g, sel, score) in enumerate(results):
        amr = summary_graph(sel, g)
        meta = {"cluster": str(k), "score": repr(float(score)), "nodes": str(len(sel.nodes) - 1)}
        blocks.append(format_block(amr, meta, fresh_variables=True))
        report.append(f"{k}\t{float(score)!r}\t{len(sel.nodes) - 1}\t{int(sel.optimal)}")
        log.info("summarize\tcluster\t%d\tnodes\t%d\tscore\t%r", k, len(sel.nodes) - 1, float(score))
    atomic_write(cfg.output_dir / SUMMARY_FILE, "\n\n".join(blocks) + "\n")
    atomic_write(cfg.output_dir / "summary_report.tsv", "\n".join(report) + "\n")
    return EXIT_OK


def _read_lines(path: Path | None) -> list[str] | None:
    if path is None:
        return None
    try:
        return [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def evaluate(predictions: list[AmrGraph], references: list[AmrGraph], summary_texts: list[str] | None = None,
             reference_texts: list[str] | None = None, sources: list[list[str]] | None = None,
             seed: int = 0) -> str:
    """Evaluation report text for aligned predictions and references."""
    rows = []
    for k, gold in enumerate(references):
        inst = str(k)
        if predictions:
            pred = predictions[k]
            nodes, edges = node_edge_prf(pred, gold)
            sm = smatch(pred, gold, seed=seed).prf
        else:
            nodes = edges = sm = ZERO
        rows += [(inst, "nodes", nodes), (inst, "edges", edges), (inst, "smatch", sm)]
        if summary_texts is not None and reference_texts is not None:
            cand = summary_texts[k] if k < len(summary_texts) else ""
            ref = [reference_texts[k]]
            rows += [(inst, "rouge-1", rouge_n(cand, ref, 1)), (inst, "rouge-2", rouge_n(cand, ref, 2)),
                     (inst, "rouge-su4", rouge_su4(cand, ref))]
    out = format_report(rows)
    if sources is not None and (summary_texts is not None or reference_texts is not None):
        out += "\ntext\tn=1\tn=2\tn=3\tn=4\n"
        source_tokens = [tokenize(s) for doc in sources for s in doc]
        for name, texts in (("summary", summary_texts), ("reference", reference_texts)):
            if texts is None:
                continue
            summary = [t for line in texts for t in tokenize(line)]
            vals = [abstractiveness(summary, source_tokens, n) for n in range(1, 5)]
            out += name + "\t" + "\t".join(f"{v:.6f}" for v in vals) + "\n"
    return out


def cmd_evaluate(cfg: PipelineConfig, predictions: Path | None, references: Path | None,
                 summary_text: Path | None, reference_text: Path | None) -> int:
    validate_config(cfg)
    predictions = predictions or cfg.output_dir / SUMMARY_FILE
    references = references or cfg.references
    if references is None:
        raise ConfigError("no references given")
    preds = [g for _, g in read_corpus(predictions)]
    refs = [g for _, g in read_corpus(references)]
    if preds and len(preds) != len(refs):
        raise DataError(f"{len(preds)} predictions but {len(refs)} references")
    summary_texts = _read_lines(summary_text)
    reference_texts = _read_lines(reference_text)
    if reference_texts is None:
        snts = [meta.get("snt", "") for meta, _ in read_corpus(references)]
        if all(snts):
            reference_texts = snts
    for name, texts in (("summary", summary_texts), ("reference", reference_texts)):
        if texts is not None and len(texts) != len(refs):
            raise DataError(f"{len(texts)} {name} texts but {len(refs)} references")
    sources = None
    if cfg.corpus_dir is not None:
        corpus = read_document_corpus(cfg.corpus_dir)
        sources = [[r.text for r in corpus.sentences if r.document == d] for d in range(len(corpus.names))]
    report = evaluate(preds, refs, summary_texts, reference_texts, sources, cfg.seed)
    atomic_write(cfg.output_dir / "evaluation.tsv", report)
    sys.stdout.write(report)
    return EXIT_OK


def cmd_penman(path: Path) -> int:
    """Round-trip every block of a corpus file through the serializer."""
    failures = 0
    for k, (_, g) in enumerate(read_corpus(path), start=1):
        again = parse_penman(serialize_penman(g))
        ok = isomorphic(g, again)
        failures += not ok
        sys.stdout.write(f"{k}\t{'ok' if ok else 'MISMATCH'}\n")
    if failures:
        raise DataError(f"{failures} block(s) failed the round trip")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


class _Formatter(logging.Formatter):
    def format(self, record):
        return f"{record.levelname.lower()}\t{record.getMessage()}"


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger("amrsumm")
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_Formatter())
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--strict", action="store_true", default=None, help="fail on decode timeouts")
    common.add_argument("--metric", choices=[m.value for m in Metric])
    common.add_argument("--loss", choices=[l.value for l in Loss])
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="amrsumm", description="Abstractive summarization with AMR graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("select", parents=[common], help="cluster source sentences")
    sub.add_parser("train", parents=[common], help="learn a model from reference summaries")
    sub.add_parser("summarize", parents=[common], help="decode summary graphs for each cluster")
    ev = sub.add_parser("evaluate", parents=[common], help="score summaries against references")
    ev.add_argument("--predictions", type=Path)
    ev.add_argument("--references", type=Path)
    ev.add_argument("--summary-text", type=Path, help="one summary sentence per line, aligned with references")
    ev.add_argument("--reference-text", type=Path, help="one reference sentence per line")
    pm = sub.add_parser("penman", parents=[common], help="check that a PENMAN file round-trips")
    pm.add_argument("file", type=Path)
    return parser


def load_config(args) -> PipelineConfig:
    values: dict[str, str] = {}
    base = Path.cwd()
    if args.config is not None:
        values = read_config_file(args.config)
        base = args.config.resolve().parent
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    for key in ("seed", "jobs", "metric", "loss"):
        if getattr(args, key) is not None:
            values[key] = str(getattr(args, key))
    if args.strict:
        values["strict"] = "true"
    return build_config(values, base)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = load_config(args)
        if args.command == "select":
            return cmd_select(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "summarize":
            return cmd_summarize(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.predictions, args.references, args.summary_text, args.reference_text)
        return cmd_penman(args.file)
    except ConfigError as exc:
        log.error("config\t%s", exc)
        return EXIT_CONFIG
    except EmptyWork as exc:
        log.error("empty\t%s", exc)
        return EXIT_EMPTY
    except DecodeTimeout as exc:
        log.error("timeout\t%s", exc)
        return EXIT_TIMEOUT
    except (DataError, AmrError, OSError, ValueError) as exc:
        log.error("data\t%s", exc)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
