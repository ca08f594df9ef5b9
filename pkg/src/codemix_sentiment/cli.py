"""Command-line driver for every pipeline stage.

Exit codes: 0 success, 1 domain error, 2 I/O error, 64 usage error.
"""

import argparse
import json
import logging
import re
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .alignment import (
    joint_embeddings,
    normalize_embeddings,
    self_learning_align,
    write_dictionary,
)
from .classifiers import KINDS, load_classifier, make_classifier
from .config import CONFIG_FILENAME, ConfigError, RunConfig
from .corpus import (
    Corpus,
    filter_devanagari,
    parse_task_file,
    read_raw_tweets,
    read_tokenized,
    tokenize,
    write_tokenized,
)
from .embeddings import (
    Embeddings,
    incremental_retrain,
    load_embeddings,
    save_vec,
    train_skipgram,
)
from .evaluation import evaluate, report_table

logger = logging.getLogger("codemix_sentiment")

EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# helpers


def _open_text(path, mode="r"):
    return open(path, mode, encoding="utf-8", errors="surrogateescape", newline=None)


def _read_task(path, split=None) -> Corpus:
    with _open_text(path) as fh:
        return parse_task_file(fh, split)


_META = re.compile(r"^meta\s")


def _read_sentences(path) -> List[List[str]]:
    """Sentences from a cleaned corpus, or from a task file's tweet text."""
    with _open_text(path) as fh:
        lines = fh.readlines()
    first = next((l for l in lines if l.strip()), "")
    if _META.match(first):
        corpus = parse_task_file(lines)
        return [toks for toks in corpus.token_lists() if toks]
    return [tokenize(" ".join(toks)) for toks in read_tokenized(lines)]


def _ensure_parent(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _snapshot(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.write(out_dir / CONFIG_FILENAME)


class _RunLog:
    """Timings and config digest for one command, written as ``run.log``."""

    def __init__(self, cfg: RunConfig, out_dir: Path, command: str):
        self.path = out_dir / "run.log"
        self.records = [{"command": command, "config_digest": cfg.digest(),
                         "version": __version__}]
        self._t0 = time.perf_counter()

    def stage(self, name: str, **info):
        now = time.perf_counter()
        self.records.append({"stage": name, "seconds": round(now - self._t0, 3), **info})
        logger.info("%s done in %.1fs %s", name, now - self._t0, info or "")
        self._t0 = now

    def close(self):
        with _open_text(self.path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_predictions(ids, labels, scores, path) -> None:
    with _open_text(_ensure_parent(path), "w") as fh:
        for tid, label, row in zip(ids, labels, scores):
            fh.write(f"{tid}\t{label}\t" + "\t".join(f"{s:.6f}" for s in row) + "\n")


def read_predictions(path):
    ids, labels = [], []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: malformed prediction record")
            ids.append(parts[0])
            labels.append(parts[1])
    return ids, labels


def _aligned_labels(gold: Corpus, pred_ids, pred_labels):
    by_id = dict(zip(pred_ids, pred_labels))
    missing = [t.id for t in gold if t.id not in by_id]
    if missing:
        raise ValueError(f"{len(missing)} gold tweets have no prediction (first: {missing[0]})")
    return [t.label for t in gold], [by_id[t.id] for t in gold]


# stage implementations shared by single commands and the pipeline


def _train_embeddings(sentences, cfg: RunConfig) -> Embeddings:
    sg = cfg.skipgram()
    deterministic = cfg.get("run", "deterministic")
    vocab, matrix = train_skipgram(sentences, sg, deterministic)
    return Embeddings(vocab, matrix, sg.subwords, asdict(sg))


def _retrain(pretrained: Embeddings, sentences, cfg: RunConfig) -> Embeddings:
    sg = cfg.skipgram()
    if sg.dim != pretrained.dim:
        logger.info("using pretrained dimension %d instead of configured %d",
                    pretrained.dim, sg.dim)
        cfg.set("skipgram", "dim", pretrained.dim)
        sg = cfg.skipgram()
    vocab, matrix = incremental_retrain((pretrained.vocab, pretrained.matrix), sentences, sg,
                                        cfg.get("run", "deterministic"))
    return Embeddings(vocab, matrix, sg.subwords, asdict(sg))


def _align(src: Embeddings, trg: Embeddings, cfg: RunConfig):
    if src.dim != trg.dim:
        raise ValueError(f"dimension mismatch: source embeddings have d={src.dim}, "
                         f"target embeddings have d={trg.dim}")
    ac = cfg.alignment()
    X = normalize_embeddings(src.vectors(src.vocab.words[:ac.vocab_cutoff]).astype(np.float64))
    Z = normalize_embeddings(trg.vectors(trg.vocab.words[:ac.vocab_cutoff]).astype(np.float64))
    result = self_learning_align(X, Z, ac)
    W_trg = result.W_trg if ac.symmetric else None
    return result, joint_embeddings(src, trg, result.W_src, W_trg)


def _fit_classifier(kind, emb, train: Corpus, val: Optional[Corpus], cfg: RunConfig):
    model = make_classifier(kind, emb, **cfg.classifier_params(kind))
    return model.fit(train, X_val=val)


def _predict_file(model, corpus: Corpus, path) -> List[str]:
    scores = model.predict_scores(corpus)
    labels = model.classes_[np.argmax(scores, axis=1)]
    write_predictions([t.id for t in corpus], labels, scores, path)
    return list(labels)


def _write_report(results, prefix: Path) -> None:
    text, csv_text = report_table(results)
    # append rather than with_suffix: "report.validation" must keep its last part
    with _open_text(f"{prefix}.txt", "w") as fh:
        fh.write(text)
    with _open_text(f"{prefix}.csv", "w") as fh:
        fh.write(csv_text)
    with _open_text(f"{prefix}.json", "w") as fh:
        json.dump({name: rep.as_dict() for name, rep in results}, fh, indent=2, sort_keys=True)
        fh.write("\n")


# commands


def cmd_prepare(args, cfg):
    with _open_text(args.input) as fh:
        raw = read_raw_tweets(fh)
    kept = filter_devanagari(raw)
    sentences = [toks for toks in (tokenize(t) for t in kept) if toks]
    out = _ensure_parent(args.output)
    with _open_text(out, "w") as fh:
        write_tokenized(sentences, fh)
    print(f"kept {len(kept)} of {len(raw)} tweets ({len(sentences)} non-empty after tokenization)")
    _snapshot(cfg, out.parent)


def cmd_train_embeddings(args, cfg):
    out = _ensure_parent(args.output)
    log = _RunLog(cfg, out.parent, "train-embeddings")
    sentences = _read_sentences(args.corpus)
    emb = _train_embeddings(sentences, cfg)
    emb.save(out)
    if args.vec:
        with _open_text(_ensure_parent(args.vec), "w") as fh:
            save_vec(emb.vocab.words, emb.vectors(emb.vocab.words), fh)
    log.stage("train-embeddings", words=len(emb.vocab), sentences=len(sentences))
    _snapshot(cfg, out.parent)
    log.close()


def cmd_retrain(args, cfg):
    out = _ensure_parent(args.output)
    log = _RunLog(cfg, out.parent, "retrain")
    pretrained = load_embeddings(args.pretrained)
    sentences = _read_sentences(args.corpus)
    emb = _retrain(pretrained, sentences, cfg)
    emb.save(out)
    log.stage("retrain", words=len(emb.vocab), frozen=int(emb.matrix.freeze_mask.sum()))
    _snapshot(cfg, out.parent)
    log.close()


def cmd_align(args, cfg):
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = _RunLog(cfg, out_dir, "align")
    src = load_embeddings(args.source)
    trg = load_embeddings(args.target)
    result, joint = _align(src, trg, cfg)
    joint.save(out_dir / "joint.bin")
    with _open_text(out_dir / "mapping.vec", "w") as fh:
        save_vec([str(i) for i in range(len(result.W_src))], result.W_src, fh)
    with _open_text(out_dir / "dictionary.tsv", "w") as fh:
        write_dictionary(result.dictionary, src.vocab.words, trg.vocab.words, fh)
    log.stage("align", iterations=result.iterations, converged=result.converged,
              objective=round(result.objective, 6), dictionary=len(result.dictionary))
    _snapshot(cfg, out_dir)
    log.close()


def cmd_train_classifier(args, cfg):
    out = _ensure_parent(args.output)
    log = _RunLog(cfg, out.parent, "train-classifier")
    emb = load_embeddings(args.embeddings)
    train = _read_task(args.train, "train")
    val = _read_task(args.validation, "validation") if args.validation else None
    model = _fit_classifier(args.kind, emb, train, val, cfg)
    model.save(out)
    log.stage("train-classifier", kind=args.kind, train=len(train),
              validation=len(val) if val else 0)
    _snapshot(cfg, out.parent)
    log.close()


def cmd_predict(args, cfg):
    emb = load_embeddings(args.embeddings)
    model = load_classifier(args.model, emb)
    corpus = _read_task(args.input)
    _predict_file(model, corpus, args.output)


def cmd_evaluate(args, cfg):
    gold = _read_task(args.gold)
    if gold.split == "unlabeled":
        raise ValueError(f"{args.gold}: gold file carries no labels")
    names = args.names or [Path(p).stem for p in args.predictions]
    if len(names) != len(args.predictions):
        raise UsageError("--names must give one name per prediction file")
    results = []
    for name, path in zip(names, args.predictions):
        golds, preds = _aligned_labels(gold, *read_predictions(path))
        results.append((name, evaluate(golds, preds)))
    prefix = _ensure_parent(args.output)
    _write_report(results, prefix)
    text, _ = report_table(results)
    print(text, end="")


def cmd_pipeline(args, cfg):
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = _RunLog(cfg, out_dir, f"pipeline {args.system}")
    train = _read_task(args.train, "train")
    val = _read_task(args.validation, "validation")
    test = _read_task(args.test) if args.test else None
    log.stage("load", train=len(train), validation=len(val), test=len(test) if test else 0)

    if args.unlabeled:
        sentences = _read_sentences(args.unlabeled)
    else:
        sentences = [toks for toks in train.token_lists() if toks]
    pretrained = load_embeddings(args.pretrained) if args.pretrained else None

    if args.system == "h-ext":
        if pretrained is None:
            logger.warning("no pretrained vectors given: h-ext reduces to training from scratch")
            emb = _train_embeddings(sentences, cfg)
        else:
            emb = _retrain(pretrained, sentences, cfg)
        log.stage("retrain", words=len(emb.vocab))
    else:
        if pretrained is None:
            raise UsageError("h-ind needs --pretrained target-language vectors to align with")
        mono = _train_embeddings(sentences, cfg)
        log.stage("train-embeddings", words=len(mono.vocab))
        result, emb = _align(mono, pretrained, cfg)
        with _open_text(out_dir / "dictionary.tsv", "w") as fh:
            write_dictionary(result.dictionary, mono.vocab.words, pretrained.vocab.words, fh)
        log.stage("align", iterations=result.iterations, converged=result.converged)
    emb.save(out_dir / "embeddings.bin")

    val_results, test_results = [], []
    for kind in args.classifiers:
        model = _fit_classifier(kind, emb, train, val, cfg)
        model.save(out_dir / f"{kind}.model")
        name = f"{args.system.upper()} {kind.upper() if kind != 'bilstm' else 'BiLSTM'}"
        preds = _predict_file(model, val, out_dir / f"{kind}.validation.tsv")
        val_results.append((name, evaluate(val.labels, preds)))
        if test is not None:
            preds = _predict_file(model, test, out_dir / f"{kind}.test.tsv")
            if test.split != "unlabeled":
                test_results.append((name, evaluate(test.labels, preds)))
        log.stage(f"classifier {kind}", val_macro_f1=round(val_results[-1][1].macro_f1, 4))
    _write_report(val_results, out_dir / "report.validation")
    if test_results:
        _write_report(test_results, out_dir / "report.test")
    text, _ = report_table(val_results)
    print(text, end="")
    _snapshot(cfg, out_dir)
    log.close()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="codemix-sa", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value configuration file with stage sections")
    p.add_argument("--seed", type=int, help="seed for every stochastic stage")
    det = p.add_mutually_exclusive_group()
    det.add_argument("--deterministic", dest="deterministic", action="store_true", default=None,
                     help="single worker, fixed seed: byte-identical outputs")
    det.add_argument("--no-deterministic", dest="deterministic", action="store_false")
    p.add_argument("--workers", type=int, help="embedding-training threads (hogwild)")
    p.add_argument("--verbose", "-v", action="count", default=0)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("prepare", help="filter Devanagari tweets and tokenize raw tweets")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train-embeddings", help="train subword skip-gram embeddings")
    s.add_argument("corpus", help="cleaned corpus (one tweet per line) or task file")
    s.add_argument("-o", "--output", required=True, help="native model file")
    s.add_argument("--vec", help="also write composed word vectors in .vec format")
    s.set_defaults(func=cmd_train_embeddings)

    s = sub.add_parser("retrain", help="incrementally retrain pretrained vectors (frozen rows)")
    s.add_argument("pretrained", help=".vec or native model")
    s.add_argument("corpus")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_retrain)

    s = sub.add_parser("align", help="map source embeddings into the target space")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("train-classifier", help="train a sentiment classifier")
    s.add_argument("--kind", choices=sorted(KINDS), required=True)
    s.add_argument("--embeddings", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--validation")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("predict", help="label a task file")
    s.add_argument("--model", required=True)
    s.add_argument("--embeddings", required=True)
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="macro P/R/F1 report for prediction files")
    s.add_argument("gold")
    s.add_argument("predictions", nargs="+")
    s.add_argument("--names", nargs="+")
    s.add_argument("-o", "--output", required=True, help="report path prefix")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", help="run H-IND or H-EXT end to end")
    s.add_argument("--system", choices=["h-ind", "h-ext"], required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--validation", required=True)
    s.add_argument("--test")
    s.add_argument("--unlabeled", help="cleaned code-mixed corpus for embedding training")
    s.add_argument("--pretrained", help="pretrained English vectors (.vec or native)")
    s.add_argument("--classifiers", type=lambda v: v.split(","), default=["svm", "bilstm", "cnn"])
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_pipeline)
    return p


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        cfg.set(section, name, value)
    cfg.apply_globals(args.seed, args.deterministic, args.workers)
    if args.command == "pipeline":
        bad = [k for k in args.classifiers if k not in KINDS]
        if bad:
            raise UsageError(f"unknown classifier(s): {', '.join(bad)}")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"codemix-sa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"codemix-sa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, KeyError) as exc:
        print(f"codemix-sa: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
