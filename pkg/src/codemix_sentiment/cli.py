"""Command-line pipeline.

Each stage reads explicit input files and writes its artifacts plus a
manifest under ``--out``::

    stats             class distributions, frequent words, overlap matrices
    preprocess        cleaned copies of the splits
    train-embeddings  skip-gram vectors for code-mixed tokens
    train             Bi-LSTM classifier checkpoint and training history
    predict           baseline and refined labels for the test split
    evaluate          metrics report and modification matrix

Settings come from ``--config`` (flat ``key = value`` lines) and are
overridden by command-line flags.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .classifier import ModelConfig, load_model, save_model, train, write_history
from .corpus import (LABELS, SPLIT_NAMES, CorpusError, CorpusSplit, SentimentLabel, class_distribution,
                     load_any, load_stopwords, overlap_matrix, write_split)
from .csg import load_phrases
from .embeddings import (EmbeddingTable, TrainingLog, UnifiedLookup, load_pretrained, save_table,
                         train_codemixed)
from .metrics import evaluate, format_tables, modification_matrix, report_json
from .preprocess import clean, load_emoji_lexicon, preprocess_split
from .select import load_abusive_lexicon, refine_many

logger = logging.getLogger("codemix_sentiment")


class StageError(RuntimeError):
    """A prerequisite artifact or input is missing."""


@dataclass
class RunConfig:
    data_dir: str | None = None
    train: str | None = None
    validation: str | None = None
    test: str | None = None
    test_labels: str | None = None  # Uid,Sentiment CSV for a CoNLL test split
    english_embeddings: str | None = None
    codemixed_embeddings: str | None = None
    codemixed_corpus: str | None = None
    phrases: str | None = None
    abusive_lexicon: str | None = None
    emoji_lexicon: str | None = None
    stopwords: str | None = None
    out: str = "runs/default"
    seed: int = 13
    trace: bool = False
    prefilter: bool = True
    # classifier
    hidden_size: int = 128
    dense_sizes: str = "64,32"
    dropout: float = 0.3
    max_len: int = 64
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    # code-mixed embeddings
    emb_dim: int = 0  # 0: match the English table, or 100 without one
    emb_window: int = 5
    emb_epochs: int = 5
    emb_min_count: int = 2

    def model_config(self) -> ModelConfig:
        dense = tuple(int(x) for x in str(self.dense_sizes).replace(" ", "").split(","))
        return ModelConfig(hidden_size=self.hidden_size, dense_sizes=dense, dropout=self.dropout,
                           max_len=self.max_len, epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate, seed=self.seed)

    def digest(self) -> str:
        data = {k: v for k, v in asdict(self).items() if k not in ("out", "trace")}
        return _sha_text(json.dumps(data, sort_keys=True))

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    if "bool" in kind:
        low = value.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ValueError(f"config key {key!r}: not a boolean: {value!r}")
        return low in ("1", "true", "yes", "on")
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value.strip()


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, value)
    return values


def _sha_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _sha_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class Manifest:
    command: str
    seed: int
    config_hash: str
    inputs: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return _sha_text(json.dumps(asdict(self), sort_keys=True))

    def add_input(self, role: str, path) -> None:
        self.inputs[role] = _sha_file(path)

    def write(self, out_dir: Path, outputs: dict) -> Path:
        path = out_dir / "manifests" / f"{self.command}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        data = asdict(self) | {"manifest_hash": self.hash, "version": __version__,
                               "outputs": {role: _sha_file(p) for role, p in outputs.items()}}
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _stamp(manifest: Manifest) -> str:
    return f"manifest {manifest.hash} seed {manifest.seed}"


def read_manifest(out_dir: Path, command: str) -> dict:
    path = out_dir / "manifests" / f"{command}.json"
    if not path.exists():
        raise StageError(f"missing manifest {path}; run `{command}` first")
    return json.loads(path.read_text(encoding="utf-8"))


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise StageError(f"{what} not found: {p}")
    return p


def split_paths(cfg: RunConfig, names=SPLIT_NAMES, required=()) -> dict[str, Path]:
    """Resolve split files from explicit keys or ``data_dir/<name>.tsv``."""
    found = {}
    for name in names:
        explicit = getattr(cfg, name)
        if explicit is not None:
            found[name] = _existing(explicit, f"{name} split")
            continue
        if cfg.data_dir is not None:
            for suffix in (".tsv", ".txt", ".conll"):
                p = Path(cfg.data_dir) / f"{name}{suffix}"
                if p.exists():
                    found[name] = p
                    break
    if cfg.data_dir is not None and not Path(cfg.data_dir).is_dir():
        raise StageError(f"data directory not found: {cfg.data_dir}")
    for name in required:
        if name not in found:
            raise StageError(f"missing {name} split (set --{name} or --data-dir)")
    return found


def test_labels_path(cfg: RunConfig) -> Path | None:
    if cfg.test_labels is not None:
        return _existing(cfg.test_labels, "test label file")
    if cfg.data_dir is not None:
        p = Path(cfg.data_dir) / "test_labels.csv"
        if p.exists():
            return p
    return None


def _add_split_input(manifest: Manifest, name: str, path: Path, cfg: RunConfig) -> None:
    manifest.add_input(name, path)
    labels = test_labels_path(cfg) if name == "test" else None
    if labels is not None:
        manifest.add_input("test_labels", labels)


def _load_split(path: Path, name: str, cfg: RunConfig) -> CorpusSplit:
    split = load_any(path, name, test_labels_path(cfg) if name == "test" else None)
    return preprocess_split(split, load_emoji_lexicon(cfg.emoji_lexicon))


# --- stages -----------------------------------------------------------------

def cmd_stats(cfg: RunConfig) -> dict:
    paths = split_paths(cfg)
    if not paths:
        raise StageError("no dataset splits found (set --data-dir or --train/--validation/--test)")
    stopwords = load_stopwords(cfg.stopwords)
    manifest = Manifest("stats", cfg.seed, cfg.digest())
    result = {}
    lines = []
    for name, path in paths.items():
        _add_split_input(manifest, name, path, cfg)
        split = _load_split(path, name, cfg)
        dist = class_distribution(split)
        ov = overlap_matrix(split, stopwords)
        result[name] = {"size": len(split), "distribution": {str(k): v for k, v in dist.items()},
                        **ov.to_dict()}
        lines.append(f"[{name}] {len(split)} sentences: "
                     + ", ".join(f"{lab}={dist[lab]}" for lab in LABELS))
        lines.append("  overlap of top-20 words (%):")
        for a in LABELS:
            lines.append(f"    {str(a):9s}" + "".join(
                f"{'-' if a is b else format(ov[(a, b)], '.0f'):>10s}" for b in LABELS))
        if ov.warning:
            lines.append("  warning: fewer than 20 qualifying words for "
                         + ", ".join(str(lab) for lab in ov.short_lists))
    out = cfg.out_dir / "stats"
    out.mkdir(parents=True, exist_ok=True)
    result = {"manifest": manifest.hash, "seed": cfg.seed, "splits": result}
    (out / "stats.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    (out / "stats.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest.write(cfg.out_dir, {"stats": out / "stats.json"})
    print("\n".join(lines))
    return result


def cmd_preprocess(cfg: RunConfig) -> dict:
    paths = split_paths(cfg)
    if not paths:
        raise StageError("no dataset splits found (set --data-dir or --train/--validation/--test)")
    manifest = Manifest("preprocess", cfg.seed, cfg.digest())
    out = cfg.out_dir / "preprocessed"
    out.mkdir(parents=True, exist_ok=True)
    for name, path in paths.items():
        _add_split_input(manifest, name, path, cfg)
    written = {}
    for name, path in paths.items():
        split = _load_split(path, name, cfg)
        target = out / f"{name}.tsv"
        write_split(split, target, text=lambda s: " ".join(s.tokens))
        # split files stay loadable as plain TSV, so the stamp goes in a sidecar
        target.with_name(target.name + ".manifest").write_text(_stamp(manifest) + "\n", encoding="utf-8")
        written[name] = target
        logger.info("wrote %s (%d sentences)", target, len(split))
    manifest.write(cfg.out_dir, written)
    return written


def _english(cfg: RunConfig) -> EmbeddingTable | None:
    path = _existing(cfg.english_embeddings, "English embedding file")
    return None if path is None else load_pretrained(path)


def _read_corpus(path: Path, cfg: RunConfig) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        first = next((line for line in f if line.strip()), "")
    if first.startswith("meta\t") or path.suffix == ".tsv":
        return [s.tokens for s in _load_split(path, "corpus", cfg)]
    lex = load_emoji_lexicon(cfg.emoji_lexicon)
    with open(path, encoding="utf-8") as f:
        return [clean(line, lex).split() for line in f if line.strip()]


def cmd_train_embeddings(cfg: RunConfig) -> Path:
    manifest = Manifest("train-embeddings", cfg.seed, cfg.digest())
    if cfg.codemixed_corpus is not None:
        corpus_path = _existing(cfg.codemixed_corpus, "code-mixed corpus")
    else:
        corpus_path = split_paths(cfg, names=("train",), required=("train",))["train"]
        logger.info("no code-mixed corpus configured; training on the train split")
    manifest.add_input("corpus", corpus_path)
    english = _english(cfg)
    if english is not None:
        manifest.add_input("english_embeddings", cfg.english_embeddings)
    dim = cfg.emb_dim or (english.dim if english is not None else 100)
    if english is not None and dim != english.dim:
        raise StageError(f"emb_dim={dim} differs from the English table's dim {english.dim}")
    corpus = _read_corpus(corpus_path, cfg)
    log = TrainingLog()
    table = train_codemixed(corpus, dim=dim, window=cfg.emb_window, epochs=cfg.emb_epochs,
                            seed=cfg.seed, min_count=cfg.emb_min_count, log=log)
    out = cfg.out_dir / "embeddings"
    out.mkdir(parents=True, exist_ok=True)
    target = out / "codemixed.txt"
    save_table(table, target)
    hist = out / "codemixed_history.json"
    hist.write_text(json.dumps({"manifest": manifest.hash, "seed": cfg.seed, "epoch_loss": log.epoch_loss}, indent=2) + "\n",
                    encoding="utf-8")
    # the embedding text format has no room for metadata, so the hash goes in a sidecar
    (out / "codemixed.txt.manifest").write_text(_stamp(manifest) + "\n", encoding="utf-8")
    manifest.write(cfg.out_dir, {"embeddings": target, "history": hist})
    logger.info("wrote %s: %d tokens, dim %d", target, len(table), table.dim)
    return target


def _lookup(cfg: RunConfig, manifest: Manifest) -> UnifiedLookup:
    cm_path = Path(cfg.codemixed_embeddings) if cfg.codemixed_embeddings else \
        cfg.out_dir / "embeddings" / "codemixed.txt"
    if not cm_path.exists():
        raise StageError(f"missing code-mixed embeddings {cm_path}; run `train-embeddings` first")
    manifest.add_input("codemixed_embeddings", cm_path)
    english = _english(cfg)
    if english is not None:
        manifest.add_input("english_embeddings", cfg.english_embeddings)
    return UnifiedLookup(english, load_pretrained(cm_path))


def cmd_train(cfg: RunConfig) -> Path:
    manifest = Manifest("train", cfg.seed, cfg.digest())
    paths = split_paths(cfg, names=("train", "validation"), required=("train",))
    lookup = _lookup(cfg, manifest)
    splits = {}
    for name, path in paths.items():
        _add_split_input(manifest, name, path, cfg)
        splits[name] = _load_split(path, name, cfg)
    model = train(splits["train"], splits.get("validation"), lookup, cfg.model_config())
    out = cfg.out_dir / "model"
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.pt"
    save_model(model, ckpt, extra={"manifest": manifest.hash})
    hist = out / "history.json"
    write_history(model, hist, extra={"manifest": manifest.hash, "seed": cfg.seed})
    manifest.write(cfg.out_dir, {"model": ckpt, "history": hist})
    best = max(model.history, key=lambda e: e["valid_macro_f"])
    logger.info("best epoch %d: valid macro-F %.4f", best["epoch"], best["valid_macro_f"])
    return ckpt


PREDICTION_HEADER = "id\tbaseline\tfinal\tprefiltered"


def cmd_predict(cfg: RunConfig) -> Path:
    manifest = Manifest("predict", cfg.seed, cfg.digest())
    ckpt = cfg.out_dir / "model" / "model.pt"
    if not ckpt.exists():
        raise StageError(f"missing model checkpoint {ckpt}; run `train` first")
    test_path = split_paths(cfg, names=("test",), required=("test",))["test"]
    lookup = _lookup(cfg, manifest)
    manifest.add_input("model", ckpt)
    manifest.add_input("test", test_path)
    model = load_model(ckpt, lookup)
    phrases = load_phrases(_existing(cfg.phrases, "phrase file")).normalized(clean)
    lexicon = None
    if cfg.prefilter:
        lexicon = load_abusive_lexicon(_existing(cfg.abusive_lexicon, "abusive lexicon"))
    split = _load_split(test_path, "test", cfg)
    results = refine_many(model, split.sentences, phrases, lexicon, cfg.seed, trace=cfg.trace)

    target = cfg.out_dir / "predictions.tsv"
    with open(target, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {_stamp(manifest)}\n")
        f.write(PREDICTION_HEADER + "\n")
        for r in results:
            f.write(f"{r.id}\t{r.baseline.label}\t{r.final}\t{int(r.prefiltered)}\n")
    outputs = {"predictions": target}
    if cfg.trace:
        trace_path = cfg.out_dir / "trace.jsonl"
        with open(trace_path, "w", encoding="utf-8") as f:
            for r in results:
                f.write(json.dumps({"manifest": manifest.hash, "seed": cfg.seed, **r.trace}, ensure_ascii=False) + "\n")
        outputs["trace"] = trace_path
    manifest.write(cfg.out_dir, outputs)
    n_pre = sum(r.prefiltered for r in results)
    n_changed = sum(r.final != r.baseline.label for r in results)
    logger.info("predicted %d sentences: %d prefiltered, %d changed by selection", len(results), n_pre, n_changed)
    return target


def read_predictions(path) -> tuple[str | None, list[tuple[str, SentimentLabel, SentimentLabel, bool]]]:
    manifest_hash = None
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if line.startswith("# manifest "):
                manifest_hash = line.split()[2]
                continue
            if not line or line.startswith("#") or line == PREDICTION_HEADER:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            rows.append((parts[0], SentimentLabel.parse(parts[1]), SentimentLabel.parse(parts[2]),
                         parts[3] == "1"))
    return manifest_hash, rows


def cmd_evaluate(cfg: RunConfig, force: bool = False) -> dict:
    pred_path = cfg.out_dir / "predictions.tsv"
    if not pred_path.exists():
        raise StageError(f"missing predictions {pred_path}; run `predict` first")
    gold_path = split_paths(cfg, names=("test",), required=("test",))["test"]
    pred_manifest = read_manifest(cfg.out_dir, "predict")
    embedded, rows = read_predictions(pred_path)
    problems = []
    if embedded != pred_manifest["manifest_hash"]:
        problems.append("predictions.tsv does not match the predict manifest")
    if pred_manifest["inputs"].get("test") != _sha_file(gold_path):
        problems.append(f"gold file {gold_path} differs from the test split used by `predict`")
    if problems and not force:
        raise StageError("; ".join(problems) + " (use --force to evaluate anyway)")
    for p in problems:
        logger.warning("%s (continuing because of --force)", p)

    labels_path = test_labels_path(cfg)
    gold = {s.id: s.label for s in load_any(gold_path, "test", labels_path)}
    missing = [r[0] for r in rows if r[0] not in gold]
    if missing or len(rows) != len(gold):
        raise StageError(f"prediction ids do not match gold ids ({len(rows)} predictions, {len(gold)} gold, "
                         f"{len(missing)} unknown ids)")
    if any(lab is None for lab in gold.values()):
        raise StageError(f"gold file {gold_path} has unlabeled sentences")
    golds = [gold[r[0]] for r in rows]
    baseline = [r[1] for r in rows]
    refined = [r[2] for r in rows]

    manifest = Manifest("evaluate", cfg.seed, cfg.digest())
    manifest.add_input("predictions", pred_path)
    manifest.add_input("test", gold_path)
    if labels_path is not None:
        manifest.add_input("test_labels", labels_path)
    base_report = evaluate(baseline, golds)
    ref_report = evaluate(refined, golds)
    mod = modification_matrix(baseline, refined, golds)

    out = cfg.out_dir
    report_path = out / "report.json"
    report_path.write_text(report_json(
        ref_report, mod,
        baseline=base_report.to_dict(),
        prefiltered=sum(r[3] for r in rows),
        seed=cfg.seed,
        manifest=manifest.hash,
        predictions_manifest=embedded,
    ), encoding="utf-8")
    table = format_tables({"Bi-LSTM": base_report, "Bi-LSTM + CSG + CSS": ref_report}, mod)
    text_path = out / "report.txt"
    text_path.write_text(_stamp(manifest) + "\n\n" + table, encoding="utf-8")
    manifest.write(out, {"report": report_path, "report_text": text_path})
    print(table, end="")
    return {"baseline": base_report, "refined": ref_report, "modification": mod}


# --- argument parsing ----------------------------------------------------------

def _global_options(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=s, help="global random seed")
    g.add_argument("--config", default=s, help="flat 'key = value' settings file")
    g.add_argument("--out", default=s, help="output directory")
    g.add_argument("--trace", action="store_true", default=s, help="write per-sentence selection traces")
    g.add_argument("--no-prefilter", dest="no_prefilter", action="store_true", default=s,
                   help="disable the abusive-word prefilter")


def _path_options(parser: argparse.ArgumentParser, *names: str) -> None:
    for name in names:
        parser.add_argument("--" + name.replace("_", "-"), dest=name, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codemix-sentiment",
                                description="Code-mixed sentiment classification with candidate "
                                            "sentence generation and selection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    _global_options(p)
    sub = p.add_subparsers(dest="command", required=True)
    splits = ("data_dir", "train", "validation", "test", "test_labels", "emoji_lexicon")

    sp = sub.add_parser("stats", help="corpus statistics")
    _global_options(sp)
    _path_options(sp, *splits, "stopwords")

    sp = sub.add_parser("preprocess", help="write cleaned splits")
    _global_options(sp)
    _path_options(sp, *splits)

    sp = sub.add_parser("train-embeddings", help="train code-mixed word vectors")
    _global_options(sp)
    _path_options(sp, *splits, "codemixed_corpus", "english_embeddings")
    sp.add_argument("--dim", dest="emb_dim", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--window", dest="emb_window", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--epochs", dest="emb_epochs", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--min-count", dest="emb_min_count", type=int, default=argparse.SUPPRESS)

    sp = sub.add_parser("train", help="train the Bi-LSTM classifier")
    _global_options(sp)
    _path_options(sp, *splits, "english_embeddings", "codemixed_embeddings")
    for name, kind in (("hidden_size", int), ("dense_sizes", str), ("dropout", float), ("max_len", int),
                       ("epochs", int), ("batch_size", int), ("learning_rate", float)):
        sp.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=argparse.SUPPRESS)

    sp = sub.add_parser("predict", help="baseline + refined predictions for the test split")
    _global_options(sp)
    _path_options(sp, *splits, "english_embeddings", "codemixed_embeddings", "phrases", "abusive_lexicon")

    sp = sub.add_parser("evaluate", help="score predictions against gold labels")
    _global_options(sp)
    _path_options(sp, *splits)
    sp.add_argument("--force", action="store_true", help="evaluate despite manifest mismatches")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _FIELD_TYPES:
        if key in vars(args):
            values[key] = getattr(args, key)
    if getattr(args, "no_prefilter", False):
        values["prefilter"] = False
    return RunConfig(**values)


COMMANDS = {
    "stats": cmd_stats,
    "preprocess": cmd_preprocess,
    "train-embeddings": cmd_train_embeddings,
    "train": cmd_train,
    "predict": cmd_predict,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "evaluate":
            cmd_evaluate(cfg, force=args.force)
        else:
            COMMANDS[args.command](cfg)
    except (StageError, CorpusError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
