"""``polyscore`` command line: synthetic data, tables, embeddings, features,
training, adaptation, evaluation and scoring.

Every subcommand writes into the directory named by ``--out`` and echoes the
effective configuration there. Exit status is 0 on success, 2 on usage
errors and 1 on data or validation errors.
"""

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, echo_config, load_config
from .corpus import METRICS, load_manifest
from .errors import PolyscoreError, ValidationError
from .evaluation import aggregate_raters, evaluate, interrater_upperbound, report_from_predictions
from .features import GopConfig, TempoConfig, estimate_priors, read_features
from .phonemb import (
    SkipgramConfig,
    build_table,
    load_corpus,
    load_embeddings,
    load_inventory,
    load_table,
    save_embeddings,
    save_table,
    train_embeddings,
)
from .pipeline import extract, feature_path, load_dataset, save_features
from .scoring import ScoringModel, TrainConfig, adapt, load, save, train, train_multitask
from .synth import DEFAULT_INVENTORIES, SynthConfig, generate, generate_embedding_corpus, write_embedding_corpus

log = logging.getLogger("polyscore")

FORMATS = """\
file formats (UTF-8, one record per line):

  phoneme table (table.txt): one prefixed symbol per line
      en_AA
      en_AE
      <eos:en>
      <unk>

  inventory (build-table input): one unprefixed symbol per line
      AA
      AE

  manifest (.jsonl):
      {"id": "u1", "language": "en",
       "phones": [{"phone": "en_AA", "start": 0.0, "dur": 0.12}],
       "scores": {"pronunciation": [7, 8], "rhythm": [6, 7],
                  "intonation": [7, 7], "scale_min": 1, "scale_max": 10},
       "posterior_ref": "posteriors/u1.csv", "pitch_ref": "pitch/u1.csv"}

  posteriors (.csv): step header, column labels, one frame per row
      #step_ms=10
      en_AA,en_AE
      0.9,0.1

  pitch (.csv): raw log pitch, normalized log pitch, delta, NCCF
      #step_ms=10
      5.29,0.01,0.0,0.81

  embeddings (embeddings.txt): dim header, then symbol and values
      #dim=2
      en_AA 0.013 -0.2

  features (<id>.feat): layout header, column names, one row per phone
  plus a final end-of-utterance row
      #layout=gop:0:1,tempo:1:10;k=2;dim=0;language=en;id=u1
      gop,tempo0,...,tempo9
      -0.105,8.33,...

  scores / predictions (scores.tsv): tab separated, original scale
      #scale=original
      id\tlanguage\tpronunciation\trhythm\tintonation
      u1\ten\t7.5\t6.5\t7.0

  config (--config, TOML): flat keys, same names as the flags
      slots = ["gop", "tempo"]
      hidden = 64
      epochs = 10

  checkpoint (model.ckpt): 16-byte magic, uint64 header length, JSON
  header, float64 little-endian payload (see README)
"""

EXAMPLE = """\
worked example:
  polyscore gen-synth --language en --n-utterances 200 --seed 1 --out syn
  polyscore train-embed --table syn/table.txt --corpus syn/corpus.txt --out emb
  polyscore extract --manifest syn/manifest.jsonl --table syn/table.txt \\
      --emb emb/embeddings.txt --out feats
  polyscore train --manifest syn/manifest.jsonl --table syn/table.txt \\
      --features feats --hidden 64 --out model
  polyscore evaluate --model model/model.ckpt --manifest syn/manifest.jsonl \\
      --table syn/table.txt --features feats --per-utterance --out report
"""

# flags that map onto PipelineConfig keys
_CONFIG_FLAGS = set(PipelineConfig.keys())


class _Formatter(argparse.RawDescriptionHelpFormatter):
    pass


def _csv(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _base_parser():
    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--out", required=True, type=Path, help="output directory (created if missing)")
    base.add_argument("--config", type=Path, help="TOML file with pipeline settings; flags override it")
    base.add_argument("--seed", type=int, help="seed for every random choice (default 0)")
    base.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return base


def _add_feature_flags(p):
    p.add_argument("--slots", type=_csv, help="comma list from gop,tempo,dur,phonemb,pitch (default all but dur)")
    p.add_argument("--k", type=int, help="context radius of the tempo/duration splice (default 2)")
    p.add_argument("--priors", help="uniform (default), estimate, or a file of 'phone probability' lines")
    p.add_argument("--epsilon", type=float, help="log floor for posteriors (default 1e-10)")
    p.add_argument("--sigma-floor", type=float, dest="sigma_floor", help="tempo z-score floor (default 1e-6)")


def _add_model_flags(p):
    p.add_argument("--hidden", type=int, help="LSTM hidden size per direction (default 256)")
    p.add_argument("--layers", type=int, help="bidirectional layers (default 2)")
    p.add_argument(
        "--metric", dest="metrics", action="append", choices=METRICS,
        help="metric to model; repeat for several (default all three)",
    )


def _add_train_flags(p):
    p.add_argument("--lr", type=float, help="Adam learning rate (default 1e-3)")
    p.add_argument("--batch-size", type=int, dest="batch_size", help="default 16")
    p.add_argument("--epochs", type=int, help="default 30")
    p.add_argument("--clip", type=float, help="global gradient-norm clip (default 5.0)")
    p.add_argument("--val-fraction", type=float, dest="val_fraction", help="default 0.1")
    p.add_argument("--patience", type=int, help="early-stop patience in epochs (default 5)")
    p.add_argument("--aggregation", choices=["mean", "median"], help="rater aggregation (default mean)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polyscore",
        description="Fine-grained pronunciation, rhythm and intonation scoring from phone-level features.",
        epilog=FORMATS + "\n" + EXAMPLE,
        formatter_class=_Formatter,
    )
    parser.add_argument("--version", action="version", version=f"polyscore {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    base = _base_parser()

    def add(name, help_, epilog=""):
        return sub.add_parser(name, parents=[base], help=help_, description=help_, epilog=epilog,
                              formatter_class=_Formatter)

    p = add("gen-synth", "generate a synthetic scored corpus with known latents",
            "writes manifest.jsonl, posteriors/, pitch/, latents.tsv (id, q_pron, q_rhythm,\n"
            "q_inton), corpus.txt (embedding corpus) and table.txt\n\n"
            "example:\n  polyscore gen-synth --language ta --n-utterances 50 --seed 3 --out syn_ta")
    p.add_argument("--language", default="en", help="en, my or ta (default en)")
    p.add_argument("--table", type=Path, help="phoneme table (default: built-in en/my/ta inventories)")
    p.add_argument("--rhythm-class", choices=["stress", "syllable", "mora"])
    p.add_argument("--n-utterances", type=int, default=100)
    p.add_argument("--n-raters", type=int, default=3)
    p.add_argument("--rater-noise", type=float, default=0.1, help="rater noise std as a fraction of the range")
    p.add_argument("--scale-min", type=float)
    p.add_argument("--scale-max", type=float)
    p.add_argument("--id-prefix")
    p.add_argument("--corpus-lines", type=int, default=2000)
    p.add_argument("--grammar-seed", type=int, default=0, help="seed of the shared phonotactic chain")

    p = add("build-table", "merge per-language inventories into one prefixed phoneme table",
            "example:\n  polyscore build-table --inventory en=en.txt --inventory ta=ta.txt --out tab\n"
            "  polyscore build-table --builtin en --builtin my --out tab")
    p.add_argument("--inventory", action="append", default=[], metavar="LANG=PATH")
    p.add_argument("--builtin", action="append", default=[], choices=sorted(DEFAULT_INVENTORIES))

    p = add("train-embed", "train skip-gram phoneme embeddings",
            "corpus files hold one space-separated prefixed phoneme string per line:\n"
            "  en_DH en_AH en_K en_AE en_T\n\n"
            "example:\n  polyscore train-embed --table tab/table.txt --corpus a.txt b.txt --out emb")
    p.add_argument("--table", type=Path, required=True)
    p.add_argument("--corpus", type=Path, nargs="+", required=True)
    p.add_argument("--dim", type=int, help="embedding size (default 32)")
    p.add_argument("--window", type=int, help="context window (default 4)")
    p.add_argument("--negatives", type=int, help="negative samples per pair (default 5)")
    p.add_argument("--embed-epochs", type=int, dest="embed_epochs", help="default 5")
    p.add_argument("--embed-lr", type=float, dest="embed_lr", help="initial learning rate (default 0.025)")

    p = add("extract", "compute per-phone feature files",
            "writes one <id>.feat per utterance\n\n"
            "example:\n  polyscore extract --manifest syn/manifest.jsonl --table syn/table.txt \\\n"
            "      --slots gop,tempo --out feats")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--table", type=Path, required=True)
    p.add_argument("--emb", type=Path, help="embeddings file (needed for the phonemb slot)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    _add_feature_flags(p)

    p = add("train", "train a single-language scoring model",
            "writes model.ckpt and train_log.json\n\n"
            "example:\n  polyscore train --manifest syn/manifest.jsonl --table syn/table.txt \\\n"
            "      --features feats --metric rhythm --out model_rhythm")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_train_flags(p)

    p = add("adapt", "fine-tune a trained model on a new language with a fresh head",
            "example:\n  polyscore adapt --source model/model.ckpt --manifest ta/manifest.jsonl \\\n"
            "      --table syn/table.txt --features feats_ta --out model_ta")
    p.add_argument("--source", type=Path, required=True, help="source checkpoint")
    p.add_argument("--language", help="target language (default: the manifest's language)")
    p.add_argument("--head-init", choices=["zeros", "uniform"], default="zeros")
    _add_data_flags(p)
    _add_train_flags(p)

    p = add("train-multitask", "train one backbone with a head per language",
            "example:\n  polyscore train-multitask --table syn/table.txt \\\n"
            "      --data my/manifest.jsonl feats_my --data ta/manifest.jsonl feats_ta --out mt")
    p.add_argument("--table", type=Path, required=True)
    p.add_argument("--data", nargs=2, action="append", required=True, metavar=("MANIFEST", "FEATURES"))
    p.add_argument("--freeze-head", action="append", default=[], metavar="LANG")
    _add_model_flags(p)
    _add_train_flags(p)

    p = add("evaluate", "MSE and PCC of predictions against aggregated rater scores",
            "writes report.txt, report.json and (with --per-utterance) per_utterance.tsv\n\n"
            "examples:\n  polyscore evaluate --model model/model.ckpt --manifest syn/manifest.jsonl \\\n"
            "      --table syn/table.txt --features feats --out rep\n"
            "  polyscore evaluate --predictions scored/scores.tsv --manifest syn/manifest.jsonl \\\n"
            "      --table syn/table.txt --out rep")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", type=Path, help="checkpoint to run on --features")
    src.add_argument("--predictions", type=Path, help="scores.tsv on the original scale")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--table", type=Path, required=True)
    p.add_argument("--features", type=Path, help="feature directory (with --model)")
    p.add_argument("--aggregation", choices=["mean", "median"])
    p.add_argument("--per-utterance", action="store_true", help="dump prediction/target pairs")
    p.add_argument("--interrater", action="store_true", help="also report the leave-one-rater-out bound")

    p = add("score", "score feature files with a trained model",
            "writes scores.tsv; with --manifest scores are on each utterance's rater scale,\n"
            "otherwise on the model's [-1, 1] scale\n\n"
            "example:\n  polyscore score --model model/model.ckpt --features feats \\\n"
            "      --manifest syn/manifest.jsonl --table syn/table.txt --out scored")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--table", type=Path, help="phoneme table (required with --manifest)")
    return parser


def _add_data_flags(p):
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--table", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True, help="directory written by extract")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _config(args):
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_FLAGS and v is not None}
    return load_config(args.config, overrides)


def _train_config(cfg):
    return TrainConfig(
        lr=cfg.lr, batch_size=cfg.batch_size, epochs=cfg.epochs, clip=cfg.clip, seed=cfg.seed,
        val_fraction=cfg.val_fraction, patience=cfg.patience,
    )


def _read_priors(spec, utterances, table):
    if spec == "uniform":
        return None
    if spec == "estimate":
        return estimate_priors(utterances, table)
    priors = {}
    path = Path(spec)
    if not path.exists():
        raise ValidationError(f"priors must be 'uniform', 'estimate' or an existing file, got {spec!r}")
    for lineno, ln in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not ln.strip() or ln.startswith("#"):
            continue
        parts = ln.split()
        try:
            priors[parts[0]] = float(parts[1])
        except (IndexError, ValueError):
            raise ValidationError(f"{path}:{lineno}: expected 'phone probability'") from None
    total = sum(priors.values())
    if total <= 0:
        raise ValidationError(f"{path}: priors have no mass")
    return {k: v / total for k, v in priors.items()}


def _log_params(model):
    rep = model.param_count_report()
    log.info(
        "model: %d parameters (backbone %d, %d head(s) of %d)",
        rep["total"], rep["backbone"], rep["heads"], rep["per_head"],
    )


def _dataset(manifest, table, feat_dir, cfg):
    _, _, examples = load_dataset(manifest, table, feat_dir, cfg.metrics, cfg.aggregation)
    if not examples:
        raise ValidationError(f"{manifest}: no utterances")
    return examples


def _check_widths(examples, source):
    widths = {e.features.shape[1] for e in examples}
    if len(widths) != 1:
        raise ValidationError(f"{source}: feature files have mixed widths {sorted(widths)}")
    return widths.pop()


def _write_scores(path, ids, langs, values, metrics, scale):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#scale={scale}\n")
        fh.write("id\tlanguage\t" + "\t".join(metrics) + "\n")
        for uid, lang, row in zip(ids, langs, values):
            fh.write(f"{uid}\t{lang}\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def read_scores(path):
    """Parse a scores.tsv: returns (scale, metrics, {id: values})."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or not lines[0].startswith("#scale="):
        raise ValidationError(f"{path}:1: expected '#scale=' header")
    scale = lines[0][len("#scale=") :]
    head = lines[1].split("\t")
    if head[:2] != ["id", "language"]:
        raise ValidationError(f"{path}:2: expected 'id<TAB>language<TAB>metrics...'")
    metrics = head[2:]
    out = {}
    for lineno, ln in enumerate(lines[2:], start=3):
        if not ln.strip():
            continue
        cells = ln.split("\t")
        if len(cells) != len(head):
            raise ValidationError(f"{path}:{lineno}: expected {len(head)} fields, got {len(cells)}")
        try:
            out[cells[0]] = np.array([float(c) for c in cells[2:]])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric score") from None
    return scale, metrics, out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_synth(args, cfg):
    table = load_table(args.table) if args.table else build_table(DEFAULT_INVENTORIES)
    scfg = SynthConfig(
        language=args.language, rhythm_class=args.rhythm_class, n_utterances=args.n_utterances,
        n_raters=args.n_raters, rater_noise=args.rater_noise, scale_min=args.scale_min,
        scale_max=args.scale_max, seed=cfg.seed, grammar_seed=args.grammar_seed, id_prefix=args.id_prefix,
        corpus_lines=args.corpus_lines,
    )
    corpus = generate(scfg, table, args.out)
    write_embedding_corpus(generate_embedding_corpus(scfg, table), args.out / "corpus.txt")
    save_table(table, args.out / "table.txt")
    log.info("wrote %d utterances to %s", len(corpus.utterances), args.out)


def cmd_build_table(args, cfg):
    per_language = {}
    for item in args.inventory:
        lang, sep, path = item.partition("=")
        if not sep:
            raise ValidationError(f"--inventory expects LANG=PATH, got {item!r}")
        if lang in per_language:
            raise ValidationError(f"language {lang!r} given twice")
        per_language[lang] = load_inventory(path)
    for lang in args.builtin:
        if lang in per_language:
            raise ValidationError(f"language {lang!r} given twice")
        per_language[lang] = DEFAULT_INVENTORIES[lang]
    if not per_language:
        raise ValidationError("give at least one --inventory or --builtin")
    table = build_table(per_language)
    save_table(table, args.out / "table.txt")
    log.info("table: %d symbols over %s", len(table), ",".join(table.languages))


def cmd_train_embed(args, cfg):
    table = load_table(args.table)
    corpus = []
    for path in args.corpus:
        corpus.extend(load_corpus(path))
    scfg = SkipgramConfig(
        dim=cfg.dim, window=cfg.window, negatives=cfg.negatives, epochs=cfg.embed_epochs, lr=cfg.embed_lr,
        seed=cfg.seed,
    )
    emb = train_embeddings(corpus, table, scfg)
    save_embeddings(emb, args.out / "embeddings.txt")
    (args.out / "losses.txt").write_text("".join(f"{v!r}\n" for v in emb.losses), encoding="utf-8")
    log.info("embeddings: %d symbols x %d dims", len(table), emb.dim)


def cmd_extract(args, cfg):
    table = load_table(args.table)
    utts = load_manifest(args.manifest, table)
    emb = None
    if "phonemb" in cfg.slots:
        if args.emb is None:
            raise ValidationError("the phonemb slot needs --emb")
        emb = load_embeddings(args.emb)
        if emb.table != table:
            raise ValidationError(f"{args.emb}: embeddings were trained on a different phoneme table")
    gop_cfg = GopConfig(priors=_read_priors(cfg.priors, utts, table), epsilon=cfg.epsilon)
    tempo_cfg = TempoConfig(k=cfg.k, sigma_floor=cfg.sigma_floor)
    mats = extract(utts, emb, cfg.slots, gop_cfg, tempo_cfg, jobs=cfg.jobs)
    save_features(mats, args.out)
    log.info("extracted %d feature files of width %d", len(mats), mats[0].width if mats else 0)


def _finish_training(args, result):
    save(result.model, args.out / "model.ckpt")
    info = {
        "best_epoch": result.best_epoch,
        "curve": result.curve,
        "params": result.model.param_count_report(),
        "languages": list(result.model.languages),
        "metrics": list(result.model.metrics),
    }
    (args.out / "train_log.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("best epoch %d; saved %s", result.best_epoch, args.out / "model.ckpt")


def cmd_train(args, cfg):
    table = load_table(args.table)
    examples = _dataset(args.manifest, table, args.features, cfg)
    langs = sorted({e.language for e in examples})
    if len(langs) != 1:
        raise ValidationError(f"{args.manifest}: train expects one language, found {langs}; use train-multitask")
    width = _check_widths(examples, args.features)
    first = read_features(feature_path(args.features, examples[0].id))
    model = ScoringModel(width, langs, cfg.hidden, cfg.layers, cfg.metrics, first.layout, cfg.seed,
                         feature_meta={"k": first.k, "dim": first.dim})
    _log_params(model)
    _finish_training(args, train(model, examples, _train_config(cfg)))


def cmd_adapt(args, cfg):
    table = load_table(args.table)
    source = load(args.source)
    cfg.metrics = list(source.metrics)
    examples = _dataset(args.manifest, table, args.features, cfg)
    langs = sorted({e.language for e in examples})
    target = args.language or (langs[0] if len(langs) == 1 else None)
    if target is None:
        raise ValidationError(f"{args.manifest}: several languages {langs}; pick one with --language")
    examples = [e for e in examples if e.language == target]
    if not examples:
        raise ValidationError(f"{args.manifest}: no utterances of language {target!r}")
    first = read_features(feature_path(args.features, examples[0].id))
    result = adapt(source, target, examples, _train_config(cfg), head_init=args.head_init, layout=first.layout)
    _log_params(result.model)
    _finish_training(args, result)


def cmd_train_multitask(args, cfg):
    table = load_table(args.table)
    datasets = {}
    layout = None
    for manifest, feat_dir in args.data:
        for e in _dataset(Path(manifest), table, Path(feat_dir), cfg):
            datasets.setdefault(e.language, []).append(e)
        if layout is None:
            first = read_features(feature_path(feat_dir, datasets[next(iter(datasets))][0].id))
            layout = first.layout
    width = _check_widths([e for ex in datasets.values() for e in ex], "multi-task data")
    unknown = sorted(set(args.freeze_head) - set(datasets))
    if unknown:
        raise ValidationError(f"--freeze-head names languages without data: {unknown}")
    model = ScoringModel(width, sorted(datasets), cfg.hidden, cfg.layers, cfg.metrics, layout, cfg.seed,
                         feature_meta={"k": first.k, "dim": first.dim})
    _log_params(model)
    _finish_training(args, train_multitask(model, datasets, _train_config(cfg), args.freeze_head))


def cmd_evaluate(args, cfg):
    table = load_table(args.table)
    if args.model is not None:
        if args.features is None:
            raise ValidationError("--model needs --features")
        model = load(args.model)
        _log_params(model)
        examples = _dataset(args.manifest, table, args.features, PipelineConfig(
            metrics=list(model.metrics), aggregation=cfg.aggregation))
        report = evaluate(model, examples, cfg.aggregation)
        utts = None
    else:
        utts = load_manifest(args.manifest, table, check_frames=False)
        scale, metrics, preds = read_scores(args.predictions)
        if scale != "original":
            raise ValidationError(f"{args.predictions}: predictions must be on the original scale")
        bad = [m for m in metrics if m not in METRICS]
        if bad:
            raise ValidationError(f"{args.predictions}: unknown metrics {bad}")
        missing = [u.id for u in utts if u.id not in preds]
        if missing:
            raise ValidationError(f"{args.predictions}: no prediction for {missing[:5]}")
        P = np.stack([preds[u.id] for u in utts])
        T = np.array([[aggregate_raters([[r] for r in u.scores.raters(m)], cfg.aggregation)[0] for m in metrics] for u in utts])
        report = report_from_predictions([u.id for u in utts], P, T, metrics, cfg.aggregation)
    out = report.to_dict()
    text = report.format_table()
    if args.interrater:
        utts = utts or load_manifest(args.manifest, table, check_frames=False)
        human = {}
        for m in report.metrics:
            ratings = np.array([u.scores.raters(m) for u in utts], dtype=np.float64)
            human[m] = interrater_upperbound(ratings.T, cfg.aggregation)
        out["interrater_upperbound"] = human
        text += "\n" + "\n".join(f"human upper bound {m:<13} {v:.3f}" for m, v in human.items())
    (args.out / "report.txt").write_text(text + "\n", encoding="utf-8")
    (args.out / "report.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.per_utterance:
        with open(args.out / "per_utterance.tsv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("id\tmetric\tprediction\ttarget\n")
            for r in report.per_utterance:
                fh.write(f"{r['id']}\t{r['metric']}\t{r['prediction']!r}\t{r['target']!r}\n")
    print(text)


def cmd_score(args, cfg):
    model = load(args.model)
    _log_params(model)
    if args.manifest is not None:
        if args.table is None:
            raise ValidationError("--manifest needs --table")
        utts = load_manifest(args.manifest, load_table(args.table), check_frames=False)
        ids = [u.id for u in utts]
        scales = [(u.scores.scale_min, u.scores.scale_max) for u in utts]
    else:
        ids = sorted(p.stem for p in Path(args.features).glob("*.feat"))
        scales = None
        if not ids:
            raise ValidationError(f"{args.features}: no .feat files")
    mats = [read_features(feature_path(args.features, uid)) for uid in ids]
    langs = [m.language for m in mats]
    pred = model.predict([m.rows for m in mats], langs)
    if scales is not None:
        lo = np.array([s[0] for s in scales])[:, None]
        hi = np.array([s[1] for s in scales])[:, None]
        pred = (pred + 1.0) * (hi - lo) / 2.0 + lo
    _write_scores(args.out / "scores.tsv", ids, langs, pred, model.metrics,
                  "original" if scales is not None else "rescaled")
    log.info("scored %d utterances", len(ids))


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "build-table": cmd_build_table,
    "train-embed": cmd_train_embed,
    "extract": cmd_extract,
    "train": cmd_train,
    "adapt": cmd_adapt,
    "train-multitask": cmd_train_multitask,
    "evaluate": cmd_evaluate,
    "score": cmd_score,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", force=True)
    logging.captureWarnings(True)
    try:
        cfg = _config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        echo_config(cfg, args.out, args.command)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args, cfg)
    except (PolyscoreError, ValueError, OSError) as exc:
        print(f"polyscore: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
