"""Command-line surface: train, eval, predict, ablate, folds and
attention heatmaps."""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from .config import ABLATION_FLAGS, Config
from .corpus import load_corpus, make_folds, save_corpus, sentence
from .encoder import FileBackedEncoder
from .errors import JerxError, NonFiniteLoss, ParseError
from .evaluation import evaluate_model, format_reported, overall_score
from .jerxemb import read_emb_file
from .model import load_checkpoint
from .training import train, write_metrics_csv

EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _revision():
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_manifest(out_dir, config, corpus_path):
    manifest = {
        "config": config.to_dict(),
        "corpus_sha256": _sha256(corpus_path),
        "seed": config.seed,
        "revision": _revision(),
        "created_unix": time.time(),
    }
    with open(Path(out_dir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _load_config(args):
    try:
        config = Config.from_file(args.config) if args.config else Config()
    except ParseError as e:
        # a broken config file is a config error, not a data error
        raise ConfigError(str(e)) from e
    overrides = {}
    for flag in getattr(args, "ablation", None) or []:
        if flag not in ABLATION_FLAGS:
            raise ConfigError(
                f"unknown ablation {flag!r}; choose from {', '.join(ABLATION_FLAGS)}"
            )
        overrides[flag] = True
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    env_seed = os.environ.get("JERX_SEED")
    if env_seed is not None:
        try:
            overrides["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"JERX_SEED must be an integer, got {env_seed!r}")
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "gold_re", False):
        overrides["gold_re_mode"] = True
    return config.replace(**overrides) if overrides else config


def _load_corpus_arg(path, fmt):
    if not Path(path).exists():
        raise DataError(f"corpus file does not exist: {path}")
    return load_corpus(path, fmt)


def _file_encoder_for(config):
    if config.encoder != "file":
        return None
    if not config.emb_path or not Path(config.emb_path).exists():
        raise DataError(f"embedding file does not exist: {config.emb_path!r}")
    return FileBackedEncoder(config.emb_path)


def _train_val_split(sentences, val_frac, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sentences))
    n_val = int(round(val_frac * len(sentences)))
    val = [sentences[i] for i in order[:n_val]]
    tr = [sentences[i] for i in order[n_val:]]
    return tr, val


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_train(args):
    config = _load_config(args)
    sentences, _ = _load_corpus_arg(args.corpus, args.format)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_sents, val_sents = _train_val_split(sentences, args.val_frac, config.seed)
    file_encoder = _file_encoder_for(config)
    _, rows = train(
        train_sents,
        config,
        val_sents=val_sents,
        file_encoder=file_encoder,
        checkpoint_path=out_dir / "checkpoint.npz",
    )
    write_metrics_csv(rows, out_dir / "metrics.csv")
    _write_manifest(out_dir, config, args.corpus)
    print(f"wrote {out_dir}/checkpoint.npz, metrics.csv, manifest.json")
    return 0


def cmd_eval(args):
    model = _load_model(args.checkpoint)
    sentences, _ = _load_corpus_arg(args.corpus, args.format)
    results = evaluate_model(
        model, sentences, criterion=args.criterion, gold_re_mode=args.gold_re
    )
    text = json.dumps(results, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _load_model(path):
    if not Path(path).exists():
        raise DataError(f"checkpoint does not exist: {path}")
    model = load_checkpoint(path)
    if model.config.encoder == "file":
        model.file_encoder = _file_encoder_for(model.config)
    return model


def cmd_predict(args):
    model = _load_model(args.checkpoint)
    sentences, _ = _load_corpus_arg(args.input, args.format)
    out = []
    for sent in sentences:
        try:
            pred = model.predict(sent, gold_re_mode=False)
            out.append(
                sentence(sent.words, pred.spans,
                         [_as_annotation(r) for r in pred.relations],
                         key=sent.key)
            )
        except JerxError as e:
            raise ConfigError(
                f"checkpoint/vocab mismatch on sentence {sent.key!r}: {e}"
            )
    save_corpus(out, args.out)
    print(f"wrote {args.out}")
    return 0


def _as_annotation(rel):
    from .corpus import RelationAnnotation

    head, tail, rtype = rel
    return RelationAnnotation(head, tail, rtype)


def cmd_folds(args):
    sentences, _ = _load_corpus_arg(args.corpus, args.format)
    folds = make_folds(len(sentences), args.k, args.val_frac, args.test_frac, args.seed)
    payload = [
        {"train": tr, "val": va, "test": te} for tr, va, te in folds
    ]
    text = json.dumps(payload)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_ablate(args):
    config = _load_config(args)
    sentences, _ = _load_corpus_arg(args.corpus, args.format)
    variants = [("full", {})] + [(f, {f: True}) for f in ABLATION_FLAGS]
    rows = []
    for name, flags in variants:
        ent_runs, rel_runs = [], []
        for run in range(args.runs):
            run_cfg = config.replace(seed=config.seed + run, **flags)
            train_sents, val_sents = _train_val_split(
                sentences, args.val_frac, config.seed + run
            )
            model, _ = train(train_sents, run_cfg, val_sents=val_sents,
                             file_encoder=_file_encoder_for(run_cfg))
            results = evaluate_model(model, val_sents)
            ent_runs.append(results["entity"]["f1"] * 100)
            rel_runs.append(results["relation"]["f1"] * 100)
        ent_m, rel_m = float(np.mean(ent_runs)), float(np.mean(rel_runs))
        ent_sd = float(np.std(ent_runs, ddof=1)) if args.runs > 1 else 0.0
        rel_sd = float(np.std(rel_runs, ddof=1)) if args.runs > 1 else 0.0
        rows.append(
            {
                "model": name,
                "entity": ent_m,
                "entity_sd": ent_sd,
                "relation": rel_m,
                "relation_sd": rel_sd,
                "overall": overall_score(ent_m, rel_m),
            }
        )
    full_overall = rows[0]["overall"]
    header = f"{'model':<22} {'entity':>14} {'relation':>14} {'overall':>8} {'delta':>7}"
    print(header)
    for row in rows:
        delta = "--" if row["model"] == "full" else f"{row['overall'] - full_overall:+.2f}"
        print(
            f"{row['model']:<22} "
            f"{format_reported(row['entity'], row['entity_sd']):>14} "
            f"{format_reported(row['relation'], row['relation_sd']):>14} "
            f"{row['overall']:>8.2f} {delta:>7}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("model,entity,entity_sd,relation,relation_sd,overall,delta\n")
            for row in rows:
                delta = "" if row["model"] == "full" else repr(row["overall"] - full_overall)
                fh.write(
                    f"{row['model']},{row['entity']!r},{row['entity_sd']!r},"
                    f"{row['relation']!r},{row['relation_sd']!r},"
                    f"{row['overall']!r},{delta}\n"
                )
    return 0


def cmd_attn_heatmap(args):
    if not Path(args.emb).exists():
        raise DataError(f"embedding file does not exist: {args.emb}")
    records, header = read_emb_file(args.emb)
    rec = next((r for r in records if r.key == args.sentence), None)
    if rec is None:
        raise DataError(f"no record with key {args.sentence!r}")
    if rec.attention is None:
        raise DataError(f"record {args.sentence!r} has no attention block")
    if not (0 <= args.layer < header["layer_count"]):
        raise ConfigError(f"layer must be in [0, {header['layer_count']})")
    if not (0 <= args.head < header["head_count"]):
        raise ConfigError(f"head must be in [0, {header['head_count']})")
    weights = rec.attention[args.layer, args.head].astype(np.float64)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.sentence}_L{args.layer}H{args.head}"
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        for row in weights:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

    # darker = larger weight
    peak = weights.max()
    gray = np.full(weights.shape, 255, dtype=int)
    if peak > 0:
        gray = np.round(255 * (1.0 - weights / peak)).astype(int)
    pgm_path = out / f"{stem}.pgm"
    n = weights.shape[0]
    with open(pgm_path, "w", encoding="utf-8") as fh:
        fh.write(f"P2\n{n} {n}\n255\n")
        for row in gray:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
    print(f"wrote {csv_path} and {pgm_path}")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="jerx",
        description="Joint entity and relation extraction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_corpus_fmt(p):
        p.add_argument("--format", default="canonical-json",
                       choices=["canonical-json", "conll04-tabular"])

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--ablation", action="append")
    add_corpus_fmt(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint against a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--criterion", default="strict", choices=["strict", "boundary-only"])
    p.add_argument("--gold-re", action="store_true")
    p.add_argument("--out")
    add_corpus_fmt(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="annotate tokenized sentences")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    add_corpus_fmt(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="run the full model and all ablations")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    add_corpus_fmt(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("folds", help="generate cross-validation splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out")
    add_corpus_fmt(p)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("attn-heatmap", help="export an attention heatmap")
    p.add_argument("--emb", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--head", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attn_heatmap)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ParseError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteLoss, JerxError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
