"""Run a pretrained transformer over a pre-tokenized corpus and pool its
final-layer hidden states (and optionally attention maps) down to one entry
per word token."""

import json

import numpy as np
import torch

from .format import ExportRecord, write_emb_file

POOLING_MODES = ("first-subtoken", "mean-subtoken")


class ModelLoadError(Exception):
    pass


class AlignmentError(Exception):
    pass


def load_model(model_name):
    """Load (model, tokenizer) by hub name or local directory."""
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModel.from_pretrained(model_name)
    except Exception as e:
        raise ModelLoadError(f"cannot load {model_name!r}: {e}") from e
    model.eval()
    return model, tokenizer


def _force_eager_attention(model):
    # fused sdpa kernels cannot return attention probabilities
    try:
        model.set_attn_implementation("eager")
    except AttributeError:
        model.config._attn_implementation = "eager"


def load_corpus(path):
    """Sentences from a canonical JSON corpus file: (key, words) pairs.
    Annotations in the file are ignored; only the token text matters here."""
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)
    out = []
    for idx, rec in enumerate(records):
        out.append((str(rec.get("id", f"s{idx}")), list(rec["tokens"])))
    return out


def _word_groups(word_ids, n_words, key):
    """Subtoken positions per word, skipping special markers (CLS, SEP)."""
    groups = [[] for _ in range(n_words)]
    for pos, wid in enumerate(word_ids):
        if wid is not None:
            groups[wid].append(pos)
    for w, g in enumerate(groups):
        if not g:
            raise AlignmentError(f"sentence {key!r}: word {w} has no subtokens")
    return groups


def _pool_embeddings(hidden, groups, pool):
    if pool == "first-subtoken":
        rows = [hidden[g[0]] for g in groups]
    else:
        rows = [hidden[g].mean(axis=0) for g in groups]
    return np.stack(rows).astype(np.float32)


def _pool_attention(att, groups, pool):
    """Reduce a subtoken-level (L, H, S, S) stack to word level (L, H, N, N).

    Columns belonging to one word are summed (probability mass over the
    word); the row for a word is its first subtoken's row, or the mean of
    its rows under mean pooling. Dropping the special-marker columns loses
    mass, so rows are renormalized to sum to 1.
    """
    # columns first: sum subtoken mass per target word
    cols = np.stack([att[:, :, :, g].sum(axis=-1) for g in groups], axis=-1)
    if pool == "first-subtoken":
        rows = np.stack([cols[:, :, g[0], :] for g in groups], axis=2)
    else:
        rows = np.stack([cols[:, :, g, :].mean(axis=2) for g in groups], axis=2)
    denom = rows.sum(axis=-1, keepdims=True)
    denom[denom <= 0] = 1.0
    return (rows / denom).astype(np.float32)


def encode_sentence(model, tokenizer, words, key, pool="first-subtoken",
                    include_attention=False):
    """One ExportRecord for a pre-tokenized sentence."""
    if pool not in POOLING_MODES:
        raise ValueError(f"unknown pooling mode {pool!r}")
    enc = tokenizer([words], is_split_into_words=True, return_tensors="pt")
    word_ids = enc.word_ids(0)
    groups = _word_groups(word_ids, len(words), key)
    with torch.no_grad():
        out = model(**enc, output_attentions=include_attention)
    hidden = out.last_hidden_state[0].numpy()
    record = ExportRecord(key, _pool_embeddings(hidden, groups, pool))
    if include_attention:
        if not out.attentions:
            raise ModelLoadError(
                "model returned no attention tensors; it must run with an "
                "eager attention implementation"
            )
        att = np.stack([a[0].numpy() for a in out.attentions])
        record.attention = _pool_attention(att, groups, pool)
    return record


def export(corpus_path, model_name, out_path, *, pool="first-subtoken",
           include_attention=False, model=None, tokenizer=None, log=None):
    """Export a whole corpus to a JERX-EMB file; returns per-run stats.

    An already-loaded (model, tokenizer) pair can be passed in to skip the
    hub lookup (used by tests and batch drivers).
    """
    if model is None or tokenizer is None:
        model, tokenizer = load_model(model_name)
    if include_attention:
        _force_eager_attention(model)
    sentences = load_corpus(corpus_path)
    if not sentences:
        raise ValueError(f"no sentences in {corpus_path}")
    records = []
    for key, words in sentences:
        records.append(
            encode_sentence(model, tokenizer, words, key, pool=pool,
                            include_attention=include_attention)
        )
        if log:
            log(key)
    layers = heads = 0
    if include_attention:
        layers, heads = records[0].attention.shape[:2]
    write_emb_file(out_path, records, layer_count=layers, head_count=heads)
    return {
        "sentences": len(records),
        "tokens": int(sum(r.embeddings.shape[0] for r in records)),
        "hidden_size": int(records[0].embeddings.shape[1]),
        "layer_count": layers,
        "head_count": heads,
    }
