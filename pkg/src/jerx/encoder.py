"""Per-token contextual vectors: a trainable toy encoder and a frozen
file-backed reader over JERX-EMB embeddings."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MissingEmbeddingRecord
from .jerxemb import ATTENTION_ROW_TOL, read_emb_file

UNK_ID = 0


@dataclass(frozen=True)
class EncodedSentence:
    vectors: np.ndarray  # (n_tokens, hidden_size)
    attention: np.ndarray | None = None  # (layers, heads, n, n)

    def __post_init__(self):
        if self.attention is not None:
            sums = self.attention.astype(np.float64).sum(axis=-1)
            if np.abs(sums - 1.0).max() > ATTENTION_ROW_TOL:
                raise DimensionMismatch("attention rows must sum to 1")

    def __len__(self):
        return self.vectors.shape[0]


class TokenVocab:
    """Word -> id map with a reserved OOV bucket at index 0."""

    def __init__(self, words):
        self.id_of = {w: i + 1 for i, w in enumerate(sorted(set(words)))}
        self.size = len(self.id_of) + 1

    @classmethod
    def from_corpus(cls, sentences):
        return cls(w for s in sentences for w in s.words)

    def ids(self, words):
        return np.array([self.id_of.get(w, UNK_ID) for w in words], dtype=np.int64)

    def to_list(self):
        return [w for w, _ in sorted(self.id_of.items(), key=lambda kv: kv[1])]

    @classmethod
    def from_list(cls, words):
        v = cls.__new__(cls)
        v.id_of = {w: i + 1 for i, w in enumerate(words)}
        v.size = len(words) + 1
        return v


def init_toy_params(vocab_size, emb_dim, hidden_size, rng, dtype=np.float64):
    scale = np.sqrt(6.0 / (2 * emb_dim + hidden_size))
    return {
        "tok_emb": (rng.standard_normal((vocab_size, emb_dim)) * 0.1).astype(dtype),
        "enc_W": rng.uniform(-scale, scale, (2 * emb_dim, hidden_size)).astype(dtype),
        "enc_b": np.zeros(hidden_size, dtype=dtype),
    }


def _window_sum(rows, width):
    n = rows.shape[0]
    out = np.zeros_like(rows)
    for o in range(-width, width + 1):
        lo, hi = max(0, -o), min(n, n - o)
        out[lo:hi] += rows[lo + o:hi + o]
    return out


def _window_counts(n, width):
    idx = np.arange(n)
    return (np.minimum(n - 1, idx + width) - np.maximum(0, idx - width) + 1.0)


def toy_encode(token_ids, params, *, window=2, train=False, dropout=0.0, rng=None):
    """Embedding lookup; each token's own embedding is concatenated with the
    mean over its symmetric context window and fed through one tanh dense
    layer. Returns (vectors, cache) for the backward pass."""
    emb = params["tok_emb"]
    W, b = params["enc_W"], params["enc_b"]
    if 2 * emb.shape[1] != W.shape[0]:
        raise DimensionMismatch(
            f"embedding dim {emb.shape[1]} incompatible with dense input {W.shape[0]}"
        )
    if token_ids.max(initial=0) >= emb.shape[0]:
        raise DimensionMismatch("token id outside embedding table")
    E = emb[token_ids]
    n = E.shape[0]
    cnt = _window_counts(n, window).astype(E.dtype)
    C = _window_sum(E, window) / cnt[:, None]
    EC = np.concatenate([E, C], axis=1)
    X0 = np.tanh(EC @ W + b)
    if train and dropout > 0.0:
        mask = (rng.random(X0.shape) >= dropout) / (1.0 - dropout)
        mask = mask.astype(X0.dtype)
    else:
        mask = None
    X = X0 if mask is None else X0 * mask
    cache = {
        "ids": token_ids,
        "EC": EC,
        "X0": X0,
        "mask": mask,
        "cnt": cnt,
        "window": window,
    }
    return X, cache


def toy_backward(cache, dX, params, grads):
    """Accumulate toy-encoder gradients for an upstream dX into `grads`."""
    if cache["mask"] is not None:
        dX = dX * cache["mask"]
    X0, EC, cnt, window = cache["X0"], cache["EC"], cache["cnt"], cache["window"]
    p = EC.shape[1] // 2
    dA = dX * (1.0 - X0 * X0)
    grads["enc_W"] += EC.T @ dA
    grads["enc_b"] += dA.sum(axis=0)
    dEC = dA @ params["enc_W"].T
    dS = dEC[:, p:] / cnt[:, None]
    dE = dEC[:, :p] + _window_sum(dS, window)  # the window operator is symmetric
    np.add.at(grads["tok_emb"], cache["ids"], dE)


def toy_forward_backward(token_ids, params, upstream_grads, *, window=2):
    """Deterministic forward + backward (dropout off); returns parameter
    gradients for the toy encoder."""
    X, cache = toy_encode(token_ids, params, window=window, train=False)
    if upstream_grads.shape != X.shape:
        raise DimensionMismatch(
            f"upstream gradient shape {upstream_grads.shape} != {X.shape}"
        )
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    toy_backward(cache, upstream_grads, params, grads)
    return grads


class FileBackedEncoder:
    """Frozen encoder that serves vectors recorded in a JERX-EMB file.

    Lookup is by sentence key; vectors are returned bit-identical to the
    file payload and contribute no gradients.
    """

    def __init__(self, path, validate=True):
        records, header = read_emb_file(path, validate=validate)
        self.header = header
        self.hidden_size = header["hidden_size"]
        self._records = {r.key: r for r in records}

    def __contains__(self, key):
        return key in self._records

    def encode(self, sentence):
        rec = self._records.get(sentence.key)
        if rec is None:
            raise MissingEmbeddingRecord(f"no record for sentence {sentence.key!r}")
        if rec.embeddings.shape[0] != len(sentence):
            raise DimensionMismatch(
                f"record {sentence.key!r} has {rec.embeddings.shape[0]} vectors "
                f"for {len(sentence)} tokens"
            )
        return EncodedSentence(rec.embeddings, rec.attention)
