"""Token-level BIOES classification head: one dense layer, summed
cross-entropy loss and argmax decoding."""

import numpy as np

from .errors import DimensionMismatch, LabelOutOfRange


def init_ner_params(hidden_size, n_labels, rng, dtype=np.float64):
    scale = np.sqrt(6.0 / (hidden_size + n_labels))
    return {
        "ner_W": rng.uniform(-scale, scale, (hidden_size, n_labels)).astype(dtype),
        "ner_b": np.zeros(n_labels, dtype=dtype),
    }


def ner_forward(vectors, params, *, train=False, dropout=0.0, rng=None):
    """Score every token against every BIOES label.

    Returns (scores, dropout_mask); the mask is None in inference mode and is
    needed to route gradients in the backward pass.
    """
    W, b = params["ner_W"], params["ner_b"]
    if vectors.shape[1] != W.shape[0]:
        raise DimensionMismatch(
            f"encoder width {vectors.shape[1]} != NER head input {W.shape[0]}"
        )
    scores = vectors @ W + b
    mask = None
    if train and dropout > 0.0:
        mask = (rng.random(scores.shape) >= dropout) / (1.0 - dropout)
        mask = mask.astype(scores.dtype)
        scores = scores * mask
    return scores, mask


def log_softmax(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(scores):
    e = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_sum(scores, gold_ids):
    """-sum_i log softmax(scores_i)[gold_i]; summed, not averaged."""
    gold_ids = np.asarray(gold_ids)
    if len(gold_ids) != scores.shape[0]:
        raise DimensionMismatch(
            f"{scores.shape[0]} score rows for {len(gold_ids)} labels"
        )
    if len(gold_ids) == 0:
        return 0.0
    if gold_ids.min() < 0 or gold_ids.max() >= scores.shape[1]:
        raise LabelOutOfRange(
            f"gold label outside [0, {scores.shape[1]})"
        )
    lsm = log_softmax(scores)
    return float(-lsm[np.arange(len(gold_ids)), gold_ids].sum())


def cross_entropy_grad(scores, gold_ids):
    """Gradient of cross_entropy_sum w.r.t. scores: softmax - one_hot."""
    gold_ids = np.asarray(gold_ids)
    g = softmax(scores)
    g[np.arange(len(gold_ids)), gold_ids] -= 1.0
    return g


def ner_loss(scores, gold_ids):
    return cross_entropy_sum(scores, gold_ids)


def ner_backward(vectors, dscores, mask, params, grads):
    """Accumulate head gradients and return the gradient w.r.t. the
    encoder vectors."""
    if mask is not None:
        dscores = dscores * mask
    grads["ner_W"] += vectors.T @ dscores
    grads["ner_b"] += dscores.sum(axis=0)
    return dscores @ params["ner_W"].T


def predict_tag_ids(scores):
    """Per-token argmax; ties resolve to the lowest label index."""
    return scores.argmax(axis=1)


def predict_tags(scores, vocab):
    return [vocab.ner_labels[i] for i in predict_tag_ids(scores)]
