"""Relation-candidate construction, entity-label embeddings, head/tail
projections and the deep biaffine relation scorer."""

from dataclasses import dataclass

import numpy as np

from .corpus import encode_bioes
from .errors import DimensionMismatch
from .ner import cross_entropy_grad, cross_entropy_sum


@dataclass
class RelationCandidate:
    head_token: int
    tail_token: int
    gold_class: int  # index into the relation label set, NEG allowed
    predicted_class: int | None = None


def anchor_tokens(tags):
    """Token indices carrying E- or S- tags: the last words of entities."""
    return [i for i, t in enumerate(tags) if t.startswith(("E-", "S-"))]


def build_candidates(tags, gold_entities, gold_relations, mode, vocab):
    """All ordered pairs over the anchor set, labelled against the gold
    relations.

    In predicted mode the anchors come from the predicted E-/S- tags and a
    pair only keeps its gold relation class when the predicted tags over both
    argument spans exactly reproduce the gold BIOES tags; any deviation (or no
    relation) yields NEG. In gold mode anchors are the last tokens of the
    gold spans and labels depend only on the gold relations.
    """
    if mode not in ("predicted", "gold"):
        raise ValueError(f"unknown candidate mode {mode!r}")
    if mode == "gold":
        anchors = sorted({e.last_token for e in gold_entities})
    else:
        anchors = anchor_tokens(tags)

    span_ok = {}
    if mode == "predicted":
        for span in gold_entities:
            expected = encode_bioes([span], len(tags))
            span_ok[span] = all(
                tags[k] == expected[k] for k in range(span.start, span.end + 1)
            )

    by_pair = {}
    for rel in gold_relations:
        correct = mode == "gold" or (span_ok[rel.head] and span_ok[rel.tail])
        if correct:
            by_pair[(rel.head.last_token, rel.tail.last_token)] = vocab.re_id(
                rel.relation_type
            )

    neg = vocab.neg_id
    return [
        RelationCandidate(i, j, by_pair.get((i, j), neg))
        for i in anchors
        for j in anchors
        if i != j
    ]


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def init_re_params(encoder_width, config, n_ner_labels, n_re_labels, rng,
                   dtype=np.float64):
    """Trainable tensors for the RE module, honoring the ablation flags."""
    params = {}
    d_in = encoder_width
    if not config.no_entity_embeddings:
        params["ent_emb"] = rng.uniform(
            -0.1, 0.1, (n_ner_labels, config.entity_emb_dim)
        ).astype(dtype)
        d_in += config.entity_emb_dim

    def glorot(shape):
        scale = np.sqrt(6.0 / (shape[0] + shape[-1]))
        return rng.uniform(-scale, scale, shape).astype(dtype)

    if config.no_head_tail:
        m = d_in
    else:
        m = config.head_tail_dim
        params["head_W1"] = glorot((d_in, m))
        params["head_b1"] = np.zeros(m, dtype=dtype)
        params["head_W2"] = glorot((m, m))
        params["head_b2"] = np.zeros(m, dtype=dtype)
        if not config.single_ffnn:
            params["tail_W1"] = glorot((d_in, m))
            params["tail_b1"] = np.zeros(m, dtype=dtype)
            params["tail_W2"] = glorot((m, m))
            params["tail_b2"] = np.zeros(m, dtype=dtype)

    if not config.no_bilinear:
        scale = np.sqrt(6.0 / (m + m))
        params["bi_U"] = rng.uniform(
            -scale, scale, (m, n_re_labels, m)
        ).astype(dtype)
    params["bi_W"] = glorot((n_re_labels, 2 * m))
    params["bi_b"] = np.zeros(n_re_labels, dtype=dtype)
    return params


# ---------------------------------------------------------------------------
# Forward pieces
# ---------------------------------------------------------------------------

def build_re_inputs(vectors, tag_ids, params, *, no_entity_embeddings=False):
    """Concatenate each encoder vector with the embedding of its predicted
    tag; with the no_entity_embeddings ablation the vectors pass unchanged."""
    if no_entity_embeddings:
        return vectors
    emb = params["ent_emb"]
    tag_ids = np.asarray(tag_ids)
    if tag_ids.max(initial=0) >= emb.shape[0]:
        raise DimensionMismatch("tag id outside entity-embedding table")
    rows = emb[tag_ids].astype(vectors.dtype)
    return np.concatenate([vectors, rows], axis=1)


def _ffnn_forward(x, W1, b1, W2, b2, train, dropout, rng):
    z1 = np.tanh(x @ W1 + b1)
    h = z1 @ W2 + b2
    mask = None
    if train and dropout > 0.0:
        mask = ((rng.random(h.shape) >= dropout) / (1.0 - dropout)).astype(h.dtype)
        h = h * mask
    return h, {"x": x, "z1": z1, "mask": mask}


def _ffnn_backward(cache, dh, W1, W2, grads, prefix):
    if cache["mask"] is not None:
        dh = dh * cache["mask"]
    z1 = cache["z1"]
    grads[prefix + "_W2"] += z1.T @ dh
    grads[prefix + "_b2"] += dh.sum(axis=0)
    dz1 = dh @ W2.T
    da = dz1 * (1.0 - z1 * z1)
    grads[prefix + "_W1"] += cache["x"].T @ da
    grads[prefix + "_b1"] += da.sum(axis=0)
    return da @ W1.T


def project_head_tail(x_re, params, config, *, train=False, rng=None):
    """Project RE inputs into head and tail spaces (two 2-layer FFNNs).

    Ablations: single_ffnn shares one FFNN for both roles; no_head_tail makes
    both projections the identity. Returns (H_head, H_tail, cache).
    """
    if config.no_head_tail:
        return x_re, x_re, {"kind": "identity"}
    hW1, hb1 = params["head_W1"], params["head_b1"]
    hW2, hb2 = params["head_W2"], params["head_b2"]
    if x_re.shape[1] != hW1.shape[0]:
        raise DimensionMismatch(
            f"RE input width {x_re.shape[1]} != FFNN input {hW1.shape[0]}"
        )
    dropout = config.dropout
    h_head, head_cache = _ffnn_forward(x_re, hW1, hb1, hW2, hb2, train, dropout, rng)
    if config.single_ffnn:
        h_tail, tail_cache = _ffnn_forward(x_re, hW1, hb1, hW2, hb2, train, dropout, rng)
        kind = "single"
    else:
        h_tail, tail_cache = _ffnn_forward(
            x_re, params["tail_W1"], params["tail_b1"],
            params["tail_W2"], params["tail_b2"], train, dropout, rng,
        )
        kind = "pair"
    return h_head, h_tail, {"kind": kind, "head": head_cache, "tail": tail_cache}


def project_backward(cache, d_head, d_tail, params, grads):
    """Backward of project_head_tail; returns the gradient w.r.t. x_re."""
    if cache["kind"] == "identity":
        return d_head + d_tail
    dx = _ffnn_backward(
        cache["head"], d_head, params["head_W1"], params["head_W2"], grads, "head"
    )
    if cache["kind"] == "single":
        dx = dx + _ffnn_backward(
            cache["tail"], d_tail, params["head_W1"], params["head_W2"], grads, "head"
        )
    else:
        dx = dx + _ffnn_backward(
            cache["tail"], d_tail, params["tail_W1"], params["tail_W2"], grads, "tail"
        )
    return dx


def biaffine_score(h_head, h_tail, params, *, no_bilinear=False):
    """Per-class scores for one (head, tail) pair:
    h_head^T U[:,c,:] h_tail + W[c]·(h_head ∥ h_tail) + b[c]."""
    h_head = np.asarray(h_head, dtype=np.float64)
    h_tail = np.asarray(h_tail, dtype=np.float64)
    scores = params["bi_W"] @ np.concatenate([h_head, h_tail]) + params["bi_b"]
    if not no_bilinear and "bi_U" in params:
        scores = scores + np.einsum("i,icj,j->c", h_head, params["bi_U"], h_tail)
    return scores


def biaffine_forward(h_head_sel, h_tail_sel, params, *, no_bilinear=False):
    """Vectorized biaffine scores for K candidate pairs: (K, n_classes)."""
    W, b = params["bi_W"], params["bi_b"]
    m = h_head_sel.shape[1]
    if W.shape[1] != 2 * m:
        raise DimensionMismatch(f"bi_W width {W.shape[1]} != 2*{m}")
    concat = np.concatenate([h_head_sel, h_tail_sel], axis=1)
    scores = concat @ W.T + b
    if not no_bilinear:
        scores = scores + np.einsum(
            "ki,icj,kj->kc", h_head_sel, params["bi_U"], h_tail_sel
        )
    return scores


def biaffine_backward(h_head_sel, h_tail_sel, dscores, params, grads,
                      *, no_bilinear=False):
    """Backward of biaffine_forward; returns (d_head_sel, d_tail_sel)."""
    W = params["bi_W"]
    m = h_head_sel.shape[1]
    concat = np.concatenate([h_head_sel, h_tail_sel], axis=1)
    grads["bi_W"] += dscores.T @ concat
    grads["bi_b"] += dscores.sum(axis=0)
    dconcat = dscores @ W
    d_head = dconcat[:, :m].copy()
    d_tail = dconcat[:, m:].copy()
    if not no_bilinear:
        U = params["bi_U"]
        grads["bi_U"] += np.einsum("ki,kc,kj->icj", h_head_sel, dscores, h_tail_sel)
        d_head += np.einsum("kc,icj,kj->ki", dscores, U, h_tail_sel)
        d_tail += np.einsum("kc,icj,ki->kj", dscores, U, h_head_sel)
    return d_head, d_tail


def re_loss(candidate_scores, gold_classes):
    """Summed cross-entropy over relation candidates; empty set -> 0."""
    if len(gold_classes) == 0:
        return 0.0
    return cross_entropy_sum(candidate_scores, gold_classes)


def re_loss_grad(candidate_scores, gold_classes):
    return cross_entropy_grad(candidate_scores, gold_classes)
