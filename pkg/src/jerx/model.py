"""The joint model: encoder -> NER head -> relation scorer, with a manual
backward pass over all trainable tensors."""

from dataclasses import dataclass, field

import numpy as np

from . import ner as ner_mod
from . import relation as re_mod
from .corpus import NEG_LABEL, decode_bioes, encode_bioes
from .encoder import FileBackedEncoder, TokenVocab, toy_backward, toy_encode
from .errors import DimensionMismatch


def init_params(config, vocab, token_vocab=None, encoder_width=None, rng=None):
    """All trainable tensors as a flat name -> array dict."""
    rng = rng or np.random.default_rng(config.seed)
    dtype = config.dtype
    params = {}
    if config.encoder == "toy":
        if token_vocab is None:
            raise ValueError("toy encoder requires a token vocabulary")
        from .encoder import init_toy_params

        params.update(
            init_toy_params(
                token_vocab.size, config.toy_emb_dim, config.hidden_size, rng, dtype
            )
        )
        width = config.hidden_size
    else:
        if encoder_width is None:
            raise ValueError("file-backed encoder requires its hidden size")
        width = encoder_width
    params.update(
        ner_mod.init_ner_params(width, len(vocab.ner_labels), rng, dtype)
    )
    params.update(
        re_mod.init_re_params(
            width, config, len(vocab.ner_labels), len(vocab.re_labels), rng, dtype
        )
    )
    return params


@dataclass
class Prediction:
    tags: list
    spans: list
    relations: list  # (head EntitySpan, tail EntitySpan, relation label)
    candidates: list = field(default_factory=list)


class Model:
    """Bundles parameters with the vocabularies and encoder they assume."""

    def __init__(self, params, config, vocab, token_vocab=None, file_encoder=None):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.token_vocab = token_vocab
        self.file_encoder = file_encoder
        if config.encoder == "file" and file_encoder is None and config.emb_path:
            self.file_encoder = FileBackedEncoder(config.emb_path)

    @classmethod
    def build(cls, config, vocab, token_vocab=None, file_encoder=None, rng=None):
        width = file_encoder.hidden_size if file_encoder is not None else None
        params = init_params(config, vocab, token_vocab, width, rng)
        return cls(params, config, vocab, token_vocab, file_encoder)

    @property
    def encoder_width(self):
        if self.config.encoder == "toy":
            return self.config.hidden_size
        return self.file_encoder.hidden_size

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    # -- encoder dispatch ---------------------------------------------------

    def _encode(self, sent, train, rng):
        if self.config.encoder == "toy":
            ids = self.token_vocab.ids(sent.words)
            return toy_encode(
                ids,
                self.params,
                window=self.config.window,
                train=train,
                dropout=self.config.dropout,
                rng=rng,
            )
        enc = self.file_encoder.encode(sent)
        return enc.vectors.astype(self.config.dtype), None

    # -- training -----------------------------------------------------------

    def forward_backward(self, sent, lam, *, train=True, rng=None, grads=None):
        """One sentence forward pass; if `grads` is given, accumulate the
        gradients of L_ner + lam * L_re into it. Returns (L_ner, L_re)."""
        cfg = self.config
        vocab = self.vocab
        x, enc_cache = self._encode(sent, train, rng)

        scores, ner_mask = ner_mod.ner_forward(
            x, self.params, train=train, dropout=cfg.dropout, rng=rng
        )
        gold_tags = encode_bioes(sent.entities, len(sent))
        gold_ids = vocab.tag_ids(gold_tags)
        l_ner = ner_mod.ner_loss(scores, gold_ids)

        pred_ids = ner_mod.predict_tag_ids(scores)
        pred_tags = [vocab.ner_labels[i] for i in pred_ids]

        mode = "gold" if cfg.gold_re_mode else "predicted"
        cands = re_mod.build_candidates(
            pred_tags, sent.entities, sent.relations, mode, vocab
        )
        l_re = 0.0
        re_cache = None
        if cands:
            emb_ids = gold_ids if mode == "gold" else pred_ids
            x_re = re_mod.build_re_inputs(
                x, emb_ids, self.params,
                no_entity_embeddings=cfg.no_entity_embeddings,
            )
            h_head, h_tail, pcache = re_mod.project_head_tail(
                x_re, self.params, cfg, train=train, rng=rng
            )
            hi = np.array([c.head_token for c in cands])
            tj = np.array([c.tail_token for c in cands])
            gold_cls = np.array([c.gold_class for c in cands])
            re_scores = re_mod.biaffine_forward(
                h_head[hi], h_tail[tj], self.params, no_bilinear=cfg.no_bilinear
            )
            l_re = re_mod.re_loss(re_scores, gold_cls)
            re_cache = (x_re, emb_ids, h_head, h_tail, pcache, hi, tj, gold_cls, re_scores)

        if grads is None:
            return l_ner, l_re

        d_x = np.zeros_like(x)
        if re_cache is not None:
            x_re, emb_ids, h_head, h_tail, pcache, hi, tj, gold_cls, re_scores = re_cache
            if lam != 0.0:
                dsr = lam * re_mod.re_loss_grad(re_scores, gold_cls)
                d_hs, d_ts = re_mod.biaffine_backward(
                    h_head[hi], h_tail[tj], dsr, self.params, grads,
                    no_bilinear=cfg.no_bilinear,
                )
                d_head = np.zeros_like(h_head)
                d_tail = np.zeros_like(h_tail)
                np.add.at(d_head, hi, d_hs)
                np.add.at(d_tail, tj, d_ts)
                d_xre = re_mod.project_backward(
                    pcache, d_head, d_tail, self.params, grads
                )
                if cfg.no_entity_embeddings:
                    d_x += d_xre
                else:
                    width = x.shape[1]
                    d_x += d_xre[:, :width]
                    np.add.at(grads["ent_emb"], emb_ids, d_xre[:, width:])

        dsn = ner_mod.cross_entropy_grad(scores, gold_ids)
        d_x += ner_mod.ner_backward(x, dsn, ner_mask, self.params, grads)

        if cfg.encoder == "toy":
            toy_backward(enc_cache, d_x, self.params, grads)
        return l_ner, l_re

    # -- inference ----------------------------------------------------------

    def predict(self, sent, *, gold_re_mode=None):
        """Deterministic inference: predicted tags, decoded spans and the
        non-NEG relations between resolvable entity spans."""
        cfg = self.config
        vocab = self.vocab
        gold_mode = cfg.gold_re_mode if gold_re_mode is None else gold_re_mode
        x, _ = self._encode(sent, False, None)
        scores, _ = ner_mod.ner_forward(x, self.params)
        pred_ids = ner_mod.predict_tag_ids(scores)
        pred_tags = [vocab.ner_labels[i] for i in pred_ids]
        pred_spans = decode_bioes(pred_tags)

        mode = "gold" if gold_mode else "predicted"
        cands = re_mod.build_candidates(
            pred_tags, sent.entities, sent.relations, mode, vocab
        )
        relations = []
        if cands:
            if mode == "gold":
                emb_ids = vocab.tag_ids(encode_bioes(sent.entities, len(sent)))
                span_by_end = {e.last_token: e for e in sent.entities}
            else:
                emb_ids = pred_ids
                span_by_end = {s.last_token: s for s in pred_spans}
            x_re = re_mod.build_re_inputs(
                x, emb_ids, self.params,
                no_entity_embeddings=cfg.no_entity_embeddings,
            )
            h_head, h_tail, _ = re_mod.project_head_tail(x_re, self.params, cfg)
            hi = np.array([c.head_token for c in cands])
            tj = np.array([c.tail_token for c in cands])
            re_scores = re_mod.biaffine_forward(
                h_head[hi], h_tail[tj], self.params, no_bilinear=cfg.no_bilinear
            )
            pred_cls = re_scores.argmax(axis=1)
            for cand, cls in zip(cands, pred_cls):
                cand.predicted_class = int(cls)
                label = vocab.re_labels[cls]
                if label == NEG_LABEL:
                    continue
                head = span_by_end.get(cand.head_token)
                tail = span_by_end.get(cand.tail_token)
                # anchors without a decodable span cannot yield a well-formed
                # relation
                if head is None or tail is None:
                    continue
                relations.append((head, tail, label))
        return Prediction(pred_tags, pred_spans, relations, cands)


def save_checkpoint(path, model):
    import json

    payload = {f"p_{k}": v for k, v in model.params.items()}
    payload["meta_config"] = np.array(json.dumps(model.config.to_dict()))
    payload["meta_vocab"] = np.array(json.dumps(model.vocab.to_dict()))
    if model.token_vocab is not None:
        payload["meta_tokens"] = np.array(json.dumps(model.token_vocab.to_list()))
    payload["meta_version"] = np.array(1)
    np.savez(path, **payload)


def load_checkpoint(path, file_encoder=None):
    import json

    from .config import Config
    from .corpus import LabelVocab

    with np.load(path, allow_pickle=False) as data:
        if int(data["meta_version"]) != 1:
            raise DimensionMismatch("unsupported checkpoint version")
        config = Config.from_dict(json.loads(str(data["meta_config"])))
        vocab = LabelVocab.from_dict(json.loads(str(data["meta_vocab"])))
        token_vocab = None
        if "meta_tokens" in data:
            token_vocab = TokenVocab.from_list(json.loads(str(data["meta_tokens"])))
        params = {k[2:]: data[k] for k in data.files if k.startswith("p_")}
    return Model(params, config, vocab, token_vocab, file_encoder)
