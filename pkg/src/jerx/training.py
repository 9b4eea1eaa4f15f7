"""Joint training: loss ramp, AdamW with decoupled weight decay, gradient
clipping, batching and checkpointing."""

import copy
from dataclasses import dataclass

import numpy as np

from .corpus import LabelVocab
from .encoder import TokenVocab
from .errors import NonFiniteLoss
from .evaluation import evaluate_model
from .model import Model, save_checkpoint

METRICS_COLUMNS = (
    "epoch",
    "lambda_mean",
    "loss_ner",
    "loss_re",
    "val_entity_f1",
    "val_relation_f1",
    "val_overall",
)


def lambda_schedule(epoch, batch, batches_per_epoch, *, no_pretraining=False):
    """RE-loss weight: ramps linearly over the batches of epoch 0 (endpoints
    0 and 1 inclusive), then stays at 1. The no_pretraining ablation pins it
    to 1 everywhere."""
    if batches_per_epoch < 1:
        raise ValueError("batches_per_epoch must be >= 1")
    if no_pretraining or epoch >= 1:
        return 1.0
    return batch / max(batches_per_epoch - 1, 1)


def joint_loss(l_ner, l_re, lam):
    return l_ner + lam * l_re


def global_grad_norm(grads):
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def clip_gradients(grads, max_norm):
    """Rescale all gradients in place when the global norm exceeds max_norm.
    Returns the pre-clip norm."""
    norm = global_grad_norm(grads)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class AdamW:
    """Adam with decoupled weight decay. Bias vectors and the entity-label
    embedding table are excluded from decay."""

    def __init__(self, params, config):
        self.lr = config.learning_rate
        self.beta1 = config.adam_beta1
        self.beta2 = config.adam_beta2
        self.eps = config.adam_eps
        self.weight_decay = config.weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.no_decay = {
            k for k, v in params.items() if v.ndim == 1 or k == "ent_emb"
        }

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            if self.weight_decay and k not in self.no_decay:
                update = update + self.weight_decay * p
            p -= (self.lr * update).astype(p.dtype)


@dataclass
class TrainState:
    model: Model
    optimizer: AdamW
    rng: np.random.Generator
    batches_per_epoch: int
    epoch: int = 0
    batch_in_epoch: int = 0

    @classmethod
    def create(cls, model, batches_per_epoch):
        return cls(
            model=model,
            optimizer=AdamW(model.params, model.config),
            rng=np.random.default_rng(model.config.seed + 1),
            batches_per_epoch=batches_per_epoch,
        )

    def current_lambda(self):
        return lambda_schedule(
            self.epoch,
            self.batch_in_epoch,
            self.batches_per_epoch,
            no_pretraining=self.model.config.no_pretraining,
        )


def train_step(batch, state):
    """One optimizer step over a sentence batch. Returns per-step metrics."""
    model = state.model
    lam = state.current_lambda()
    grads = model.zero_grads()
    l_ner = l_re = 0.0
    for sent in batch:
        ln, lr = model.forward_backward(
            sent, lam, train=True, rng=state.rng, grads=grads
        )
        l_ner += ln
        l_re += lr
    loss = joint_loss(l_ner, l_re, lam)
    if not np.isfinite(loss):
        raise NonFiniteLoss(
            f"loss={loss} at epoch {state.epoch} batch {state.batch_in_epoch} "
            f"(L_ner={l_ner}, L_re={l_re}, lambda={lam})"
        )
    grad_norm = clip_gradients(grads, model.config.grad_clip)
    state.optimizer.step(model.params, grads)
    state.batch_in_epoch += 1
    if state.batch_in_epoch >= state.batches_per_epoch:
        state.batch_in_epoch = 0
        state.epoch += 1
    return {"loss_ner": l_ner, "loss_re": l_re, "lambda": lam, "grad_norm": grad_norm}


def _batches(order, batch_size):
    return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]


def train(train_sents, config, val_sents=(), vocab=None, token_vocab=None,
          file_encoder=None, checkpoint_path=None, log=None):
    """Train for config.epochs epochs; returns (model, metrics_rows).

    The model snapshot with the best validation overall score is kept (and
    written to checkpoint_path when given); with no validation set the final
    parameters win.
    """
    if not train_sents:
        raise ValueError("training corpus is empty")
    all_sents = list(train_sents) + list(val_sents)
    if vocab is None:
        vocab = LabelVocab.from_corpus(all_sents)
    if token_vocab is None and config.encoder == "toy":
        token_vocab = TokenVocab.from_corpus(train_sents)
    model = Model.build(
        config, vocab, token_vocab, file_encoder,
        rng=np.random.default_rng(config.seed),
    )
    n_batches = max(1, -(-len(train_sents) // config.batch_size))
    state = TrainState.create(model, n_batches)
    shuffle_rng = np.random.default_rng(config.seed + 2)

    rows = []
    best = (-1.0, copy.deepcopy(model.params))
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_sents))
        lam_sum = ner_sum = re_sum = 0.0
        for batch_idx in _batches(list(order), config.batch_size):
            metrics = train_step([train_sents[i] for i in batch_idx], state)
            lam_sum += metrics["lambda"]
            ner_sum += metrics["loss_ner"]
            re_sum += metrics["loss_re"]
        row = {
            "epoch": epoch,
            "lambda_mean": lam_sum / n_batches,
            "loss_ner": ner_sum / len(train_sents),
            "loss_re": re_sum / len(train_sents),
            "val_entity_f1": "",
            "val_relation_f1": "",
            "val_overall": "",
        }
        if val_sents:
            results = evaluate_model(model, val_sents)
            ent, rel = results["entity"]["f1"], results["relation"]["f1"]
            row["val_entity_f1"] = ent
            row["val_relation_f1"] = rel
            row["val_overall"] = (ent + rel) / 2.0
            if row["val_overall"] > best[0]:
                best = (row["val_overall"], copy.deepcopy(model.params))
        rows.append(row)
        if log:
            log(row)
    if val_sents and config.epochs > 0:
        model.params = best[1]
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model)
    return model, rows


def write_metrics_csv(rows, path):
    """Append-style metrics log; formatting is fixed so identical runs give
    byte-identical files."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in METRICS_COLUMNS:
                v = row[col]
                cells.append(repr(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")
