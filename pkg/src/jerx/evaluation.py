"""Span-level scoring, micro/macro F1, the overall statistic and
cross-validation aggregation."""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp, fp, fn):
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, fp, fn)

    def to_dict(self):
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def _count_matches(pred_keys, gold_keys):
    tp = sum((Counter(pred_keys) & Counter(gold_keys)).values())
    return tp, len(pred_keys) - tp, len(gold_keys) - tp


def _span_key(span):
    return (span.start, span.end, span.entity_type)


def score_ner(pred_spans, gold_spans):
    """Micro PRF over per-sentence span lists; a predicted span counts as a
    true positive only on exact boundary and type match."""
    tp = fp = fn = 0
    for pred, gold in zip(pred_spans, gold_spans):
        t, p, n = _count_matches(
            [_span_key(s) for s in pred], [_span_key(s) for s in gold]
        )
        tp, fp, fn = tp + t, fp + p, fn + n
    return PRF.from_counts(tp, fp, fn)


def _relation_key(rel, criterion):
    head, tail, rtype = rel
    if criterion == "strict":
        return (_span_key(head), _span_key(tail), rtype)
    if criterion == "boundary-only":
        return ((head.start, head.end), (tail.start, tail.end), rtype)
    raise ValueError(f"unknown criterion {criterion!r}")


def score_re(pred_relations, gold_relations, criterion="strict"):
    """Micro PRF over per-sentence (head, tail, type) triples.

    strict requires both argument spans to match boundaries and entity types;
    boundary-only relaxes the entity types. Relation type and direction must
    match under both criteria.
    """
    tp = fp = fn = 0
    for pred, gold in zip(pred_relations, gold_relations):
        t, p, n = _count_matches(
            [_relation_key(r, criterion) for r in pred],
            [_relation_key(r, criterion) for r in gold],
        )
        tp, fp, fn = tp + t, fp + p, fn + n
    return PRF.from_counts(tp, fp, fn)


def per_class_prf(pred, gold, key_fn, class_fn):
    classes = sorted(
        {class_fn(x) for sent in gold for x in sent}
        | {class_fn(x) for sent in pred for x in sent}
    )
    out = {}
    for cls in classes:
        tp = fp = fn = 0
        for p_sent, g_sent in zip(pred, gold):
            t, p, n = _count_matches(
                [key_fn(x) for x in p_sent if class_fn(x) == cls],
                [key_fn(x) for x in g_sent if class_fn(x) == cls],
            )
            tp, fp, fn = tp + t, fp + p, fn + n
        out[cls] = PRF.from_counts(tp, fp, fn)
    return out


def overall_score(entity_f1, relation_f1):
    """Arithmetic mean of the two F1 scores in single precision, rounded to
    2 decimals for reporting."""
    mean = (np.float32(entity_f1) + np.float32(relation_f1)) / np.float32(2)
    return round(float(mean), 2)


@dataclass(frozen=True)
class CVSummary:
    scheme: str
    f1: float
    sd: float
    per_fold_f1: tuple


def aggregate_cv(per_fold, scheme="macro-mean"):
    """Aggregate fold-level PRFs.

    macro-mean averages the per-fold F1 values; micro-pool recomputes F1 from
    the pooled tp/fp/fn counts. The standard deviation (ddof=1) over fold F1s
    is reported either way.
    """
    if not per_fold:
        raise EmptyInput("no folds to aggregate")
    f1s = tuple(p.f1 for p in per_fold)
    sd = float(np.std(f1s, ddof=1)) if len(f1s) > 1 else 0.0
    if scheme == "macro-mean":
        f1 = float(np.mean(f1s))
    elif scheme == "micro-pool":
        pooled = PRF.from_counts(
            sum(p.tp for p in per_fold),
            sum(p.fp for p in per_fold),
            sum(p.fn for p in per_fold),
        )
        f1 = pooled.f1
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return CVSummary(scheme, f1, sd, f1s)


def format_reported(mean, sd):
    """Table-style display: mean to 2 decimals, sd subscript to 1 decimal."""
    return f"{mean:.2f} ({sd:.1f})"


# ---------------------------------------------------------------------------
# Whole-model evaluation
# ---------------------------------------------------------------------------

def evaluate_model(model, sentences, *, criterion="strict", gold_re_mode=None):
    """Run inference over a sentence list and score entities and relations.

    Returns a plain dict (JSON-ready): entity/relation PRFs, per-class
    breakdowns, a relation-candidate confusion matrix and the overall score.
    """
    preds = [model.predict(s, gold_re_mode=gold_re_mode) for s in sentences]
    pred_spans = [p.spans for p in preds]
    gold_spans = [list(s.entities) for s in sentences]
    pred_rels = [p.relations for p in preds]
    gold_rels = [
        [(r.head, r.tail, r.relation_type) for r in s.relations] for s in sentences
    ]

    entity = score_ner(pred_spans, gold_spans)
    relation = score_re(pred_rels, gold_rels, criterion)

    n_re = len(model.vocab.re_labels)
    confusion = np.zeros((n_re, n_re), dtype=int)
    for p in preds:
        for cand in p.candidates:
            if cand.predicted_class is not None:
                confusion[cand.gold_class, cand.predicted_class] += 1

    return {
        "criterion": criterion,
        "entity": entity.to_dict(),
        "relation": relation.to_dict(),
        "entity_per_class": {
            k: v.to_dict()
            for k, v in per_class_prf(
                pred_spans, gold_spans, _span_key, lambda s: s.entity_type
            ).items()
        },
        "relation_per_class": {
            k: v.to_dict()
            for k, v in per_class_prf(
                pred_rels,
                gold_rels,
                lambda r: _relation_key(r, criterion),
                lambda r: r[2],
            ).items()
        },
        "relation_confusion": {
            "labels": list(model.vocab.re_labels),
            "matrix": confusion.tolist(),
        },
        "overall": overall_score(entity.f1, relation.f1),
    }
