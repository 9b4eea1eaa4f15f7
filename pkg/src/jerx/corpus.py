"""Domain types, the BIOES tag codec, corpus ingestion and fold generation."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorpusTooSmall,
    InvariantViolation,
    OverlappingSpans,
    ParseError,
    SpanOutOfBounds,
    UnknownLabel,
)

logger = logging.getLogger(__name__)

NEG_LABEL = "NEG"
OUTSIDE = "O"


@dataclass(frozen=True)
class Token:
    text: str
    index: int

    def __post_init__(self):
        if not self.text:
            raise InvariantViolation("token text must be non-empty")
        if self.index < 0:
            raise InvariantViolation("token index must be >= 0")


@dataclass(frozen=True)
class EntitySpan:
    start: int  # inclusive
    end: int  # inclusive
    entity_type: str

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise SpanOutOfBounds(f"bad span [{self.start}, {self.end}]")

    def overlaps(self, other):
        return self.start <= other.end and other.start <= self.end

    @property
    def last_token(self):
        return self.end


@dataclass(frozen=True)
class RelationAnnotation:
    head: EntitySpan
    tail: EntitySpan
    relation_type: str

    def __post_init__(self):
        if self.head == self.tail:
            raise InvariantViolation("relation head and tail must differ")
        if self.relation_type == NEG_LABEL:
            raise InvariantViolation("gold relations may not carry the NEG label")


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: tuple
    entities: tuple
    relations: tuple
    key: str = ""

    def __post_init__(self):
        n = len(self.tokens)
        for span in self.entities:
            if span.end >= n:
                raise SpanOutOfBounds(f"span {span} outside sentence of length {n}")
        ents = set(self.entities)
        for rel in self.relations:
            if rel.head not in ents or rel.tail not in ents:
                raise InvariantViolation(f"relation {rel} references unknown span")

    def __len__(self):
        return len(self.tokens)

    @property
    def words(self):
        return [t.text for t in self.tokens]


def sentence(words, entities=(), relations=(), key=""):
    """Convenience constructor from plain strings and span tuples."""
    tokens = tuple(Token(w, i) for i, w in enumerate(words))
    return AnnotatedSentence(tokens, tuple(entities), tuple(relations), key)


# ---------------------------------------------------------------------------
# BIOES codec
# ---------------------------------------------------------------------------

def encode_bioes(entities, sentence_len):
    """Encode entity spans as one BIOES tag per token.

    Single-token spans become S-<type>; longer spans become
    B-<type>, I-<type>*, E-<type>. Every other token is O.
    """
    for span in entities:
        if span.end >= sentence_len:
            raise SpanOutOfBounds(f"{span} outside sentence of length {sentence_len}")
    ordered = sorted(entities, key=lambda s: (s.start, s.end))
    for a, b in zip(ordered, ordered[1:]):
        if a.overlaps(b):
            raise OverlappingSpans(f"{a} overlaps {b}")
    tags = [OUTSIDE] * sentence_len
    for span in ordered:
        if span.start == span.end:
            tags[span.start] = f"S-{span.entity_type}"
        else:
            tags[span.start] = f"B-{span.entity_type}"
            for i in range(span.start + 1, span.end):
                tags[i] = f"I-{span.entity_type}"
            tags[span.end] = f"E-{span.entity_type}"
    return tags


def _split_tag(tag):
    if tag == OUTSIDE:
        return OUTSIDE, None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in "BIES":
        return tag[0], tag[2:]
    raise UnknownLabel(f"not a BIOES tag: {tag!r}")


def decode_bioes(tags):
    """Extract entity spans from a BIOES tag sequence.

    Uses a strict repair policy: a span is emitted only for an S- tag or a
    maximal B- (I-)* E- run with one consistent type. Dangling I-/E- tags,
    unclosed B- runs and mid-span type switches emit nothing.
    """
    spans = []
    i = 0
    n = len(tags)
    while i < n:
        prefix, etype = _split_tag(tags[i])
        if prefix == "S":
            spans.append(EntitySpan(i, i, etype))
            i += 1
        elif prefix == "B":
            j = i + 1
            closed = False
            while j < n:
                p, t = _split_tag(tags[j])
                if p == "I" and t == etype:
                    j += 1
                elif p == "E" and t == etype:
                    spans.append(EntitySpan(i, j, etype))
                    closed = True
                    break
                else:
                    break
            # unclosed B- emits nothing; rescan from the next token so a
            # later well-formed run is still found
            i = j + 1 if closed else i + 1
        else:
            # O and dangling I-/E- emit nothing
            i += 1
    return spans


@dataclass(frozen=True)
class LabelVocab:
    """Deterministic label orderings for NER tags and relation classes.

    NER labels are sorted lexicographically; NEG is pinned to index 0 of the
    relation label set so checkpoints and confusion matrices are reproducible.
    """

    ner_labels: tuple
    re_labels: tuple
    _ner_index: dict = field(default_factory=dict, compare=False, repr=False)
    _re_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._ner_index.update({l: i for i, l in enumerate(self.ner_labels)})
        self._re_index.update({l: i for i, l in enumerate(self.re_labels)})

    @classmethod
    def from_types(cls, entity_types, relation_types):
        ner = sorted(
            [f"{p}-{t}" for t in set(entity_types) for p in "BIES"] + [OUTSIDE]
        )
        rel = [NEG_LABEL] + sorted(set(relation_types) - {NEG_LABEL})
        return cls(tuple(ner), tuple(rel))

    @classmethod
    def from_corpus(cls, sentences):
        etypes = {s.entity_type for sent in sentences for s in sent.entities}
        rtypes = {r.relation_type for sent in sentences for r in sent.relations}
        return cls.from_types(etypes, rtypes)

    def ner_id(self, tag):
        try:
            return self._ner_index[tag]
        except KeyError:
            raise UnknownLabel(f"unknown NER tag {tag!r}") from None

    def re_id(self, label):
        try:
            return self._re_index[label]
        except KeyError:
            raise UnknownLabel(f"unknown relation label {label!r}") from None

    @property
    def outside_id(self):
        return self._ner_index[OUTSIDE]

    @property
    def neg_id(self):
        return self._re_index[NEG_LABEL]

    def tag_ids(self, tags):
        return np.array([self.ner_id(t) for t in tags], dtype=np.int64)

    def to_dict(self):
        return {"ner_labels": list(self.ner_labels), "re_labels": list(self.re_labels)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["ner_labels"]), tuple(d["re_labels"]))


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _resolve_overlaps(entities, relations, where):
    """Drop relations whose arguments overlap other entities, then drop the
    overlapping spans themselves (keep-first in (start, end) order).

    Returns (entities, relations, dropped_relation_count).
    """
    ordered = sorted(entities, key=lambda s: (s.start, s.end))
    overlapping = set()
    kept_spans = []
    for span in ordered:
        clash = [k for k in kept_spans if k.overlaps(span)]
        if clash:
            overlapping.add(span)
            overlapping.update(clash)
        else:
            kept_spans.append(span)
    if not overlapping:
        return list(entities), list(relations), 0
    kept_rels = [
        r for r in relations if r.head not in overlapping and r.tail not in overlapping
    ]
    dropped = len(relations) - len(kept_rels)
    # spans that clashed but came first in (start, end) order survive
    final_spans = [s for s in entities if s in kept_spans]
    logger.warning(
        "%s: dropped %d relation(s) and %d entity span(s) with overlaps",
        where,
        dropped,
        len(entities) - len(final_spans),
    )
    return final_spans, kept_rels, dropped


def load_corpus(path, fmt="canonical-json"):
    """Load a corpus file into AnnotatedSentences.

    Relations whose argument spans overlap other entities are dropped with a
    logged count; the surviving annotation satisfies all invariants.
    Returns (sentences, dropped_relation_count).
    """
    if fmt == "canonical-json":
        return _load_canonical_json(path)
    if fmt == "conll04-tabular":
        return _load_conll04(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


def _load_canonical_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            records = json.load(fh)
    except OSError as e:
        raise ParseError(str(e), location=str(path)) from e
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", location=f"{path}:{e.lineno}") from e
    if not isinstance(records, list):
        raise ParseError("top-level value must be an array", location=str(path))

    sentences = []
    total_dropped = 0
    for idx, rec in enumerate(records):
        where = f"{path}[{idx}]"
        try:
            words = rec["tokens"]
            raw_ents = rec.get("entities", [])
            raw_rels = rec.get("relations", [])
        except (TypeError, KeyError) as e:
            raise ParseError(f"malformed sentence record: {e}", location=where) from e
        if not words or not all(isinstance(w, str) and w for w in words):
            raise ParseError("tokens must be non-empty strings", location=where)
        try:
            ents = [
                EntitySpan(int(e["start"]), int(e["end"]), str(e["type"]))
                for e in raw_ents
            ]
            rels = [
                RelationAnnotation(
                    ents[int(r["head"])], ents[int(r["tail"])], str(r["type"])
                )
                for r in raw_rels
            ]
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise ParseError(f"malformed annotation: {e}", location=where) from e
        ents, rels, dropped = _resolve_overlaps(ents, rels, where)
        total_dropped += dropped
        key = str(rec.get("id", f"s{idx}"))
        try:
            sentences.append(sentence(words, ents, rels, key=key))
        except InvariantViolation as e:
            raise ParseError(str(e), location=where) from e
    return sentences, total_dropped


def save_corpus(sentences, path):
    """Write sentences in the canonical JSON layout (inverse of ingestion)."""
    records = []
    for sent in sentences:
        ents = list(sent.entities)
        records.append(
            {
                "id": sent.key,
                "tokens": sent.words,
                "entities": [
                    {"start": e.start, "end": e.end, "type": e.entity_type}
                    for e in ents
                ],
                "relations": [
                    {
                        "head": ents.index(r.head),
                        "tail": ents.index(r.tail),
                        "type": r.relation_type,
                    }
                    for r in sent.relations
                ],
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def _load_conll04(path):
    """Read the Roth-2004 tabular distribution layout.

    Token lines carry 9 whitespace-separated columns
    (sent_id, entity_tag, line_idx, _, pos, words, _, _, _); multi-word
    entities keep their words joined by '/'. A blank line ends the token
    block, relation lines (head_line tail_line type) follow, and another
    blank line ends the sentence.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as e:
        raise ParseError(str(e), location=str(path)) from e

    sentences = []
    total_dropped = 0
    tok_lines, rel_lines = [], []
    in_relations = False

    def flush(lineno):
        nonlocal total_dropped, in_relations
        if not tok_lines:
            in_relations = False
            return
        words, line_spans, ents = [], {}, {}
        for cols in tok_lines:
            line_idx = int(cols[2])
            parts = cols[5].split("/") if "/" in cols[5] else [cols[5]]
            parts = [("," if p == "COMMA" else p) for p in parts]
            start = len(words)
            words.extend(parts)
            line_spans[line_idx] = (start, len(words) - 1)
            if cols[1] != OUTSIDE:
                ents[line_idx] = EntitySpan(start, len(words) - 1, cols[1])
        rels = []
        for cols in rel_lines:
            h, t = int(cols[0]), int(cols[1])
            if h not in ents or t not in ents:
                raise ParseError(
                    f"relation references non-entity line {h} or {t}",
                    location=f"{path}:{lineno}",
                )
            rels.append(RelationAnnotation(ents[h], ents[t], cols[2]))
        ent_list, rels, dropped = _resolve_overlaps(
            list(ents.values()), rels, f"{path}:{lineno}"
        )
        total_dropped += dropped
        sentences.append(
            sentence(words, ent_list, rels, key=f"s{len(sentences)}")
        )
        tok_lines.clear()
        rel_lines.clear()
        in_relations = False

    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            if in_relations or (tok_lines and not rel_lines):
                if in_relations:
                    flush(lineno)
                else:
                    in_relations = True
            continue
        cols = stripped.split()
        if len(cols) == 9:
            if in_relations:
                flush(lineno)
            tok_lines.append(cols)
        elif len(cols) == 3 and tok_lines:
            in_relations = True
            rel_lines.append(cols)
        else:
            raise ParseError(
                f"unrecognized line with {len(cols)} columns",
                location=f"{path}:{lineno}",
            )
    if tok_lines:
        flush(len(lines))
    return sentences, total_dropped


# ---------------------------------------------------------------------------
# Fold generation
# ---------------------------------------------------------------------------

def make_folds(n_sentences, k, val_frac, test_frac, seed):
    """Build k (train, val, test) index splits over range(n_sentences).

    The k test sets are the k chunks of one seeded permutation, so they
    partition the corpus; this requires test_frac == 1/k. Validation indices
    are drawn from the remainder of the permutation, cyclically after the
    test chunk, so the layout is deterministic given the seed.
    """
    if hasattr(n_sentences, "__len__"):
        n_sentences = len(n_sentences)
    if k < 2:
        raise ValueError("k must be >= 2")
    if val_frac < 0 or test_frac <= 0 or val_frac + test_frac >= 1:
        raise ValueError("fractions must be positive and sum to < 1")
    if abs(test_frac - 1.0 / k) > 1e-9:
        raise ValueError(
            f"test_frac must equal 1/k so test sets partition the corpus "
            f"(got {test_frac} with k={k})"
        )
    n_val = int(round(val_frac * n_sentences))
    if n_sentences < k or n_sentences // k + n_val >= n_sentences:
        raise CorpusTooSmall(
            f"{n_sentences} sentences cannot support k={k}, val_frac={val_frac}"
        )

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_sentences)
    # chunk boundaries differ by at most one when k does not divide n
    bounds = np.linspace(0, n_sentences, k + 1).round().astype(int)
    folds = []
    for f in range(k):
        test = perm[bounds[f]:bounds[f + 1]]
        rest = np.concatenate([perm[bounds[f + 1]:], perm[:bounds[f]]])
        val = rest[:n_val]
        train = rest[n_val:]
        folds.append((sorted(train.tolist()), sorted(val.tolist()), sorted(test.tolist())))
    return folds
