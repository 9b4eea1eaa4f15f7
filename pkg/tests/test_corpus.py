import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jerx.corpus import (
    AnnotatedSentence,
    EntitySpan,
    LabelVocab,
    RelationAnnotation,
    Token,
    decode_bioes,
    encode_bioes,
    load_corpus,
    make_folds,
    save_corpus,
    sentence,
)
from jerx.errors import (
    CorpusTooSmall,
    InvariantViolation,
    OverlappingSpans,
    ParseError,
    SpanOutOfBounds,
    UnknownLabel,
)

PER = "PER"
LOC = "LOC"


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

def test_token_invariants():
    with pytest.raises(InvariantViolation):
        Token("", 0)
    with pytest.raises(InvariantViolation):
        Token("x", -1)


def test_span_bounds_and_overlap():
    with pytest.raises(SpanOutOfBounds):
        EntitySpan(3, 1, PER)
    a, b, c = EntitySpan(0, 2, PER), EntitySpan(2, 4, LOC), EntitySpan(3, 4, LOC)
    assert a.overlaps(b) and b.overlaps(a)
    assert not a.overlaps(c)
    assert a.last_token == 2


def test_relation_invariants():
    s = EntitySpan(0, 0, PER)
    with pytest.raises(InvariantViolation):
        RelationAnnotation(s, s, "LivesIn")
    with pytest.raises(InvariantViolation):
        RelationAnnotation(s, EntitySpan(1, 1, LOC), "NEG")


def test_sentence_invariants():
    with pytest.raises(SpanOutOfBounds):
        sentence(["a", "b"], [EntitySpan(0, 2, PER)])
    with pytest.raises(InvariantViolation):
        # relation references a span absent from the entity list
        sentence(
            ["a", "b"],
            [EntitySpan(0, 0, PER)],
            [RelationAnnotation(EntitySpan(0, 0, PER), EntitySpan(1, 1, LOC), "R")],
        )


# ---------------------------------------------------------------------------
# BIOES codec
# ---------------------------------------------------------------------------

def test_encode_examples():
    assert encode_bioes([EntitySpan(0, 1, PER), EntitySpan(4, 4, LOC)], 5) == [
        "B-PER", "E-PER", "O", "O", "S-LOC",
    ]
    assert encode_bioes([], 3) == ["O", "O", "O"]
    assert encode_bioes([EntitySpan(0, 2, "ORG")], 3) == ["B-ORG", "I-ORG", "E-ORG"]


def test_encode_errors():
    with pytest.raises(SpanOutOfBounds):
        encode_bioes([EntitySpan(0, 3, PER)], 3)
    with pytest.raises(OverlappingSpans):
        encode_bioes([EntitySpan(0, 2, PER), EntitySpan(2, 3, LOC)], 4)


def test_decode_examples():
    assert decode_bioes(["B-PER", "E-PER", "O", "O", "S-LOC"]) == [
        EntitySpan(0, 1, PER), EntitySpan(4, 4, LOC),
    ]
    assert decode_bioes(["I-PER", "O"]) == []
    assert decode_bioes(["B-PER", "B-LOC", "E-LOC"]) == [EntitySpan(1, 2, LOC)]


def test_decode_unknown_label():
    with pytest.raises(UnknownLabel):
        decode_bioes(["X-PER"])
    with pytest.raises(UnknownLabel):
        decode_bioes(["B"])


def _reference_decode(tags):
    """Independent oracle for the strict repair policy: a span is emitted iff
    its own single-span BIOES encoding appears verbatim at its position."""
    out = []
    types = {t[2:] for t in tags if t != "O"}
    n = len(tags)
    for i in range(n):
        for j in range(i, n):
            for etype in types:
                want = encode_bioes([EntitySpan(i, j, etype)], n)[i:j + 1]
                if tags[i:j + 1] == want:
                    out.append(EntitySpan(i, j, etype))
    return sorted(out, key=lambda s: s.start)


def test_decode_repair_table_exhaustive():
    # every tag sequence of length <= 4 over a two-type alphabet
    alphabet = ["O"] + [f"{p}-{t}" for p in "BIES" for t in ("A", "B")]
    for n in (1, 2, 3, 4):
        for tags in itertools.product(alphabet, repeat=n):
            tags = list(tags)
            got = sorted(decode_bioes(tags), key=lambda s: s.start)
            assert got == _reference_decode(tags), tags


spans_strategy = st.lists(
    st.tuples(st.integers(0, 14), st.integers(0, 4), st.sampled_from([PER, LOC, "ORG"])),
    max_size=5,
)


def _to_disjoint(raw, n):
    spans, used = [], set()
    for start, length, etype in raw:
        end = min(start + length, n - 1)
        if start >= n or used & set(range(start, end + 1)):
            continue
        used.update(range(start, end + 1))
        spans.append(EntitySpan(start, end, etype))
    return spans


@given(spans_strategy, st.integers(5, 15))
@settings(max_examples=200)
def test_roundtrip_property(raw, n):
    spans = _to_disjoint(raw, n)
    got = decode_bioes(encode_bioes(spans, n))
    assert sorted(got, key=lambda s: s.start) == sorted(spans, key=lambda s: s.start)


adversarial_tags = st.lists(
    st.sampled_from(["O"] + [f"{p}-{t}" for p in "BIES" for t in (PER, LOC)]),
    min_size=1,
    max_size=12,
)


@given(adversarial_tags)
@settings(max_examples=300)
def test_decode_safety_property(tags):
    spans = decode_bioes(tags)
    for s in spans:
        assert 0 <= s.start <= s.end < len(tags)
    for a, b in itertools.combinations(spans, 2):
        assert not a.overlaps(b)


# ---------------------------------------------------------------------------
# label vocabulary
# ---------------------------------------------------------------------------

def test_vocab_layout():
    v = LabelVocab.from_types([PER, LOC], ["LivesIn", "TravelsTo"])
    assert len(v.ner_labels) == 4 * 2 + 1
    assert list(v.ner_labels) == sorted(v.ner_labels)
    assert v.re_labels[0] == "NEG" and v.neg_id == 0
    assert v.ner_id("O") == v.outside_id
    with pytest.raises(UnknownLabel):
        v.ner_id("B-ORG")
    assert LabelVocab.from_dict(v.to_dict()) == v


def test_vocab_from_corpus():
    sents = [
        sentence(["a"], [EntitySpan(0, 0, PER)]),
        sentence(["b", "c"], [EntitySpan(0, 1, LOC)]),
    ]
    v = LabelVocab.from_corpus(sents)
    assert len(v.ner_labels) == 9
    assert v.re_labels == ("NEG",)


def test_tag_ids_roundtrip():
    v = LabelVocab.from_types([PER], [])
    tags = ["B-PER", "E-PER", "O"]
    ids = v.tag_ids(tags)
    assert [v.ner_labels[i] for i in ids] == tags


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

CANONICAL = [
    {
        "id": "a",
        "tokens": ["john", "smith", "visits", "oslo"],
        "entities": [
            {"start": 0, "end": 1, "type": PER},
            {"start": 3, "end": 3, "type": LOC},
        ],
        "relations": [{"head": 0, "tail": 1, "type": "TravelsTo"}],
    },
    {"id": "b", "tokens": ["quiet"], "entities": [], "relations": []},
]


def test_load_canonical(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CANONICAL), encoding="utf-8")
    sents, dropped = load_corpus(path)
    assert len(sents) == 2 and dropped == 0
    assert sents[0].words == ["john", "smith", "visits", "oslo"]
    assert sents[0].relations[0].relation_type == "TravelsTo"
    assert sents[1].key == "b"


def test_load_overlap_drops_relation(tmp_path):
    rec = {
        "tokens": ["a", "b", "c"],
        "entities": [
            {"start": 0, "end": 1, "type": PER},
            {"start": 1, "end": 2, "type": LOC},
        ],
        "relations": [{"head": 0, "tail": 1, "type": "R"}],
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps([rec]), encoding="utf-8")
    sents, dropped = load_corpus(path)
    assert dropped == 1
    assert sents[0].relations == ()


def test_load_truncated(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CANONICAL)[:40], encoding="utf-8")
    with pytest.raises(ParseError):
        load_corpus(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_corpus(tmp_path / "absent.json")


def test_load_bad_record(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps([{"tokens": ["a", ""]}]), encoding="utf-8")
    with pytest.raises(ParseError):
        load_corpus(path)


def test_save_load_roundtrip(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CANONICAL), encoding="utf-8")
    sents, _ = load_corpus(path)
    out = tmp_path / "out.json"
    save_corpus(sents, out)
    again, _ = load_corpus(out)
    assert again == sents


CONLL04 = """\
0\tO\t0\tO\tDT\tThe\tO\tO\tO
0\tPeop\t1\tO\tNNP\tJohn/Smith\tO\tO\tO
0\tO\t2\tO\tVBZ\tvisits\tO\tO\tO
0\tLoc\t3\tO\tNNP\tOslo\tO\tO\tO
0\tO\t4\tO\t.\tCOMMA\tO\tO\tO

1\t3\tTravelsTo

"""


def test_load_conll04(tmp_path):
    path = tmp_path / "c.conll"
    path.write_text(CONLL04, encoding="utf-8")
    sents, dropped = load_corpus(path, fmt="conll04-tabular")
    assert dropped == 0
    (sent,) = sents
    assert sent.words == ["The", "John", "Smith", "visits", "Oslo", ","]
    assert EntitySpan(1, 2, "Peop") in sent.entities
    assert EntitySpan(4, 4, "Loc") in sent.entities
    (rel,) = sent.relations
    assert rel.head == EntitySpan(1, 2, "Peop")
    assert rel.tail == EntitySpan(4, 4, "Loc")


def test_load_conll04_bad_relation(tmp_path):
    bad = CONLL04.replace("1\t3\tTravelsTo", "1\t2\tTravelsTo")
    path = tmp_path / "c.conll"
    path.write_text(bad, encoding="utf-8")
    with pytest.raises(ParseError):
        load_corpus(path, fmt="conll04-tabular")


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        load_corpus(tmp_path / "x", fmt="xml")


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------

def test_folds_protocol_10():
    folds = make_folds(100, 10, 0.1, 0.1, seed=3)
    assert len(folds) == 10
    for tr, va, te in folds:
        assert (len(tr), len(va), len(te)) == (80, 10, 10)
        assert not (set(tr) & set(va)) and not (set(tr) & set(te))
        assert not (set(va) & set(te))


def test_folds_protocol_5():
    folds = make_folds(100, 5, 0.1, 0.2, seed=3)
    for tr, va, te in folds:
        assert (len(tr), len(va), len(te)) == (70, 10, 20)


def test_folds_deterministic():
    assert make_folds(57, 3, 0.1, 1 / 3, seed=9) == make_folds(57, 3, 0.1, 1 / 3, seed=9)
    assert make_folds(57, 3, 0.1, 1 / 3, seed=9) != make_folds(57, 3, 0.1, 1 / 3, seed=10)


def test_folds_partition_property():
    for n, k in ((57, 3), (100, 10), (23, 4)):
        folds = make_folds(n, k, 0.1, 1.0 / k, seed=1)
        tests = [set(te) for _, _, te in folds]
        assert set().union(*tests) == set(range(n))
        for a, b in itertools.combinations(tests, 2):
            assert not (a & b)


def test_folds_rejects_inconsistent_test_frac():
    with pytest.raises(ValueError):
        make_folds(100, 10, 0.1, 0.2, seed=0)


def test_folds_too_small():
    with pytest.raises(CorpusTooSmall):
        make_folds(5, 10, 0.1, 0.1, seed=0)


def test_folds_accepts_corpus_argument():
    sents = [sentence(["w"]) for _ in range(20)]
    folds = make_folds(sents, 4, 0.1, 0.25, seed=0)
    assert len(folds) == 4
