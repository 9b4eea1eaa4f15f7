import numpy as np
import pytest

from conftest import max_rel_error
from jerx.corpus import sentence
from jerx.encoder import (
    EncodedSentence,
    FileBackedEncoder,
    TokenVocab,
    init_toy_params,
    toy_encode,
    toy_forward_backward,
)
from jerx.errors import DimensionMismatch, MissingEmbeddingRecord
from jerx.jerxemb import SentenceRecord, write_emb_file


def test_token_vocab_oov():
    v = TokenVocab(["b", "a", "b"])
    assert v.size == 3
    assert v.ids(["a", "b", "zzz"]).tolist() == [1, 2, 0]
    assert TokenVocab.from_list(v.to_list()).id_of == v.id_of


def test_encoded_sentence_checks_attention_rows():
    att = np.full((1, 1, 2, 2), 0.5, dtype=np.float32)
    EncodedSentence(np.zeros((2, 4)), att)  # valid
    with pytest.raises(DimensionMismatch):
        EncodedSentence(np.zeros((2, 4)), att * 0.9)


def test_toy_shapes():
    rng = np.random.default_rng(0)
    params = init_toy_params(10, 8, 32, rng)
    X, _ = toy_encode(np.array([1, 2, 3, 4, 5]), params)
    assert X.shape == (5, 32)


def test_toy_deterministic_inference():
    rng = np.random.default_rng(0)
    params = init_toy_params(10, 4, 6, rng)
    ids = np.array([1, 2, 3])
    X1, _ = toy_encode(ids, params)
    X2, _ = toy_encode(ids, params)
    assert np.array_equal(X1, X2)


def test_toy_bad_ids():
    rng = np.random.default_rng(0)
    params = init_toy_params(4, 4, 6, rng)
    with pytest.raises(DimensionMismatch):
        toy_encode(np.array([9]), params)


def test_toy_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(1)
    params = init_toy_params(6, 4, 8, rng)
    grads = toy_forward_backward(np.array([1, 2, 3]), params, np.zeros((3, 8)))
    for g in grads.values():
        assert not g.any()


def test_toy_backward_deterministic():
    rng = np.random.default_rng(1)
    params = init_toy_params(6, 4, 8, rng)
    up = np.random.default_rng(2).standard_normal((3, 8))
    g1 = toy_forward_backward(np.array([1, 2, 3]), params, up)
    g2 = toy_forward_backward(np.array([1, 2, 3]), params, up)
    for k in g1:
        assert np.array_equal(g1[k], g2[k])


def test_toy_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    params = init_toy_params(5, 4, 8, rng)
    ids = np.array([1, 2, 4])
    R = rng.standard_normal((3, 8))  # fixed linear readout

    def loss():
        X, _ = toy_encode(ids, params)
        return float((X * R).sum())

    grads = toy_forward_backward(ids, params, R)
    assert max_rel_error(loss, params, grads) < 1e-4


def test_toy_shape_mismatch():
    rng = np.random.default_rng(0)
    params = init_toy_params(5, 4, 8, rng)
    with pytest.raises(DimensionMismatch):
        toy_forward_backward(np.array([1, 2]), params, np.zeros((3, 8)))


def test_toy_dropout_only_in_training():
    rng = np.random.default_rng(0)
    params = init_toy_params(6, 4, 8, rng)
    ids = np.array([1, 2, 3])
    X_plain, _ = toy_encode(ids, params)
    X_train, cache = toy_encode(
        ids, params, train=True, dropout=0.5, rng=np.random.default_rng(7)
    )
    assert cache["mask"] is not None
    assert not np.array_equal(X_plain, X_train)


# ---------------------------------------------------------------------------
# file-backed encoder
# ---------------------------------------------------------------------------

def _emb_file(tmp_path, keys, n_tokens, hidden=16):
    rng = np.random.default_rng(11)
    records = [
        SentenceRecord(k, rng.standard_normal((n, hidden)).astype(np.float32))
        for k, n in zip(keys, n_tokens)
    ]
    path = tmp_path / "emb.bin"
    write_emb_file(path, records)
    return path, records


def test_file_backed_bit_identical(tmp_path):
    path, records = _emb_file(tmp_path, ["a", "b"], [7, 3])
    enc = FileBackedEncoder(path)
    sent = sentence(["w"] * 7, key="a")
    out = enc.encode(sent)
    assert out.vectors.dtype == np.float32
    assert np.array_equal(out.vectors, records[0].embeddings)
    assert len(out) == 7


def test_file_backed_missing_record(tmp_path):
    path, _ = _emb_file(tmp_path, ["a"], [2])
    enc = FileBackedEncoder(path)
    with pytest.raises(MissingEmbeddingRecord):
        enc.encode(sentence(["w", "w"], key="zzz"))
    assert "a" in enc and "zzz" not in enc


def test_file_backed_token_count_mismatch(tmp_path):
    path, _ = _emb_file(tmp_path, ["a"], [2])
    enc = FileBackedEncoder(path)
    with pytest.raises(DimensionMismatch):
        enc.encode(sentence(["w", "w", "w"], key="a"))
