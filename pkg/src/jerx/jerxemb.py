"""Reader/writer for the JERX-EMB v1 binary interchange format.

Layout (all integers little-endian):

  header   magic "JERXEMB1" | version u32 | hidden_size u32 |
           layer_count u32 | head_count u32 | sentence_count u64
  record   key_len u32 | key utf-8 | token_count u32 |
           embeddings float32[token_count, hidden_size] |
           attention_present u8 |
           attention float32[layer_count, head_count, token_count, token_count]
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

MAGIC = b"JERXEMB1"
VERSION = 1
ATTENTION_ROW_TOL = 1e-5

_HEADER = struct.Struct("<8sIIIIQ")


@dataclass
class SentenceRecord:
    key: str
    embeddings: np.ndarray  # (n_tokens, hidden_size) float32
    attention: np.ndarray | None = None  # (layers, heads, n, n) float32


def _check_attention_rows(att, key):
    sums = att.astype(np.float64).sum(axis=-1)
    bad = np.abs(sums - 1.0) > ATTENTION_ROW_TOL
    if bad.any():
        raise ParseError(
            f"attention rows do not sum to 1 (worst deviation "
            f"{np.abs(sums - 1.0).max():.3g})",
            location=f"record {key!r}",
        )


def write_emb_file(path, records, layer_count=0, head_count=0):
    """Write sentence records; hidden size is taken from the first record."""
    records = list(records)
    if not records:
        raise ValueError("cannot write an empty JERX-EMB file")
    hidden = records[0].embeddings.shape[1]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, hidden, layer_count, head_count, len(records)))
        for rec in records:
            emb = np.ascontiguousarray(rec.embeddings, dtype="<f4")
            if emb.shape[1] != hidden:
                raise ValueError(f"record {rec.key!r} has hidden size {emb.shape[1]}, expected {hidden}")
            key = rec.key.encode("utf-8")
            fh.write(struct.pack("<I", len(key)))
            fh.write(key)
            fh.write(struct.pack("<I", emb.shape[0]))
            fh.write(emb.tobytes())
            if rec.attention is None:
                fh.write(b"\x00")
            else:
                att = np.ascontiguousarray(rec.attention, dtype="<f4")
                n = emb.shape[0]
                if att.shape != (layer_count, head_count, n, n):
                    raise ValueError(
                        f"record {rec.key!r} attention shape {att.shape} != "
                        f"{(layer_count, head_count, n, n)}"
                    )
                fh.write(b"\x01")
                fh.write(att.tobytes())


def read_emb_file(path, validate=True):
    """Parse a JERX-EMB file into (records, header_dict).

    Embeddings and attention come back float32, bit-exact with the payload.
    With validate=True, attention rows are checked to sum to 1 within 1e-5.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ParseError("file shorter than header", location=str(path))
    magic, version, hidden, layers, heads, n_sent = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", location=str(path))
    if version != VERSION:
        raise ParseError(f"unsupported version {version}", location=str(path))
    off = _HEADER.size

    def take(nbytes, what):
        nonlocal off
        if off + nbytes > len(data):
            raise ParseError(f"truncated while reading {what}", location=f"{path}@{off}")
        chunk = data[off:off + nbytes]
        off += nbytes
        return chunk

    records = []
    for _ in range(n_sent):
        (key_len,) = struct.unpack("<I", take(4, "key length"))
        key = take(key_len, "key").decode("utf-8")
        (n_tok,) = struct.unpack("<I", take(4, "token count"))
        emb = np.frombuffer(take(4 * n_tok * hidden, "embeddings"), dtype="<f4")
        emb = emb.reshape(n_tok, hidden).copy()
        (has_att,) = struct.unpack("<B", take(1, "attention flag"))
        att = None
        if has_att:
            count = layers * heads * n_tok * n_tok
            att = np.frombuffer(take(4 * count, "attention"), dtype="<f4")
            att = att.reshape(layers, heads, n_tok, n_tok).copy()
            if validate:
                _check_attention_rows(att, key)
        records.append(SentenceRecord(key, emb, att))
    if off != len(data):
        raise ParseError(f"{len(data) - off} trailing bytes", location=f"{path}@{off}")
    header = {
        "version": version,
        "hidden_size": hidden,
        "layer_count": layers,
        "head_count": heads,
        "sentence_count": n_sent,
    }
    return records, header
