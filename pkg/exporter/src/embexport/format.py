"""Writer for the JERX-EMB v1 binary interchange format.

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

MAGIC = b"JERXEMB1"
VERSION = 1
ATTENTION_ROW_TOL = 1e-5

_HEADER = struct.Struct("<8sIIIIQ")


@dataclass
class ExportRecord:
    key: str
    embeddings: np.ndarray  # (n_tokens, hidden_size) float32
    attention: np.ndarray | None = None  # (layers, heads, n, n) float32


def check_attention_rows(att, key):
    sums = att.astype(np.float64).sum(axis=-1)
    worst = np.abs(sums - 1.0).max()
    if worst > ATTENTION_ROW_TOL:
        raise ValueError(
            f"record {key!r}: attention rows deviate from 1 by {worst:.3g}"
        )


def write_emb_file(path, records, layer_count=0, head_count=0):
    """Write records to `path`; hidden size is taken from the first record.
    Attention blocks are checked for row normalization before writing."""
    records = list(records)
    if not records:
        raise ValueError("cannot write an empty JERX-EMB file")
    hidden = records[0].embeddings.shape[1]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, hidden, layer_count, head_count,
                              len(records)))
        for rec in records:
            emb = np.ascontiguousarray(rec.embeddings, dtype="<f4")
            if emb.shape[1] != hidden:
                raise ValueError(
                    f"record {rec.key!r} has hidden size {emb.shape[1]}, "
                    f"expected {hidden}"
                )
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
                check_attention_rows(att, rec.key)
                fh.write(b"\x01")
                fh.write(att.tobytes())
