"""The JERX-EMB interchange format end to end: write a file with synthetic
vectors and attention, read it back bit-exactly, plug it into the model as
a frozen file-backed encoder, and run the stripe heuristics on the
attention maps."""

import tempfile
from pathlib import Path

import numpy as np

from jerx import FileBackedEncoder, sentence
from jerx.jerxemb import SentenceRecord, read_emb_file, write_emb_file

rng = np.random.default_rng(3)
hidden, layers, heads = 8, 1, 2

# one record per sentence: per-token vectors plus (layers, heads, n, n)
# attention whose rows are probability distributions
sents = {
    "s0": ["Greta", "lives", "in", "Oslo", "."],
    "s1": ["Anna", "visited", "Hamburg", "."],
}
records = []
for key, words in sents.items():
    n = len(words)
    emb = rng.normal(size=(n, hidden)).astype(np.float32)
    att = rng.random((layers, heads, n, n))
    att /= att.sum(axis=-1, keepdims=True)  # rows must sum to 1
    # make head 1 a hard "attend to the next word" head
    att[0, 1] = np.eye(n, k=1)
    att[0, 1, n - 1, n - 1] = 1.0
    records.append(SentenceRecord(key, emb, att.astype(np.float32)))

path = Path(tempfile.mkdtemp()) / "demo.bin"
write_emb_file(path, records, layer_count=layers, head_count=heads)
print("wrote", path, f"({path.stat().st_size} bytes)")

back, header = read_emb_file(path)
print("header:", header)
assert back[0].embeddings.tobytes() == records[0].embeddings.tobytes()
print("round trip is bit-exact")

# the same file doubles as a frozen encoder for the extraction model
enc = FileBackedEncoder(path)
s0 = sentence(sents["s0"], key="s0")
out = enc.encode(s0)
print("\nencoded", s0.key, "->", out.vectors.shape, out.vectors.dtype)

# stripe heuristic: how much mass sits one step right of the diagonal
def next_word_mass(w):
    n = w.shape[0]
    return float(np.mean([w[i, i + 1] for i in range(n - 1)]))

for rec in back:
    for h in range(heads):
        mass = next_word_mass(rec.attention[0, h])
        flag = "  <- next-word head" if mass >= 0.5 else ""
        print(f"{rec.key} head {h}: next-word mass {mass:.2f}{flag}")
