"""Pull the biaffine relation scorer apart by hand: build a tiny parameter
set, score one (head, tail) pair, and verify the score against its three
terms computed longhand. Also shows candidate construction over tags."""

import numpy as np

from jerx import LabelVocab, biaffine_score, build_candidates

rng = np.random.default_rng(0)
m = 3  # head/tail representation size
classes = ["NEG", "LivesIn", "WorksFor"]

params = {
    "bi_U": rng.normal(size=(m, len(classes), m)),
    "bi_W": rng.normal(size=(len(classes), 2 * m)),
    "bi_b": rng.normal(size=len(classes)),
}
h_head = rng.normal(size=m)
h_tail = rng.normal(size=m)

scores = biaffine_score(h_head, h_tail, params)
print("scores:", scores)

# rebuild each class score from its pieces: the bilinear form, the linear
# term over the concatenation, and the bias
for c, name in enumerate(classes):
    bilinear = h_head @ params["bi_U"][:, c, :] @ h_tail
    linear = params["bi_W"][c] @ np.concatenate([h_head, h_tail])
    longhand = bilinear + linear + params["bi_b"][c]
    print(f"  {name:9s} bilinear {bilinear:+.4f}  linear {linear:+.4f}  "
          f"bias {params['bi_b'][c]:+.4f}  sum {longhand:+.4f}")
    assert np.isclose(longhand, scores[c])

# dropping the bilinear term leaves exactly the linear + bias part
no_bi = biaffine_score(h_head, h_tail, params, no_bilinear=True)
print("\nwithout bilinear term:", no_bi)
assert np.allclose(scores - no_bi,
                   np.einsum("i,icj,j->c", h_head, params["bi_U"], h_tail))

# which pairs get scored at all: every ordered pair of entity end tokens
vocab = LabelVocab.from_types(["Peop", "Loc"], ["LivesIn"])
tags = ["S-Peop", "O", "O", "E-Loc", "O"]
cands = build_candidates(tags, [], [], "predicted", vocab)
print("\nanchors from", tags)
for c in cands:
    print("  candidate head", c.head_token, "-> tail", c.tail_token,
          " gold class", vocab.re_labels[c.gold_class])
