"""Walk through the BIOES span codec: encoding gold spans to tags,
decoding them back, and what the strict decoder does with damaged input."""

from jerx import EntitySpan, decode_bioes, encode_bioes

# a seven-token sentence with one multi-word and one single-word entity
words = ["Anna", "Maria", "Schmidt", "lives", "in", "Hamburg", "."]
entities = [EntitySpan(0, 2, "Peop"), EntitySpan(5, 5, "Loc")]

tags = encode_bioes(entities, len(words))
print("tokens:", words)
print("tags:  ", tags)
# B-Peop I-Peop E-Peop O O S-Loc O

# decoding is the exact inverse on well-formed input
spans = decode_bioes(tags)
print("decoded:", spans)
assert set(spans) == set(entities)

# the decoder only emits complete runs; a B- tag that never reaches an E-
# of the same type is dropped rather than guessed at
broken = ["B-Peop", "I-Peop", "O", "O", "O", "S-Loc", "O"]
print("\nbroken: ", broken)
print("decoded:", decode_bioes(broken))  # only the S-Loc span survives

# a type switch mid-entity also invalidates the run
switched = ["B-Peop", "E-Loc", "O"]
print("\nswitched:", switched, "->", decode_bioes(switched))

# after an invalid prefix the decoder rescans from the next token, so a
# well-formed entity immediately after damage is still recovered
nested = ["B-Peop", "B-Peop", "E-Peop", "O"]
print("\nnested B:", nested, "->", decode_bioes(nested))
