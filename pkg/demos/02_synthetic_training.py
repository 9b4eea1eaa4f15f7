"""Train the joint tagger + relation scorer on the built-in synthetic
grammar and look at what it predicts. Runs in well under a minute."""

import numpy as np

from jerx.evaluation import evaluate_model
from jerx.synthetic import generate_corpus, synthetic_config
from jerx.training import train

# fixed generator seed -> identical corpus on every run
corpus = generate_corpus(300, seed=7)
test, rest = corpus[:60], corpus[60:]
train_sents, val_sents = rest[:200], rest[200:]

sample = corpus[0]
print("sample sentence:", " ".join(sample.words))
print("  entities:", list(sample.entities))
print("  relations:", [(r.head, r.tail, r.relation_type) for r in sample.relations])

config = synthetic_config(epochs=25)
print("\ntraining", config.epochs, "epochs on", len(train_sents), "sentences ...")
model, rows = train(train_sents, config, val_sents)

# the first epoch is entity-only warmup: lambda ramps 0 -> 1 across its
# batches, then stays at 1, so the relation loss only kicks in gradually
for row in rows[:3] + rows[-1:]:
    print(
        "  epoch {epoch:2d}  lambda {lambda_mean:.2f}  "
        "ner {loss_ner:.3f}  re {loss_re:.3f}".format(**row)
    )

results = evaluate_model(model, test)
print("\ntest entity F1:  ", round(results["entity"]["f1"], 3))
print("test relation F1:", round(results["relation"]["f1"], 3))
print("overall:         ", results["overall"])

# inspect one held-out prediction
pred = model.predict(test[0])
print("\nheld-out sentence:", " ".join(test[0].words))
print("  predicted tags: ", pred.tags)
print("  predicted spans:", pred.spans)
print("  predicted rels: ", pred.relations)

# the relation confusion matrix over candidate pairs (row gold, col pred)
conf = results["relation_confusion"]
print("\ncandidate confusion over", conf["labels"])
print(np.array(conf["matrix"]))
