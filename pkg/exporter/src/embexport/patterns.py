"""Stripe heuristics for qualitative attention patterns: a head is said to
show a pattern when most of its probability mass lies on the corresponding
stripe of the word-level attention matrix."""

import numpy as np

PATTERNS = ("next-word", "previous-word", "self", "end-of-sentence")


def stripe_mass(weights, pattern):
    """Mean probability mass on the pattern's stripe, in [0, 1]."""
    w = np.asarray(weights, dtype=np.float64)
    n = w.shape[0]
    if pattern == "next-word":
        if n < 2:
            return 0.0
        return float(np.mean([w[i, i + 1] for i in range(n - 1)]))
    if pattern == "previous-word":
        if n < 2:
            return 0.0
        return float(np.mean([w[i, i - 1] for i in range(1, n)]))
    if pattern == "self":
        return float(np.mean(np.diag(w)))
    if pattern == "end-of-sentence":
        return float(np.mean(w[:, n - 1]))
    raise ValueError(f"unknown pattern {pattern!r}")


def detect_pattern(weights, pattern, threshold=0.5):
    return stripe_mass(weights, pattern) >= threshold


def find_patterns(records, threshold=0.5):
    """Scan every (layer, head) of every record; returns
    {pattern: [(key, layer, head, mass), ...]} sorted by mass."""
    hits = {p: [] for p in PATTERNS}
    for rec in records:
        if rec.attention is None:
            continue
        layers, heads = rec.attention.shape[:2]
        for l in range(layers):
            for h in range(heads):
                for p in PATTERNS:
                    mass = stripe_mass(rec.attention[l, h], p)
                    if mass >= threshold:
                        hits[p].append((rec.key, l, h, mass))
    for p in hits:
        hits[p].sort(key=lambda t: -t[3])
    return hits
