"""Shared fixtures: finite-difference checking, the frozen synthetic
training protocol, and the acceptance-criteria summary hook."""

import time

import numpy as np
import pytest

from jerx.evaluation import evaluate_model
from jerx.synthetic import generate_corpus, synthetic_config
from jerx.training import train

# ---------------------------------------------------------------------------
# acceptance summary
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES = []


def record_acceptance(ok, text):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}: {text}")


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def max_rel_error(loss_fn, params, analytic, keys=None, step=1e-5):
    """Central finite differences over every entry of the named parameter
    arrays; returns the worst |g - fd| / (|fd| + 1e-8)."""
    worst = 0.0
    for k in keys if keys is not None else analytic:
        p = params[k]
        g = analytic[k]
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            up = loss_fn()
            p[idx] = orig - step
            down = loss_fn()
            p[idx] = orig
            fd = (up - down) / (2.0 * step)
            worst = max(worst, abs(g[idx] - fd) / (abs(fd) + 1e-8))
    return worst


# ---------------------------------------------------------------------------
# frozen synthetic protocol
# ---------------------------------------------------------------------------
# 500 sentences from the fixed grammar, generator seed 7; first 100 held out
# as the 20% test split, then 360 train / 40 validation.

@pytest.fixture(scope="session")
def synth_protocol():
    corpus = generate_corpus(500, seed=7)
    rest = corpus[100:]
    return {
        "corpus": corpus,
        "test": corpus[:100],
        "train": rest[:360],
        "val": rest[360:],
    }


@pytest.fixture(scope="session")
def converged(synth_protocol):
    """One full training run under the frozen protocol, shared by the
    convergence, gold-mode, monotonicity and prediction tests."""
    t0 = time.perf_counter()
    model, rows = train(
        synth_protocol["train"],
        synthetic_config(),
        val_sents=synth_protocol["val"],
    )
    elapsed = time.perf_counter() - t0
    results = evaluate_model(model, synth_protocol["test"])
    return {"model": model, "rows": rows, "elapsed": elapsed, "test_results": results}
