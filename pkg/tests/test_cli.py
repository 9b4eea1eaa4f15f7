import json

import numpy as np
import pytest

from jerx.cli import EXIT_CONFIG, EXIT_DATA, main
from jerx.corpus import load_corpus, save_corpus
from jerx.jerxemb import SentenceRecord, write_emb_file
from jerx.model import save_checkpoint
from jerx.synthetic import generate_corpus

SMALL_CONFIG = """\
# desk-scale run
dropout = 0.0
weight_decay = 0.0
toy_emb_dim = 8
hidden_size = 12
entity_emb_dim = 4
head_tail_dim = 8
batch_size = 8
learning_rate = 0.01
epochs = 2
seed = 13
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.json"
    save_corpus(generate_corpus(40, seed=5), corpus)
    config = root / "config.txt"
    config.write_text(SMALL_CONFIG, encoding="utf-8")
    return {"root": root, "corpus": str(corpus), "config": str(config)}


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_outputs(workdir):
    out = workdir["root"] / "run1"
    rc = main([
        "train", "--config", workdir["config"], "--corpus", workdir["corpus"],
        "--out-dir", str(out),
    ])
    assert rc == 0
    assert (out / "checkpoint.npz").exists()
    assert (out / "metrics.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 13
    assert manifest["config"]["epochs"] == 2
    assert "corpus_sha256" in manifest


def test_train_missing_corpus(workdir, capsys):
    rc = main([
        "train", "--corpus", str(workdir["root"] / "absent.json"),
        "--out-dir", str(workdir["root"] / "x"),
    ])
    assert rc == EXIT_DATA
    assert "absent.json" in capsys.readouterr().err


def test_train_bad_config_file(workdir):
    bad = workdir["root"] / "bad.txt"
    bad.write_text("no_such_knob = 3\n", encoding="utf-8")
    rc = main([
        "train", "--config", str(bad), "--corpus", workdir["corpus"],
        "--out-dir", str(workdir["root"] / "x"),
    ])
    assert rc == EXIT_CONFIG


def test_train_unknown_ablation(workdir):
    rc = main([
        "train", "--corpus", workdir["corpus"],
        "--out-dir", str(workdir["root"] / "x"),
        "--ablation", "no_such_thing",
    ])
    assert rc == EXIT_CONFIG


def test_train_records_ablation_flag(workdir):
    out = workdir["root"] / "run_ablation"
    rc = main([
        "train", "--config", workdir["config"], "--corpus", workdir["corpus"],
        "--out-dir", str(out), "--ablation", "no_head_tail", "--epochs", "1",
    ])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["no_head_tail"] is True
    assert manifest["config"]["epochs"] == 1


def test_env_seed_override(workdir, monkeypatch):
    out = workdir["root"] / "run_env"
    monkeypatch.setenv("JERX_SEED", "99")
    rc = main([
        "train", "--config", workdir["config"], "--corpus", workdir["corpus"],
        "--out-dir", str(out), "--epochs", "1",
    ])
    assert rc == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 99


def test_env_seed_must_be_integer(workdir, monkeypatch):
    monkeypatch.setenv("JERX_SEED", "pi")
    rc = main([
        "train", "--corpus", workdir["corpus"],
        "--out-dir", str(workdir["root"] / "x"),
    ])
    assert rc == EXIT_CONFIG


# ---------------------------------------------------------------------------
# eval / predict
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained(workdir):
    out = workdir["root"] / "trained"
    rc = main([
        "train", "--config", workdir["config"], "--corpus", workdir["corpus"],
        "--out-dir", str(out),
    ])
    assert rc == 0
    return str(out / "checkpoint.npz")


def test_eval_emits_results_json(workdir, trained):
    out = workdir["root"] / "results.json"
    rc = main([
        "eval", "--checkpoint", trained, "--corpus", workdir["corpus"],
        "--out", str(out),
    ])
    assert rc == 0
    results = json.loads(out.read_text())
    assert {"entity", "relation", "overall", "relation_confusion"} <= set(results)


def test_eval_missing_checkpoint(workdir):
    rc = main([
        "eval", "--checkpoint", str(workdir["root"] / "nope.npz"),
        "--corpus", workdir["corpus"],
    ])
    assert rc == EXIT_DATA


def test_predict_recovers_gold_annotation(tmp_path, converged, synth_protocol):
    model = converged["model"]
    # pick a training sentence the converged model annotates exactly
    target = None
    for sent in synth_protocol["train"]:
        pred = model.predict(sent)
        if (set(pred.spans) == set(sent.entities)
                and {(r[0], r[1], r[2]) for r in pred.relations}
                == {(r.head, r.tail, r.relation_type) for r in sent.relations}
                and sent.relations):
            target = sent
            break
    assert target is not None
    ckpt = tmp_path / "ckpt.npz"
    save_checkpoint(ckpt, model)
    inp = tmp_path / "in.json"
    inp.write_text(
        json.dumps([{"id": target.key, "tokens": target.words}]), encoding="utf-8"
    )
    out = tmp_path / "out.json"
    rc = main(["predict", "--checkpoint", str(ckpt), "--input", str(inp),
               "--out", str(out)])
    assert rc == 0
    (got,) = load_corpus(out)[0]
    assert set(got.entities) == set(target.entities)
    assert {(r.head, r.tail, r.relation_type) for r in got.relations} == {
        (r.head, r.tail, r.relation_type) for r in target.relations
    }


def test_predict_empty_input(tmp_path, workdir, trained):
    inp = tmp_path / "in.json"
    inp.write_text("[]", encoding="utf-8")
    out = tmp_path / "out.json"
    rc = main(["predict", "--checkpoint", trained, "--input", str(inp),
               "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text()) == []


def test_predict_mismatched_checkpoint(tmp_path):
    # file-backed checkpoint applied to sentences absent from the embedding
    # file is a checkpoint/input mismatch
    corpus = generate_corpus(6, seed=3)
    rng = np.random.default_rng(0)
    emb = tmp_path / "emb.bin"
    write_emb_file(emb, [
        SentenceRecord(s.key, rng.standard_normal((len(s), 8)).astype(np.float32))
        for s in corpus
    ])
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(
        "encoder = file\n"
        f"emb_path = {emb}\n"
        "dropout = 0.0\nweight_decay = 0.0\n"
        "entity_emb_dim = 4\nhead_tail_dim = 8\n"
        "batch_size = 4\nlearning_rate = 0.01\nepochs = 1\n",
        encoding="utf-8",
    )
    corpus_path = tmp_path / "c.json"
    save_corpus(corpus, corpus_path)
    out_dir = tmp_path / "run"
    rc = main(["train", "--config", str(cfg), "--corpus", str(corpus_path),
               "--out-dir", str(out_dir)])
    assert rc == 0
    other = tmp_path / "other.json"
    other.write_text(json.dumps([{"id": "unseen", "tokens": ["a", "b"]}]))
    rc = main(["predict", "--checkpoint", str(out_dir / "checkpoint.npz"),
               "--input", str(other), "--out", str(tmp_path / "o.json")])
    assert rc == EXIT_CONFIG


# ---------------------------------------------------------------------------
# folds / ablate
# ---------------------------------------------------------------------------

def test_folds_command(workdir, tmp_path):
    out = tmp_path / "folds.json"
    rc = main(["folds", "--corpus", workdir["corpus"], "--k", "4",
               "--val-frac", "0.1", "--test-frac", "0.25", "--out", str(out)])
    assert rc == 0
    folds = json.loads(out.read_text())
    assert len(folds) == 4
    assert sorted(i for f in folds for i in f["test"]) == list(range(40))


def test_folds_command_bad_fractions(workdir):
    rc = main(["folds", "--corpus", workdir["corpus"], "--k", "4",
               "--test-frac", "0.1"])
    assert rc == EXIT_CONFIG


def test_ablate_emits_six_rows(workdir, tmp_path, capsys):
    out = tmp_path / "ablate.csv"
    rc = main(["ablate", "--config", workdir["config"],
               "--corpus", workdir["corpus"], "--epochs", "1",
               "--out", str(out)])
    assert rc == 0
    shown = capsys.readouterr().out.splitlines()
    assert len(shown) == 7  # header + full + five ablations
    assert shown[1].split()[0] == "full" and shown[1].rstrip().endswith("--")
    lines = out.read_text().splitlines()
    assert len(lines) == 7
    names = [l.split(",")[0] for l in lines[1:]]
    assert names == ["full", "no_pretraining", "no_entity_embeddings",
                     "single_ffnn", "no_head_tail", "no_bilinear"]


# ---------------------------------------------------------------------------
# attention heatmaps
# ---------------------------------------------------------------------------

def _stripe_emb(tmp_path, with_attention=True):
    n = 5
    rng = np.random.default_rng(1)
    att = None
    if with_attention:
        next_word = np.zeros((n, n), dtype=np.float32)
        for i in range(n - 1):
            next_word[i, i + 1] = 1.0
        next_word[n - 1, n - 1] = 1.0
        att = np.stack([[next_word, np.eye(n, dtype=np.float32)]])
    rec = SentenceRecord(
        "s0", rng.standard_normal((n, 4)).astype(np.float32), att
    )
    path = tmp_path / "emb.bin"
    if with_attention:
        write_emb_file(path, [rec], layer_count=1, head_count=2)
    else:
        write_emb_file(path, [rec])
    return path


def _read_pgm(path):
    lines = path.read_text().split()
    assert lines[0] == "P2"
    w, h, maxval = int(lines[1]), int(lines[2]), int(lines[3])
    assert maxval == 255
    return np.array(lines[4:], dtype=int).reshape(h, w)


def test_heatmap_next_word_stripe(tmp_path):
    emb = _stripe_emb(tmp_path)
    out = tmp_path / "maps"
    rc = main(["attn-heatmap", "--emb", str(emb), "--sentence", "s0",
               "--layer", "0", "--head", "0", "--out", str(out)])
    assert rc == 0
    gray = _read_pgm(out / "s0_L0H0.pgm")
    for i in range(4):
        assert gray[i, i + 1] == 0  # darker = larger weight
    assert gray[0, 0] == 255
    csv_rows = (out / "s0_L0H0.csv").read_text().splitlines()
    assert len(csv_rows) == 5
    assert float(csv_rows[0].split(",")[1]) == 1.0


def test_heatmap_identity_stripe(tmp_path):
    emb = _stripe_emb(tmp_path)
    out = tmp_path / "maps"
    rc = main(["attn-heatmap", "--emb", str(emb), "--sentence", "s0",
               "--layer", "0", "--head", "1", "--out", str(out)])
    assert rc == 0
    gray = _read_pgm(out / "s0_L0H1.pgm")
    assert all(gray[i, i] == 0 for i in range(5))
    assert gray[0, 1] == 255


def test_heatmap_missing_attention(tmp_path):
    emb = _stripe_emb(tmp_path, with_attention=False)
    rc = main(["attn-heatmap", "--emb", str(emb), "--sentence", "s0",
               "--layer", "0", "--head", "0", "--out", str(tmp_path / "m")])
    assert rc == EXIT_DATA


def test_heatmap_unknown_sentence(tmp_path):
    emb = _stripe_emb(tmp_path)
    rc = main(["attn-heatmap", "--emb", str(emb), "--sentence", "zzz",
               "--layer", "0", "--head", "0", "--out", str(tmp_path / "m")])
    assert rc == EXIT_DATA


def test_heatmap_bad_selector(tmp_path):
    emb = _stripe_emb(tmp_path)
    rc = main(["attn-heatmap", "--emb", str(emb), "--sentence", "s0",
               "--layer", "5", "--head", "0", "--out", str(tmp_path / "m")])
    assert rc == EXIT_CONFIG
