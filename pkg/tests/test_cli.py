import yaml

import pytest

from segnmt.cli import main
from segnmt.corpus import ToyGrammarSpec


GRAMMAR = {
    "n_clauses": 4, "min_clause_len": 2, "max_clause_len": 3,
    "n_word_types": 8, "seed": 5,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Corpus plus trained forward/reverse checkpoints shared by CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    spec = root / "spec.yaml"
    spec.write_text(yaml.safe_dump({
        "grammar": GRAMMAR,
        "splits": {
            "train": {"pairs": 40, "split": "train"},
            "test": {"pairs": 5, "clauses": [1, 2]},
        },
    }))
    assert main(["make-corpus", "--spec", str(spec),
                 "--out", str(root / "data"), "--seed", "3"]) == 0

    config = root / "train.yaml"
    config.write_text(yaml.safe_dump({
        "d_emb": 4, "d_hidden": 8, "epochs": 2, "learning_rate": 0.25,
        "seed": 1, "max_len": 10,
    }))
    for direction in ("fwd", "rev"):
        assert main([
            "train", "--src", str(root / "data" / "train.src"),
            "--tgt", str(root / "data" / "train.tgt"),
            "--dir", direction, "--config", str(config),
            "--out", str(root / f"{direction}.npz"),
        ]) == 0
    return root


def test_make_corpus_outputs(workspace):
    for name in ("train.src", "train.tgt", "test.src", "test.tgt"):
        assert (workspace / "data" / name).exists()
    src = (workspace / "data" / "test.src").read_text().splitlines()
    tgt = (workspace / "data" / "test.tgt").read_text().splitlines()
    assert len(src) == len(tgt) == 5


def test_train_outputs(workspace):
    assert (workspace / "fwd.npz").exists()
    assert (workspace / "fwd.npz.svoc").exists()
    assert (workspace / "fwd.npz.tvoc").exists()
    loss_lines = (workspace / "fwd.npz.loss.csv").read_text().splitlines()
    assert loss_lines[0] == "epoch,nats_per_token"
    assert len(loss_lines) == 3  # header + 2 epochs


def test_translate_plain(workspace):
    out = workspace / "plain.out"
    assert main([
        "translate", "--model", str(workspace / "fwd.npz"),
        "--in", str(workspace / "data" / "test.src"),
        "--out", str(out), "--width", "3",
    ]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 5


def test_translate_segmented_with_trace(workspace):
    out = workspace / "seg.out"
    trace = workspace / "seg.trace"
    assert main([
        "translate", "--model", str(workspace / "fwd.npz"),
        "--reverse-model", str(workspace / "rev.npz"),
        "--segment", "--width", "3", "--max-seg-len", "3",
        "--in", str(workspace / "data" / "test.src"),
        "--out", str(out), "--trace", str(trace),
    ]) == 0
    sources = (workspace / "data" / "test.src").read_text().splitlines()
    traces = trace.read_text().splitlines()
    assert len(traces) == len(sources)
    for line, src in zip(traces, sources):
        assert line.startswith("[[ ") and line.endswith(" ]]")
        inner = line[3:-3].replace(" ] [ ", " ")
        assert inner == src


def test_translate_segment_requires_reverse_model(workspace):
    code = main([
        "translate", "--model", str(workspace / "fwd.npz"),
        "--segment",
        "--in", str(workspace / "data" / "test.src"),
        "--out", str(workspace / "never.out"),
    ])
    assert code == 2


def test_segment_subcommand(workspace):
    out = workspace / "traces.txt"
    assert main([
        "segment", "--model", str(workspace / "fwd.npz"),
        "--reverse-model", str(workspace / "rev.npz"),
        "--width", "3", "--max-seg-len", "3",
        "--in", str(workspace / "data" / "test.src"),
        "--out", str(out),
    ]) == 0
    assert len(out.read_text().splitlines()) == 5


def test_evaluate_subcommand(workspace, capsys):
    ref = workspace / "data" / "test.tgt"
    assert main(["evaluate", "--cand", str(ref), "--ref", str(ref)]) == 0
    captured = capsys.readouterr().out
    assert "BLEU = 100.00" in captured


def test_evaluate_bucketed(workspace, capsys):
    ref = workspace / "data" / "test.tgt"
    assert main([
        "evaluate", "--cand", str(ref), "--ref", str(ref),
        "--src", str(workspace / "data" / "test.src"),
        "--buckets", "length", "--edges", "0,4",
    ]) == 0
    assert "bucket [" in capsys.readouterr().out


def test_evaluate_length_mismatch(workspace, tmp_path):
    short = tmp_path / "short.txt"
    short.write_text("tw01\n")
    code = main(["evaluate", "--cand", str(short),
                 "--ref", str(workspace / "data" / "test.tgt")])
    assert code == 2


def test_experiment_subcommand(tmp_path, capsys):
    cfg = {
        "seeds": [1],
        "grammar": GRAMMAR,
        "train_pairs": 30, "epochs": 2, "d_emb": 4, "d_hidden": 8,
        "vocab_cap": 11, "control_pairs": 4, "control_clauses": [2, 3],
        "dev_pairs": 3, "length_pairs": 4, "length_clauses": [1, 3],
        "robustness_pairs": 4, "robustness_clauses": [1, 2],
        "unk_rates": [0.0, 0.2], "width": 3, "max_seg_len": 3,
    }
    config = tmp_path / "harness.yaml"
    config.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "run"
    assert main(["experiment", "control", "--config", str(config),
                 "--out", str(out)]) == 0
    assert (out / "report.txt").exists()
    assert "control BLEU" in capsys.readouterr().out
