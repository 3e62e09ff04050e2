import numpy as np
import pytest
import yaml

from segnmt.corpus import ToyGrammarSpec, UNK_ID
from segnmt.experiments import (
    ABLATION_SYSTEMS,
    CONTROL_SYSTEMS,
    ExperimentReport,
    HarnessConfig,
    Table,
    build_world,
    inject_unks,
    run_experiment,
    run_robustness_curves,
    train_models,
)


def tiny_config():
    return HarnessConfig(
        seeds=[1],
        grammar=ToyGrammarSpec(
            n_clauses=4, min_clause_len=2, max_clause_len=3,
            n_word_types=8, seed=5,
        ),
        train_pairs=30, epochs=2, d_emb=4, d_hidden=8, vocab_cap=11,
        control_pairs=4, control_clauses=(2, 3), dev_pairs=3,
        length_pairs=4, length_clauses=(1, 3),
        robustness_pairs=4, robustness_clauses=(1, 2),
        unk_rates=[0.0, 0.2], width=3, max_seg_len=3,
    )


def test_config_yaml_roundtrip(tmp_path):
    cfg = tiny_config()
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg.to_dict()))
    loaded = HarnessConfig.load(path)
    assert loaded == cfg


def test_config_from_partial_dict():
    cfg = HarnessConfig.from_dict({"seeds": [4], "epochs": 3})
    assert cfg.seeds == [4]
    assert cfg.epochs == 3
    assert cfg.grammar == ToyGrammarSpec(seed=7)


def test_inject_unks():
    rng = np.random.default_rng(0)
    src = list(range(3, 103))
    assert inject_unks(src, 0.0, rng) == src
    injected = inject_unks(src, 0.5, rng)
    assert len(injected) == len(src)
    hits = sum(t == UNK_ID for t in injected)
    assert 20 < hits < 80
    assert all(a == b or a == UNK_ID for a, b in zip(injected, src))


def test_world_is_deterministic():
    cfg = tiny_config()
    a = build_world(cfg)
    b = build_world(cfg)
    assert a.vocab_src.id_to_token == b.vocab_src.id_to_token
    assert a.control == b.control
    assert a.robustness == b.robustness


def test_robustness_requires_zero_rate():
    cfg = tiny_config()
    world = build_world(cfg)
    fwd, rev, _, _ = train_models(cfg, world, 1)
    with pytest.raises(ValueError):
        run_robustness_curves(fwd, rev, world.length, [0.1, 0.2])


def test_report_write_outputs(tmp_path):
    report = ExperimentReport(
        name="demo",
        config={"x": 1},
        tables=[Table("some table", ["a", "b"], [["r", 1.25], ["s", None]])],
    )
    report.write(tmp_path)
    text = (tmp_path / "report.txt").read_text()
    assert "# demo" in text and "some table" in text
    csv_text = (tmp_path / "some-table.csv").read_text().strip().splitlines()
    assert csv_text[0] == "a,b"
    assert csv_text[1] == "r,1.25"
    assert csv_text[2] == "s,"


def test_control_experiment_end_to_end(tmp_path):
    cfg = tiny_config()
    report, raw = run_experiment("control", cfg, tmp_path)
    table = report.tables[0]
    assert [row[0] for row in table.rows] == CONTROL_SYSTEMS
    assert (tmp_path / "report.txt").exists()
    assert (tmp_path / "control-bleu.csv").exists()
    assert (tmp_path / "control_bleu.png").stat().st_size > 0
    for row in table.rows:
        for value in row[1:]:
            assert 0.0 <= value <= 100.0


def test_ablation_experiment_end_to_end(tmp_path):
    cfg = tiny_config()
    report, raw = run_experiment("ablation", cfg, tmp_path)
    assert len(report.tables) == 2
    for table in report.tables:
        assert [row[0] for row in table.rows] == ABLATION_SYSTEMS
    assert (tmp_path / "ablation_all.png").exists()
    assert (tmp_path / "ablation_no-unk.png").exists()


def test_robustness_experiment_end_to_end(tmp_path):
    cfg = tiny_config()
    report, raw = run_experiment("robustness", cfg, tmp_path)
    length_table, unk_table, loss_table = report.tables
    assert unk_table.headers[2:] == ["rate=0", "rate=0.2"]
    # loss at rate 0 is zero by construction
    for row in loss_table.rows:
        assert row[2] == 0.0
    assert (tmp_path / "bleu_by_length.png").exists()
    assert (tmp_path / "unk_robustness.png").exists()


def test_unknown_experiment_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        run_experiment("nope", tiny_config(), tmp_path)


def test_reports_bit_identical_across_runs(tmp_path):
    cfg = tiny_config()
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_experiment("control", cfg, a)
    run_experiment("control", cfg, b)
    assert (a / "report.txt").read_bytes() == (b / "report.txt").read_bytes()
    assert (a / "control-bleu.csv").read_bytes() == (b / "control-bleu.csv").read_bytes()
