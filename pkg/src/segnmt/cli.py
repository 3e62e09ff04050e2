"""Command-line interface.

Subcommands: make-corpus, train, translate, segment, evaluate, experiment.
Checkpoints are saved as `<ckpt>` plus two vocabulary sidecars
`<ckpt>.svoc` / `<ckpt>.tvoc` (the model's own source/target directions).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import yaml

from .confidence import ScoreMode
from .corpus import (
    ToyGrammarSpec,
    build_vocabulary,
    decode_sentence,
    encode_sentence,
    generate_toy_corpus,
    load_vocabulary,
    read_corpus,
    read_parallel,
    save_vocabulary,
    write_corpus,
)
from .evaluation import bleu, evaluate_bucketed
from .experiments import HarnessConfig, run_experiment
from .model import init_params, load_checkpoint, save_checkpoint
from .pipeline import translate_plain, translate_with_segmentation
from .segmentation import format_trace
from .training import TrainConfig, train

MODES = {m.value: m for m in ScoreMode}


def _load_yaml(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def cmd_make_corpus(args) -> int:
    data = _load_yaml(args.spec)
    grammar = ToyGrammarSpec(**data.get("grammar", {}))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = data.get("splits") or {
        "train": {"pairs": 300, "split": "train"},
        "test": {"pairs": 30, "clauses": [3, 5]},
    }
    for offset, (name, split) in enumerate(splits.items()):
        lo, hi = split.get("clauses", [1, 1])
        pairs = generate_toy_corpus(
            grammar, split["pairs"], lo, hi, seed=args.seed + offset,
            split=split.get("split", "eval"),
        )
        write_corpus([s for s, _ in pairs], out / f"{name}.src")
        write_corpus([t for _, t in pairs], out / f"{name}.tgt")
        print(f"wrote {name}: {len(pairs)} pairs")
    return 0


def cmd_train(args) -> int:
    cfg = _load_yaml(args.config)
    pairs_text = read_parallel(args.src, args.tgt)
    if args.dir == "rev":
        pairs_text = [(t, s) for s, t in pairs_text]
    cap = cfg.get("vocab_cap", 30000)
    vocab_src = build_vocabulary((s for s, _ in pairs_text), cap)
    vocab_tgt = build_vocabulary((t for _, t in pairs_text), cap)
    pairs = [
        (encode_sentence(vocab_src, s), encode_sentence(vocab_tgt, t))
        for s, t in pairs_text
    ]
    tc = TrainConfig(
        learning_rate=cfg.get("learning_rate", 0.25),
        epochs=cfg.get("epochs", 30),
        clip_norm=cfg.get("clip_norm", 2.0),
        seed=cfg.get("seed", 0),
        max_len=cfg.get("max_len", 30),
    )
    params = init_params(
        cfg.get("d_emb", 32), cfg.get("d_hidden", 64),
        vocab_src.size, vocab_tgt.size, seed=cfg.get("seed", 0),
    )
    params, trace = train(params, pairs, tc)
    save_checkpoint(params, args.out)
    save_vocabulary(vocab_src, args.out + ".svoc")
    save_vocabulary(vocab_tgt, args.out + ".tvoc")
    with open(args.out + ".loss.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "nats_per_token"])
        for epoch, loss in enumerate(trace, start=1):
            writer.writerow([epoch, repr(loss)])
    if trace:
        print(f"final loss: {trace[-1]:.4f} nats/token over {tc.epochs} epochs")
    return 0


def _load_model(path: str):
    params = load_checkpoint(path)
    vocab_src = load_vocabulary(path + ".svoc")
    vocab_tgt = load_vocabulary(path + ".tvoc")
    return params, vocab_src, vocab_tgt


def cmd_translate(args) -> int:
    fwd, vocab_src, vocab_tgt = _load_model(args.model)
    rev = load_checkpoint(args.reverse_model) if args.reverse_model else None
    if args.segment and rev is None and MODES[args.mode] is not ScoreMode.DIRECT:
        print("error: --segment with a bidirectional mode needs --reverse-model",
              file=sys.stderr)
        return 2
    lines = read_corpus(args.infile)
    outputs = []
    traces = []
    for line in lines:
        source = encode_sentence(vocab_src, line)
        if not args.segment or not source:
            outputs.append(decode_sentence(vocab_tgt, translate_plain(fwd, source, args.width)))
            traces.append("[[ " + line.strip() + " ]]")
            continue
        result = translate_with_segmentation(
            fwd, rev, source, mode=MODES[args.mode], width=args.width,
            max_seg_len=args.max_seg_len, workers=args.workers,
        )
        outputs.append(decode_sentence(vocab_tgt, result.tokens))
        traces.append(format_trace(line.split(), result.segmentation))
    write_corpus(outputs, args.out)
    if args.trace:
        write_corpus(traces, args.trace)
    return 0


def cmd_segment(args) -> int:
    fwd, vocab_src, _ = _load_model(args.model)
    rev = load_checkpoint(args.reverse_model)
    lines = read_corpus(args.infile)
    traces = []
    for line in lines:
        source = encode_sentence(vocab_src, line)
        result = translate_with_segmentation(
            fwd, rev, source, mode=MODES[args.mode], width=args.width,
            max_seg_len=args.max_seg_len, workers=args.workers,
        )
        traces.append(format_trace(line.split(), result.segmentation))
    write_corpus(traces, args.out)
    return 0


def cmd_evaluate(args) -> int:
    cands = [line.split() for line in read_corpus(args.cand)]
    refs = [line.split() for line in read_corpus(args.ref)]
    if len(cands) != len(refs):
        print("error: candidate/reference line counts differ", file=sys.stderr)
        return 2
    report = bleu(cands, refs)
    print(f"BLEU = {report.percent:.2f}")
    print("precisions: " + " ".join(f"p{n + 1}={p:.4f}" for n, p in enumerate(report.precisions)))
    print(f"brevity penalty = {report.brevity_penalty:.4f} "
          f"(cand {report.candidate_tokens} / ref {report.reference_tokens} tokens)")
    if args.buckets:
        if args.buckets == "length" and args.src:
            sources = [line.split() for line in read_corpus(args.src)]
        else:
            sources = refs  # fall back to reference-side keys
        edges = [int(e) for e in args.edges.split(",")] if args.edges else None
        table = evaluate_bucketed(
            {"candidates": cands}, refs, sources,
            bucketing=args.buckets, edges=edges,
        )
        for label, rep in table["candidates"].items():
            print(f"bucket {label}: BLEU = {rep.percent:.2f}")
    return 0


def cmd_experiment(args) -> int:
    cfg = HarnessConfig.load(args.config) if args.config else HarnessConfig()
    report, _ = run_experiment(args.kind, cfg, args.out)
    print(report.to_text())
    print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segnmt",
        description="Segmentation-based neural machine translation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-corpus", help="generate a toy parallel corpus")
    p.add_argument("--spec", required=True, help="YAML grammar/splits spec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_corpus)

    p = sub.add_parser("train", help="train one translation direction")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--dir", choices=["fwd", "rev"], default="fwd")
    p.add_argument("--config", required=True, help="YAML training config")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="translate a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--reverse-model")
    p.add_argument("--segment", action="store_true")
    p.add_argument("--mode", choices=sorted(MODES), default="bidir-pen")
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--max-seg-len", type=int, default=8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("segment", help="emit bracketed segmentation traces")
    p.add_argument("--model", required=True)
    p.add_argument("--reverse-model", required=True)
    p.add_argument("--mode", choices=sorted(MODES), default="bidir-pen")
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--max-seg-len", type=int, default=8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="corpus BLEU, optionally bucketed")
    p.add_argument("--cand", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--src", help="source file (for length bucketing)")
    p.add_argument("--buckets", choices=["length", "unk"])
    p.add_argument("--edges", help="comma-separated bucket edges")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run an experiment suite")
    p.add_argument("kind", choices=["control", "ablation", "robustness"])
    p.add_argument("--config", help="YAML harness config (defaults if omitted)")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
