"""Command-line entry points: data building, offline training and sweeps,
evaluation, online replay, benchmarks, analyses, and the HTTP service."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import datagen, experiments, world
from .defaults import TUNED, tuned_config
from .models import load_checkpoint, save_checkpoint
from .offline import TrainConfig, evaluate, sweep, train
from .online import AdaptConfig, run_session, session_report, tune_online


def _load_data_dir(path):
    split = datagen.SplitSpec.load(os.path.join(path, "split.json"))
    out = {}
    for tag in ("train", "val", "test"):
        fname = os.path.join(path, f"{tag}.tsv")
        if os.path.exists(fname):
            out[tag] = datagen.load_dataset(fname)
    return split, out


def cmd_data(args):
    split = datagen.make_split(args.seed)
    counts = dict(zip(("train", "val", "test"),
                      (int(x) for x in args.counts.split(","))))
    data = datagen.generate(split, counts=counts)
    os.makedirs(args.out, exist_ok=True)
    split.save(os.path.join(args.out, "split.json"))
    for tag, ds in data.items():
        datagen.save_dataset(os.path.join(args.out, f"{tag}.tsv"), ds.examples)
    print(f"wrote split.json and {'/'.join(str(len(d)) for d in data.values())} "
          f"examples to {args.out}")


def cmd_train(args):
    _, data = _load_data_dir(args.data)
    config = TrainConfig(
        encoder=args.enc, decoder=args.dec, hidden=args.hidden,
        enc_layers=args.enc_layers or args.layers,
        dec_layers=args.dec_layers or args.layers,
        dropout=args.dropout, lr=args.lr, batch_size=args.batch_size,
        max_epochs=args.max_epochs, eval_every=args.eval_every,
        patience=args.patience, seed=args.seed)
    limit = args.limit or len(data["train"])
    model, curve = train(config, data["train"][:limit], data["val"],
                         verbose=True)
    save_checkpoint(model, args.out)
    best = max((pt["val_exact"] for pt in curve), default=0.0)
    print(f"saved {args.out}; best val exact-match {best:.4f}")
    if args.curve:
        with open(args.curve, "w") as fh:
            for pt in curve:
                fh.write(json.dumps(pt) + "\n")


def cmd_sweep(args):
    _, data = _load_data_dir(args.data)
    grid = None
    if args.grid:
        with open(args.grid) as fh:
            grid = [TrainConfig(**entry) for entry in json.load(fh)]
    limit = args.limit or len(data["train"])
    results, best = sweep(data["train"][:limit], data["val"], grid=grid,
                          budget=args.budget, out_path=args.out)
    for arch, record in sorted(best.items(), key=lambda kv: -kv[1]["val_exact"]):
        print(f"{arch:10s} val exact-match {record['val_exact']:.4f}")


def cmd_eval(args):
    model = load_checkpoint(args.ckpt)
    examples = datagen.load_dataset(args.data)
    report = evaluate(model, examples)
    print(json.dumps({"exact_match": report.exact_match,
                      "per_token": report.per_token, "count": report.count}))


def cmd_adapt(args):
    model = load_checkpoint(args.ckpt)
    sessions = experiments.ingest_human_sessions(args.session)
    if not sessions:
        sys.exit("no usable sessions in file")
    config = AdaptConfig(
        reuse=args.reuse, adapt=args.adapt, k=args.k, steps=args.steps,
        optimizer=args.opt, lr=args.lr, l2=args.l2, selection=args.select,
        seed=args.seed)
    reports = []
    for sess in sessions:
        accuracy, live = run_session(model, config, sess.stream())
        report = session_report(live)
        report["session_id"] = sess.id
        reports.append(report)
        print(f"{sess.id}: online accuracy {accuracy:.4f} "
              f"over {live.t} interactions")
    payload = reports[0] if len(reports) == 1 else {
        "sessions": reports,
        "mean_online_accuracy": float(np.mean(
            [r["summary"]["online_accuracy"] for r in reports])),
    }
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, indent=1)
        print(f"wrote {args.report}")


def cmd_sessions(args):
    split = (datagen.SplitSpec.load(args.split) if args.split
             else datagen.make_split(args.split_seed))
    if args.kind == "recovery":
        built = datagen.build_recovery_sessions(split, args.condition, args.seed)
        sessions = [
            experiments.HumanSession(
                f"recovery-{args.condition}-{i}-{'+'.join(s.words)}",
                s.examples)
            for i, s in enumerate(built)
        ]
    elif args.kind == "validation":
        s = datagen.build_validation_recovery_session(split, args.seed)
        sessions = [experiments.HumanSession("recovery-validation", s.examples)]
    else:
        sessions = experiments.make_dialect_sessions(split, args.count, args.seed)
    experiments.write_human_sessions(args.out, sessions)
    print(f"wrote {len(sessions)} sessions to {args.out}")


def cmd_bench(args):
    model = load_checkpoint(args.ckpt)
    if args.kind == "recovery":
        split = (datagen.SplitSpec.load(args.split) if args.split
                 else datagen.make_split(args.split_seed))
        variants = {
            "reuse-all/adapt-embeddings": tuned_config("all", "embeddings"),
            "reuse-dec/adapt-encoder": tuned_config("dec", "encoder"),
            "reuse-none/adapt-all": tuned_config("none", "all"),
            "reuse-all/adapt-embeddings/k1": tuned_config("all", "embeddings", k=1),
        }
        report = experiments.run_recovery_benchmark(model, split, variants,
                                                    seed=args.seed)
        table = []
        for name, entry in report["variants"].items():
            row = {cond: f"{cell['mean']*100:.1f}"
                   for cond, cell in entry["per_condition"].items()}
            table.append((name, row))
        for name, row in table:
            print(f"{name:35s} " + "  ".join(f"{c}:{v}" for c, v in row.items()))
    elif args.kind == "human":
        sessions = experiments.ingest_human_sessions(args.sessions)
        configs = {cell: tuned_config(*cell) for cell in
                   experiments.HUMAN_BENCH_CELLS}
        report = experiments.run_human_benchmark(model, sessions, configs)
        for cell, entry in report["cells"].items():
            r = entry.get("pearson_r")
            print(f"{cell:20s} acc {entry['mean_accuracy']*100:.1f} "
                  f"r {r if r is None else round(r, 2)}")
    else:
        sessions = experiments.ingest_human_sessions(args.sessions)
        report = experiments.run_scramble_control(model, sessions)
        print(f"scramble control mean accuracy "
              f"{report['mean_accuracy']*100:.1f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1)
        print(f"wrote {args.out}")


def cmd_analyze(args):
    model = load_checkpoint(args.ckpt)
    words = [w for w in args.words.split(",") if w]
    report = experiments.embedding_similarity_report(model, words)
    for probe, sims in report.items():
        top = "  ".join(f"{w}:{v:+.2f}" for w, v in sims[:6])
        print(f"{probe:12s} {top}")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({p: [[w, v] for w, v in sims]
                       for p, sims in report.items()}, fh, indent=1)
        print(f"wrote {args.report}")


def cmd_serve(args):
    from .service import serve

    serve(args.ckpt, port=args.port, host=args.host,
          config_path=args.default_config)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="blocktalk",
        description="Instruction-following learner for a colored-blocks game")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("data", help="generate split + datasets into a directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--counts", default="42000,4000,4000")
    p.set_defaults(func=cmd_data)

    p = sub.add_parser("train", help="train one offline model")
    p.add_argument("--enc", choices=("lstm", "conv", "bow"), required=True)
    p.add_argument("--dec", choices=("lstm", "conv"), required=True)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--enc-layers", type=int, default=None)
    p.add_argument("--dec-layers", type=int, default=None)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=60)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", required=True, help="directory from `blocktalk data`")
    p.add_argument("--limit", type=int, default=None,
                   help="cap training examples (desk-scale runs)")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--curve", default=None, help="write eval curve JSONL here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="hyperparameter grid search")
    p.add_argument("--grid", default=None, help="JSON list of config dicts")
    p.add_argument("--data", required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--out", default=None, help="results JSONL path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("adapt", help="replay sessions with online adaptation")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--session", required=True, help="session JSONL file")
    p.add_argument("--reuse", choices=("all", "dec", "none"), default="all")
    p.add_argument("--adapt", choices=("newwords", "embeddings", "encoder",
                                       "all"), default="embeddings")
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--opt", choices=("sgd", "adam"), default="adam")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--select", choices=("greedy", "1out"), default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write report JSON here")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("sessions", help="materialize simulated sessions")
    p.add_argument("kind", choices=("recovery", "validation", "dialect"))
    p.add_argument("--split", default=None, help="split.json (default: by seed)")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--condition", choices=datagen.RECOVERY_CONDITIONS,
                   default="all")
    p.add_argument("--count", type=int, default=10, help="dialect sessions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sessions)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("kind", choices=("recovery", "human", "scramble"))
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--sessions", default=None, help="session JSONL (human/scramble)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="embedding similarity analysis")
    p.add_argument("what", choices=("embeddings",))
    p.add_argument("--ckpt", required=True)
    p.add_argument("--words", required=True, help="comma-separated probe words")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the live teaching HTTP API")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--default-config", default=None)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
