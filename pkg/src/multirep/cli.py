"""Command-line entry point wiring encoding, indexing, search, training,
sweeps, oracles, compression, benchmarking, and evaluation.

Pipelines compose through files only:
corpus.jsonl -> DRPR reprs -> index -> TREC run -> metrics.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import bench as benchmod
from . import drpr, evalkit, index, pipeline, synthetic, training, vocab
from .config import atomic_write_text, load_config, write_config_log
from .encoder import EncoderParams
from .errors import EmptyBatch, MissingIndex, MultirepError
from .scoring import build_content_filter, hybrid_fuse


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a config key (repeatable)",
    )


def _resolve(args) -> dict:
    return load_config(args.config, args.overrides)


def _load_params_vocab(params_path: str, vocab_path: str):
    return EncoderParams.load(params_path), vocab.Vocabulary.load(vocab_path)


def cmd_vocab(args) -> int:
    cfg = _resolve(args)
    texts = []
    for path in args.inputs:
        texts.extend(t for _, t in pipeline.load_jsonl_items(path, "passage"))
    if not texts:
        raise EmptyBatch("no texts found in inputs")
    voc = vocab.build_tokenizer(texts, max_vocab=int(cfg["encoder.max_vocab"]))
    voc.save(args.out)
    write_config_log(args.out, cfg)
    print(f"vocab size {voc.size} -> {args.out}")
    return 0


def cmd_init(args) -> int:
    cfg = _resolve(args)
    voc = vocab.Vocabulary.load(args.vocab)
    params = EncoderParams.init(
        vocab_size=voc.size,
        hidden_dim=int(cfg["encoder.hidden_dim"]),
        n_layers=int(cfg["encoder.n_layers"]),
        seed=int(cfg["encoder.seed"]),
    )
    params.save(args.out)
    write_config_log(args.out, cfg)
    print(f"initialized encoder V={voc.size} H={params.hidden_dim} -> {args.out}")
    return 0


def cmd_encode(args) -> int:
    cfg = _resolve(args)
    params, voc = _load_params_vocab(args.params, args.vocab)
    items = pipeline.load_jsonl_items(args.corpus, args.target)
    if not items:
        raise EmptyBatch(f"no items in {args.corpus}")
    mode, steps = "parallel", 1
    if args.sequential:
        mode = "sequential"
    elif args.multistep is not None:
        mode, steps = "multistep", args.multistep
    reps = pipeline.encode_items(
        params,
        voc,
        items,
        target=args.target,
        k=args.k,
        mode=mode,
        steps=steps,
        max_len=int(cfg["encoder.max_len"]),
    )
    drpr.write_drpr(
        args.out,
        reps,
        k=args.k,
        h=params.hidden_dim,
        v=params.vocab_size,
        with_logits=True,
    )
    write_config_log(args.out, cfg)
    report = drpr.validate(args.out)
    print(f"wrote {report['count']} representation sets (k={args.k}) -> {args.out}")
    return 0


def cmd_index(args) -> int:
    cfg = _resolve(args)
    _, pairs = drpr.read_drpr(args.reprs)
    voc = vocab.Vocabulary.load(args.vocab)
    flt = build_content_filter(voc)
    index.build_dense(pairs).save(args.out + ".didx")
    index.build_sparse(pairs, flt).save(args.out + ".sidx")
    write_config_log(args.out + ".didx", cfg)
    print(
        f"indexed {len(pairs)} docs -> {args.out}.didx / {args.out}.sidx "
        f"({len(flt.allowed_ids)} active sparse terms)"
    )
    return 0


def _load_indexes(prefix: str, mode: str):
    dense_idx = sparse_idx = None
    if mode in ("dense", "hybrid"):
        if not os.path.exists(prefix + ".didx"):
            raise MissingIndex(
                f"{prefix}.didx not found; run the index command first"
            )
        dense_idx = index.DenseIndex.load(prefix + ".didx")
    if mode in ("sparse", "hybrid"):
        if not os.path.exists(prefix + ".sidx"):
            raise MissingIndex(
                f"{prefix}.sidx not found; run the index command first"
            )
        sparse_idx = index.SparseIndex.load(prefix + ".sidx")
    return dense_idx, sparse_idx


def cmd_search(args) -> int:
    cfg = _resolve(args)
    params, voc = _load_params_vocab(args.params, args.vocab)
    flt = build_content_filter(voc)
    queries = pipeline.load_jsonl_items(args.queries, "query")
    if not queries:
        raise EmptyBatch(f"no queries in {args.queries}")
    dense_idx, sparse_idx = _load_indexes(args.index, args.mode)
    query_reps = list(
        pipeline.encode_items(
            params, voc, queries, target="query", k=args.k,
            max_len=int(cfg["encoder.max_len"]),
        )
    )
    modes = ["dense", "sparse", "hybrid"] if args.mode == "hybrid" else [args.mode]
    for m in modes:
        runs = pipeline.search_batch(
            query_reps, dense_idx, sparse_idx, flt, m, cutoff=args.cutoff
        )
        out = args.out if m == args.mode else f"{args.out}.{m}"
        evalkit.write_run(out, runs, tag=m)
        write_config_log(out, cfg)
        print(f"wrote {m} run ({len(runs)} queries) -> {out}")
    return 0


def cmd_fuse(args) -> int:
    cfg = _resolve(args)
    dense_run = evalkit.read_run(args.dense)
    sparse_run = evalkit.read_run(args.sparse)
    if sorted(dense_run) != sorted(sparse_run):
        raise EmptyBatch("dense and sparse runs cover different query ids")
    fused = {qid: hybrid_fuse(dense_run[qid], sparse_run[qid])
             for qid in sorted(dense_run)}
    evalkit.write_run(args.out, fused, tag="hybrid")
    write_config_log(args.out, cfg)
    print(f"fused {len(fused)} queries -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    params, voc = _load_params_vocab(args.params, args.vocab)
    flt = build_content_filter(voc)
    items = training.load_train_jsonl(args.train)
    tcfg = training.TrainConfig(
        tau=float(cfg["train.tau"]),
        batch_size=int(cfg["train.batch_size"]),
        epochs=int(cfg["train.epochs"]),
        learning_rate=float(cfg["train.learning_rate"]),
        k_q=int(cfg["train.k_q"]),
        k_p=int(cfg["train.k_p"]),
        seed=int(cfg["train.seed"]),
        negatives_per_query=int(cfg["train.negatives_per_query"]),
        max_len=int(cfg["encoder.max_len"]),
    )
    trained, curve = training.train(params, items, tcfg, voc, flt)
    trained.save(args.out)
    write_config_log(args.out, cfg)
    for epoch, loss in enumerate(curve, 1):
        print(f"epoch {epoch}: mean loss {loss:.6f}")
    print(f"trained params -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    run = evalkit.read_run(args.run)
    judgments = evalkit.Judgments.load(args.qrels)
    metric = args.metric or str(cfg["eval.metric"])
    per_query = evalkit.per_query_metric(run, judgments, metric)
    aggregate = evalkit.aggregate_metric(run, judgments, metric)
    if args.out:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["query_id", metric])
        for qid in sorted(per_query):
            writer.writerow([qid, f"{per_query[qid]:.6f}"])
        atomic_write_text(args.out, buf.getvalue())
        write_config_log(args.out, cfg)
    print(f"{metric} = {aggregate:.6f} over {len(per_query)} queries")
    return 0


def _build_setup(args, cfg) -> pipeline.EvalSetup:
    params, voc = _load_params_vocab(args.params, args.vocab)
    flt = build_content_filter(voc)
    queries = pipeline.load_jsonl_items(args.queries, "query")
    corpus = pipeline.load_jsonl_items(args.corpus, "passage")
    judgments = evalkit.Judgments.load(args.qrels)
    metric = args.metric or str(cfg["eval.metric"])
    return pipeline.EvalSetup(
        params, voc, flt, queries, corpus, judgments,
        metric=metric,
        cutoff=int(cfg["eval.cutoff"]),
        max_len=int(cfg["encoder.max_len"]),
    )


def _grid_csv(grid: evalkit.BudgetGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["k_q", "k_p", grid.mode])
    for (k_q, k_p) in sorted(grid.cells):
        writer.writerow([k_q, k_p, f"{grid.cells[(k_q, k_p)]:.6f}"])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    setup = _build_setup(args, cfg)
    grid = pipeline.sweep(setup, tuple(args.budgets), args.mode)
    atomic_write_text(args.out, _grid_csv(grid))
    write_config_log(args.out, cfg)
    best = grid.argmax_cell()
    summary = (
        f"best {grid.mode} cell: k_q={best[0]} k_p={best[1]} "
        f"value={grid.cells[best]:.6f}"
    )
    atomic_write_text(args.out + ".summary.txt", summary + "\n")
    print(summary)
    return 0


def cmd_oracle(args) -> int:
    cfg = _resolve(args)
    setup = _build_setup(args, cfg)
    grid = pipeline.sweep(setup, tuple(args.budgets), args.mode)
    fixed = grid.argmax_cell()
    rows = [("fixed_best", f"({fixed[0]},{fixed[1]})", grid.cells[fixed])]
    for kind in ("kq_only", "kp_only", "joint"):
        result = evalkit.oracle(grid, kind, fixed=fixed)
        rows.append((kind, "per-query", result.aggregate))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["oracle", "budget", grid.mode])
    for name, budget, value in rows:
        writer.writerow([name, budget, f"{value:.6f}"])
    atomic_write_text(args.out, buf.getvalue())
    write_config_log(args.out, cfg)
    for name, budget, value in rows:
        print(f"{name} ({budget}): {value:.6f}")
    return 0


def cmd_decompose(args) -> int:
    cfg = _resolve(args)
    setup = _build_setup(args, cfg)
    values = pipeline.decompose(setup, args.k_q, args.k_p)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["variant", setup.metric])
    for name in ("single", "meanpool", "maxsim"):
        writer.writerow([name, f"{values[name]:.6f}"])
    atomic_write_text(args.out, buf.getvalue())
    write_config_log(args.out, cfg)
    for name in ("single", "meanpool", "maxsim"):
        print(f"{name}: {values[name]:.6f}")
    return 0


def cmd_compress(args) -> int:
    cfg = _resolve(args)
    if not os.path.exists(args.index + ".didx"):
        raise MissingIndex(f"{args.index}.didx not found")
    dense_idx = index.DenseIndex.load(args.index + ".didx")
    n_centroids = args.centroids or int(cfg["index.n_centroids"])
    compressed = index.compress(dense_idx, n_centroids=n_centroids, seed=0)
    compressed.save(args.out)
    write_config_log(args.out, cfg)
    report = compressed.report
    print(
        f"compressed {report['original_bytes']} -> {report['compressed_bytes']} "
        f"bytes (ratio {report['ratio']:.2f}x) -> {args.out}"
    )
    return 0


def cmd_bench(args) -> int:
    cfg = _resolve(args)
    bcfg = benchmod.BenchConfig(
        warmup_runs=int(cfg["bench.warmup_runs"]),
        timed_runs=int(cfg["bench.timed_runs"]),
        hidden_dim=int(cfg["encoder.hidden_dim"]),
        n_layers=int(cfg["encoder.n_layers"]),
    )
    merged = benchmod.BenchReport(environment=benchmod.environment_string())
    if args.suite in ("encoding", "all"):
        params = EncoderParams.init(
            vocab_size=2048, hidden_dim=bcfg.hidden_dim,
            n_layers=bcfg.n_layers, seed=bcfg.seed,
        )
        merged.rows.extend(benchmod.bench_encoding(params, bcfg).rows)
    if args.suite in ("search", "all"):
        merged.rows.extend(benchmod.bench_search(bcfg).rows)
    if args.suite in ("storage", "all"):
        merged.rows.extend(benchmod.bench_storage(bcfg).rows)
    atomic_write_text(args.out, merged.to_csv())
    write_config_log(args.out, cfg)
    print(f"{len(merged.rows)} bench rows -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    os.makedirs(args.outdir, exist_ok=True)
    task = synthetic.generate(
        n_passages=args.passages, n_queries=args.queries, seed=args.seed
    )
    paths = {
        "corpus": os.path.join(args.outdir, "corpus.jsonl"),
        "queries": os.path.join(args.outdir, "queries.jsonl"),
        "qrels": os.path.join(args.outdir, "qrels.txt"),
        "train": os.path.join(args.outdir, "train.jsonl"),
    }
    synthetic.write_files(
        task, paths["corpus"], paths["queries"], paths["qrels"], paths["train"]
    )
    write_config_log(paths["corpus"], cfg)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_validate(args) -> int:
    report = drpr.validate(args.reprs)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multirep",
        description="Multi-representation retrieval engine (dense, sparse, hybrid).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build a vocabulary from JSONL corpora")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_vocab)

    p = sub.add_parser("init", help="initialize encoder parameters")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("encode", help="encode a JSONL corpus to a DRPR file")
    p.add_argument("corpus")
    p.add_argument("--params", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--target", choices=["query", "passage"], required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--sequential", action="store_true")
    p.add_argument("--multistep", type=int, metavar="S")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("index", help="build dense and sparse indexes from DRPR")
    p.add_argument("reprs")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="index path prefix")
    _add_common(p)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("search", help="search an index; emit a TREC run file")
    p.add_argument("queries")
    p.add_argument("--params", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--index", required=True, help="index path prefix")
    p.add_argument("--mode", choices=["dense", "sparse", "hybrid"], default="hybrid")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--cutoff", type=int, default=1000)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("fuse", help="fuse dense and sparse runs into a hybrid run")
    p.add_argument("--dense", required=True)
    p.add_argument("--sparse", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_fuse)

    p = sub.add_parser("train", help="contrastively train encoder parameters")
    p.add_argument("train")
    p.add_argument("--params", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score a TREC run against qrels")
    p.add_argument("run")
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric", choices=sorted(evalkit.METRICS))
    p.add_argument("--out", help="per-query CSV output")
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    def add_eval_inputs(p):
        p.add_argument("--params", required=True)
        p.add_argument("--vocab", required=True)
        p.add_argument("--corpus", required=True)
        p.add_argument("--queries", required=True)
        p.add_argument("--qrels", required=True)
        p.add_argument("--metric", choices=sorted(evalkit.METRICS))

    p = sub.add_parser("sweep", help="evaluate a (k_q, k_p) budget grid")
    add_eval_inputs(p)
    p.add_argument("--mode", choices=["dense", "sparse", "hybrid"], default="hybrid")
    p.add_argument("--budgets", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("oracle", help="per-query budget-selection oracles")
    add_eval_inputs(p)
    p.add_argument("--mode", choices=["dense", "sparse", "hybrid"], default="hybrid")
    p.add_argument("--budgets", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser(
        "decompose", help="single vs mean-pool vs late-interaction comparison"
    )
    add_eval_inputs(p)
    p.add_argument("--k-q", type=int, default=4)
    p.add_argument("--k-p", type=int, default=4)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("compress", help="compress a dense index")
    p.add_argument("--index", required=True, help="index path prefix")
    p.add_argument("--centroids", type=int)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("bench", help="latency and storage microbenchmarks")
    p.add_argument("--suite", choices=["encoding", "search", "storage", "all"],
                   default="all")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic retrieval task")
    p.add_argument("--outdir", required=True)
    p.add_argument("--passages", type=int, default=500)
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    _add_common(p)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("validate", help="validate a DRPR representations file")
    p.add_argument("reprs")
    p.set_defaults(fn=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except MultirepError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"E_NOT_FOUND: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
