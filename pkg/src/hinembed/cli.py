"""Command-line entry point: ``hinembed generate|walk|train|embed|eval``.

Every flag can also be set through an environment variable named
``HINEMBED_<FLAG>`` (upper case, dashes as underscores), e.g.
``HINEMBED_WALKS_PER_NODE=40``. Command-line values win.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Each run writes a
JSON manifest (parameters, input digests, seed, version, duration) to
``--manifest`` or ``<out>.manifest.json``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HinEmbedError
from .evaluation import classify, cluster_report, search_precision
from .graph import load_graph, load_labels, load_schema
from .metagraph import chain_from_metapath, load_metagraph, validate
from .synth import SynthConfig, generate_hin, sparsify_venues, write_hin
from .trainer import (HETEROGENEOUS, HOMOGENEOUS, TrainConfig, count_pairs, load_embeddings,
                      load_pair_table, save_embeddings, save_pair_table, train)
from .walker import generate_corpus, read_corpus, write_corpus

logger = logging.getLogger("hinembed")
ENV_PREFIX = "HINEMBED_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _graph_files(prefix, schema=None):
    prefix = str(prefix)
    return {"nodes": prefix + ".nodes.tsv", "edges": prefix + ".edges.tsv",
            "schema": schema or prefix + ".schema"}


def _load_graph(args):
    files = _graph_files(args.graph, args.schema)
    for path in files.values():
        if not Path(path).exists():
            raise FileNotFoundError(f"missing input file {path}")
    schema = load_schema(files["schema"])
    return load_graph(files["nodes"], files["edges"], schema), list(files.values())


def _policy(args, graph):
    if args.policy == "uniform":
        return "uniform", []
    if args.policy == "metagraph":
        if not args.metagraph:
            raise UsageError("--policy metagraph needs --metagraph FILE")
        mg = load_metagraph(args.metagraph)
        inputs = [args.metagraph]
    else:
        if not args.metapath:
            raise UsageError("--policy metapath needs --metapath TYPES (e.g. A,P,V,P,A)")
        mg = chain_from_metapath(args.metapath.replace("-", ",").split(","), graph.schema)
        inputs = []
    problems = validate(mg, graph.schema)
    if problems:
        raise HinEmbedError("metagraph validation failed: " + "; ".join(problems))
    return mg, inputs


def _train_config(args):
    parallel = bool(args.threads and args.threads > 1 and not args.deterministic)
    return TrainConfig(mode=args.mode, dim=args.dim, negatives=args.negatives, learning_rate=args.learning_rate,
                       max_iterations=args.iterations, noise_exponent=args.noise_exponent, seed=args.seed,
                       deterministic=not parallel, threads=args.threads)


def _fit(args, graph, table, out):
    config = _train_config(args)
    model = train(table, config, graph.num_nodes, graph.node_type)
    save_embeddings(out, model.phi, graph.node_ids, binary=args.binary)
    if args.context_out:
        save_embeddings(args.context_out, model.psi, graph.node_ids, binary=args.binary)
    return model


def cmd_generate(args):
    values = {}
    if args.config:
        values.update(SynthConfig.from_file(args.config).__dict__)
    for name in ("communities", "authors", "papers", "venues", "min_authors", "max_authors",
                 "venue_retention", "cross_prob", "citations", "seed"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    config = SynthConfig(**values)
    graph = generate_hin(config)
    if args.remove_venues:
        graph = sparsify_venues(graph, args.remove_venues, config.seed)
    files = write_hin(graph, args.out)
    Path(str(args.out) + ".config").write_text(config.to_text(), encoding="utf-8")
    logger.info("wrote %s (%d nodes, %d edges)", args.out, graph.num_nodes, graph.num_edges)
    return [args.config] if args.config else [], args.out


def cmd_walk(args):
    graph, inputs = _load_graph(args)
    policy, extra = _policy(args, graph)
    corpus = generate_corpus(graph, policy, args.length, args.walks_per_node, args.seed, args.threads)
    write_corpus(corpus, args.out, graph.node_ids)
    return inputs + extra, args.out


def cmd_train(args):
    graph, inputs = _load_graph(args)
    if args.pairs:
        table = load_pair_table(args.pairs)
        inputs.append(args.pairs)
    elif args.corpus:
        table = count_pairs(read_corpus(args.corpus, graph), args.window, graph.num_nodes)
        inputs.append(args.corpus)
    else:
        raise UsageError("train needs --corpus or --pairs")
    if args.pairs_out:
        save_pair_table(table, args.pairs_out)
    _fit(args, graph, table, args.out)
    return inputs, args.out


def cmd_embed(args):
    graph, inputs = _load_graph(args)
    policy, extra = _policy(args, graph)
    corpus = generate_corpus(graph, policy, args.length, args.walks_per_node, args.seed, args.threads)
    if args.corpus_out:
        write_corpus(corpus, args.corpus_out, graph.node_ids)
    table = count_pairs(corpus, args.window, graph.num_nodes)
    if args.pairs_out:
        save_pair_table(table, args.pairs_out)
    _fit(args, graph, table, args.out)
    return inputs + extra, args.out


def cmd_eval(args):
    ids, vectors = load_embeddings(args.embeddings)
    labels = load_labels(args.labels)
    rows = [i for i, node in enumerate(ids) if node in labels]
    if not rows:
        raise HinEmbedError("no embedded node has a label")
    X = vectors[rows]
    y = np.array([labels[ids[i]] for i in rows])
    ks = [int(k) for k in str(args.k).split(",")] if args.k else None
    if args.task == "classify":
        report = classify(X, y, args.train_ratio, args.repetitions, args.seed)
    elif args.task == "cluster":
        report = cluster_report(X, y, ks[0] if ks else None, seeds=range(args.seed, args.seed + args.repetitions))
    else:
        report = search_precision(X, y, ks or [100], args.queries, args.seed)
    text = report.to_kv() if args.format == "kv" else report.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return [args.embeddings, args.labels], args.out


def _add_graph(p):
    p.add_argument("--graph", required=True, help="file prefix: <prefix>.nodes.tsv and <prefix>.edges.tsv")
    p.add_argument("--schema", help="schema file (default <prefix>.schema)")


def _add_walk(p):
    p.add_argument("--policy", choices=["metagraph", "metapath", "uniform"], default="metagraph")
    p.add_argument("--metagraph", help="metagraph DSL file")
    p.add_argument("--metapath", help="node types, e.g. A,P,V,P,A")
    p.add_argument("--length", type=int, default=100, help="nodes per walk")
    p.add_argument("--walks-per-node", type=int, default=80)


def _add_train(p):
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--iterations", type=int, default=10_000_000, help="sampled pairs; DBLP-sized graphs want about 100000000")
    p.add_argument("--noise-exponent", type=float, default=0.75)
    p.add_argument("--mode", choices=[HOMOGENEOUS, HETEROGENEOUS], default=HOMOGENEOUS)
    p.add_argument("--deterministic", action="store_true",
                   help="single update stream, bit-reproducible (the default unless --threads > 1)")
    p.add_argument("--binary", action="store_true", help="write binary embeddings")
    p.add_argument("--context-out", help="also write the context vectors here")
    p.add_argument("--pairs-out", help="cache the pair table here")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="hinembed", description="Metagraph-guided embeddings for heterogeneous networks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="synthetic labelled bibliographic network")
    p.add_argument("--out", required=True, help="output file prefix")
    p.add_argument("--config", help="key=value generator settings")
    for name, kind in (("communities", int), ("authors", int), ("papers", int), ("venues", int),
                       ("min-authors", int), ("max-authors", int), ("venue-retention", float),
                       ("cross-prob", float), ("citations", float)):
        p.add_argument("--" + name, type=kind, default=None)
    p.add_argument("--remove-venues", type=float, default=0.0, help="fraction of papers losing their venue")
    _add_common(p)
    p.set_defaults(func=cmd_generate, seed=None)

    p = sub.add_parser("walk", help="generate a walk corpus")
    _add_graph(p)
    _add_walk(p)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("train", help="train embeddings from a corpus or pair table")
    _add_graph(p)
    p.add_argument("--corpus")
    p.add_argument("--pairs", help="pair table cache")
    _add_train(p)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="walk, count and train in one go")
    _add_graph(p)
    _add_walk(p)
    _add_train(p)
    p.add_argument("--corpus-out", help="also write the walk corpus")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="evaluate embeddings")
    p.add_argument("task", choices=["classify", "cluster", "search"])
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--train-ratio", type=float, default=0.05)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--k", help="clusters (cluster) or comma-separated cutoffs (search)")
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--format", choices=["text", "kv"], default="text")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_eval, repetitions=10)
    return parser


def _apply_env(parser, env):
    """Turn ``HINEMBED_*`` variables into parser defaults."""
    subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    for p in [parser] + [sp for a in subparsers for sp in a.choices.values()]:
        for action in p._actions:
            if not action.option_strings or action.dest in ("help", "version"):
                continue
            key = ENV_PREFIX + action.dest.upper()
            if key not in env:
                continue
            raw = env[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                value = action.type(raw) if action.type else raw
                if action.choices and value not in action.choices:
                    raise UsageError(f"{key}={raw!r}: choose from {', '.join(map(str, action.choices))}")
            p.set_defaults(**{action.dest: value})
            action.required = False


def _write_manifest(args, inputs, out, started):
    params = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
    manifest = {
        "subcommand": args.command,
        "parameters": params,
        "inputs": {str(p): _digest(p) for p in inputs if p and Path(p).exists()},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "duration_seconds": round(time.time() - started, 3),
    }
    text = json.dumps(manifest, indent=2, sort_keys=True, default=str)
    path = args.manifest or (str(out) + ".manifest.json" if out else None)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stderr.write(text + "\n")


def run(argv=None, env=None) -> int:
    env = os.environ if env is None else env
    parser = build_parser()
    started = time.time()
    try:
        _apply_env(parser, env)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _make_parents(args)
        inputs, out = args.func(args)
        _write_manifest(args, inputs, out, started)
        return 0
    except UsageError as exc:
        message = str(exc)
        if not message.startswith("hinembed"):
            message = "hinembed: error: " + message
        sys.stderr.write(message + "\n")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (HinEmbedError, OSError, ValueError) as exc:
        sys.stderr.write(f"hinembed: error [{_origin(exc)}] {type(exc).__name__}: {exc}\n")
        return 1


def _make_parents(args):
    for key in ("out", "corpus_out", "pairs_out", "context_out", "manifest"):
        path = getattr(args, key, None)
        if path:
            Path(path).parent.mkdir(parents=True, exist_ok=True)


def _origin(exc) -> str:
    """Package module in which ``exc`` was raised."""
    module = "cli"
    tb = exc.__traceback__
    while tb is not None:
        path = Path(tb.tb_frame.f_code.co_filename)
        if path.parent.name == "hinembed":
            module = path.stem
        tb = tb.tb_next
    return module


def main():
    sys.exit(run())
