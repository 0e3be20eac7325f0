"""Command-line interface: ``gcpls <subcommand> ...``.

Exit codes: 0 success, 2 input/validation error, 3 I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import synthetic
from .cmatrix import FormatError, atomic_write_bytes, dumps_gcmx, load_gcmx
from .ingest import ParseError, parse_sparse_file, write_sparse_file
from .pls import (FitConfig, ModelFormatError, SingularGramError, cpls_fit, dumps_model,
                  evaluate, extract_features, load_model, predict_matrix, predict_rows)
from .repair import CompressorConfig, compress

log = logging.getLogger("gcpls")

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
TASKS = {"clf": "classification", "reg": "regression"}


class UsageError(ValueError):
    pass


def _emit(text="", **pairs):
    if text:
        print(text)
    for k, v in pairs.items():
        print(f"{k}={v}")


def _positive(kind):
    def conv(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive(int), default=os.cpu_count() or 1,
                        help="worker threads (default: available cores); "
                        "products currently run single-threaded")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="gcpls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", parents=[common], help="grammar-compress a sparse file")
    c.add_argument("input")
    c.add_argument("--output", "-o", required=True)
    c.add_argument("--dim", type=_positive(int), help="column count (default: max index)")
    c.add_argument("--topk", type=_positive(int), default=1024)
    c.add_argument("--counter", choices=("exact", "lossy", "freq"), default="exact")
    c.add_argument("--ell", type=_positive(int), help="lossy interval length")
    c.add_argument("--capacity", "--v", type=_positive(int), help="freq table capacity")
    c.add_argument("--vacancy", type=float, default=30.0, help="freq vacancy rate in percent")

    t = sub.add_parser("train", parents=[common], help="fit a PLS model on a GCMX1 matrix")
    t.add_argument("matrix")
    t.add_argument("labels", help="sparse text file the matrix was built from")
    t.add_argument("--output", "-o", required=True)
    t.add_argument("--components", type=_positive(int), default=10)
    t.add_argument("--top-features", type=_nonneg_int, default=10)
    t.add_argument("--tolerance", type=_positive(float), default=1e-12)
    t.add_argument("--task", choices=tuple(TASKS), default="clf")

    pr = sub.add_parser("predict", parents=[common], help="score a sparse file")
    pr.add_argument("model")
    pr.add_argument("data")
    pr.add_argument("--output", "-o", required=True)
    pr.add_argument("--task", choices=tuple(TASKS), default="clf")

    e = sub.add_parser("extract", parents=[common], help="per-component top features")
    e.add_argument("model")
    e.add_argument("--top-features", type=_nonneg_int, default=10)
    e.add_argument("--output", "-o")

    s = sub.add_parser("stats", parents=[common], help="report on a GCMX1 matrix")
    s.add_argument("matrix")

    ev = sub.add_parser("eval", parents=[common], help="AUC/PCC of a predictions file")
    ev.add_argument("predictions")
    ev.add_argument("data", help="sparse text file holding the true labels")
    ev.add_argument("--task", choices=tuple(TASKS), default="clf")

    g = sub.add_parser("generate", parents=[common], help="write seeded synthetic data")
    g.add_argument("kind", choices=("clf", "reg", "templates"))
    g.add_argument("--output", "-o", required=True)
    g.add_argument("--rows", type=_positive(int), default=2000)
    g.add_argument("--dim", type=_positive(int), default=1000)
    g.add_argument("--test-output", help="also write a held-out 20%% split here")
    return p


# -- subcommands ------------------------------------------------------------------

def cmd_compress(args) -> int:
    config = CompressorConfig(k=args.topk, counter=args.counter, interval=args.ell,
                              capacity=args.capacity, vacancy=args.vacancy)
    matrix = parse_sparse_file(args.input, args.dim)
    start = time.perf_counter()
    cm = compress(matrix, config)
    elapsed = time.perf_counter() - start
    blob = dumps_gcmx(cm)
    atomic_write_bytes(args.output, blob)
    st = cm.stats()
    _emit(st.report(), input_bytes=os.path.getsize(args.input), output_bytes=len(blob),
          seconds=f"{elapsed:.3f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cm = load_gcmx(args.matrix)
    task = TASKS[args.task]
    data = parse_sparse_file(args.labels, cm.d, classification=task == "classification")
    if data.n != cm.n:
        raise UsageError(f"{data.n} labels in {args.labels} for {cm.n} matrix rows")
    if not all(a == b for a, b in zip(data.rows, cm.iter_rows())):
        raise UsageError(f"{args.labels} does not hold the rows of {args.matrix}")
    config = FitConfig(m=args.components, u=args.top_features, norm_tolerance=args.tolerance)
    start = time.perf_counter()
    model = cpls_fit(cm, data.labels, config)
    elapsed = time.perf_counter() - start
    if model.truncated:
        print(f"warning: stopped at {model.m} of {args.components} components "
              "(degenerate latent vector)", file=sys.stderr)
    scores = predict_matrix(model, cm)
    metric = evaluate(scores, data.labels.values, task)
    atomic_write_bytes(args.output, dumps_model(model))
    _emit(f"trained {model.m} components on {cm.n} x {cm.d} in {elapsed:.3f}s; "
          f"in-sample {metric.name.upper()} {metric.value:.6f}",
          components=model.m, truncated=int(model.truncated),
          **{metric.name: f"{metric.value:.6f}"}, seconds=f"{elapsed:.3f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    task = TASKS[args.task]
    data = parse_sparse_file(args.data, classification=task == "classification")
    if data.dim > model.d:
        raise UsageError(f"feature index {data.dim} exceeds model dimension {model.d}")
    scores = predict_rows(model, data.rows)
    if task == "classification":
        lines = [f"{float(s)!r} {1 if s > 0 else -1}" for s in scores]
    else:
        lines = [repr(float(s)) for s in scores]
    atomic_write_bytes(args.output, ("\n".join(lines) + "\n").encode() if lines else b"")
    pairs = {"predictions": len(lines)}
    if data.n >= 2:
        try:
            metric = evaluate(scores, data.labels.values, task)
            pairs[metric.name] = f"{metric.value:.6f}"
        except ValueError as exc:
            log.info("no metric: %s", exc)
    _emit(f"wrote {len(lines)} predictions to {args.output}", **pairs)
    return EXIT_OK


def format_rankings(rankings) -> str:
    out = ["component\trank\tfeature\tweight"]
    for c, ranking in enumerate(rankings, start=1):
        for r, (j, w) in enumerate(ranking, start=1):
            out.append(f"{c}\t{r}\t{j}\t{w:.10g}")
    return "\n".join(out)


def cmd_extract(args) -> int:
    model = load_model(args.model)
    rankings = extract_features(model, args.top_features)
    text = format_rankings(rankings) + "\n"
    if args.output:
        atomic_write_bytes(args.output, text.encode())
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_stats(args) -> int:
    cm = load_gcmx(args.matrix)
    _emit(cm.stats().report(), file_bytes=os.path.getsize(args.matrix))
    return EXIT_OK


def _read_scores(path):
    scores = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            try:
                scores.append(float(fields[0]))
            except ValueError:
                raise ParseError(f"bad score {fields[0]!r}", lineno, path) from None
    return np.asarray(scores)


def cmd_eval(args) -> int:
    task = TASKS[args.task]
    scores = _read_scores(args.predictions)
    data = parse_sparse_file(args.data, classification=task == "classification")
    if len(scores) != data.n:
        raise UsageError(f"{len(scores)} predictions for {data.n} labeled rows")
    metric = evaluate(scores, data.labels.values, task)
    if not metric.defined:
        print("warning: constant predictions, PCC undefined (reported as 0)", file=sys.stderr)
    _emit(f"{metric.name.upper()} {metric.value:.6f}", **{metric.name: f"{metric.value:.6f}"},
          defined=int(metric.defined))
    return EXIT_OK


def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "clf":
        matrix, _ = synthetic.planted_classification(rng, n=args.rows, d=args.dim)
    elif args.kind == "reg":
        matrix, _ = synthetic.planted_regression(rng, n=args.rows, d=args.dim)
    else:
        matrix = synthetic.template_corpus(rng, n=args.rows, d=args.dim)
        matrix.labels = None
    outputs = [(args.output, matrix)]
    if args.test_output:
        train, test = synthetic.split(matrix, rng)
        outputs = [(args.output, train), (args.test_output, test)]
    for path, part in outputs:
        tmp = f"{path}.tmp{os.getpid()}"
        try:
            write_sparse_file(tmp, part)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        _emit(path=path, rows=part.n, dim=part.dim)
    return EXIT_OK


COMMANDS = {"compress": cmd_compress, "train": cmd_train, "predict": cmd_predict,
            "extract": cmd_extract, "stats": cmd_stats, "eval": cmd_eval,
            "generate": cmd_generate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except SingularGramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, FormatError, ModelFormatError, UsageError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
