"""Command-line interface.

Exit codes: 0 success, 2 bad arguments, 3 unusable input data, 4
numerical failure. Reports are UTF-8 JSON with a fixed key order and a
``schema_version`` field; the schema ships as ``adaptrix/report.schema.json``.
Wall-clock timings are only included with ``--timing`` so that default
outputs are byte-for-byte reproducible.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
import time
import warnings

import numpy as np

from adaptrix import __version__
from adaptrix.dataset import SIGNAL_SCALE, generate_manifolds, load_csv, load_iris, save_matrix
from adaptrix.errors import (
    AdaptrixError,
    ArgumentError,
    DataError,
    NumericalError,
    StageError,
)
from adaptrix.evaluate import cluster_embedding, evaluate_splits, holdout_splits, stratified_folds
from adaptrix.idestim import AbideConfig, abide
from adaptrix.neighbors import build_neighbor_table
from adaptrix.oos import fit_lle_fixed, fit_lle_star, project_batch
from adaptrix.pipeline import METHODS, kstar_summary, resolve_fixed_k, run_reduction
from adaptrix.umap import UmapConfig

SCHEMA_VERSION = "1.0"
THREADS_ENV = "ADAPTRIX_THREADS"
METRICS = ("ari", "homogeneity", "completeness", "v_measure")

log = logging.getLogger("adaptrix")


# ---------------------------------------------------------------- argument types


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _non_negative_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _fixed_k(text):
    if text == "median":
        return text
    return _positive_int(text)


def _grid(text):
    """``neighbors=START:STOP:STEP`` with an inclusive stop."""
    name, _, rng = text.partition("=")
    if name != "neighbors" or not rng:
        raise argparse.ArgumentTypeError("grid must look like neighbors=START:STOP:STEP")
    parts = rng.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("grid range must be START:STOP or START:STOP:STEP")
    try:
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError:
        raise argparse.ArgumentTypeError("grid bounds must be integers") from None
    if start < 1 or stop < start or step < 1:
        raise argparse.ArgumentTypeError("grid needs 1 <= START <= STOP and STEP >= 1")
    return list(range(start, stop + 1, step))


def _default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return _positive_int(env)
        except argparse.ArgumentTypeError:
            log.warning("ignoring invalid %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


# ---------------------------------------------------------------- parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument(
        "--threads", type=_positive_int, default=None,
        help=f"worker threads (default ${THREADS_ENV} or the number of cores)",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock seconds in reports")

    data = argparse.ArgumentParser(add_help=False)
    src = data.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", "-i", help="CSV file, one observation per row")
    src.add_argument("--iris", action="store_true", help="use the bundled Iris data")
    data.add_argument("--labels", action="store_true",
                      help="last column holds integer class labels")
    data.add_argument("--header", action="store_true", help="skip the first line")
    data.add_argument("--delimiter", default=",")

    abide_opts = argparse.ArgumentParser(add_help=False)
    abide_opts.add_argument("--alpha", type=float, default=0.05, help="test size (default 0.05)")
    abide_opts.add_argument("--tau", type=float, default=0.5, help="inner/outer radius ratio")
    abide_opts.add_argument("--k-max", type=_positive_int, default=None,
                       help="largest neighbourhood tried (default min(n-2, 1000))")

    embed_opts = argparse.ArgumentParser(add_help=False)
    embed_opts.add_argument("--method", choices=METHODS, default="lle")
    embed_opts.add_argument("--dim", type=_positive_int, default=None,
                       help="target dimension (default: estimated d*)")
    embed_opts.add_argument("--fixed-k", type=_fixed_k, default=None, metavar="INT|median",
                       help="use one neighbourhood size for every point")
    embed_opts.add_argument("--epochs", type=_non_negative_int, default=500, help="UMAP epochs")
    embed_opts.add_argument("--min-dist", type=float, default=0.1, help="UMAP min_dist")

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", "-o", default=None, help="report path (default stdout)")

    parser = argparse.ArgumentParser(
        prog="adaptrix",
        description="Adaptive neighbourhoods for dimensionality reduction.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common, data, abide_opts, out],
                       help="estimate intrinsic dimension and per-point k*")
    p.add_argument("--emit-kstar", action="store_true", help="include the full k* vector")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("embed", parents=[common, data, abide_opts, embed_opts],
                       help="embed the data and write a CSV plus a JSON sidecar")
    p.add_argument("--out", "-o", required=True, help="embedding CSV path")
    p.add_argument("--sidecar", default=None, help="sidecar path (default OUT.json)")
    p.add_argument("--allow-disconnected", action="store_true",
                   help="embed LLE even if the neighbourhood graph is disconnected")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", parents=[common, data, abide_opts, embed_opts, out],
                       help="cluster an embedding with K-means and score it against labels")
    p.add_argument("--grid", type=_grid, default=None, metavar="neighbors=START:STOP:STEP",
                   help="sweep fixed neighbourhood sizes instead")
    p.add_argument("--grid-out", default=None, help="CSV path for the grid metrics")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("supervised", parents=[common, data, abide_opts, out],
                       help="cross-validate LLE + out-of-sample projection + logistic regression")
    p.add_argument("--folds", type=_positive_int, default=3, help="number of CV folds")
    p.add_argument("--holdout", type=float, default=None,
                   help="use repeated holdout with this test fraction instead of CV")
    p.add_argument("--repeats", type=_positive_int, default=3, help="holdout repetitions")
    p.add_argument("--dim", type=_positive_int, default=None)
    p.add_argument("--fixed-k", type=_fixed_k, default=None, metavar="INT|median")
    p.set_defaults(func=cmd_supervised)

    p = sub.add_parser("generate", parents=[common],
                       help="write the synthetic torus/spiral/sphere dataset")
    p.add_argument("--per-manifold", type=int, default=1700)
    p.add_argument("--noise-dims", type=int, default=17)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--signal-scale", type=float, default=SIGNAL_SCALE)
    p.add_argument("--out", "-o", required=True, help="CSV path (features then label)")
    p.set_defaults(func=cmd_generate)
    return parser


# ---------------------------------------------------------------- helpers


def _atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".adaptrix-")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _dump(report):
    return json.dumps(report, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _emit(report, path):
    text = _dump(report)
    if path is None:
        sys.stdout.write(text)
    else:
        _atomic_write(path, text)


def _matrix_csv(m, labels=None):
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.csv")
        save_matrix(path, m, labels)
        with open(path, encoding="utf-8") as fh:
            return fh.read()


def _load(args):
    if args.iris:
        cloud = load_iris()
        return cloud if args.labels else type(cloud)(cloud.coords)
    return load_csv(args.input, has_labels=args.labels, delimiter=args.delimiter,
                    skip_header=args.header)


def _abide_config(args, n):
    config = AbideConfig(alpha=args.alpha, tau=args.tau, k_max=args.k_max)
    config.resolved_k_max(n)
    return config


def _header(args):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "seed": args.seed,
        "threads": args.threads,
    }


def _source(args, cloud):
    return {
        "input": "iris" if args.iris else os.path.basename(args.input),
        "n": cloud.n,
        "dim": cloud.dim,
    }


def _abide_block(result, emit_kstar=False):
    block = {
        "d_hat": float(result.d_hat),
        "d_star": int(result.d_star),
        "converged": bool(result.converged),
        "iterations": len(result.trace),
        "trace": [float(d) for d in result.trace],
        "k_star_summary": kstar_summary(result),
    }
    if emit_kstar:
        block["k_star"] = [int(k) for k in result.k_star]
    return block


def _k_policy(fixed_k, k_value):
    if fixed_k is None:
        return {"kind": "adaptive"}
    return {"kind": "fixed", "requested": fixed_k, "k": int(k_value)}


def _umap_config(args):
    return UmapConfig(n_epochs=args.epochs, min_dist=args.min_dist, seed=args.seed)


# ---------------------------------------------------------------- commands


def cmd_estimate(args):
    cloud = _load(args)
    config = _abide_config(args, cloud.n)
    t0 = time.perf_counter()
    try:
        table = build_neighbor_table(cloud, config.resolved_k_max(cloud.n) + 1,
                                     workers=args.threads)
        result = abide(cloud, config, table=table)
    except AdaptrixError as exc:
        raise StageError("estimation", exc) from exc
    elapsed = time.perf_counter() - t0
    report = _header(args)
    report["source"] = _source(args, cloud)
    report["config"] = {"alpha": config.alpha, "tau": config.tau,
                        "k_max": config.resolved_k_max(cloud.n)}
    report["result"] = _abide_block(result, args.emit_kstar)
    if args.timing:
        report["timing"] = {"estimate_seconds": elapsed}
    _emit(report, args.out)
    return 0


def cmd_embed(args):
    cloud = _load(args)
    config = _abide_config(args, cloud.n)
    red = run_reduction(
        cloud, args.method, d_override=args.dim, abide_config=config,
        umap_config=_umap_config(args), fixed_k=args.fixed_k, workers=args.threads,
        on_disconnected="warn" if args.allow_disconnected else "raise",
    )
    sidecar = _header(args)
    sidecar["source"] = _source(args, cloud)
    sidecar["method"] = args.method
    sidecar["d_used"] = red.d_proj
    sidecar["k_policy"] = _k_policy(args.fixed_k, red.k_used[0])
    sidecar["estimate"] = _abide_block(red.abide)
    sidecar["output"] = os.path.basename(args.out)
    if args.timing:
        sidecar["timing"] = {"estimate_seconds": red.estimate_seconds,
                             "embed_seconds": red.embed_seconds}
    _atomic_write(args.out, _matrix_csv(red.embedding.coords))
    _atomic_write(args.sidecar or args.out + ".json", _dump(sidecar))
    return 0


def _require_labels(cloud):
    if cloud.labels is None:
        raise ArgumentError("this command needs class labels; pass --labels")


def cmd_evaluate(args):
    cloud = _load(args)
    _require_labels(cloud)
    if args.grid is not None and args.fixed_k is not None:
        raise ArgumentError("--grid and --fixed-k are mutually exclusive")
    if args.grid_out is not None and args.grid is None:
        raise ArgumentError("--grid-out needs --grid")
    config = _abide_config(args, cloud.n)
    umap_config = _umap_config(args)
    report = _header(args)
    report["source"] = _source(args, cloud)
    report["method"] = args.method

    t0 = time.perf_counter()
    red = run_reduction(cloud, args.method, args.dim, config, umap_config, args.fixed_k,
                        workers=args.threads, on_disconnected="warn")
    scores = cluster_embedding(red.embedding.coords, cloud.labels, args.seed)
    report["d_used"] = red.d_proj
    report["k_policy"] = _k_policy(args.fixed_k, red.k_used[0])
    report["estimate"] = _abide_block(red.abide)
    report["n_clusters"] = int(len(np.unique(cloud.labels)))
    report["metrics"] = scores.as_dict()

    if args.grid is not None:
        rows = []
        for k in args.grid:
            log.info("grid: k=%d", k)
            try:
                r = run_reduction(cloud, args.method, red.d_proj, config, umap_config, k,
                                  workers=args.threads, on_disconnected="warn")
                m = cluster_embedding(r.embedding.coords, cloud.labels, args.seed).as_dict()
                rows.append({"k": k, **m, "error": None})
            except (StageError, NumericalError) as exc:
                log.warning("grid: k=%d failed: %s", k, exc)
                rows.append({"k": k, **{name: None for name in METRICS}, "error": str(exc)})
        report["grid"] = rows
        if args.grid_out is not None:
            lines = ["k," + ",".join(METRICS)]
            for row in rows:
                cells = ["" if row[m] is None else repr(float(row[m])) for m in METRICS]
                lines.append(f"{row['k']}," + ",".join(cells))
            _atomic_write(args.grid_out, "\n".join(lines) + "\n")
    if args.timing:
        report["timing"] = {"estimate_seconds": red.estimate_seconds,
                            "embed_seconds": red.embed_seconds,
                            "total_seconds": time.perf_counter() - t0}
    _emit(report, args.out)
    return 0


def _supervised_pipeline(args, config):
    def pipeline(train_cloud, test_coords, seed):
        if args.fixed_k is None:
            model = fit_lle_star(train_cloud, config, args.dim, on_disconnected="warn",
                                 workers=args.threads)
        else:
            d, k = args.dim, args.fixed_k
            if d is None or k == "median":
                result = abide(train_cloud, config)
                d = result.d_star if d is None else d
                k = resolve_fixed_k(k, result)
            model = fit_lle_fixed(train_cloud, k, d, on_disconnected="warn")
        return model.train_embedding.coords, project_batch(model, test_coords)

    return pipeline


def cmd_supervised(args):
    cloud = _load(args)
    _require_labels(cloud)
    config = _abide_config(args, cloud.n)
    if args.holdout is not None:
        splits = holdout_splits(cloud.labels, args.holdout, args.repeats, args.seed)
        protocol = {"kind": "holdout", "test_fraction": args.holdout, "repeats": args.repeats}
    else:
        if args.folds < 2:
            raise ArgumentError("--folds must be at least 2")
        folds = stratified_folds(cloud.labels, args.folds, args.seed)
        everything = np.arange(cloud.n)
        splits = [(np.setdiff1d(everything, f), f) for f in folds]
        protocol = {"kind": "kfold", "folds": args.folds}
    t0 = time.perf_counter()
    try:
        scores = evaluate_splits(cloud, splits, _supervised_pipeline(args, config), args.seed)
    except (NumericalError, DataError) as exc:
        raise StageError("embedding", exc) from exc
    report = _header(args)
    report["source"] = _source(args, cloud)
    report["method"] = "lle"
    if args.fixed_k is None:
        report["k_policy"] = {"kind": "adaptive"}
    else:
        report["k_policy"] = {"kind": "fixed", "requested": args.fixed_k}
    report["protocol"] = protocol
    report["folds"] = scores["folds"]
    report["mean_accuracy"] = scores["mean_accuracy"]
    report["mean_f1_macro"] = scores["mean_f1_macro"]
    if args.timing:
        report["timing"] = {"total_seconds": time.perf_counter() - t0}
    _emit(report, args.out)
    return 0


def cmd_generate(args):
    cloud = generate_manifolds(args.per_manifold, args.noise_sigma, args.noise_dims, args.seed,
                               signal_scale=args.signal_scale)
    _atomic_write(args.out, _matrix_csv(cloud.coords, cloud.labels))
    return 0


# ---------------------------------------------------------------- entry point


def exit_code(exc):
    """Map an exception onto the documented exit codes."""
    while isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, ArgumentError):
        return 2
    if isinstance(exc, NumericalError):
        return 4
    return 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    logging.captureWarnings(True)
    if args.threads is None:
        args.threads = _default_threads()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except AdaptrixError as exc:
        print(f"adaptrix {args.command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
