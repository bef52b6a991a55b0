"""Command-line front end.

Subcommands bind the library into reproducible runs that emit
machine-readable CSV/JSON.  Every output file gets a sidecar
``<out>.manifest.json`` recording the command, all resolved flags, the
toolkit version and wall-clock timestamps; identical flags and inputs
reproduce identical outputs modulo the timing fields.

Exit codes: 0 success, 2 validation errors, 3 I/O errors, 4 numeric
failures.  ``MCK_SEED`` supplies a default seed when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, dataio, exact_kernel, fastfood, linear_model, wht
from .fastfood import RBF, FeatureMapSpec, RBFMatern

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

CAPTION_SEED = 1398239763  # reproduction default


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _default_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("MCK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"MCK_SEED={env!r} is not an integer", EXIT_VALIDATION)
    return CAPTION_SEED


def _parse_sizes(text: str) -> list[int]:
    """Sizes as a comma list or a doubling range 'lo..hi'."""
    sizes: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo_s, _, hi_s = part.partition("..")
            lo, hi = int(lo_s), int(hi_s)
            if not (wht.is_power_of_two(lo) and wht.is_power_of_two(hi)) or hi < lo:
                raise CliError(f"range {part!r}: bounds must be powers of two",
                               EXIT_VALIDATION)
            s = lo
            while s <= hi:
                sizes.append(s)
                s <<= 1
        elif part:
            sizes.append(int(part))
    for s in sizes:
        if not wht.is_power_of_two(s):
            raise CliError(f"size {s} is not a power of two", EXIT_VALIDATION)
    if not sizes:
        raise CliError("no sizes given", EXIT_VALIDATION)
    return sizes


def _write_manifest(out_path: str, command: str, flags: dict,
                    started: float, finished: float) -> None:
    flags = {k: v for k, v in flags.items() if k != "func"}
    manifest = {
        "command": command,
        "flags": flags,
        "version": __version__,
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(finished)),
        "elapsed_s": round(finished - started, 3),
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _make_spec(args, input_dim: int) -> FeatureMapSpec | None:
    if args.kernel == "none":
        return None
    if args.kernel == "rbf":
        kernel = RBF(args.sigma)
    else:
        kernel = RBFMatern(args.sigma, args.t)
    return FeatureMapSpec(input_dim=input_dim, expansions=args.expansions,
                          kernel=kernel, seed=_default_seed(args.seed))


def _load_pair(images, labels, what: str) -> dataio.Dataset:
    try:
        return dataio.load_idx(images, labels)
    except FileNotFoundError as exc:
        raise CliError(f"{what}: {exc}", EXIT_IO)
    except dataio.IdxError as exc:
        raise CliError(f"{what}: {exc}", EXIT_IO)


# -- subcommands -------------------------------------------------------------

def cmd_bench_wht(args) -> int:
    started = time.time()
    sizes = _parse_sizes(args.sizes)
    records = wht.bench_wht(sizes, repetitions=args.reps,
                            naive_cutoff=args.naive_cutoff)
    lines = ["size,impl,median_ms,reps"]
    for r in records:
        lines.append(f"{r.size},fast,{r.fast_ms:.6f},{r.reps}")
        if r.naive_ms is not None:
            lines.append(f"{r.size},naive,{r.naive_ms:.6f},{r.reps}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        _write_manifest(args.out, "bench-wht", vars(args), started, time.time())
    else:
        sys.stdout.write(text)
    return 0


def cmd_kernel_check(args) -> int:
    started = time.time()
    seed = _default_seed(args.seed)
    n = fastfood.next_pow2(args.dim)
    expansions = max(1, -(-args.features // n))  # ceil
    spec = FeatureMapSpec(args.dim, expansions, RBF(args.sigma), seed)
    rng = np.random.default_rng(seed)
    pairs = [(rng.standard_normal(args.dim) * 0.5,
              rng.standard_normal(args.dim) * 0.5)
             for _ in range(args.pairs)]
    stats = exact_kernel.kernel_check(spec, pairs)
    payload = stats.to_dict()
    payload["seed"] = seed
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        _write_manifest(args.out, "kernel-check", vars(args), started, time.time())
    else:
        sys.stdout.write(text)
    return 0


def _resolved_lr(args) -> float:
    if args.lr is not None:
        return args.lr
    return 0.01 if args.kernel == "none" else 0.001


def cmd_train(args) -> int:
    started = time.time()
    train_ds = _load_pair(args.train_images, args.train_labels, "train data")
    test_ds = _load_pair(args.test_images, args.test_labels, "test data")
    seed = _default_seed(args.seed)
    if args.subset_train:
        train_ds = dataio.subset(train_ds, args.subset_train, seed)
    if args.subset_test:
        test_ds = dataio.subset(test_ds, args.subset_test, seed + 1)
    spec = _make_spec(args, train_ds.dim)
    config = linear_model.TrainConfig(
        learning_rate=_resolved_lr(args), batch_size=args.batch,
        epochs=args.epochs, l2_lambda=args.l2, shuffle_seed=seed)
    try:
        model, metrics = linear_model.train(spec, train_ds, test_ds, config)
    except np.linalg.LinAlgError as exc:
        raise CliError(f"numeric failure during training: {exc}", EXIT_NUMERIC)
    if args.metrics_out:
        metrics.save_csv(args.metrics_out)
        _write_manifest(args.metrics_out, "train", vars(args), started, time.time())
    else:
        sys.stdout.write(metrics.to_csv())
    if args.model_out:
        linear_model.save_model(args.model_out, model, spec)
        _write_manifest(args.model_out, "train", vars(args), started, time.time())
    if metrics.records:
        last = metrics.records[-1]
        print(f"final epoch {last.epoch}: train_loss {last.train_loss:.6f} "
              f"test_acc {last.test_acc:.4f}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    started = time.time()
    try:
        model, spec = linear_model.load_model(args.model)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO)
    test_ds = _load_pair(args.test_images, args.test_labels, "test data")
    if args.subset_test:
        test_ds = dataio.subset(test_ds, args.subset_test,
                                _default_seed(args.seed) + 1)
    acc, mean_loss = linear_model.evaluate(model, spec, test_ds)
    payload = {"accuracy": acc, "mean_loss": mean_loss,
               "samples": len(test_ds)}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        _write_manifest(args.out, "eval", vars(args), started, time.time())
    else:
        sys.stdout.write(text)
    return 0


def cmd_features(args) -> int:
    started = time.time()
    ds = _load_pair(args.images, args.labels, "input data")
    seed = _default_seed(args.seed)
    if args.subset:
        ds = dataio.subset(ds, args.subset, seed)
    spec = _make_spec(args, ds.dim)
    if spec is None:
        raise CliError("features command needs --kernel rbf or matern",
                       EXIT_VALIDATION)
    blocks = fastfood.build_blocks(spec)
    x = ds.features
    workers = max(1, args.workers)
    chunks = np.array_split(np.arange(len(x)), min(workers * 4, len(x)))
    def _one(idx):
        return fastfood.feature_map_batch(spec, blocks, x[idx])
    if workers == 1:
        parts = [_one(c) for c in chunks if len(c)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_one, [c for c in chunks if len(c)]))
    features = np.vstack(parts)
    dataio.write_matrix(args.out, features)
    _write_manifest(args.out, "features", vars(args), started, time.time())
    print(f"wrote {features.shape[0]}x{features.shape[1]} feature matrix "
          f"to {args.out}", file=sys.stderr)
    return 0


# -- parser ------------------------------------------------------------------

def _add_spec_flags(p: argparse.ArgumentParser, with_none: bool = True) -> None:
    choices = ["rbf", "matern"] + (["none"] if with_none else [])
    p.add_argument("--kernel", choices=choices, default="rbf")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="kernel bandwidth (default 1.0)")
    p.add_argument("--t", type=int, default=40,
                   help="unit-ball sample count for the matern kernel (default 40)")
    p.add_argument("--expansions", type=int, default=1,
                   help="number of stacked expansion blocks E (default 1)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"map seed (default: MCK_SEED or {CAPTION_SEED})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mckernel",
        description="Deterministic random-feature kernel expansions toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench-wht", help="time fast vs naive transforms")
    b.add_argument("--sizes", default="1024..1048576",
                   help="comma list and/or doubling ranges, e.g. 1024..1048576")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--naive-cutoff", type=int, default=1 << 16,
                   help="skip the naive path above this size (default 65536)")
    b.add_argument("--out", default=None, help="CSV output path (default stdout)")
    b.set_defaults(func=cmd_bench_wht)

    k = sub.add_parser("kernel-check",
                       help="feature inner products vs the exact RBF kernel")
    k.add_argument("--dim", type=int, default=64)
    k.add_argument("--features", type=int, default=512,
                   help="target stacked dimension D = n*E (default 512)")
    k.add_argument("--pairs", type=int, default=100)
    k.add_argument("--sigma", type=float, default=1.0)
    k.add_argument("--seed", type=int, default=None)
    k.add_argument("--out", default=None, help="JSON output path (default stdout)")
    k.set_defaults(func=cmd_kernel_check)

    t = sub.add_parser("train", help="train the softmax head on IDX data")
    t.add_argument("--train-images", required=True)
    t.add_argument("--train-labels", required=True)
    t.add_argument("--test-images", required=True)
    t.add_argument("--test-labels", required=True)
    _add_spec_flags(t)
    t.add_argument("--lr", type=float, default=None,
                   help="learning rate (default 0.001; 0.01 for --kernel none)")
    t.add_argument("--batch", type=int, default=10)
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--l2", type=float, default=0.0)
    t.add_argument("--subset-train", type=int, default=None)
    t.add_argument("--subset-test", type=int, default=None)
    t.add_argument("--metrics-out", default=None,
                   help="per-epoch CSV path (default stdout)")
    t.add_argument("--model-out", default=None, help="checkpoint path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on IDX data")
    e.add_argument("--model", required=True)
    e.add_argument("--test-images", required=True)
    e.add_argument("--test-labels", required=True)
    e.add_argument("--subset-test", type=int, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", default=None, help="JSON output path (default stdout)")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("features", help="dump the feature matrix for a dataset")
    f.add_argument("--images", required=True)
    f.add_argument("--labels", required=True)
    _add_spec_flags(f, with_none=False)
    f.add_argument("--subset", type=int, default=None)
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_features)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mckernel: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"mckernel: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"mckernel: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
