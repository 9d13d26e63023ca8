"""Command-line entry point: ``modelaug <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error (unreadable or
malformed input, dimension mismatch, invalid configuration), 4 numeric
error (a factorization failed).
"""

import argparse
import contextlib
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .coders import FUSION_NORMS, DenseCoder, fuse, omp_encode
from .dictionary import build_dictionary, dictionary_to_text, read_dictionary, read_features
from .errors import InputError
from .pnm import read_pnm
from .predictor import (ClassScores, EvalReport, SplitSpec, chunk_splits, evaluate_draws,
                        evaluate_pipeline, pool_by_class, predict, split_manifest)
from .training import Dataset, StagedTransferPlan, ToyBackbone, paper_default_plan, run_plan, trace_to_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4



@dataclass(frozen=True)
class RunConfig:
    """Defaults shared by the subcommands."""

    k: int = 50
    lam: float = 2.0
    fusion_norm: str = "l2"
    weight: float = 1.0
    test_fraction: float = 0.1
    draws: int = 5
    seed: int = 0


DEFAULTS = RunConfig()


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except (InputError, OSError, IndexError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def write_atomic(path, data):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _coder_args(p):
    p.add_argument("--k", type=int, default=DEFAULTS.k, help="OMP sparsity threshold (default: 50)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULTS.lam,
                   help="ridge weight of the dense code (default: 2)")
    p.add_argument("--fusion-norm", choices=FUSION_NORMS, default=DEFAULTS.fusion_norm)


def _split_args(p, total_required):
    if total_required:
        p.add_argument("--total", type=int, required=True)
    p.add_argument("--test-fraction", type=float, default=DEFAULTS.test_fraction)
    p.add_argument("--draws", type=int, default=DEFAULTS.draws)
    p.add_argument("--seed", type=int, default=DEFAULTS.seed)


def cmd_build_dict(args):
    with stage("reading features"):
        samples, classes = read_features(args.features)
    with stage("building dictionary"):
        d = build_dictionary(samples, classes, normalize=not args.no_normalize)
    with stage("writing dictionary"):
        write_atomic(args.out, dictionary_to_text(d))


def _check_dims(d, samples):
    bad = next((i for i, s in enumerate(samples) if s.features.shape[0] != d.dim), None)
    if bad is not None:
        raise StageError("reading inputs", InputError(
            f"sample {bad} has {samples[bad].features.shape[0]} features, dictionary rows are {d.dim}"))


def _encode_all(d, samples, args):
    _check_dims(d, samples)
    with stage("encoding"):
        k = min(args.k, d.n_columns)
        dense = DenseCoder(d, args.lam)
        return [fuse(omp_encode(d, s.features, k), dense(s.features), args.fusion_norm)
                for s in samples]


def cmd_encode(args):
    with stage("reading inputs"):
        d = read_dictionary(args.dict)
        samples, _ = read_features(args.features)
    codes = _encode_all(d, samples, args)
    lines = [f"#codes n={d.n_columns} classes={','.join(map(str, d.classes))}"]
    lines += [",".join([str(s.label)] + [repr(float(v)) for v in c.coefficients])
              for s, c in zip(samples, codes)]
    with stage("writing codes"):
        write_atomic(args.out, "\n".join(lines) + "\n")


def cmd_predict(args):
    with stage("reading inputs"):
        d = read_dictionary(args.dict)
        samples, classes = read_features(args.test)
        if tuple(sorted(classes)) != d.classes:
            raise StageError("reading inputs", InputError(f"test classes {classes} != dictionary classes {d.classes}"))
        if any(s.softmax is None for s in samples):
            raise StageError("reading inputs", InputError("test file carries no softmax scores"))
    codes = _encode_all(d, samples, args)
    lines = ["index,label,predicted," + ",".join(f"score_{c}" for c in d.classes)]
    with stage("predicting"):
        for i, (s, code) in enumerate(zip(samples, codes)):
            pooled = pool_by_class(code, d)
            soft = ClassScores(d.classes, s.softmax)
            pred = predict(soft, pooled, args.weight)
            aug = soft.scores + args.weight * pooled.scores
            lines.append(f"{i},{s.label},{pred}," + ",".join(repr(float(v)) for v in aug))
    with stage("writing predictions"):
        write_atomic(args.out, "\n".join(lines) + "\n")


def cmd_evaluate(args):
    kwargs = dict(k=args.k, lam=args.lam, fusion_norm=args.fusion_norm, weight=args.weight,
                  positive=args.positive)
    if args.data:
        with stage("reading data"):
            samples, classes = read_features(args.data)
        with stage("evaluating"):
            spec = SplitSpec(len(samples), args.test_fraction, args.draws, args.seed)
            report = evaluate_draws(samples, spec, classes=classes, **kwargs)
    else:
        if not (args.train and args.test):
            raise StageError("parsing arguments", InputError("give --data, or both --train and --test"))
        with stage("reading data"):
            train, classes = read_features(args.train)
            test, _ = read_features(args.test)
        with stage("evaluating"):
            report = EvalReport((evaluate_pipeline(train, test, classes=classes, **kwargs),))
    with stage("writing report"):
        write_atomic(f"{args.out_prefix}.txt", report.to_text())
        write_atomic(f"{args.out_prefix}.csv", report.to_csv())
    print(report.to_text(), end="")


def cmd_split(args):
    spec = SplitSpec(args.total, args.test_fraction, args.draws, args.seed)
    with stage("computing splits"):
        splits = chunk_splits(spec)
    with stage("writing manifest"):
        write_atomic(args.out, split_manifest(spec, splits))


def cmd_plan(args):
    with stage("writing plan"):
        write_atomic(args.out, paper_default_plan().to_json())


def _load_domain(root, n_classes=None):
    """Images under ``root/<integer label>/*.pgm``."""
    images, labels = [], []
    dirs = sorted((p for p in Path(root).iterdir() if p.is_dir()), key=lambda p: int(p.name))
    for sub in dirs:
        for f in sorted(sub.glob("*.p[gp]m")):
            img = read_pnm(f)
            images.append(img.mean(axis=2, keepdims=True))
            labels.append(int(sub.name))
    if not images:
        raise InputError(f"no images under {root}")
    if len({im.shape for im in images}) != 1:
        raise InputError(f"images under {root} differ in size")
    return Dataset(np.stack(images), labels, n_classes or max(labels) + 1)


def cmd_train_toy(args):
    with stage("reading plan"):
        plan = StagedTransferPlan.from_json(Path(args.plan).read_text(encoding="utf-8"))
    with stage("reading data"):
        root = Path(args.data_dir)
        inter = _load_domain(root / "intermediate") if (root / "intermediate").is_dir() else None
        target = _load_domain(root / "target") if (root / "target").is_dir() else None
        first = inter if inter is not None else target
        if first is None:
            raise InputError(f"{root} has neither intermediate/ nor target/")
        h, w = first.images.shape[1:3]
        if h != w:
            raise InputError(f"images must be square, got {h}x{w}")
    with stage("training"):
        model = ToyBackbone(h, first.n_classes, hidden=args.hidden, norm=args.norm, seed=args.seed)
        model, trace = run_plan(model, plan, inter, target, seed=args.seed)
    with stage("writing outputs"):
        write_atomic(f"{args.out_prefix}.checkpoint.json", model.to_json())
        write_atomic(f"{args.out_prefix}.trace.csv", trace_to_csv(trace))


def build_parser():
    parser = argparse.ArgumentParser(prog="modelaug", description="Sparse and dense dictionary codes added to softmax scores.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dict", help="arrange training features into a dictionary")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-normalize", action="store_true", help="keep raw column norms")
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("encode", help="fused sparse+dense codes for each sample")
    p.add_argument("--dict", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _coder_args(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("predict", help="softmax scores augmented with pooled codes")
    p.add_argument("--dict", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weight", type=float, default=DEFAULTS.weight, help="weight of pooled scores")
    _coder_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="clinical metrics of the augmented predictor")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--data", help="single feature file evaluated with chunked splits")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--weight", type=float, default=DEFAULTS.weight)
    p.add_argument("--positive", type=int, default=1, help="positive class id (default: 1)")
    _coder_args(p)
    _split_args(p, total_required=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="contiguous-chunk test splits")
    p.add_argument("--out", required=True)
    _split_args(p, total_required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("plan", help="write the default staged-transfer plan")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("train-toy", help="run a plan on the toy backbone")
    p.add_argument("--plan", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--norm", action="store_true", help="normalize adapter channels")
    p.set_defaults(func=cmd_train_toy)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except StageError as exc:
        code = EXIT_NUMERIC if isinstance(exc.cause, np.linalg.LinAlgError) else EXIT_DATA
        print(f"modelaug {args.command}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
