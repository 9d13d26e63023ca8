"""Label prediction from softmax scores plus pooled representation codes,
and the chunked evaluation protocol around it."""

import math
from dataclasses import dataclass, field

import numpy as np

from .coders import DenseCoder, FusedCode, fuse, omp_encode
from .dictionary import build_dictionary
from .errors import InputError

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "f1")


@dataclass(frozen=True)
class ClassScores:
    classes: tuple
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != (len(self.classes),):
            raise InputError(f"{len(self.classes)} classes but scores of shape {scores.shape}")
        object.__setattr__(self, "scores", scores)


def pool_by_class(code, d):
    """Sum fused coefficients over each class span of the dictionary."""
    v = code.coefficients if isinstance(code, FusedCode) else np.asarray(code, dtype=np.float64)
    if v.shape != (d.n_columns,):
        raise InputError(f"code of length {v.shape} for a dictionary of {d.n_columns} columns")
    return ClassScores(d.classes, [v[lo:hi].sum() for lo, hi in (d.class_spans[c] for c in d.classes)])


def predict(softmax, pooled, weight=1.0):
    """Argmax of ``softmax + weight * pooled``; ties go to the lower class id."""
    if softmax.classes != pooled.classes:
        raise InputError(f"class sets differ: {softmax.classes} vs {pooled.classes}")
    augmented = softmax.scores + weight * pooled.scores
    best = augmented.max()
    return min(c for c, a in zip(softmax.classes, augmented) if a == best)


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, truth, predicted, positive=1):
        tp = fp = tn = fn = 0
        for t, p in zip(truth, predicted):
            if p == positive:
                if t == positive:
                    tp += 1
                else:
                    fp += 1
            elif t == positive:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, tn, fn)


@dataclass(frozen=True)
class Metrics:
    """Rates in [0, 1]. A 0/0 rate is stored as 0.0 and named in ``undefined``."""

    accuracy: float
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    undefined: frozenset = frozenset()


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.add(name)
        return 0.0
    return num / den


def compute_metrics(c):
    undefined = set()
    acc = _ratio(c.tp + c.tn, c.total, "accuracy", undefined)
    sens = _ratio(c.tp, c.tp + c.fn, "sensitivity", undefined)
    spec = _ratio(c.tn, c.tn + c.fp, "specificity", undefined)
    prec = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    if {"sensitivity", "precision"} & undefined or prec + sens == 0:
        undefined.add("f1")
        f1 = 0.0
    else:
        f1 = 2 * prec * sens / (prec + sens)
    return Metrics(acc, sens, spec, prec, f1, frozenset(undefined))


# -- splits -----------------------------------------------------------------

class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood), 64-bit unsigned output.

    ``state += 0x9E3779B97F4A7C15``; ``z = state``;
    ``z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9``;
    ``z = (z ^ z >> 27) * 0x94D049BB133111EB``; output ``z ^ z >> 31``,
    all modulo 2**64.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed):
        self.state = int(seed) & self.MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def below(self, bound):
        """Uniform integer in ``[0, bound)`` by rejection of the biased tail."""
        if bound < 1:
            raise InputError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % bound


@dataclass(frozen=True)
class SplitSpec:
    total: int
    test_fraction: float = 0.1
    draws: int = 5
    seed: int = 0

    @property
    def chunk_len(self):
        # round half up, not Python's banker's rounding
        return int(math.floor(self.total * self.test_fraction + 0.5))


@dataclass(frozen=True)
class Split:
    test: range
    train: np.ndarray


def chunk_splits(spec):
    """One contiguous test interval per draw, start uniform in [0, total - len].

    Draws are independent, so intervals of different draws may overlap.
    """
    if spec.total < 10:
        raise InputError(f"need at least 10 samples, got {spec.total}")
    if spec.draws < 1:
        raise InputError("draws must be >= 1")
    if not 0 < spec.test_fraction < 1:
        raise InputError(f"test_fraction must lie in (0, 1), got {spec.test_fraction}")
    n = spec.chunk_len
    if n < 1 or n >= spec.total:
        raise InputError(f"chunk length {n} is unusable for {spec.total} samples")
    rng = SplitMix64(spec.seed)
    splits = []
    for _ in range(spec.draws):
        start = rng.below(spec.total - n + 1)
        train = np.concatenate([np.arange(start), np.arange(start + n, spec.total)])
        splits.append(Split(range(start, start + n), train))
    return splits


def split_manifest(spec, splits):
    lines = [f"#split total={spec.total} test_fraction={spec.test_fraction!r} "
             f"draws={spec.draws} seed={spec.seed} chunk={spec.chunk_len}",
             "draw,test_start,test_stop"]
    lines += [f"{i},{s.test.start},{s.test.stop}" for i, s in enumerate(splits)]
    return "\n".join(lines) + "\n"


# -- evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class DrawResult:
    counts: ConfusionCounts
    metrics: Metrics
    predictions: tuple = field(repr=False)


def evaluate_pipeline(train, test, k=50, lam=2.0, fusion_norm="l2", weight=1.0,
                      positive=1, classes=None, normalize=True):
    """Run the augmented predictor over ``test`` with a dictionary from ``train``.

    Every test sample must carry softmax scores aligned with the class order.
    """
    d = build_dictionary(train, classes=classes, normalize=normalize)
    if len(d.classes) != 2:
        raise InputError(f"clinical metrics need exactly two classes, got {d.classes}")
    if positive not in d.classes:
        raise InputError(f"positive class {positive} not in {d.classes}")
    k = min(k, d.n_columns)
    dense = DenseCoder(d, lam)
    predictions = []
    for i, sample in enumerate(test):
        if sample.softmax is None:
            raise InputError(f"test sample {i} has no softmax scores")
        code = fuse(omp_encode(d, sample.features, k), dense(sample.features), fusion_norm)
        pooled = pool_by_class(code, d)
        predictions.append(predict(ClassScores(d.classes, sample.softmax), pooled, weight))
    counts = ConfusionCounts.from_labels([s.label for s in test], predictions, positive)
    return DrawResult(counts, compute_metrics(counts), tuple(predictions))


def softmax_only(test, classes, positive=1):
    """Baseline: argmax of the softmax scores alone."""
    zeros = ClassScores(classes, np.zeros(len(classes)))
    preds = [predict(ClassScores(classes, s.softmax), zeros) for s in test]
    counts = ConfusionCounts.from_labels([s.label for s in test], preds, positive)
    return DrawResult(counts, compute_metrics(counts), tuple(preds))


@dataclass(frozen=True)
class EvalReport:
    draws: tuple

    def values(self, name):
        return np.array([getattr(r.metrics, name) for r in self.draws])

    def mean(self, name):
        return float(self.values(name).mean())

    def std(self, name):
        """Sample standard deviation (ddof=1); 0.0 for a single draw."""
        v = self.values(name)
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    def formatted(self, name):
        # rates as percentages, F1 as a fraction
        if name == "f1":
            return f"{self.mean(name):.2f}±{self.std(name):.2f}"
        return f"{100 * self.mean(name):.2f}±{100 * self.std(name):.2f}"

    def to_csv(self):
        lines = ["draw,tp,fp,tn,fn," + ",".join(METRIC_NAMES) + ",undefined"]
        for i, r in enumerate(self.draws):
            c = r.counts
            vals = ",".join(repr(getattr(r.metrics, m)) for m in METRIC_NAMES)
            undef = ";".join(sorted(r.metrics.undefined))
            lines.append(f"{i},{c.tp},{c.fp},{c.tn},{c.fn},{vals},{undef}")
        agg = ",".join(self.formatted(m) for m in METRIC_NAMES)
        lines.append(f"mean±std,,,,,{agg},")
        return "\n".join(lines) + "\n"

    def to_text(self):
        out = [f"draws: {len(self.draws)}",
               f"{'':10s}" + "".join(f"{m:>16s}" for m in METRIC_NAMES)]
        for i, r in enumerate(self.draws):
            row = "".join(f"{getattr(r.metrics, m):16.4f}" for m in METRIC_NAMES)
            flag = f"  undefined: {','.join(sorted(r.metrics.undefined))}" if r.metrics.undefined else ""
            out.append(f"draw {i:<5d}" + row + flag)
        out.append(f"{'mean±std':10s}" + "".join(f"{self.formatted(m):>16s}" for m in METRIC_NAMES))
        return "\n".join(out) + "\n"


def evaluate_draws(samples, spec, **kwargs):
    """Chunked protocol: for each draw, train on the complement, test on the chunk."""
    samples = list(samples)
    if len(samples) != spec.total:
        raise InputError(f"split declares {spec.total} samples but {len(samples)} were given")
    results = []
    for split in chunk_splits(spec):
        train = [samples[i] for i in split.train]
        test = [samples[i] for i in split.test]
        results.append(evaluate_pipeline(train, test, **kwargs))
    return EvalReport(tuple(results))
