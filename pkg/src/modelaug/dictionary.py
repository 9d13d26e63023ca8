"""Class-arranged dictionaries built from penultimate-layer features.

Feature file format (plain text, UTF-8, ``.`` decimal separator)::

    #features dim=<m> classes=<c0>,<c1>,...[ softmax=1]
    <label>,<x1>,...,<xm>[,<p_c0>,...,<p_cK>]

The header is the first line. Every following non-empty line not starting
with ``#`` is one sample: an integer label, ``m`` feature values and, when
``softmax=1``, one softmax score per declared class in header order.
Dictionary files use the same layout with ``#dictionary`` as the first
token, one line per column, already grouped by class.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InputError
from .numeric import as_vector


@dataclass(frozen=True)
class LabeledFeature:
    features: np.ndarray
    label: int
    softmax: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", as_vector(self.features, "features"))
        object.__setattr__(self, "label", int(self.label))
        if self.softmax is not None:
            object.__setattr__(self, "softmax", as_vector(self.softmax, "softmax"))


@dataclass(frozen=True)
class Dictionary:
    """Columns grouped contiguously by class, ascending class order."""

    columns: np.ndarray
    column_classes: np.ndarray
    classes: tuple
    class_spans: dict = field(repr=False)

    @property
    def dim(self):
        return self.columns.shape[0]

    @property
    def n_columns(self):
        return self.columns.shape[1]

    def span(self, c):
        return self.class_spans[c]

    def class_of_column(self, j):
        return class_of_column(self, j)


def _spans(column_classes, classes):
    spans = {}
    for c in classes:
        idx = np.flatnonzero(column_classes == c)
        if idx.size == 0:
            raise InputError(f"class {c} has no dictionary columns")
        if idx[-1] - idx[0] + 1 != idx.size:
            raise InputError(f"columns of class {c} are not contiguous")
        spans[c] = (int(idx[0]), int(idx[-1]) + 1)
    return spans


def build_dictionary(samples, classes=None, normalize=True):
    """Stack training features column-wise, grouped by class.

    Classes appear in ascending order and input order is kept inside each
    class. With ``normalize`` every column is scaled to unit L2 norm.
    """
    samples = list(samples)
    if not samples:
        raise InputError("no samples to build a dictionary from")
    labels = np.array([s.label for s in samples], dtype=np.int64)
    if classes is None:
        classes = sorted(set(labels.tolist()))
    classes = tuple(sorted(int(c) for c in classes))
    unknown = set(labels.tolist()) - set(classes)
    if unknown:
        raise InputError(f"labels {sorted(unknown)} are not among the declared classes {classes}")

    m = samples[0].features.shape[0]
    for i, s in enumerate(samples):
        if s.features.shape[0] != m:
            raise InputError(f"sample {i} has {s.features.shape[0]} features, expected {m}")
        if not np.any(s.features):
            raise InputError(f"sample {i} has a zero feature vector")

    order = np.argsort(labels, kind="stable")
    cols = np.stack([samples[i].features for i in order], axis=1)
    if normalize:
        cols = cols / np.linalg.norm(cols, axis=0)
    column_classes = labels[order]
    return Dictionary(cols, column_classes, classes, _spans(column_classes, classes))


def class_of_column(d, j):
    if not 0 <= j < d.n_columns:
        raise IndexError(f"column {j} out of range [0, {d.n_columns})")
    for c in d.classes:
        lo, hi = d.class_spans[c]
        if lo <= j < hi:
            return c
    raise AssertionError("class spans do not cover the dictionary")


# -- text files -------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def _parse_header(line, kind, path):
    tokens = line.split()
    if not tokens or tokens[0] != "#" + kind:
        raise FormatError(f"{path}: expected a '#{kind}' header line")
    fields = {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed header field {tok!r}")
        fields[key] = value
    try:
        dim = int(fields["dim"])
        classes = tuple(int(c) for c in fields["classes"].split(","))
    except (KeyError, ValueError):
        raise FormatError(f"{path}: header needs integer dim= and classes=") from None
    if dim < 1 or len(set(classes)) != len(classes):
        raise FormatError(f"{path}: invalid dim or duplicate classes in header")
    return dim, classes, fields


def _rows(lines, path):
    for lineno, line in enumerate(lines, start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            label = int(parts[0])
            values = np.array([float(p) for p in parts[1:]])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: cannot parse {line[:40]!r}") from None
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{path}:{lineno}: non-finite value")
        yield lineno, label, values


def read_features(path):
    """Return ``(samples, classes)`` from a feature file."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    dim, classes, fields = _parse_header(lines[0], "features", path)
    with_softmax = fields.get("softmax", "0") in ("1", "yes", "true")
    width = dim + (len(classes) if with_softmax else 0)
    samples = []
    for lineno, label, values in _rows(lines[1:], path):
        if values.shape[0] != width:
            raise FormatError(f"{path}:{lineno}: expected {width} values, found {values.shape[0]}")
        if label not in classes:
            raise FormatError(f"{path}:{lineno}: label {label} not declared in header")
        softmax = values[dim:] if with_softmax else None
        samples.append(LabeledFeature(values[:dim], label, softmax))
    return samples, classes


def features_to_text(samples, classes):
    samples = list(samples)
    if not samples:
        raise InputError("nothing to write")
    dim = samples[0].features.shape[0]
    with_softmax = samples[0].softmax is not None
    header = f"#features dim={dim} classes={','.join(str(c) for c in classes)}"
    if with_softmax:
        header += " softmax=1"
    out = [header]
    for s in samples:
        vals = list(s.features)
        if with_softmax:
            vals += list(s.softmax)
        out.append(",".join([str(s.label)] + [_fmt(v) for v in vals]))
    return "\n".join(out) + "\n"


def dictionary_to_text(d):
    header = f"#dictionary dim={d.dim} classes={','.join(str(c) for c in d.classes)}"
    out = [header]
    for j in range(d.n_columns):
        out.append(",".join([str(int(d.column_classes[j]))] + [_fmt(v) for v in d.columns[:, j]]))
    return "\n".join(out) + "\n"


def read_dictionary(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    dim, classes, _ = _parse_header(lines[0], "dictionary", path)
    labels, cols = [], []
    for lineno, label, values in _rows(lines[1:], path):
        if values.shape[0] != dim:
            raise FormatError(f"{path}:{lineno}: expected {dim} values, found {values.shape[0]}")
        labels.append(label)
        cols.append(values)
    if not cols:
        raise FormatError(f"{path}: dictionary has no columns")
    column_classes = np.array(labels, dtype=np.int64)
    classes = tuple(sorted(classes))
    if set(labels) - set(classes):
        raise FormatError(f"{path}: column labels outside the declared classes")
    if np.any(np.diff(column_classes) < 0):
        raise FormatError(f"{path}: columns are not arranged in ascending class order")
    try:
        spans = _spans(column_classes, classes)
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return Dictionary(np.stack(cols, axis=1), column_classes, classes, spans)
