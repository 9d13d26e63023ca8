"""Staged transfer (source -> intermediate -> target) on a toy backbone.

The backbone is adapter convolution -> optional per-channel normalization
-> tanh -> dense -> tanh -> dense -> softmax, trained full-batch with Adam.
Parameters are tagged with one of three groups: ``new_input`` (the adapter),
``trunk`` and ``output_head``.

Plan files are JSON::

    {"format": "modelaug-plan", "version": 1,
     "stages": [{"name": str, "role": "intermediate" | "target",
                 "epochs": int, "lr": float,
                 "trainable": [group, ...],
                 "lr_multipliers": {group: float},
                 "augmentations": [[name, {param: value}], ...]}, ...]}

Known augmentation names: ``rotate`` (max_degrees), ``flip`` (p),
``crop`` (size, of), ``scale`` (low, high), ``translate`` (max_shift),
``reflect`` (p).
"""

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InputError
from .imaging import (ConvSpec, as_image, center_crop, conv_output_size, flip_horizontal,
                      im2col, resize_to, rotate, scale, translate)
from .predictor import ClassScores

GROUPS = ("new_input", "trunk", "output_head")
ROLES = ("intermediate", "target")
AUGMENTATIONS = ("rotate", "flip", "crop", "scale", "translate", "reflect")
NORM_EPS = 1e-5


# -- plans ------------------------------------------------------------------

@dataclass(frozen=True)
class Stage:
    name: str
    role: str
    epochs: int
    lr: float
    trainable: tuple = GROUPS
    lr_multipliers: dict = field(default_factory=dict)
    augmentations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "trainable", tuple(self.trainable))
        object.__setattr__(self, "augmentations",
                           tuple((str(n), dict(p)) for n, p in self.augmentations))
        object.__setattr__(self, "lr_multipliers", dict(self.lr_multipliers))
        if self.role not in ROLES:
            raise InputError(f"stage {self.name!r}: role must be one of {ROLES}")
        if self.epochs < 1:
            raise InputError(f"stage {self.name!r}: epochs must be >= 1")
        if not self.lr > 0:
            raise InputError(f"stage {self.name!r}: learning rate must be positive")
        if not self.trainable:
            raise InputError(f"stage {self.name!r}: no trainable groups")
        for g in (*self.trainable, *self.lr_multipliers):
            if g not in GROUPS:
                raise InputError(f"stage {self.name!r}: unknown parameter group {g!r}")
        for g, mult in self.lr_multipliers.items():
            if not mult > 0:
                raise InputError(f"stage {self.name!r}: multiplier for {g!r} must be positive")
        for n, _ in self.augmentations:
            if n not in AUGMENTATIONS:
                raise InputError(f"stage {self.name!r}: unknown augmentation {n!r}")

    def group_rates(self):
        """Effective learning rate of every trainable group."""
        return {g: self.lr * self.lr_multipliers.get(g, 1.0) for g in self.trainable}

    def to_dict(self):
        return {"name": self.name, "role": self.role, "epochs": self.epochs, "lr": self.lr,
                "trainable": list(self.trainable), "lr_multipliers": dict(self.lr_multipliers),
                "augmentations": [[n, dict(p)] for n, p in self.augmentations]}


@dataclass(frozen=True)
class StagedTransferPlan:
    stages: tuple

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise InputError("a plan needs at least one stage")

    @property
    def total_epochs(self):
        return sum(s.epochs for s in self.stages)

    def to_json(self):
        doc = {"format": "modelaug-plan", "version": 1,
               "stages": [s.to_dict() for s in self.stages]}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"plan is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format") != "modelaug-plan":
            raise FormatError("not a modelaug plan document")
        if doc.get("version") != 1:
            raise FormatError(f"unsupported plan version {doc.get('version')!r}")
        try:
            stages = [Stage(name=s["name"], role=s["role"], epochs=int(s["epochs"]),
                            lr=float(s["lr"]), trainable=s["trainable"],
                            lr_multipliers=s.get("lr_multipliers", {}),
                            augmentations=s.get("augmentations", []))
                      for s in doc["stages"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed stage entry: {exc!r}") from None
        return cls(stages)


INTERMEDIATE_AUG = (("rotate", {"max_degrees": 7.0}), ("flip", {"p": 0.5}),
                    ("crop", {"size": 850, "of": 1024}))
TARGET_AUG = (("scale", {"low": 0.9, "high": 1.1}), ("translate", {"max_shift": 5}),
              ("reflect", {"p": 0.5}))


def paper_default_plan():
    """Three intermediate steps on chest X-rays, then the CT target stage."""
    head_and_input = ("new_input", "output_head")
    return StagedTransferPlan((
        Stage("intermediate-init", "intermediate", 5, 1e-3, head_and_input),
        Stage("intermediate-augmented", "intermediate", 5, 1e-4, head_and_input,
              augmentations=INTERMEDIATE_AUG),
        Stage("intermediate-full", "intermediate", 5, 1e-5, GROUPS,
              augmentations=INTERMEDIATE_AUG),
        Stage("target", "target", 6, 5e-4, GROUPS, {"output_head": 10.0},
              augmentations=TARGET_AUG),
    ))


def direct_plan(epochs, lr, augmentations=()):
    """Single-stage baseline: fine-tune everything on the target data only."""
    return StagedTransferPlan((Stage("direct", "target", epochs, lr, GROUPS,
                                     augmentations=augmentations),))


# -- augmentation -----------------------------------------------------------

def augment(img, augmentations, rng=None):
    """Apply a stage's augmentations in order; crops are resized back.

    With ``rng=None`` only the deterministic steps (the centre crop) run,
    which gives the "clean" view of the stage data.
    """
    h, w, _ = img.shape
    for name, p in augmentations:
        if name == "crop":
            size = max(1, round(min(h, w) * p["size"] / p["of"]))
            img = resize_to(center_crop(img, size), h, w)
        elif rng is None:
            continue
        elif name == "rotate":
            img = rotate(img, rng.uniform(-p["max_degrees"], p["max_degrees"]))
        elif name in ("flip", "reflect"):
            if rng.random() < p.get("p", 0.5):
                img = flip_horizontal(img)
        elif name == "scale":
            img = scale(img, rng.uniform(p["low"], p["high"]))
        elif name == "translate":
            s = int(p["max_shift"])
            img = translate(img, rng.integers(-s, s + 1), rng.integers(-s, s + 1))
    return img


# -- model ------------------------------------------------------------------

@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim == 3:
            self.images = self.images[..., None]
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) == 0 or len(self.images) != len(self.labels):
            raise InputError("dataset needs matching, nonempty images and labels")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise InputError(f"labels outside [0, {self.n_classes})")


class ToyBackbone:
    """Desk-scale stand-in for a pretrained CNN with a grayscale adapter."""

    PARAM_GROUPS = {
        "adapter.weight": "new_input", "adapter.bias": "new_input",
        "adapter.gamma": "new_input", "adapter.beta": "new_input",
        "trunk.weight": "trunk", "trunk.bias": "trunk",
        "head.weight": "output_head", "head.bias": "output_head",
    }

    def __init__(self, input_size, n_classes, hidden=16, kernel_size=3, stride=2, padding=1,
                 norm=False, seed=0):
        self.input_size = int(input_size)
        self.n_classes = int(n_classes)
        self.hidden = int(hidden)
        self.conv = ConvSpec(kernel_size, stride, padding, 1, 3)
        self.norm = bool(norm)
        ho = conv_output_size(self.input_size, kernel_size, stride, padding)
        if ho < 1:
            raise InputError("adapter does not fit the input size")
        self.feature_len = ho * ho * 3
        rng = np.random.default_rng(seed)
        adapter = self.conv.with_he_uniform(rng.integers(2**63))
        self.params = {"adapter.weight": adapter.weights, "adapter.bias": adapter.bias}
        if self.norm:
            self.params["adapter.gamma"] = np.ones(3)
            self.params["adapter.beta"] = np.zeros(3)
        self.params["trunk.weight"] = _glorot(rng, self.feature_len, self.hidden)
        self.params["trunk.bias"] = np.zeros(self.hidden)
        self.reset_head(self.n_classes, rng.integers(2**63))

    def reset_head(self, n_classes, seed):
        """Replace the output layer with a freshly initialized one."""
        self.n_classes = int(n_classes)
        rng = np.random.default_rng(seed)
        self.params["head.weight"] = _glorot(rng, self.hidden, self.n_classes)
        self.params["head.bias"] = np.zeros(self.n_classes)

    def group_of(self, name):
        return self.PARAM_GROUPS[name]

    def copy(self):
        return copy.deepcopy(self)

    # forward / backward over a batch (b, h, w, 1)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 3:
            X = X[..., None]
        if X.shape[1:] != (self.input_size, self.input_size, 1):
            raise InputError(f"expected images of shape ({self.input_size}, {self.input_size}, 1),"
                             f" got {X.shape[1:]}")
        return X

    def _forward(self, X):
        p, c = self.params, self.conv
        cache = {"X": X}
        cols = im2col(X, c.kernel_size, c.stride, c.padding)
        z1 = cols @ p["adapter.weight"].reshape(3, -1).T + p["adapter.bias"]
        cache["cols"] = cols
        if self.norm:
            mu = z1.mean(axis=(1, 2), keepdims=True)
            inv_std = 1.0 / np.sqrt(z1.var(axis=(1, 2), keepdims=True) + NORM_EPS)
            xhat = (z1 - mu) * inv_std
            cache["xhat"], cache["inv_std"] = xhat, inv_std
            z1 = p["adapter.gamma"] * xhat + p["adapter.beta"]
        a1 = np.tanh(z1)
        f = a1.reshape(len(X), -1)
        a2 = np.tanh(f @ p["trunk.weight"] + p["trunk.bias"])
        logits = a2 @ p["head.weight"] + p["head.bias"]
        cache.update(a1=a1, f=f, a2=a2)
        return softmax(logits), cache

    def predict_proba(self, X):
        return self._forward(self._check(X))[0]

    def loss(self, X, y):
        P = self.predict_proba(X)
        return cross_entropy(P, np.asarray(y))

    def loss_and_grads(self, X, y):
        """Mean cross-entropy and its gradient for every parameter."""
        X = self._check(X)
        y = np.asarray(y, dtype=np.int64)
        P, cache = self._forward(X)
        loss = cross_entropy(P, y)
        p, c, b = self.params, self.conv, len(X)
        g = {}
        dlogits = P.copy()
        dlogits[np.arange(b), y] -= 1.0
        dlogits /= b
        g["head.weight"] = cache["a2"].T @ dlogits
        g["head.bias"] = dlogits.sum(axis=0)
        dz2 = (dlogits @ p["head.weight"].T) * (1.0 - cache["a2"] ** 2)
        g["trunk.weight"] = cache["f"].T @ dz2
        g["trunk.bias"] = dz2.sum(axis=0)
        da1 = (dz2 @ p["trunk.weight"].T).reshape(cache["a1"].shape)
        dz1 = da1 * (1.0 - cache["a1"] ** 2)
        if self.norm:
            xhat, inv_std = cache["xhat"], cache["inv_std"]
            g["adapter.gamma"] = (dz1 * xhat).sum(axis=(0, 1, 2))
            g["adapter.beta"] = dz1.sum(axis=(0, 1, 2))
            dxhat = dz1 * p["adapter.gamma"]
            n = xhat.shape[1] * xhat.shape[2]
            dz1 = inv_std / n * (n * dxhat - dxhat.sum(axis=(1, 2), keepdims=True)
                                 - xhat * (dxhat * xhat).sum(axis=(1, 2), keepdims=True))
        cols = cache["cols"]
        g["adapter.weight"] = (dz1.reshape(-1, 3).T @ cols.reshape(-1, cols.shape[-1])
                               ).reshape(p["adapter.weight"].shape)
        g["adapter.bias"] = dz1.sum(axis=(0, 1, 2))
        return loss, g

    # serialization

    def to_json(self):
        doc = {"format": "modelaug-toy-backbone", "version": 1,
               "config": {"input_size": self.input_size, "n_classes": self.n_classes,
                          "hidden": self.hidden, "kernel_size": self.conv.kernel_size,
                          "stride": self.conv.stride, "padding": self.conv.padding,
                          "norm": self.norm},
               "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                          for k, v in self.params.items()}}
        return json.dumps(doc) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
            model = cls(**doc["config"])
            for k, v in doc["params"].items():
                model.params[k] = np.array(v["data"], dtype=np.float64).reshape(v["shape"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed checkpoint: {exc!r}") from None
        return model


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(P, y):
    return float(-np.mean(np.log(np.maximum(P[np.arange(len(y)), y], 1e-300))))


def forward(model, img):
    img = as_image(img)
    return ClassScores(range(model.n_classes), model.predict_proba(img[None])[0])


def backward(model, images, labels):
    """Loss and gradients arranged by parameter group."""
    loss, grads = model.loss_and_grads(images, labels)
    by_group = {g: {} for g in GROUPS}
    for name, grad in grads.items():
        by_group[model.group_of(name)][name] = grad
    return loss, by_group


# -- optimizer --------------------------------------------------------------

@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads, lrs):
    """One bias-corrected Adam update, in place.

    ``lrs`` maps parameter name to learning rate; parameters without an
    entry are frozen and neither they nor their moments are touched.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, lr in lrs.items():
        if not lr > 0:
            raise InputError(f"learning rate for {name} must be positive")
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


# -- running a plan ---------------------------------------------------------

@dataclass(frozen=True)
class TraceRow:
    stage: str
    epoch: int
    loss: float
    clean_loss: float


def run_plan(model, plan, intermediate_data, target_data, seed=0):
    """Execute ``plan`` on a copy of ``model``; returns ``(model, trace)``.

    Each epoch is one full-batch Adam step on freshly augmented stage data.
    ``loss`` is the loss of that augmented batch before the step and
    ``clean_loss`` the loss after it on the stage data with only the
    deterministic steps applied. Every
    stage starts with a fresh optimizer state, and the output head is
    re-initialized whenever the dataset role changes or its width does not
    match the stage's class count.
    """
    model = model.copy()
    rng = np.random.default_rng(seed)
    data = {"intermediate": intermediate_data, "target": target_data}
    trace = []
    prev_role = None
    for stage in plan.stages:
        ds = data[stage.role]
        if ds is None:
            raise InputError(f"stage {stage.name!r} needs {stage.role} data")
        if (prev_role is not None and stage.role != prev_role) or model.n_classes != ds.n_classes:
            model.reset_head(ds.n_classes, rng.integers(2**63))
        prev_role = stage.role
        rates = stage.group_rates()
        lrs = {k: rates[model.group_of(k)] for k in model.params if model.group_of(k) in rates}
        state = AdamState()
        clean = ds.images
        if any(n == "crop" for n, _ in stage.augmentations):
            clean = np.stack([augment(img, stage.augmentations) for img in ds.images])
        for epoch in range(stage.epochs):
            X = ds.images
            if stage.augmentations:
                X = np.stack([augment(img, stage.augmentations, rng) for img in X])
            loss, grads = model.loss_and_grads(X, ds.labels)
            adam_step(state, model.params, grads, lrs)
            trace.append(TraceRow(stage.name, epoch, loss, model.loss(clean, ds.labels)))
    return model, trace


def trace_to_csv(trace):
    lines = ["stage,epoch,loss,clean_loss"]
    lines += [f"{r.stage},{r.epoch},{r.loss!r},{r.clean_loss!r}" for r in trace]
    return "\n".join(lines) + "\n"


def parameter_distance(a, b, groups=GROUPS):
    """L2 distance between two models over shared, same-shaped parameters."""
    total = 0.0
    for k, v in a.params.items():
        w = b.params.get(k)
        if a.group_of(k) in groups and w is not None and w.shape == v.shape:
            total += float(np.sum((v - w) ** 2))
    return float(np.sqrt(total))


def desk_scale_plan():
    """The four-stage schedule compressed to 20 full-batch epochs per stage.

    Same groups, order, augmentations and 10x output-head multiplier as
    :func:`paper_default_plan`; the rates are raised so that 20-step stages
    move the toy backbone at all.
    """
    head_and_input = ("new_input", "output_head")
    return StagedTransferPlan((
        Stage("intermediate-init", "intermediate", 20, 1e-2, head_and_input),
        Stage("intermediate-augmented", "intermediate", 20, 1e-3, head_and_input,
              augmentations=INTERMEDIATE_AUG),
        Stage("intermediate-full", "intermediate", 20, 1e-3, GROUPS,
              augmentations=INTERMEDIATE_AUG),
        Stage("target", "target", 20, 1e-3, GROUPS, {"output_head": 10.0},
              augmentations=TARGET_AUG),
    ))
