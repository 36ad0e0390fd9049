"""Minimal supervised learners used as nuisance estimators.

Three kinds: ridge regression (closed form), logistic regression and a
one-hidden-layer tanh perceptron (both full-batch gradient descent via the
kernel backend). Features are standardized inside the learner by default and
the statistics are stored on the fitted model, so prediction is
self-contained. Probability outputs are clipped away from 0 and 1 to keep
inverse weights finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import NumericalError

DEFAULT_EPS_CLIP = 1e-3


@dataclass(frozen=True)
class LearnerSpec:
    """Configuration of one learner.

    ``reg`` is the L2 penalty, ``hidden`` the MLP width, ``lr``/``iters`` the
    gradient-descent settings (ignored by ridge), ``eps_clip`` the probability
    clipping level.
    """

    kind: str = "ridge"            # ridge | logistic | mlp
    reg: float = 1e-3
    hidden: int = 8
    lr: float = 0.5
    iters: int = 500
    seed: int = 0
    standardize: bool = True
    eps_clip: float = DEFAULT_EPS_CLIP

    def validate(self) -> None:
        if self.kind not in ("ridge", "logistic", "mlp"):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.reg < 0:
            raise ValueError("regularization must be non-negative")
        if self.lr <= 0:
            raise ValueError("step size must be positive")
        if self.iters < 1:
            raise ValueError("iteration count must be at least 1")
        if self.kind == "mlp" and self.hidden < 1:
            raise ValueError("mlp hidden width must be at least 1")
        if not 0 < self.eps_clip < 0.5:
            raise ValueError("eps_clip must lie in (0, 0.5)")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "reg": self.reg, "hidden": self.hidden,
            "lr": self.lr, "iters": self.iters, "seed": self.seed,
            "standardize": self.standardize, "eps_clip": self.eps_clip,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        return cls(**d)


@dataclass(frozen=True)
class FittedModel:
    """Immutable fitted learner; ``predict`` is a pure function of it."""

    kind: str
    task: str                      # regression | probability
    x_mean: np.ndarray
    x_scale: np.ndarray
    eps_clip: float
    w: Optional[np.ndarray] = None       # ridge / logistic weights
    b: float = 0.0
    w1: Optional[np.ndarray] = None      # mlp parameters
    b1: Optional[np.ndarray] = None
    w2: Optional[np.ndarray] = None
    b2: float = 0.0


def _check_xy(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != len(y):
        raise ValueError(f"feature rows {x.shape[0]} != target length {len(y)}")
    if len(y) < 1:
        raise ValueError("need at least one training row")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise NumericalError("non-finite training inputs")
    return x, y


def _standardize_stats(x, enabled):
    if not enabled:
        return np.zeros(x.shape[1]), np.ones(x.shape[1])
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def fit(spec: LearnerSpec, x, y, task: str = "regression") -> FittedModel:
    """Train one model. Deterministic given the spec seed.

    Ridge minimizes ||Xw + b - y||^2 + reg * ||w||^2 in closed form on the
    (possibly standardized) features; logistic and the MLP run ``spec.iters``
    full-batch gradient-descent steps.
    """
    spec.validate()
    if task not in ("regression", "probability"):
        raise ValueError(f"unknown task {task!r}")
    x, y = _check_xy(x, y)
    if task == "probability" and not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("probability task requires binary {0,1} targets")

    mean, scale = _standardize_stats(x, spec.standardize)
    xs = (x - mean) / scale

    if spec.kind == "ridge":
        if task == "probability":
            raise ValueError("ridge supports the regression task only")
        xc = xs - xs.mean(axis=0)
        yc = y - y.mean()
        gram = xc.T @ xc + spec.reg * np.eye(x.shape[1])
        w = np.linalg.solve(gram, xc.T @ yc)
        b = float(y.mean() - xs.mean(axis=0) @ w)
        return FittedModel(kind="ridge", task=task, x_mean=mean, x_scale=scale,
                           eps_clip=spec.eps_clip, w=w, b=b)

    if spec.kind == "logistic":
        if task != "probability":
            raise ValueError("logistic supports the probability task only")
        w0 = np.zeros(x.shape[1])
        w, b = _kernels.logistic_gd(xs, y, spec.reg, spec.lr, spec.iters, w0, 0.0)
        return FittedModel(kind="logistic", task=task, x_mean=mean, x_scale=scale,
                           eps_clip=spec.eps_clip, w=w, b=b)

    # mlp
    rng = np.random.default_rng(spec.seed)
    fan_in = x.shape[1]
    w1 = rng.uniform(-1.0, 1.0, size=(spec.hidden, fan_in)) / np.sqrt(fan_in)
    b1 = rng.uniform(-0.1, 0.1, size=spec.hidden)
    w2 = rng.uniform(-1.0, 1.0, size=spec.hidden) / np.sqrt(spec.hidden)
    w1, b1, w2, b2 = _kernels.mlp_gd(xs, y, w1, b1, w2, 0.0, spec.reg, spec.lr,
                                     spec.iters, task == "probability")
    return FittedModel(kind="mlp", task=task, x_mean=mean, x_scale=scale,
                       eps_clip=spec.eps_clip, w1=w1, b1=b1, w2=w2, b2=b2)


def predict(model: FittedModel, x) -> np.ndarray:
    """Evaluate the model; probability outputs are clipped to
    [eps_clip, 1 - eps_clip]."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != len(model.x_mean):
        raise ValueError(f"feature dimension {x.shape[1]} != training dimension "
                         f"{len(model.x_mean)}")
    xs = (x - model.x_mean) / model.x_scale
    if model.kind in ("ridge", "logistic"):
        z = xs @ model.w + model.b
        out = _kernels.sigmoid(z) if model.task == "probability" else z
    else:
        h = np.tanh(xs @ model.w1.T + model.b1)
        z = h @ model.w2 + model.b2
        out = _kernels.sigmoid(z) if model.task == "probability" else z
    if model.task == "probability":
        out = np.clip(out, model.eps_clip, 1.0 - model.eps_clip)
    if not np.all(np.isfinite(out)):
        raise NumericalError("model produced non-finite predictions")
    return out


# ---------------------------------------------------------------------------
# Loss/gradient definitions. The gradient-descent kernels take steps along
# exactly these gradients; tests tie the two together and check the analytic
# gradients against finite differences.

def logistic_objective(w, b, x, y, reg):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = x.shape[0]
    z = x @ w + b
    # log(1 + exp(z)) - y*z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * reg * float(w @ w)
    p = _kernels.sigmoid(z)
    gw = x.T @ (p - y) / n + reg * w
    gb = float(np.mean(p - y))
    return loss, gw, gb


def mlp_objective(w1, b1, w2, b2, x, y, reg, probability):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    h = np.tanh(x @ w1.T + b1)
    out = h @ w2 + b2
    if probability:
        loss = float(np.mean(np.logaddexp(0.0, out) - y * out))
        d_out = (_kernels.sigmoid(out) - y) / n
    else:
        loss = 0.5 * float(np.mean((out - y) ** 2))
        d_out = (out - y) / n
    loss += 0.5 * reg * (float(np.sum(w1 * w1)) + float(w2 @ w2))
    gw2 = h.T @ d_out + reg * w2
    gb2 = float(np.sum(d_out))
    d_h = np.outer(d_out, w2) * (1.0 - h * h)
    gw1 = d_h.T @ x + reg * w1
    gb1 = d_h.sum(axis=0)
    return loss, gw1, gb1, gw2, gb2
