"""Binary logistic regression for phenotype confirmation.

Deterministic full-batch gradient descent from zero initialization, with an
L2 penalty on the weights (bias unregularized). The core primitive
`loss_and_grad` works on the unnormalized sum of per-example losses plus the
penalty; training scales its gradient by 1/n per step, which makes the
default penalty strength of 1.0 act as 1/n. Parameters are saved as decimal
text so a model file round-trips exactly across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    DivergenceError,
    ModelFormatError,
    ModelVersionError,
    SingleClassError,
)

MODEL_FORMAT = "rarephen-logreg"
MODEL_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1.0  # applied as l2/n per gradient step
    seed: int = 13
    subsample: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.subsample is not None and self.subsample < 1:
            raise ValueError("subsample must be >= 1 when set")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "seed": self.seed,
            "subsample": self.subsample,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "TrainConfig":
        return cls(
            learning_rate=float(row.get("learning_rate", 0.1)),
            epochs=int(row.get("epochs", 200)),
            l2=float(row.get("l2", 1.0)),
            seed=int(row.get("seed", 13)),
            subsample=None if row.get("subsample") is None else int(row["subsample"]),
        )


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


def sigmoid(z):
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float):
    """Sum of per-example negative log-likelihoods plus (l2/2)*||w||^2,
    with its exact analytic gradient. With no examples, only the penalty
    remains and the weight gradient is exactly l2*w."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if X.size == 0:
        return 0.5 * l2 * float(w @ w), l2 * w, 0.0
    z = X @ w + b
    # nll_i = log(1 + e^z) - y*z, stable via logaddexp
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    residual = sigmoid(z) - y
    grad_w = X.T @ residual + l2 * w
    grad_b = float(np.sum(residual))
    return loss, grad_w, grad_b


def train(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    provenance: dict | None = None,
) -> LogRegModel:
    """Full-batch gradient descent on the mean regularized loss.

    Deterministic: zero init, fixed epoch count, and (when `subsample` is
    set) a seeded uniform subsample taken in original row order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError("X must be a 2-D matrix of mention vectors")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} vectors vs {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise SingleClassError("need at least two training pairs")
    if config.subsample is not None and config.subsample < X.shape[0]:
        rng = np.random.default_rng(config.seed)
        idx = np.sort(rng.choice(X.shape[0], size=config.subsample, replace=False))
        X, y = X[idx], y[idx]
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClassError("training labels contain a single class")
    if not set(classes.tolist()) <= {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")

    n = X.shape[0]
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(config.epochs):
        loss, grad_w, grad_b = loss_and_grad(X, y, w, b, config.l2)
        if not np.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite ({loss})")
        w = w - config.learning_rate * grad_w / n
        b = b - config.learning_rate * grad_b / n
    if not (np.all(np.isfinite(w)) and np.isfinite(b)):
        raise DivergenceError("parameters became non-finite")
    return LogRegModel(weights=w, bias=float(b), provenance=dict(provenance or {}))


def predict(model: LogRegModel, values: np.ndarray) -> float:
    """Confirmation probability, strictly inside (0, 1)."""
    values = np.asarray(values, dtype=float)
    if values.shape != model.weights.shape:
        raise DimensionMismatchError(
            f"vector of dim {values.shape} vs model dim {model.weights.shape}"
        )
    p = float(sigmoid(model.weights @ values + model.bias))
    return min(max(p, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))


def decide(model: LogRegModel, values: np.ndarray, threshold: float = 0.5) -> bool:
    return predict(model, values) >= threshold


def gradient_check(X, y, w, b, l2: float = 0.0, h: float = 1e-5) -> float:
    """Max relative error between the analytic gradient and central finite
    differences of the loss, over all weight components and the bias."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    _, grad_w, grad_b = loss_and_grad(X, y, w, b, l2)
    worst = 0.0

    def loss_at(wv, bv):
        return loss_and_grad(X, y, wv, bv, l2)[0]

    for j in range(w.shape[0]):
        bump = np.zeros_like(w)
        bump[j] = h
        numeric = (loss_at(w + bump, b) - loss_at(w - bump, b)) / (2 * h)
        denom = max(abs(grad_w[j]), abs(numeric), 1e-8)
        worst = max(worst, abs(grad_w[j] - numeric) / denom)
    numeric_b = (loss_at(w, b + h) - loss_at(w, b - h)) / (2 * h)
    denom = max(abs(grad_b), abs(numeric_b), 1e-8)
    worst = max(worst, abs(grad_b - numeric_b) / denom)
    return worst


def save(model: LogRegModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "dim": model.dim,
        "training_kind": model.provenance.get("training_kind"),
        "provider_id": model.provenance.get("provider_id"),
        "options": model.provenance.get("options"),
        "params_hash": model.provenance.get("params_hash"),
        "bias": model.bias,
        "weights": model.weights.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load(path: str | Path) -> LogRegModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelVersionError(
            f"unsupported model version {payload.get('version')} (expected {MODEL_VERSION})"
        )
    try:
        weights = np.asarray(payload["weights"], dtype=float)
        bias = float(payload["bias"])
        dim = int(payload["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model file {path} is missing fields: {exc}") from exc
    if weights.ndim != 1 or weights.shape[0] != dim:
        raise ModelFormatError(f"weight vector length {weights.shape} != declared dim {dim}")
    provenance = {
        "training_kind": payload.get("training_kind"),
        "provider_id": payload.get("provider_id"),
        "options": payload.get("options"),
        "params_hash": payload.get("params_hash"),
    }
    return LogRegModel(weights=weights, bias=bias, provenance=provenance)
