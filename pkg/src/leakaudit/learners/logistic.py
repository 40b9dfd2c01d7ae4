"""Class-weighted L2 logistic regression trained by full-batch gradient
descent with backtracking line search.

Objective: mean class-weighted logistic loss + (l2_lambda / 2) * ||w||^2,
bias unpenalized. Class weights are N / (2 * N_c) so each class contributes
equally. Training stops when the gradient max-norm drops to tol or at
max_iters; the problem is convex, so the optimum is unique for lambda > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..io_utils import read_json, write_json


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def class_weights(y: np.ndarray, weighted: bool = True) -> tuple[float, float]:
    """(w0, w1) with w_c = N / (2 * N_c); (1, 1) when weighting is off."""
    if not weighted:
        return (1.0, 1.0)
    n = len(y)
    n1 = int(np.sum(y == 1))
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DataError("class weighting requires both classes present")
    return (n / (2.0 * n0), n / (2.0 * n1))


@dataclass(frozen=True)
class LogisticConfig:
    l2_lambda: float = 1e-4
    max_iters: int = 2000
    tol: float = 1e-6
    class_weighted: bool = True
    init_seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "l2_lambda": self.l2_lambda,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "class_weighted": self.class_weighted,
            "init_seed": self.init_seed,
        }


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2_lambda: float
    class_weights: tuple[float, float]
    n_iters: int = 0
    schema_hash: str | None = None

    @property
    def dim(self) -> int:
        return len(self.weights)

    def decision_logit(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if (X.shape[-1] if X.ndim else 0) != self.dim:
            raise DataError(f"feature dimension {X.shape[-1]} != model dimension {self.dim}")
        z = X @ self.weights + self.bias
        return float(z) if single else z

    def predict_proba(self, X) -> np.ndarray | float:
        z = self.decision_logit(X)
        if np.ndim(z) == 0:
            return float(sigmoid(np.asarray([z]))[0])
        return sigmoid(z)

    def save(self, path: str | Path) -> None:
        write_json(path, {
            "kind": "logistic",
            "weights": [float(v) for v in self.weights],
            "bias": self.bias,
            "l2_lambda": self.l2_lambda,
            "class_weights": list(self.class_weights),
            "n_iters": self.n_iters,
            "schema_hash": self.schema_hash,
        })

    @classmethod
    def load(cls, path: str | Path) -> "LogisticModel":
        raw = read_json(path)
        if raw.get("kind") != "logistic":
            raise DataError(f"{path} is not a logistic model file")
        return cls(
            weights=np.asarray(raw["weights"], dtype=float),
            bias=float(raw["bias"]),
            l2_lambda=float(raw["l2_lambda"]),
            class_weights=tuple(raw["class_weights"]),
            n_iters=int(raw.get("n_iters", 0)),
            schema_hash=raw.get("schema_hash"),
        )


def _check_training_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise DataError("features contain non-finite values")
    if np.any((y != 0) & (y != 1)):
        raise DataError("labels must be binary")
    if np.all(y == y[0]):
        raise DataError("training requires both classes present")
    return X, y


def loss_and_grad(
    weights: np.ndarray,
    bias: float,
    X: np.ndarray,
    y: np.ndarray,
    sample_weights: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray, float]:
    """Objective value plus analytic gradient (weights, bias)."""
    n = X.shape[0]
    z = X @ weights + bias
    # stable log(1 + exp(-|z|)) + max(z,0) - y*z
    nll = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - y * z
    loss = float(np.sum(sample_weights * nll) / n) + 0.5 * l2_lambda * float(weights @ weights)
    residual = sample_weights * (sigmoid(z) - y)
    grad_w = X.T @ residual / n + l2_lambda * weights
    grad_b = float(np.sum(residual) / n)
    return loss, grad_w, grad_b


def train_logistic(X, y, config: LogisticConfig | None = None) -> LogisticModel:
    """Deterministic full-batch descent with Armijo backtracking."""
    if config is None:
        config = LogisticConfig()
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    w0, w1 = class_weights(y, config.class_weighted)
    sample_weights = np.where(y == 1, w1, w0)
    if config.init_seed is None:
        weights = np.zeros(d)
        bias = 0.0
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.init_seed])))
        weights = rng.normal(0.0, 0.01, size=d)
        bias = float(rng.normal(0.0, 0.01))
    loss, grad_w, grad_b = loss_and_grad(weights, bias, X, y, sample_weights, config.l2_lambda)
    step = 1.0
    iters = 0
    for _ in range(config.max_iters):
        grad_norm = max(float(np.max(np.abs(grad_w))) if d else 0.0, abs(grad_b))
        if grad_norm <= config.tol:
            break
        iters += 1
        g_sq = float(grad_w @ grad_w) + grad_b * grad_b
        step = min(step * 2.0, 1e6)
        while True:
            cand_w = weights - step * grad_w
            cand_b = bias - step * grad_b
            cand_loss, cand_gw, cand_gb = loss_and_grad(
                cand_w, cand_b, X, y, sample_weights, config.l2_lambda
            )
            if cand_loss <= loss - 1e-4 * step * g_sq or step < 1e-18:
                break
            step *= 0.5
        weights, bias, loss, grad_w, grad_b = cand_w, cand_b, cand_loss, cand_gw, cand_gb
    return LogisticModel(
        weights=weights,
        bias=bias,
        l2_lambda=config.l2_lambda,
        class_weights=(w0, w1),
        n_iters=iters,
    )
