"""Echo state network dynamics, ridge readout, pointwise classification and class separation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ensembles import GenMethod, WeightSpec
from .errors import ShapeError, ValidationError
from .numerics import as_matrix, ridge_solve

ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "identity": lambda v: v,
}


@dataclass(frozen=True)
class EsnConfig:
    n_nodes: int = 200
    leak: float = 1.0
    input_scale: float = 1.0
    bias: float = np.pi / 4
    activation: str = "tanh"
    weight_spec: WeightSpec | None = None
    input_weights: np.ndarray | None = None
    ridge_lambda: float | None = None  # None: 1e-6 * trace(X X^T) / N
    washout: int = 0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValidationError("n_nodes must be positive")
        if not 0.0 <= self.leak <= 1.0:
            raise ValidationError(f"leak must lie in [0, 1], got {self.leak}")
        if self.input_scale <= 0:
            raise ValidationError("input_scale must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.ridge_lambda is not None and self.ridge_lambda < 0:
            raise ValidationError("ridge_lambda must be nonnegative")
        if self.washout < 0:
            raise ValidationError("washout must be nonnegative")
        if self.weight_spec is None:
            object.__setattr__(self, "weight_spec",
                               WeightSpec(GenMethod("M1"), rows=self.n_nodes, cols=self.n_nodes))
        ws = self.weight_spec
        if ws.rows != ws.cols or ws.rows != self.n_nodes:
            raise ValidationError(
                f"weight_spec must be {self.n_nodes}x{self.n_nodes}, got {ws.rows}x{ws.cols}")
        if self.input_weights is None:
            object.__setattr__(self, "input_weights", np.ones((self.n_nodes, 1)))
        w_in = as_matrix(self.input_weights, "input_weights")
        if w_in.shape[0] != self.n_nodes:
            raise ValidationError(
                f"input_weights needs {self.n_nodes} rows, got {w_in.shape[0]}")
        object.__setattr__(self, "input_weights", w_in)


@dataclass(frozen=True)
class ReservoirStates:
    states: np.ndarray  # N x T
    labels: np.ndarray | None = None  # length T, 0-based class index

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != self.states.shape[1]:
            raise ShapeError("one label per state column is required")

    @staticmethod
    def concat(parts: Sequence["ReservoirStates"]) -> "ReservoirStates":
        states = np.hstack([p.states for p in parts])
        if any(p.labels is None for p in parts):
            return ReservoirStates(states)
        return ReservoirStates(states, np.concatenate([p.labels for p in parts]))

    def with_label(self, label: int) -> "ReservoirStates":
        return ReservoirStates(self.states, np.full(self.states.shape[1], label, dtype=int))


@dataclass(frozen=True)
class Readout:
    w_out: np.ndarray  # K x N
    lambda_used: float


def run_reservoir(cfg: EsnConfig, inputs, w_scaled) -> ReservoirStates:
    """Drive the reservoir with an L x T input from the zero state.

    ``w_scaled`` is the already-scaled recurrent matrix ``rho * W``. Column t
    of the result is the state after consuming input column t; the initial
    zero state itself is not returned, and the first ``cfg.washout`` columns
    are dropped.
    """
    a = as_matrix(inputs, "input")
    w = as_matrix(w_scaled, "w_scaled")
    w_in = cfg.input_weights
    if a.shape[0] != w_in.shape[1]:
        raise ShapeError(f"input has {a.shape[0]} rows but input_weights has {w_in.shape[1]} columns")
    if w.shape != (cfg.n_nodes, cfg.n_nodes):
        raise ShapeError(f"reservoir matrix must be {cfg.n_nodes}x{cfg.n_nodes}, got {w.shape}")
    f = ACTIVATIONS[cfg.activation]
    alpha = cfg.leak
    drive = cfg.input_scale * (w_in @ a) + cfg.bias  # input term for every t at once
    n, t_len = cfg.n_nodes, a.shape[1]
    out = np.empty((n, t_len))
    x = np.zeros(n)
    for t in range(t_len):
        x = (1.0 - alpha) * x + alpha * f(drive[:, t] + w @ x)
        out[:, t] = x
    return ReservoirStates(out[:, cfg.washout:])


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    y = np.zeros((n_classes, len(labels)))
    y[labels, np.arange(len(labels))] = 1.0
    return y


def default_lambda(states: np.ndarray) -> float:
    n = states.shape[0]
    return 1e-6 * float(np.einsum("ij,ij->", states, states)) / n


def train_readout(states: ReservoirStates, targets, lam: float | None = None) -> Readout:
    """Ridge readout ``Y X^T (X X^T + lam I)^{-1}``; ``lam=None`` picks the relative default."""
    x = as_matrix(states.states, "states")
    y = as_matrix(targets, "targets")
    if lam is None:
        lam = default_lambda(x)
    return Readout(ridge_solve(x, y, lam), lam)


def classify_pointwise(readout: Readout, states: ReservoirStates) -> np.ndarray:
    """Per-column argmax of ``W_out X``; ties go to the lowest class index."""
    if readout.w_out.shape[1] != states.states.shape[0]:
        raise ShapeError("readout and states disagree on the number of nodes")
    return np.argmax(readout.w_out @ states.states, axis=0)


@dataclass(frozen=True)
class Accuracy:
    overall: float
    per_class: tuple[float | None, ...]  # None where the class has no points


def accuracy(predicted, truth, n_classes: int | None = None) -> Accuracy:
    p = np.asarray(predicted, dtype=int)
    y = np.asarray(truth, dtype=int)
    if p.shape != y.shape:
        raise ShapeError("predicted and truth must have equal length")
    if len(y) == 0:
        raise ValidationError("accuracy of an empty prediction is undefined")
    k = n_classes if n_classes is not None else int(max(p.max(), y.max())) + 1
    hit = p == y
    per_class = []
    for c in range(k):
        mask = y == c
        per_class.append(100.0 * float(hit[mask].mean()) if mask.any() else None)
    return Accuracy(100.0 * float(hit.mean()), tuple(per_class))


def separation_ratio(runs: Sequence[ReservoirStates], labels: Sequence[int],
                     n_classes: int) -> tuple[np.ndarray, float]:
    """Per-timestep separation ratio ``d(t) / (1 + v(t))`` and its time average.

    ``runs`` holds one N x T state matrix per input sequence and ``labels`` the
    class of each. ``d`` averages the distance between class means over all
    K^2 ordered pairs (including the zero diagonal); ``v`` averages, over
    classes, the mean distance of each member to its class mean.
    """
    labels = np.asarray(labels, dtype=int)
    if len(runs) != len(labels):
        raise ShapeError("one label per run is required")
    stack = np.stack([r.states for r in runs])  # S x N x T
    if stack.ndim != 3:
        raise ShapeError("all runs must share N and T")
    means, spread = [], np.zeros(stack.shape[2])
    for k in range(n_classes):
        members = stack[labels == k]
        if len(members) == 0:
            raise ValidationError(f"class {k} has no input sequences")
        mk = members.mean(axis=0)
        means.append(mk)
        spread += np.linalg.norm(members - mk[None], axis=1).mean(axis=0)
    means = np.stack(means)  # K x N x T
    diffs = np.linalg.norm(means[:, None] - means[None, :], axis=2)  # K x K x T
    d = diffs.sum(axis=(0, 1)) / n_classes ** 2
    v = spread / n_classes
    sep = d / (1.0 + v)
    return sep, float(sep.mean())
