"""Monte-Carlo estimates of near-isometry (NII) and restricted-isometry (RII) intervals.

Both estimators draw random probe vectors ``x`` with U[-1, 1] entries and
report the extreme gains ``min ||rho W x|| / ||x||`` and ``max ...``.
The RII variant restricts each probe to a random support of fixed size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .numerics import RngStream, as_matrix, largest_singular_value, smallest_singular_value

DEFAULT_SAMPLES = 10_000

# Probes are drawn and evaluated in blocks of this many columns. The draws are
# consumed from the stream in sample order, so the block size never changes
# which vectors are used.
_BLOCK = 2_000


@dataclass(frozen=True)
class IsometryInterval:
    lower: float
    upper: float
    samples: int
    restriction_sparsity: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValidationError("interval endpoints must be finite")
        if self.lower < 0 or self.lower > self.upper:
            raise ValidationError(f"invalid interval [{self.lower}, {self.upper}]")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def _gains(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(w @ x, axis=0) / np.linalg.norm(x, axis=0)


def _draw_dense(rng: RngStream, n: int, count: int) -> np.ndarray:
    x = np.ascontiguousarray(rng.uniform_pm1((count, n)).T)
    zero = np.flatnonzero(~np.any(x, axis=0))
    for j in zero:  # probability-zero guard
        while not np.any(x[:, j]):
            x[:, j] = rng.uniform_pm1(n)
    return x


def _draw_sparse(rng: RngStream, n: int, k: int, count: int) -> np.ndarray:
    x = np.zeros((n, count))
    for j in range(count):
        support = rng.sample_indices(n, k)
        vals = rng.uniform_pm1(k)
        while not np.any(vals):
            vals = rng.uniform_pm1(k)
        x[support, j] = vals
    return x


def _extremes(w, rho, samples, draw):
    if samples < 1:
        raise ValidationError("samples must be positive")
    lo, hi = np.inf, -np.inf
    done = 0
    while done < samples:
        count = min(_BLOCK, samples - done)
        g = _gains(w, draw(count))
        lo, hi = min(lo, g.min()), max(hi, g.max())
        done += count
    # rho applied after the reduction keeps the estimate exactly rho-equivariant.
    return rho * float(lo), rho * float(hi)


def estimate_nii(w, rho: float, samples: int, rng: RngStream) -> IsometryInterval:
    """Near-isometry interval of ``rho * w`` from ``samples`` dense probes."""
    w = as_matrix(w, "w")
    if rho <= 0:
        raise ValidationError("rho must be positive")
    lo, hi = _extremes(w, rho, samples, lambda c: _draw_dense(rng, w.shape[1], c))
    return IsometryInterval(lo, hi, samples)


def estimate_rii(w, rho: float, sparsity: int, samples: int, rng: RngStream) -> IsometryInterval:
    """Restricted-isometry interval of ``rho * w`` over ``sparsity``-sparse probes."""
    w = as_matrix(w, "w")
    if rho <= 0:
        raise ValidationError("rho must be positive")
    if not 1 <= sparsity <= w.shape[1]:
        raise ShapeError(f"sparsity {sparsity} must lie in [1, {w.shape[1]}]")
    lo, hi = _extremes(w, rho, samples, lambda c: _draw_sparse(rng, w.shape[1], sparsity, c))
    return IsometryInterval(lo, hi, samples, sparsity)


def singular_value_interval(w, rho: float = 1.0) -> tuple[float, float]:
    """Exact ``[sigma_min, sigma_max]`` of ``rho * w``.

    Diagnostic only: this is the true gain range over all of R^cols, which is
    much wider than what the sampled estimators report.
    """
    w = as_matrix(w, "w")
    return rho * smallest_singular_value(w), rho * largest_singular_value(w)
