"""Sparse signals, noisy linear observations, Dantzig-selector recovery and ideal-estimator MSE."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import lp
from .errors import NumericalError, ShapeError, ValidationError
from .numerics import RngStream, as_matrix

CORRELATION = "correlation"
RESIDUAL = "residual"


@dataclass(frozen=True)
class SparseSignal:
    dimension: int
    support: np.ndarray  # distinct indices
    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=int)
        if len(np.unique(s)) != len(s) or (len(s) and (s.min() < 0 or s.max() >= self.dimension)):
            raise ValidationError("support indices must be distinct and inside [0, dimension)")
        if len(s) != len(self.values):
            raise ShapeError("support and values differ in length")

    def dense(self) -> np.ndarray:
        beta = np.zeros(self.dimension)
        beta[self.support] = self.values
        return beta


@dataclass(frozen=True)
class CsInstance:
    signal: SparseSignal
    sensing: np.ndarray  # unscaled W, M x N
    rho: float
    observations: np.ndarray
    noise_sigma: float  # standard deviation of the observation noise
    noise_seed: tuple[int, int] | None = None

    @property
    def scaled_sensing(self) -> np.ndarray:
        return self.rho * self.sensing


@dataclass(frozen=True)
class CsResult:
    estimate: np.ndarray
    mse: float | None  # None when the ideal-risk denominator is zero
    constraint_level: float
    solver_status: str
    constraint: str = CORRELATION
    duality_gap: float = 0.0
    constraint_violation: float = 0.0  # max(0, |constraint|_inf - delta)
    iterations: int = 0  # summed over all LP solves
    refit_threshold: float | None = None  # set when the estimate is a support refit


def gen_sparse_signal(dimension: int, sparsity: int, rng: RngStream) -> SparseSignal:
    """Random support of size ``sparsity``; values ``sign * (1 + |a|)`` with a ~ N(0, 1)."""
    if dimension < 1:
        raise ValidationError("dimension must be positive")
    if not 0 <= sparsity <= dimension:
        raise ShapeError(f"sparsity {sparsity} exceeds dimension {dimension}")
    support = rng.sample_indices(dimension, sparsity)
    signs = rng.rademacher(sparsity)
    mags = 1.0 + np.abs(rng.normal(sparsity))
    return SparseSignal(dimension, support, signs * mags)


def observe(signal: SparseSignal, sensing, rho: float, noise_sigma: float,
            rng: RngStream) -> CsInstance:
    """``y = rho W beta + eps`` with eps i.i.d. N(0, noise_sigma^2)."""
    w = as_matrix(sensing, "sensing")
    if w.shape[1] != signal.dimension:
        raise ShapeError(f"sensing has {w.shape[1]} columns, signal has dimension {signal.dimension}")
    if rho <= 0 or noise_sigma < 0:
        raise ValidationError("rho must be positive and noise_sigma nonnegative")
    noise = rng.normal(w.shape[0], var=noise_sigma ** 2)
    y = rho * (w @ signal.dense()) + noise
    return CsInstance(signal, w, rho, y, noise_sigma, (rng.seed.value, rng.seed.stream))


def universal_delta(instance: CsInstance, constraint: str = CORRELATION) -> float:
    """Classical threshold ``sigma * sqrt(2 log n)``, in the units of the chosen constraint.

    For the correlation form it is multiplied by the largest column norm of
    ``rho W`` and ``n`` is the signal dimension; for the residual form ``n`` is
    the number of observations.
    """
    a = instance.scaled_sensing
    if constraint == CORRELATION:
        return instance.noise_sigma * math.sqrt(2 * math.log(a.shape[1])) * float(
            np.linalg.norm(a, axis=0).max())
    return instance.noise_sigma * math.sqrt(2 * math.log(a.shape[0]))


def _constraint_parts(a: np.ndarray, y: np.ndarray, constraint: str):
    if constraint == CORRELATION:
        return a.T @ a, a.T @ y
    if constraint == RESIDUAL:
        return a, y
    raise ValidationError(f"unknown constraint form {constraint!r}")


def l1_recover(a, y, delta: float, constraint: str = CORRELATION, tol: float = 1e-8,
               max_iter: int = 200, weights=None):
    """Minimise ``sum_j w_j |beta_j|`` subject to ``|K beta - h|_inf <= delta``.

    ``(K, h)`` is ``(A^T A, A^T y)`` for the correlation form and ``(A, y)``
    for the residual form. Solved as an LP over ``beta = u - v``, ``u, v >= 0``.
    ``weights=None`` is the plain l1 norm. Returns ``(beta, LPResult, violation)``.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    a = as_matrix(a, "sensing")
    y = np.asarray(y, dtype=float)
    k, h = _constraint_parts(a, y, constraint)
    p, n = k.shape
    wt = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if wt.shape != (n,) or np.any(wt <= 0) or not np.all(np.isfinite(wt)):
        raise ValidationError("weights must be positive and finite, one per coefficient")
    op = lp.SplitBoxOperator(k)
    c = np.concatenate([wt, wt, np.zeros(2 * p)])
    b = np.concatenate([h + delta, delta - h])
    res = lp.solve_standard_form(c, op, b, tol=tol, max_iter=max_iter)
    u, v, _, _ = op.split(res.x)
    beta = u - v
    violation = max(0.0, float(np.abs(k @ beta - h).max()) - delta)
    return beta, res, violation


def dantzig_select(instance: CsInstance, delta: float | None = None,
                   constraint: str = CORRELATION, mse_sigma: float | None = None) -> CsResult:
    """Dantzig-selector estimate of the instance's sparse signal.

    ``delta=None`` uses :func:`universal_delta`. The MSE is computed against
    the true signal with ``mse_sigma`` (default: the instance noise level).
    """
    if delta is None:
        delta = universal_delta(instance, constraint)
    beta, res, violation = l1_recover(instance.scaled_sensing, instance.observations, delta,
                                      constraint)
    sigma = instance.noise_sigma if mse_sigma is None else mse_sigma
    try:
        mse = ideal_mse(instance.signal, beta, sigma)
    except NumericalError:
        mse = None
    return CsResult(beta, mse, delta, res.status, constraint, res.relative_gap, violation,
                    res.iterations)


def support_threshold(instance: CsInstance, delta: float) -> float:
    """``delta / max_j |rho W_j|^2``: the coefficient change a correlation shift of
    ``delta`` produces on the strongest column."""
    return delta / float((np.linalg.norm(instance.scaled_sensing, axis=0) ** 2).max())


def refit_support(instance: CsInstance, estimate, threshold: float) -> np.ndarray:
    """Least-squares fit of the observations on ``{j : |estimate_j| > threshold}``."""
    est = np.asarray(estimate, dtype=float)
    support = np.flatnonzero(np.abs(est) > threshold)
    out = np.zeros_like(est)
    if len(support):
        a = instance.scaled_sensing[:, support]
        out[support] = np.linalg.lstsq(a, instance.observations, rcond=None)[0]
    return out


def gauss_dantzig_select(instance: CsInstance, delta: float | None = None,
                         constraint: str = CORRELATION, threshold: float | None = None,
                         mse_sigma: float | None = None, reweight: int = 1,
                         reweight_eps: float = 0.1) -> CsResult:
    """Dantzig selector, optional reweighted passes, then a least-squares refit.

    The plain l1 solution shrinks every coefficient by roughly ``delta`` and
    can push a large coefficient below the noise floor when the columns are
    strongly correlated. Each reweighted pass solves the same program with
    weights ``1 / (|beta_j| + reweight_eps)`` from the previous estimate,
    which relaxes the penalty on coefficients that are already large. The
    support ``{j : |beta_j| > threshold}`` of the final estimate is then
    refit by least squares. ``threshold=None`` uses :func:`support_threshold`.
    Solver diagnostics in the result refer to the last LP solved.
    """
    if reweight < 0 or reweight_eps <= 0:
        raise ValidationError("reweight must be >= 0 and reweight_eps positive")
    ds = dantzig_select(instance, delta, constraint, mse_sigma)
    beta, level = ds.estimate, ds.constraint_level
    for _ in range(reweight):
        beta, res, violation = l1_recover(instance.scaled_sensing, instance.observations, level,
                                          constraint, weights=1.0 / (np.abs(beta) + reweight_eps))
        ds = replace(ds, solver_status=res.status, duality_gap=res.relative_gap,
                     constraint_violation=violation, iterations=ds.iterations + res.iterations)
    if threshold is None:
        threshold = support_threshold(instance, level)
    refit = refit_support(instance, beta, threshold)
    sigma = instance.noise_sigma if mse_sigma is None else mse_sigma
    try:
        mse = ideal_mse(instance.signal, refit, sigma)
    except NumericalError:
        mse = None
    return replace(ds, estimate=refit, mse=mse, refit_threshold=threshold)


def ideal_mse(truth, estimate, noise_sigma: float) -> float:
    """``sqrt(|beta - beta_hat|^2 / sum_j min(beta_j^2, sigma^2))``."""
    beta = truth.dense() if isinstance(truth, SparseSignal) else np.asarray(truth, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if beta.shape != est.shape:
        raise ShapeError(f"truth has shape {beta.shape}, estimate {est.shape}")
    denom = float(np.minimum(beta ** 2, noise_sigma ** 2).sum())
    if denom <= 0:
        raise NumericalError("ideal-risk denominator is zero (zero signal or zero noise)")
    return math.sqrt(float(((beta - est) ** 2).sum()) / denom)
