"""Dense linear-algebra kernels and reproducible random streams.

Matrices are plain 2-D ``float64`` numpy arrays throughout the package; the
helpers here validate shape and finiteness at the boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, ShapeError, SingularityError, ValidationError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000

_U64 = (1 << 64) - 1


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array, raising on anything else."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return a


def spectral_radius(m, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Largest eigenvalue modulus of a square matrix.

    All eigenvalues are computed by LAPACK's Hessenberg reduction followed by
    implicitly double-shifted QR, which handles a dominant complex-conjugate
    pair (where plain power iteration stalls). LAPACK converges to machine
    precision, so any ``tol`` >= 1e-14 is met; ``tol`` and ``max_iter`` are
    validated for interface parity with :func:`largest_singular_value`.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"spectral radius needs a square matrix, got {a.shape}")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if max_iter < 1:
        raise ValidationError("max_iter must be positive")
    try:
        eig = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration did not converge: {exc}", float("nan")) from exc
    return float(np.max(np.abs(eig)))


def largest_singular_value(m, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Largest singular value by power iteration on the smaller Gram matrix.

    Stops once the eigen-residual ``||G x - lam x||`` falls below ``tol * lam``;
    the square root then carries relative error below ``tol``.
    """
    a = as_matrix(m)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    gram = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    n = gram.shape[0]
    # Fixed start vector keeps the result a deterministic function of m.
    x = np.random.default_rng(0x5EED).standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = gram @ x
        lam = float(x @ y)
        if lam <= 0.0:
            # x lies in the null space; only possible for the zero matrix here.
            if not np.any(gram):
                return 0.0
            x = np.ones(n) / np.sqrt(n)
            continue
        if np.linalg.norm(y - lam * x) <= tol * lam:
            return float(np.sqrt(lam))
        x = y / np.linalg.norm(y)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", float(np.sqrt(max(lam, 0.0)))
    )


def smallest_singular_value(m, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Minimum of ``||m x|| / ||x||`` over nonzero ``x`` in R^cols.

    Zero for wide matrices. Otherwise power iteration on the inverse Gram
    matrix, applied through its Cholesky factor.
    """
    a = as_matrix(m)
    if a.shape[0] < a.shape[1]:
        return 0.0
    try:
        factor = scipy.linalg.cho_factor(a.T @ a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return 0.0
    n = a.shape[1]
    x = np.random.default_rng(0x5EED).standard_normal(n)
    x /= np.linalg.norm(x)
    mu = 0.0
    for _ in range(max_iter):
        y = scipy.linalg.cho_solve(factor, x, check_finite=False)
        mu = float(x @ y)
        if np.linalg.norm(y - mu * x) <= tol * mu:
            return float(1.0 / np.sqrt(mu))
        x = y / np.linalg.norm(y)
    raise ConvergenceError(
        f"inverse iteration did not converge in {max_iter} iterations", float(1.0 / np.sqrt(mu))
    )


def ridge_solve(x_states, y_targets, lam: float) -> np.ndarray:
    """Solve ``W (X X^T + lam I) = Y X^T`` for the K x N readout ``W``.

    Uses a Cholesky factorization of the symmetric system. The returned
    matrix satisfies the normal equations to about ``1e-8 * max(1, |Y X^T|_max)``
    whenever the system is reasonably conditioned.
    """
    x = as_matrix(x_states, "x_states")
    y = as_matrix(y_targets, "y_targets")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"states have {x.shape[1]} columns but targets have {y.shape[1]}")
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += lam
    rhs = y @ x.T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(
            "X X^T + lambda I is not positive definite; use a positive lambda"
        ) from exc
    # Cholesky can succeed on numerically singular systems; reject those too.
    diag = np.abs(np.diag(factor[0]))
    if diag.min() <= np.sqrt(np.finfo(float).eps) * diag.max():
        raise SingularityError("X X^T + lambda I is numerically singular; use a positive lambda")
    return scipy.linalg.cho_solve(factor, rhs.T, check_finite=False).T


@dataclass(frozen=True)
class Seed:
    """A 64-bit seed plus a substream index.

    Equal ``(value, stream)`` pairs always yield the same random sequence.
    """

    value: int
    stream: int = 0

    def __post_init__(self):
        for name in ("value", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= _U64:
                raise ValidationError(f"seed {name} must be a 64-bit unsigned integer, got {v!r}")

    def substream(self, stream: int) -> "Seed":
        return Seed(self.value, stream)


class RngStream:
    """Reproducible scalar source backed by PCG64 keyed on a :class:`Seed`."""

    def __init__(self, seed: Seed):
        self.seed = seed
        ss = np.random.SeedSequence(entropy=int(seed.value), spawn_key=(int(seed.stream),))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def uniform_pm1(self, size=None):
        """Uniform on [-1, 1]."""
        return self.gen.uniform(-1.0, 1.0, size)

    def rademacher(self, size=None):
        """Uniform on {-1, 1}."""
        return 2.0 * self.gen.integers(0, 2, size) - 1.0

    def normal(self, size=None, var: float = 1.0):
        return self.gen.standard_normal(size) * np.sqrt(var)

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, uniformly, in random order."""
        if not 0 <= k <= n:
            raise ShapeError(f"cannot draw {k} distinct indices from {n}")
        return self.gen.choice(n, size=k, replace=False)

    def sphere(self, n: int, count: int | None = None) -> np.ndarray:
        """Uniform point(s) on the unit sphere in R^n; shape ``(n,)`` or ``(n, count)``."""
        shape = (n,) if count is None else (n, count)
        while True:
            z = self.gen.standard_normal(shape)
            norms = np.linalg.norm(z, axis=0)
            if np.all(norms > 0):
                return z / norms


def rng_stream(seed: Seed) -> RngStream:
    return RngStream(seed)
