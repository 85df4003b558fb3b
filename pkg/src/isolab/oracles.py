"""Brute-force reference computations used by the test suite and ``selfcheck``.

Nothing in here touches ``numpy.linalg`` or LAPACK: characteristic
polynomials come from Faddeev-LeVerrier in plain Python, roots from
Durand-Kerner iteration, inverses from cofactor expansion.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def _matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum(a[i][p] * b[p][j] for p in range(k)) for j in range(m)] for i in range(n)]


def _to_lists(m):
    return [[float(v) for v in row] for row in np.asarray(m, dtype=float)]


def charpoly(m) -> list[float]:
    """Coefficients ``[1, c1, ..., cn]`` of ``det(x I - m)`` (Faddeev-LeVerrier)."""
    a = _to_lists(m)
    n = len(a)
    coeffs = [1.0]
    mk = [[0.0] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I ; c_k = -tr(A M_k) / k
        for i in range(n):
            mk[i][i] += coeffs[-1]
        am = _matmul(a, mk)
        coeffs.append(-sum(am[i][i] for i in range(n)) / k)
        mk = am
    return coeffs


def poly_roots(coeffs, iters: int = 2000) -> list[complex]:
    """All complex roots of a monic polynomial by Durand-Kerner, Newton-polished."""
    c = [complex(v) for v in coeffs]
    n = len(c) - 1

    def p(z):
        acc = 0j
        for v in c:
            acc = acc * z + v
        return acc

    def dp(z):
        acc = 0j
        for i, v in enumerate(c[:-1]):
            acc = acc * z + v * (n - i)
        return acc

    radius = 1.0 + max(abs(v) for v in c[1:])
    roots = [radius * (0.4 + 0.9j) ** k for k in range(n)]
    for _ in range(iters):
        delta = 0.0
        new = []
        for i, z in enumerate(roots):
            denom = 1 + 0j
            for j, w in enumerate(roots):
                if i != j:
                    denom *= z - w
            if denom == 0:
                denom = 1e-300
            step = p(z) / denom
            new.append(z - step)
            delta = max(delta, abs(step))
        roots = new
        if delta < 1e-15 * radius:
            break
    polished = []
    for z in roots:
        for _ in range(5):
            d = dp(z)
            if d == 0:
                break
            z = z - p(z) / d
        polished.append(z)
    return polished


def spectral_radius_oracle(m) -> float:
    return max(abs(r) for r in poly_roots(charpoly(m)))


def singular_values_oracle(m) -> list[float]:
    """Singular values (descending) from roots of the smaller Gram matrix's characteristic polynomial."""
    a = np.asarray(m, dtype=float)
    g = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    eig = sorted((max(r.real, 0.0) for r in poly_roots(charpoly(g))), reverse=True)
    return [math.sqrt(e) for e in eig]


def det_cofactor(a) -> float:
    """Determinant by cofactor expansion along the first row."""
    if isinstance(a, np.ndarray):
        a = _to_lists(a)
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in a[1:]]
        total += (-1) ** j * a[0][j] * det_cofactor(minor)
    return total


def inverse_cofactor(m) -> list[list[float]]:
    """Inverse via the adjugate: ``inv[j][i] = (-1)^(i+j) det(minor_ij) / det``."""
    a = _to_lists(m)
    n = len(a)
    d = det_cofactor(a)
    if n == 1:
        return [[1.0 / d]]
    inv = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(a) if k != i]
            inv[j][i] = (-1) ** (i + j) * det_cofactor(minor) / d
    return inv


def ridge_oracle(x, y, lam: float) -> np.ndarray:
    """``Y X^T (X X^T + lam I)^{-1}`` with the inverse taken by cofactors."""
    xl, yl = _to_lists(x), _to_lists(y)
    n, t = len(xl), len(xl[0])
    gram = [[sum(xl[i][s] * xl[j][s] for s in range(t)) + (lam if i == j else 0.0)
             for j in range(n)] for i in range(n)]
    yxt = [[sum(yr[s] * xl[j][s] for s in range(t)) for j in range(n)] for yr in yl]
    return np.array(_matmul(yxt, inverse_cofactor(gram)))


def _batched_inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of a stack of k x k matrices (k <= 4) by explicit cofactors."""
    k = g.shape[-1]
    cof = np.empty_like(g)
    for i in range(k):
        for j in range(k):
            rows = [r for r in range(k) if r != i]
            cols = [c for c in range(k) if c != j]
            minor = g[:, rows][:, :, cols]
            cof[:, i, j] = (-1) ** (i + j) * _batched_det(minor)
    det = np.einsum("bj,bj->b", g[:, 0, :], cof[:, 0, :])
    return np.transpose(cof, (0, 2, 1)) / det[:, None, None]


def _batched_det(g: np.ndarray) -> np.ndarray:
    k = g.shape[-1]
    if k == 0:
        return np.ones(g.shape[0])
    if k == 1:
        return g[:, 0, 0]
    total = np.zeros(g.shape[0])
    for j in range(k):
        cols = [c for c in range(k) if c != j]
        total += (-1) ** j * g[:, 0, j] * _batched_det(g[:, 1:][:, :, cols])
    return total


def best_subset_least_squares(a, y, size: int, chunk: int = 8192):
    """Exhaustive search over every ``size``-subset of columns.

    Returns ``(support, coefficients, residual_norm)`` for the subset whose
    least-squares fit leaves the smallest residual.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    gram = a.T @ a
    corr = a.T @ y
    best = (None, None, math.inf)
    combos = itertools.combinations(range(a.shape[1]), size)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        g = gram[block[:, :, None], block[:, None, :]]
        rhs = corr[block]
        coef = np.einsum("bij,bj->bi", _batched_inverse(g), rhs)
        fitted = np.einsum("mbk,bk->bm", a[:, block], coef)
        res = np.linalg.norm(fitted - y[None, :], axis=1)
        i = int(np.argmin(res))
        if res[i] < best[2]:
            best = (tuple(int(v) for v in block[i]), coef[i], float(res[i]))
    return best

