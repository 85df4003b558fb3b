"""Primal-dual interior-point solver for standard-form linear programs.

    minimize c^T x  subject to  A x = b,  x >= 0

Mehrotra predictor-corrector. The constraint matrix is supplied as an
operator object so that structured problems can assemble and factor their
normal equations ``A diag(d) A^T`` cheaply; :class:`DenseOperator` covers
the general case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible"


class DenseOperator:
    """Plain dense constraint matrix."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)
        self.shape = self.a.shape

    def matvec(self, x):
        return self.a @ x

    def rmatvec(self, y):
        return self.a.T @ y

    def normal_solver(self, d):
        m = (self.a * d) @ self.a.T
        factor = _cholesky(m)
        return lambda r: scipy.linalg.cho_solve(factor, r, check_finite=False)


class SplitBoxOperator:
    """Constraints ``K(u - v) + s1 = h1`` and ``-K(u - v) + s2 = h2``.

    Variables are stacked as ``x = [u, v, s1, s2]`` with ``u, v`` of length
    ``K.shape[1]`` and ``s1, s2`` of length ``K.shape[0]``. This is the shape
    of any ``|K beta - h|_inf <= delta`` constraint after splitting ``beta``.
    The normal equations reduce to one p x p positive-definite solve.
    """

    def __init__(self, k):
        self.k = np.asarray(k, dtype=float)
        p, n = self.k.shape
        self.p, self.n = p, n
        self.shape = (2 * p, 2 * n + 2 * p)

    def split(self, x):
        n, p = self.n, self.p
        return x[:n], x[n:2 * n], x[2 * n:2 * n + p], x[2 * n + p:]

    def matvec(self, x):
        u, v, s1, s2 = self.split(x)
        kb = self.k @ (u - v)
        return np.concatenate([kb + s1, -kb + s2])

    def rmatvec(self, y):
        y1, y2 = y[:self.p], y[self.p:]
        g = self.k.T @ (y1 - y2)
        return np.concatenate([g, -g, y1, y2])

    def normal_solver(self, d):
        du, dv, d1, d2 = self.split(d)
        h = (self.k * (du + dv)) @ self.k.T
        # [[H + D1, -H], [-H, H + D2]] [a; b] = [r1; r2]. With s = a - b:
        # (H + D1 D2 / (D1 + D2)) s = (D2 r1 - D1 r2) / (D1 + D2), then
        # a = (r1 - H s) / D1 and b = (r2 + H s) / D2. Only the division by the
        # larger of D1, D2 is used per component; one of them tends to zero at
        # the optimum.
        # Written with the weight t = D1 / (D1 + D2) so nothing overflows when
        # one of D1, D2 is huge.
        use_a = d1 >= d2
        t = np.where(use_a, 1.0 / (1.0 + d2 / d1), d1 / (d1 + d2))
        h_red = h.copy()
        h_red[np.diag_indices_from(h_red)] += np.where(use_a, d2 * t, d1 * (1.0 - t))
        factor = _cholesky(h_red)

        def solve(r):
            r1, r2 = r[:self.p], r[self.p:]
            s = scipy.linalg.cho_solve(factor, (1.0 - t) * r1 - t * r2, check_finite=False)
            hs = h @ s
            a = np.where(use_a, (r1 - hs) / d1, 0.0)
            b = np.where(use_a, 0.0, (r2 + hs) / d2)
            a = np.where(use_a, a, b + s)
            b = np.where(use_a, a - s, b)
            return np.concatenate([a, b])

        return solve


def _cholesky(m):
    try:
        return scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        # Near the optimum the scaling spans many decades; a relative jitter
        # restores definiteness without moving the solution measurably.
        jitter = 1e-14 * max(1.0, float(np.abs(np.diag(m)).max()))
        m = m + jitter * np.eye(m.shape[0])
        return scipy.linalg.cho_factor(m, lower=True, check_finite=False)


@dataclass
class LPResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: str
    iterations: int
    primal_objective: float
    dual_objective: float
    primal_residual: float  # |b - A x|_inf
    dual_residual: float  # |c - A^T y - z|_inf

    @property
    def relative_gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective) / (1.0 + abs(self.primal_objective))


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def _merit(rp, rd, pobj, dobj, b_scale, c_scale):
    return max(np.abs(rp).max() / b_scale, np.abs(rd).max() / c_scale,
               abs(pobj - dobj) / (1.0 + abs(pobj)))


def _farkas(op, b, y, tol: float = 1e-8) -> bool:
    """True when ``y`` certifies primal infeasibility: ``A^T y <= 0`` and ``b^T y > 0``."""
    norm = np.abs(y).max()
    if not np.isfinite(norm) or norm == 0:
        return False
    yn = y / norm
    return bool(b @ yn > tol * (1.0 + np.abs(b).max()) and op.rmatvec(yn).max() <= tol)


def solve_standard_form(c, op, b, tol: float = 1e-8, max_iter: int = 200,
                        accept_tol: float = 1e-6, divergence: float = 1e12,
                        refine: int = 2, stall: int = 15) -> LPResult:
    """Solve ``min c^T x, A x = b, x >= 0`` with ``A`` given by ``op``.

    Converges when relative primal and dual infeasibility and the relative
    duality gap all fall below ``tol``. If progress stalls first (no better
    iterate for ``stall`` iterations, or the iterates diverge), the best
    iterate seen is returned; it still counts as optimal when its merit is
    below ``accept_tol``, and is otherwise reported as ``max-iterations``. Iterates whose
    norm exceeds ``divergence`` times the data scale end the solve; the status
    is infeasible only if the dual iterate is a Farkas certificate.
    Each Newton solve gets ``refine`` rounds of iterative refinement.
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    n = c.size
    b_scale = 1.0 + np.abs(b).max(initial=0.0)
    c_scale = 1.0 + np.abs(c).max(initial=0.0)

    # Mehrotra's starting point from the least-norm primal and least-squares dual.
    solve = op.normal_solver(np.ones(n))
    x = op.rmatvec(solve(b))
    y = solve(op.matvec(c))
    z = c - op.rmatvec(y)
    x = x + max(-1.5 * x.min(), 0.0)
    z = z + max(-1.5 * z.min(), 0.0)
    x = x + max(0.5 * (x @ z) / max(z.sum(), 1e-300), 1.0)
    z = z + max(0.5 * (x @ z) / max(x.sum(), 1e-300), 1e-8 * c_scale)

    best = (np.inf, x, y, z, 0)
    status = MAX_ITERATIONS
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - op.matvec(x)
        rd = c - op.rmatvec(y) - z
        merit = _merit(rp, rd, float(c @ x), float(b @ y), b_scale, c_scale)
        if merit < best[0]:
            best = (merit, x, y, z, it)
        if merit <= tol:
            status = OPTIMAL
            break
        if max(np.abs(x).max(), np.abs(y).max()) > divergence * max(b_scale, c_scale):
            # Large duals alone are expected for thin feasible slabs.
            status = INFEASIBLE if _farkas(op, b, y) else MAX_ITERATIONS
            break
        if it - best[4] >= stall:
            break
        mu = float(x @ z) / n
        d = x / z
        solve = op.normal_solver(d)

        def normal_solve(r):
            dy = solve(r)
            for _ in range(refine):
                dy = dy + solve(r - op.matvec(d * op.rmatvec(dy)))
            return dy

        def direction(rc):
            dy = normal_solve(rp - op.matvec((rc - x * rd) / z))
            dx = (rc - x * rd) / z + d * op.rmatvec(dy)
            dz = rd - op.rmatvec(dy)
            return dx, dy, dz

        dx, dy, dz = direction(-x * z)
        ap, ad = _max_step(x, dx), _max_step(z, dz)
        mu_aff = float((x + ap * dx) @ (z + ad * dz)) / n
        sigma = (mu_aff / mu) ** 3
        dx, dy, dz = direction(sigma * mu - x * z - dx * dz)
        eta = min(0.9999, max(0.9, 1.0 - mu))
        ap = min(1.0, eta * _max_step(x, dx))
        ad = min(1.0, eta * _max_step(z, dz))
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz

    if status != OPTIMAL and status != INFEASIBLE:
        merit, x, y, z, _ = best
        if merit <= accept_tol:
            status = OPTIMAL
    rp = b - op.matvec(x)
    rd = c - op.rmatvec(y) - z
    return LPResult(x, y, z, status, it, float(c @ x), float(b @ y),
                    float(np.abs(rp).max()), float(np.abs(rd).max()))
