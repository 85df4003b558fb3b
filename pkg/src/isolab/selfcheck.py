"""Oracle comparisons for the numerical kernels, the LP solver and the isometry estimators.

Each check returns a :class:`Check`; :func:`run_all` collects them. The
command-line ``selfcheck`` subcommand prints one line per check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracles
from .csrecovery import CORRELATION, gen_sparse_signal, l1_recover
from .datasets import clean_wave
from .ensembles import GenMethod, ScaleMethod, WeightSpec, build
from .esn import EsnConfig, accuracy, run_reservoir, separation_ratio, ReservoirStates
from .isometry import estimate_nii, estimate_rii
from .lp import OPTIMAL
from .numerics import (RngStream, Seed, largest_singular_value, ridge_solve,
                       smallest_singular_value, spectral_radius)

SELFCHECK_SEED = 20240611


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _rng(stream: int) -> RngStream:
    return RngStream(Seed(SELFCHECK_SEED, stream))


def check_eigen_oracles(count: int = 100, rtol: float = 1e-6) -> Check:
    """Spectral radius and largest singular value against polynomial-root oracles."""
    worst = 0.0
    for size in (3, 4):
        for i in range(count):
            m = _rng(1000 * size + i).normal((size, size))
            for got, want in ((spectral_radius(m), oracles.spectral_radius_oracle(m)),
                              (largest_singular_value(m), oracles.singular_values_oracle(m)[0])):
                worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    return Check("numerics: eigen/singular oracles", worst <= rtol,
                 f"{2 * count} matrices, worst relative error {worst:.2e} (limit {rtol:g})")


def check_ridge_residual(count: int = 100, tol: float = 1e-8) -> Check:
    """Normal-equation residual ``|W (X X^T + lam I) - Y X^T|_max`` of the ridge solve."""
    worst = 0.0
    for i in range(count):
        rng = _rng(5000 + i)
        x = rng.normal((12, 40))
        y = rng.normal((3, 40))
        lam = 10.0 ** rng.gen.uniform(-4, 1)
        w = ridge_solve(x, y, lam)
        rhs = y @ x.T
        res = np.abs(w @ (x @ x.T + lam * np.eye(12)) - rhs).max() / max(1.0, np.abs(rhs).max())
        worst = max(worst, float(res))
    return Check("numerics: ridge normal-equation residual", worst <= tol,
                 f"{count} instances, worst scaled residual {worst:.2e} (limit {tol:g})")


def check_lp_support(count: int = 50, need: int = 48, gap_tol: float = 1e-6) -> Check:
    """Noiseless 20 x 60, 3-sparse recovery against the exhaustive subset oracle."""
    matches, worst_gap, optimal = 0, 0.0, 0
    for i in range(count):
        rng = _rng(7000 + i)
        a = rng.normal((20, 60), var=1.0 / 20)
        signal = gen_sparse_signal(60, 3, rng)
        y = a @ signal.dense()
        beta, res, _ = l1_recover(a, y, 1e-6, CORRELATION)
        support, _, _ = oracles.best_subset_least_squares(a, y, 3)
        found = tuple(sorted(np.flatnonzero(np.abs(beta) > 1e-4).tolist()))
        matches += found == tuple(sorted(support))
        if res.status == OPTIMAL:
            optimal += 1
            worst_gap = max(worst_gap, res.relative_gap)
    ok = matches >= need and worst_gap <= gap_tol
    return Check("lp: support vs exhaustive oracle", ok,
                 f"{matches}/{count} supports match (need {need}); {optimal} optimal, "
                 f"worst duality gap {worst_gap:.2e} (limit {gap_tol:g})")


def check_isometry_equivariance(count: int = 10) -> Check:
    """Same stream: the interval for rho equals rho times the interval for 1, and
    doubling the matrix doubles the interval."""
    bad = 0
    for i in range(count):
        w = _rng(9000 + i).normal((15, 15))
        for est in (lambda m, r, s: estimate_nii(m, r, 500, s),
                    lambda m, r, s: estimate_rii(m, r, 4, 500, s)):
            base = est(w, 1.0, _rng(9100 + i))
            for rho in (0.3, 2.5, 7.0):
                iv = est(w, rho, _rng(9100 + i))
                bad += (iv.lower, iv.upper) != (rho * base.lower, rho * base.upper)
            iv = est(2.0 * w, 1.0, _rng(9100 + i))
            bad += (iv.lower, iv.upper) != (2.0 * base.lower, 2.0 * base.upper)
    return Check("isometry: scaling equivariance", bad == 0, f"{bad} mismatches over {count} matrices")


def check_isometry_identity() -> Check:
    bad = []
    for rho in (0.25, 1.0, 3.0):
        for iv in (estimate_nii(np.eye(30), rho, 1000, _rng(9500)),
                   estimate_rii(np.eye(30), rho, 5, 1000, _rng(9501))):
            if abs(iv.lower - rho) > 1e-12 * rho or abs(iv.upper - rho) > 1e-12 * rho:
                bad.append((rho, iv.lower, iv.upper))
    return Check("isometry: identity interval [rho, rho]", not bad,
                 "exact" if not bad else f"deviations {bad}")


def check_isometry_containment(count: int = 20, slack: float = 1e-9) -> Check:
    bad = 0
    for i in range(count):
        w = _rng(9600 + i).normal((10, 10))
        lo, hi = smallest_singular_value(w), largest_singular_value(w)
        for iv in (estimate_nii(w, 1.0, 10_000, _rng(9700 + i)),
                   estimate_rii(w, 1.0, 3, 2_000, _rng(9800 + i))):
            bad += iv.lower < lo - slack or iv.upper > hi + slack
    return Check("isometry: intervals within [sigma_min, sigma_max]", bad == 0,
                 f"{bad} violations over {count} matrices")


def check_trivial_cases() -> Check:
    """Closed-form cases for the reservoir, metrics, waveforms and scaling rules."""
    fails = []
    cfg = EsnConfig(n_nodes=3, input_weights=np.zeros((3, 1)),
                    weight_spec=WeightSpec(GenMethod("M1"), rows=3, cols=3))
    x = run_reservoir(cfg, np.ones((1, 5)), np.zeros((3, 3))).states
    if not np.allclose(x, math.tanh(math.pi / 4), rtol=0, atol=1e-15):
        fails.append("constant drive")
    frozen = EsnConfig(n_nodes=3, leak=0.0, weight_spec=cfg.weight_spec)
    if np.any(run_reservoir(frozen, np.ones((1, 4)), np.eye(3)).states):
        fails.append("zero leak")
    acc = accuracy([0, 1, 1, 0, 1, 0], [0, 1, 0, 0, 1, 1], 2)
    if abs(acc.overall - 66.67) > 0.01:
        fails.append("accuracy arithmetic")
    runs = [ReservoirStates(np.zeros((2, 3))), ReservoirStates(np.vstack([np.ones(3), np.zeros(3)]))]
    sep, _ = separation_ratio(runs, [0, 1], 2)
    if not np.allclose(sep, 0.5):
        fails.append("separation hand case")
    if not (np.allclose(clean_wave(0, 4, 1), [0, 1, 0, -1], atol=1e-15)
            and np.array_equal(clean_wave(1, 4, 1), [1, 1, -1, -1])):
        fails.append("period-4 waveforms")
    for tag in ("M1", "M3", "M5"):
        spec = WeightSpec(GenMethod(tag, 0.2), ScaleMethod("R3"), 40, 40, Seed(SELFCHECK_SEED, 1))
        w, rho = build(spec)
        if abs(spectral_radius(rho * w) - 1.0) > 1e-6:
            fails.append(f"{tag}/R3 spectral radius")
    return Check("trivial closed-form cases", not fails, "all hold" if not fails else ", ".join(fails))


CHECKS: tuple[Callable[[], Check], ...] = (
    check_eigen_oracles,
    check_ridge_residual,
    check_lp_support,
    check_isometry_equivariance,
    check_isometry_identity,
    check_isometry_containment,
    check_trivial_cases,
)


def run_all(report: Callable[[str], None] | None = None) -> list[Check]:
    out = []
    for fn in CHECKS:
        t0 = time.perf_counter()
        c = fn()
        out.append(c)
        if report:
            report(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail} "
                   f"({time.perf_counter() - t0:.1f}s)")
    return out
