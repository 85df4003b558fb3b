import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from isolab import csrecovery as cs
from isolab import oracles
from isolab.errors import NumericalError, ShapeError, ValidationError
from isolab.lp import OPTIMAL
from isolab.numerics import RngStream, Seed


def instance(m=30, n=80, s=4, sigma=0.01, seed=0):
    rng = RngStream(Seed(seed))
    w = rng.normal((m, n), var=1.0 / m)
    sig = cs.gen_sparse_signal(n, s, rng)
    return cs.observe(sig, w, 1.0, sigma, rng)


class TestSignal:
    def test_support_and_magnitude(self):
        sig = cs.gen_sparse_signal(100, 10, RngStream(Seed(1)))
        assert len(set(sig.support.tolist())) == 10
        assert np.all(np.abs(sig.values) >= 1.0)
        assert np.count_nonzero(sig.dense()) == 10

    def test_sparsity_exceeds_dimension(self):
        with pytest.raises(ShapeError):
            cs.gen_sparse_signal(5, 6, RngStream(Seed(0)))

    def test_observe_noiseless(self):
        rng = RngStream(Seed(2))
        sig = cs.gen_sparse_signal(20, 3, rng)
        w = rng.normal((10, 20))
        inst = cs.observe(sig, w, 0.5, 0.0, rng)
        assert np.allclose(inst.observations, 0.5 * w @ sig.dense())

    def test_observe_shape(self):
        sig = cs.gen_sparse_signal(20, 3, RngStream(Seed(0)))
        with pytest.raises(ShapeError):
            cs.observe(sig, np.ones((4, 21)), 1.0, 0.1, RngStream(Seed(0)))


class TestMse:
    def test_perfect(self):
        sig = cs.SparseSignal(4, np.array([1]), np.array([2.0]))
        assert cs.ideal_mse(sig, sig.dense(), 0.1) == 0.0

    def test_hand_value(self):
        truth = np.array([2.0, 0.0, 0.05])
        est = np.array([2.0, 0.1, 0.0])
        denom = 0.1 ** 2 + 0 + 0.05 ** 2
        assert cs.ideal_mse(truth, est, 0.1) == pytest.approx(math.sqrt((0.01 + 0.0025) / denom))

    def test_zero_denominator(self):
        with pytest.raises(NumericalError):
            cs.ideal_mse(np.zeros(3), np.ones(3), 0.1)

    @given(st.integers(0, 1000))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        truth, est = rng.standard_normal(12), rng.standard_normal(12)
        p = rng.permutation(12)
        assert cs.ideal_mse(truth[p], est[p], 0.3) == pytest.approx(cs.ideal_mse(truth, est, 0.3))


class TestDantzig:
    @pytest.mark.parametrize("constraint", [cs.CORRELATION, cs.RESIDUAL])
    @pytest.mark.parametrize("seed", range(3))
    def test_objective_matches_highs(self, constraint, seed):
        inst = instance(m=15, n=40, s=3, sigma=0.05, seed=seed)
        delta = cs.universal_delta(inst, constraint)
        res = cs.dantzig_select(inst, delta, constraint)
        a = inst.scaled_sensing
        k, h = (a.T @ a, a.T @ inst.observations) if constraint == cs.CORRELATION else (a, inst.observations)
        ref = linprog(np.ones(80), A_ub=np.vstack([np.hstack([k, -k]), np.hstack([-k, k])]),
                      b_ub=np.concatenate([h + delta, delta - h]), bounds=(0, None), method="highs")
        assert res.solver_status == OPTIMAL
        assert np.abs(res.estimate).sum() == pytest.approx(ref.fun, rel=1e-6, abs=1e-8)
        assert res.constraint_violation <= 1e-6
        assert res.duality_gap <= 1e-6

    def test_l1_not_above_truth(self):
        inst = instance(sigma=0.02, seed=4)
        res = cs.dantzig_select(inst)
        assert np.abs(res.estimate).sum() <= np.abs(inst.signal.values).sum() + 1e-6

    def test_noiseless_exact_recovery_against_subset_oracle(self):
        inst = instance(m=20, n=60, s=3, sigma=0.0, seed=7)
        beta, res, _ = cs.l1_recover(inst.scaled_sensing, inst.observations, 1e-9)
        support, coef, _ = oracles.best_subset_least_squares(inst.scaled_sensing, inst.observations, 3)
        assert set(np.flatnonzero(np.abs(beta) > 1e-4).tolist()) == set(support)
        assert np.linalg.norm(beta - inst.signal.dense()) < 1e-4

    @pytest.mark.parametrize("constraint", [cs.CORRELATION, cs.RESIDUAL])
    def test_scaling_consistency(self, constraint):
        inst = instance(m=15, n=40, s=3, sigma=0.05, seed=1)
        a, y = inst.scaled_sensing, inst.observations
        base, _, _ = cs.l1_recover(a, y, 0.02, constraint)
        scaled, _, _ = cs.l1_recover(a, 3.0 * y, 0.06, constraint)
        assert np.allclose(scaled, 3.0 * base, atol=1e-5)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            cs.l1_recover(np.eye(3), np.ones(3), 0.0)
        with pytest.raises(ValidationError):
            cs.l1_recover(np.eye(3), np.ones(3), 0.1, "other")

    def test_universal_delta_forms(self):
        inst = instance(sigma=0.1)
        cn = np.linalg.norm(inst.scaled_sensing, axis=0).max()
        assert cs.universal_delta(inst) == pytest.approx(0.1 * math.sqrt(2 * math.log(80)) * cn)
        assert cs.universal_delta(inst, cs.RESIDUAL) == pytest.approx(0.1 * math.sqrt(2 * math.log(30)))


class TestRefit:
    def test_refit_on_true_support_is_least_squares(self):
        inst = instance(sigma=0.0, seed=3)
        beta = cs.refit_support(inst, inst.signal.dense(), 0.5)
        assert np.allclose(beta, inst.signal.dense(), atol=1e-10)

    def test_empty_support(self):
        inst = instance(seed=3)
        assert not np.any(cs.refit_support(inst, np.zeros(80), 0.1))

    def test_refit_reduces_error(self):
        errs = []
        for seed in range(5):
            inst = instance(m=40, n=100, s=5, sigma=0.05, seed=seed)
            errs.append((cs.dantzig_select(inst).mse, cs.gauss_dantzig_select(inst).mse))
        assert np.mean([g for _, g in errs]) < np.mean([d for d, _ in errs])

    def test_threshold_recorded(self):
        inst = instance(seed=1)
        res = cs.gauss_dantzig_select(inst)
        assert res.refit_threshold == pytest.approx(cs.support_threshold(inst, res.constraint_level))


def test_noiseless_smoke_instance_uses_configured_sigma():
    inst = instance(m=60, n=200, s=5, sigma=0.0, seed=12)
    res = cs.dantzig_select(inst, delta=1e-9, mse_sigma=0.05)
    assert np.linalg.norm(res.estimate - inst.signal.dense()) < 1e-4
    assert res.mse is not None and res.mse < 1e-4 / (0.05 * math.sqrt(5)) * 1.01


class TestEdgeCases:
    def test_zero_sparsity(self):
        assert not np.any(cs.gen_sparse_signal(10, 0, RngStream(Seed(0))).dense())

    def test_mean_magnitude(self):
        rng = RngStream(Seed(21))
        mags = np.concatenate([np.abs(cs.gen_sparse_signal(1000, 1000, rng).values) for _ in range(100)])
        assert mags.mean() == pytest.approx(1 + math.sqrt(2 / math.pi), abs=0.01)

    def test_identity_sensing_scaled(self):
        sig = cs.SparseSignal(5, np.array([2]), np.array([-1.5]))
        inst = cs.observe(sig, np.eye(5), 2.0, 0.0, RngStream(Seed(0)))
        assert np.array_equal(inst.observations, 2.0 * sig.dense())
        res = cs.dantzig_select(inst, delta=1e-8)
        assert np.allclose(res.estimate, sig.dense(), atol=1e-6)

    def test_zero_observations(self):
        sig = cs.SparseSignal(6, np.array([], dtype=int), np.array([]))
        inst = cs.observe(sig, RngStream(Seed(1)).normal((4, 6)), 1.0, 0.0, RngStream(Seed(0)))
        res = cs.dantzig_select(inst, delta=0.1, mse_sigma=0.1)
        assert np.abs(res.estimate).sum() <= 1e-7

    def test_noise_variance(self):
        sig = cs.SparseSignal(1, np.array([0]), np.array([0.0]))
        inst = cs.observe(sig, np.zeros((1_000_000, 1)), 1.0, 0.05, RngStream(Seed(2)))
        assert inst.observations.var() == pytest.approx(0.05 ** 2, rel=0.02)

    def test_one_sparse_below_noise(self):
        truth = np.array([0.03, 0.0])
        assert cs.ideal_mse(truth, np.zeros(2), 0.05) == pytest.approx(1.0)


def test_weighted_l1_matches_highs():
    inst = instance(m=15, n=40, s=3, sigma=0.05, seed=5)
    a, y = inst.scaled_sensing, inst.observations
    wt = np.random.default_rng(0).uniform(0.2, 5.0, 40)
    k, h = a.T @ a, a.T @ y
    beta, res, _ = cs.l1_recover(a, y, 0.05, weights=wt)
    ref = linprog(np.concatenate([wt, wt]), A_ub=np.vstack([np.hstack([k, -k]), np.hstack([-k, k])]),
                  b_ub=np.concatenate([h + 0.05, 0.05 - h]), bounds=(0, None), method="highs")
    assert res.status == OPTIMAL
    assert wt @ np.abs(beta) == pytest.approx(ref.fun, rel=1e-6)
    with pytest.raises(ValidationError):
        cs.l1_recover(a, y, 0.05, weights=np.zeros(40))


def test_reweighting_removes_shrinkage():
    inst = instance(m=40, n=100, s=5, sigma=0.05, seed=2)
    plain = cs.gauss_dantzig_select(inst, reweight=0)
    weighted = cs.gauss_dantzig_select(inst, reweight=1)
    assert weighted.iterations > plain.iterations
    assert weighted.mse <= plain.mse * 1.05
    with pytest.raises(ValidationError):
        cs.gauss_dantzig_select(inst, reweight=-1)
