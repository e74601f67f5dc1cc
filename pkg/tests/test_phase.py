import math

import numpy as np
import pytest

from conftest import random_hermitian, random_spd
from dhymflow.errors import PhaseSingular
from dhymflow.phase import (ConeParams, arccot, cot_theta, cot_theta_hessian,
                            eigenvalues_descending, in_gamma_tau,
                            linearization_matrix, structural_inequalities,
                            theta_of)


class TestArccot:
    def test_values(self):
        assert arccot(0.0) == pytest.approx(np.pi / 2)
        assert arccot(1.0) == pytest.approx(np.pi / 4)
        assert arccot(-1.0) == pytest.approx(3 * np.pi / 4)

    def test_range_and_monotone(self):
        x = np.linspace(-50, 50, 1001)
        y = arccot(x)
        assert ((y > 0) & (y < np.pi)).all()
        assert (np.diff(y) < 0).all()


class TestTheta:
    def test_values(self):
        assert theta_of([1, 1]) == pytest.approx(np.pi / 2)
        assert theta_of([0, 0, 0]) == pytest.approx(3 * np.pi / 2)
        assert theta_of([2, 1]) == pytest.approx(math.atan(3))

    def test_reflection(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 3):
            lam = rng.normal(size=n) * 3
            assert theta_of(-lam) == pytest.approx(n * np.pi - theta_of(lam))

    def test_strictly_decreasing_per_entry(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            lam = rng.normal(size=3)
            i = rng.integers(3)
            bumped = lam.copy()
            bumped[i] += 0.1
            assert theta_of(bumped) < theta_of(lam)


class TestCotTheta:
    def test_values(self):
        assert cot_theta([2, 1]) == pytest.approx(1 / 3)
        assert cot_theta([1, 1]) == pytest.approx(0.0, abs=1e-15)
        assert cot_theta([1, 1, 1]) == pytest.approx(-1.0)

    def test_n1_exact(self):
        for lam in (-3.0, 0.25, 7.5):
            assert cot_theta([lam]) == lam

    def test_consistency_with_theta(self):
        # Absolute agreement where cot is O(1); relative agreement near
        # the poles, where csc^2 amplifies the theta round-off.
        rng = np.random.default_rng(2)
        checked = 0
        while checked < 500:
            lam = rng.normal(size=2) * 2
            th = theta_of(lam)
            if abs(math.sin(th)) < 1e-6:
                continue
            assert cot_theta(lam) == pytest.approx(
                1 / math.tan(th), abs=1e-10, rel=1e-10)
            checked += 1

    def test_singular_guard(self):
        # theta(0, 0) = pi exactly.
        with pytest.raises(PhaseSingular):
            cot_theta([0.0, 0.0])


class TestEigenvalues:
    def test_diagonal(self):
        lam = eigenvalues_descending(np.diag([2.0, 1.0]), np.eye(2))
        assert np.allclose(lam, [2, 1])

    def test_a_equals_g(self):
        rng = np.random.default_rng(3)
        g = random_spd(rng, 3)
        lam = eigenvalues_descending(g, g)
        assert np.allclose(lam, 1.0, atol=1e-12)

    def test_root_finding_oracle(self):
        # Generalized eigenvalues are roots of det(A - lam g) = 0.
        rng = np.random.default_rng(4)
        for _ in range(20):
            A = random_hermitian(rng, 3)
            g = random_spd(rng, 3)
            lam = eigenvalues_descending(A, g)
            # polynomial coefficients of det(A - x g) via sampling
            xs = np.arange(4.0)
            vals = [np.linalg.det(A - x * g) for x in xs]
            coeffs = np.linalg.solve(np.vander(xs, increasing=True),
                                     np.real(vals))
            roots = np.sort(np.roots(coeffs[::-1]).real)[::-1]
            assert np.abs(lam - roots).max() < 1e-10

    def test_congruence_invariance(self):
        rng = np.random.default_rng(5)
        A = random_hermitian(rng, 3)
        g = random_spd(rng, 3)
        U = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        lam1 = eigenvalues_descending(A, g)
        lam2 = eigenvalues_descending(U.conj().T @ A @ U, U.conj().T @ g @ U)
        assert np.abs(lam1 - lam2).max() < 1e-9

    def test_residual(self):
        rng = np.random.default_rng(6)
        for n in (2, 3):
            A = random_hermitian(rng, n)
            g = random_spd(rng, n)
            for lam in eigenvalues_descending(A, g):
                # lam solves det(A - lam g) = 0
                s = np.linalg.svd(A - lam * g, compute_uv=False)
                assert s.min() < 1e-10 * max(1.0, s.max())

    def test_rejects_non_pd_metric(self):
        with pytest.raises(ValueError):
            eigenvalues_descending(np.eye(2), np.diag([1.0, -1.0]))


class TestLinearization:
    def test_diagonal_example(self):
        F = linearization_matrix(np.diag([2.0, 1.0]), np.eye(2), math.atan(3))
        assert np.allclose(np.diag(F).real, [2 / 9, 5 / 9], atol=1e-12)
        assert abs(F[0, 1]) < 1e-14

    def test_n1_flat(self):
        F = linearization_matrix(np.zeros((1, 1)), np.eye(1), np.pi / 2)
        assert F[0, 0] == pytest.approx(1.0)

    def test_matrix_inverse_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = rng.integers(2, 4)
            w = random_hermitian(rng, n)
            g = random_spd(rng, n)
            lam = eigenvalues_descending(w, g)
            th = theta_of(lam)
            if not 1e-3 < th % np.pi < np.pi - 1e-3:
                continue
            F = linearization_matrix(w, g, th)
            M = w @ np.linalg.inv(g) @ w + g
            resid = F @ M - np.eye(n) / math.sin(th) ** 2
            assert np.abs(resid).max() < 1e-11 * np.abs(F @ M).max()

    def test_positive_definite(self):
        rng = np.random.default_rng(8)
        count = 0
        while count < 200:
            n = int(rng.integers(1, 4))
            w = random_hermitian(rng, n, shift=rng.normal() * 2)
            lam = eigenvalues_descending(w, np.eye(n))
            th = theta_of(lam)
            if not 1e-3 < th < np.pi - 1e-3:
                continue
            F = linearization_matrix(w, np.eye(n), th)
            assert np.linalg.eigvalsh(F).min() > 0.0
            count += 1

    def test_eigenbasis_formula(self):
        rng = np.random.default_rng(9)
        w = random_hermitian(rng, 2, shift=2.0)
        lam = eigenvalues_descending(w, np.eye(2))
        th = theta_of(lam)
        F = linearization_matrix(w, np.eye(2), th)
        expect = np.sort(1.0 / (math.sin(th) ** 2 * (1 + lam**2)))
        assert np.allclose(np.sort(np.linalg.eigvalsh(F)), expect, atol=1e-11)

    def test_guard(self):
        with pytest.raises(PhaseSingular):
            linearization_matrix(np.zeros((2, 2)), np.eye(2), np.pi)


class TestGammaTau:
    def test_membership(self):
        assert in_gamma_tau([2, 1], ConeParams(1.3))
        assert not in_gamma_tau([0, 0], ConeParams(np.pi - 0.01))
        # boundary is strict
        assert not in_gamma_tau([1, 1], ConeParams(np.pi / 2))

    def test_cone_params_validation(self):
        with pytest.raises(ValueError):
            ConeParams(0.0)
        with pytest.raises(ValueError):
            ConeParams(np.pi)

    def test_convexity_sampled(self):
        from dhymflow.oracles import sample_gamma_tau

        rng = np.random.default_rng(10)
        for n, tau in ((2, 2.0), (3, 3.0)):
            lam = sample_gamma_tau(n, tau, 400, seed=11)
            mu = sample_gamma_tau(n, tau, 400, seed=12)
            t = rng.uniform(0, 1, size=400)[:, None]
            mix = t * lam + (1 - t) * mu
            assert (theta_of(mix) < tau + 1e-12).all()


class TestStructuralInequalities:
    def test_spot_two_dim(self):
        rep = structural_inequalities([2.0, 1.0], 1.3)
        assert rep.precondition_ok and rep.passed
        m = rep.margins
        assert m[0] == pytest.approx(2.0 - 1.0 / math.tan(0.65), abs=1e-12)
        assert m[1] == pytest.approx(1.0)
        assert m[2] == pytest.approx(3.0)

    def test_spot_three_dim(self):
        tau = 3 * np.pi / 4 + 0.01
        rep = structural_inequalities([1.0, 1.0, 1.0], tau)
        assert rep.passed
        assert rep.margins[0] == pytest.approx(
            1.0 - 1.0 / math.tan(tau / 2), abs=1e-12)

    def test_precondition_violation(self):
        rep = structural_inequalities([0.1, -0.5], 0.5)
        assert not rep.precondition_ok and not rep.passed

    def test_requires_descending(self):
        with pytest.raises(ValueError, match="descending"):
            structural_inequalities([1.0, 2.0], 1.5)

    def test_requires_n_at_least_2(self):
        with pytest.raises(ValueError):
            structural_inequalities([1.0], 1.5)

    def test_sampled(self):
        from dhymflow.oracles import sample_gamma_tau

        for n, tau in ((2, 2.4), (3, 3.0)):
            lam = np.sort(sample_gamma_tau(n, tau, 10_000, seed=13))[:, ::-1]
            for row in lam:
                rep = structural_inequalities(row, tau)
                assert rep.precondition_ok and rep.passed


class TestCotThetaHessian:
    def test_spot_value(self):
        H = cot_theta_hessian([2.0, 1.0])
        expect = np.array([[-4 / 27, 2 / 27], [2 / 27, -10 / 27]])
        assert np.abs(H - expect).max() < 1e-14

    def test_n1_linear(self):
        assert cot_theta_hessian([5.0]) == pytest.approx(0.0)

    def test_finite_difference_oracle(self):
        from dhymflow.oracles import sample_gamma_tau

        lam = sample_gamma_tau(2, 3.0, 25, seed=14)
        s = 1e-3
        for row in lam:
            H = cot_theta_hessian(row)
            fd = np.empty((2, 2))
            for i in range(2):
                for j in range(2):
                    ei = np.zeros(2); ei[i] = s
                    ej = np.zeros(2); ej[j] = s
                    fd[i, j] = (cot_theta(row + ei + ej)
                                - cot_theta(row + ei - ej)
                                - cot_theta(row - ei + ej)
                                + cot_theta(row - ei - ej)) / (4 * s * s)
            scale = max(1.0, np.abs(H).max())
            assert np.abs(H - fd).max() / scale < 5e-4
