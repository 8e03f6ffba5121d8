from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase, tag
from scipy import sparse

from core.exceptions import ConfigurationError, CoordinationError
from core.testing import CASE1_PATH, CASE2_PATH, scalar_region, toy_problem, two_area_grid
from harness.experiment import solve_reference
from network.loader import load_case
from partitioner.decomposition import RegionProblem, decompose
from partitioner.residuals import kkt_residual

from .algorithm import (
    AladinRunner, aladin_local_step, aladin_update, check_kkt_gap, rate_certificate,
)
from .params import BFGS, EXACT, LITERAL_UPDATE, STANDARD_UPDATE, AladinParams
from .qp import QpInput, dense_coupled_qp, solve_coupled_qp
from .sensitivities import BfgsMemory, extract_sensitivities, regularize_hessian


def random_qp(rng, regions=3, rows=4):
    """Well-conditioned coupled QP with ±1 consensus rows between random regions."""
    sizes = rng.integers(2, 7, size=regions)
    hessians, jacobians, gradients, xs = [], [], [], []
    for n in sizes:
        root = rng.standard_normal((n, n))
        hessians.append(root @ root.T + n * np.eye(n))
        jacobians.append(rng.standard_normal((rng.integers(0, n), n)))
        gradients.append(rng.standard_normal(n))
        xs.append(rng.standard_normal(n))
    couplings = [np.zeros((rows, n)) for n in sizes]
    for row in range(rows):
        first, second = rng.choice(regions, size=2, replace=False)
        couplings[first][row, rng.integers(sizes[first])] = 1.0
        couplings[second][row, rng.integers(sizes[second])] = -1.0
    return QpInput(hessians, jacobians, gradients, couplings, xs, rng.standard_normal(rows), 10.0 ** rng.uniform(0, 4))


def assert_same_qp_solution(first, second, atol=1e-8):
    for a, b in zip(first.dx, second.dx):
        np.testing.assert_allclose(a, b, atol=atol)
    for a, b in zip(first.kappa, second.kappa):
        np.testing.assert_allclose(a, b, atol=atol)
    np.testing.assert_allclose(first.lambda_qp, second.lambda_qp, atol=atol)
    np.testing.assert_allclose(first.slack, second.slack, atol=atol)


class HessianTests(SimpleTestCase):

    def test_negative_eigenvalue_is_flipped(self):
        """
        Eigenvalues (−1, 2) become (1, 2).
        """
        hessian = regularize_hessian(np.diag([-1.0, 2.0]), 1e-6)
        np.testing.assert_allclose(np.linalg.eigvalsh(hessian), [1.0, 2.0])

    def test_floor_is_applied(self):
        """
        Near-zero eigenvalues are raised to the floor.
        """
        rng = np.random.default_rng(5)
        basis, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        hessian = (basis * np.array([0.0, -1e-9, 3.0, -2.0])) @ basis.T
        eigenvalues = np.linalg.eigvalsh(regularize_hessian(hessian, 1e-6))
        np.testing.assert_allclose(eigenvalues, [1e-6, 1e-6, 2.0, 3.0], atol=1e-12)


class BfgsTests(SimpleTestCase):

    def test_secant_already_satisfied(self):
        """
        H = I with s = y = e₁ leaves H unchanged.
        """
        memory = BfgsMemory(3)
        self.assertEqual(memory.update(np.eye(3)[0], np.eye(3)[0]), 'accepted')
        np.testing.assert_allclose(memory.hessian, np.eye(3))

    def test_secant_condition_after_accepted_update(self):
        """
        Accepted pairs satisfy H⁺s = y.
        """
        rng = np.random.default_rng(8)
        memory = BfgsMemory(5)
        for _ in range(20):
            s = rng.standard_normal(5)
            root = rng.standard_normal((5, 5))
            y = (root @ root.T + np.eye(5)) @ s
            if memory.update(s, y) == 'accepted':
                np.testing.assert_allclose(memory.hessian @ s, y, rtol=1e-8, atol=1e-8)
        self.assertGreater(memory.accepted, 0)

    def test_negative_curvature_is_damped(self):
        """
        A pair with sᵀy < 0 is damped and H stays positive definite.
        """
        memory = BfgsMemory(2)
        outcome = memory.update(np.array([1.0, 0.0]), np.array([-1.0, 0.5]))
        self.assertEqual(outcome, 'damped')
        self.assertEqual(memory.damped, 1)
        self.assertGreater(np.linalg.eigvalsh(memory.hessian).min(), 0.0)

    def test_zero_step_is_skipped(self):
        """
        A zero step leaves H unchanged and is counted as skipped.
        """
        memory = BfgsMemory(2)
        self.assertEqual(memory.update(np.zeros(2), np.ones(2)), 'skipped')
        self.assertEqual(memory.skipped, 1)
        np.testing.assert_array_equal(memory.hessian, np.eye(2))


class CoupledQpTests(SimpleTestCase):

    def scalar_qp(self, x, lam=0.0, mu=1e8):
        empty = np.zeros((0, 1))
        return QpInput(
            hessians=[np.eye(1), np.eye(1)], jacobians=[empty, empty], gradients=[np.zeros(1), np.zeros(1)],
            couplings=[np.array([[1.0]]), np.array([[-1.0]])], xs=[np.array([x[0]]), np.array([x[1]])],
            lam=np.array([lam]), mu=mu,
        )

    def test_two_scalar_regions(self):
        """
        Copies 1 and 0 are pulled halfway towards each other.
        """
        result = solve_coupled_qp(self.scalar_qp((1.0, 0.0)))
        self.assertAlmostEqual(result.dx[0][0], -0.5, places=6)
        self.assertAlmostEqual(result.dx[1][0], 0.5, places=6)
        self.assertAlmostEqual(result.slack[0], 0.0, places=6)

    def test_stationary_point(self):
        """
        Feasible copies with zero gradient and multiplier give a zero step.
        """
        result = solve_coupled_qp(self.scalar_qp((0.3, 0.3)))
        self.assertEqual(result.dx[0][0], 0.0)
        self.assertEqual(result.dx[1][0], 0.0)
        self.assertEqual(result.lambda_qp[0], 0.0)
        self.assertEqual(result.slack[0], 0.0)

    def test_schur_matches_dense_oracle(self):
        """
        100 random instances agree with the full KKT factorization.
        """
        rng = np.random.default_rng(2024)
        for _ in range(100):
            qp = random_qp(rng, regions=int(rng.integers(2, 5)), rows=int(rng.integers(1, 6)))
            assert_same_qp_solution(solve_coupled_qp(qp), dense_coupled_qp(qp))

    def test_dependent_jacobian_rows(self):
        """
        Duplicate active rows need the regularized retry and fail without one.
        """
        jacobian = np.array([[1.0, 0.0], [1.0, 0.0]])
        qp = QpInput(
            hessians=[np.eye(2), np.eye(1)], jacobians=[jacobian, np.zeros((0, 1))],
            gradients=[np.ones(2), np.zeros(1)], couplings=[np.array([[0.0, 1.0]]), np.array([[-1.0]])],
            xs=[np.zeros(2), np.ones(1)], lam=np.zeros(1), mu=1e3,
        )
        result = solve_coupled_qp(qp, regularization=1e-8)
        self.assertAlmostEqual(result.dx[0][0], 0.0, places=6)
        with self.assertRaises(CoordinationError):
            solve_coupled_qp(qp, regularization=0.0)


class LocalStepAndUpdateTests(SimpleTestCase):

    def test_zero_objective_closed_form(self):
        """
        f = 0, A = I, Σ = I gives x = z − λ/ρ.
        """
        problem = toy_problem([(-10.0, 10.0)], [(0.0,)])
        region = RegionProblem('a', problem, sparse.csr_matrix([[1.0]]), np.ones(1))
        solution = aladin_local_step(region, np.array([1.0]), np.array([0.5]), 2.0)
        self.assertAlmostEqual(solution.x[0], 0.75, places=7)

    def test_large_penalty_pulls_to_center(self):
        """
        A dominant ρ keeps the local solution at a feasible z.
        """
        region = scalar_region('a', 1.0, 1)
        solution = aladin_local_step(region, np.array([-2.0]), np.zeros(1), 1e8)
        self.assertAlmostEqual(solution.x[0], -2.0, places=6)

    def test_full_step_update(self):
        """
        Unit steps give z⁺ = x + (x − z) + Δx by default, x + Δx in the standard form, and λ⁺ = λ^QP.
        """
        x, z, dx = [np.array([2.0])], [np.array([1.5])], [np.array([0.25])]
        lam, lam_qp = np.array([1.0]), np.array([4.0])
        z_next, lam_next = aladin_update(x, z, dx, lam, lam_qp)
        np.testing.assert_allclose(z_next[0], [2.0 + (2.0 - 1.5) + 0.25])
        np.testing.assert_allclose(lam_next, lam_qp)
        z_standard, _ = aladin_update(x, z, dx, lam, lam_qp, form=STANDARD_UPDATE)
        np.testing.assert_allclose(z_standard[0], [2.25])

    def test_partial_steps(self):
        """
        α₁ and α₂ weight the local displacement and the QP step; α₃ damps the dual step.
        """
        x, z, dx = [np.array([1.0, -1.0])], [np.array([0.0, 0.0])], [np.array([0.5, 0.5])]
        z_next, lam_next = aladin_update(x, z, dx, np.zeros(1), np.array([2.0]), alphas=(0.5, 2.0, 0.25))
        np.testing.assert_allclose(z_next[0], [1.0 + 0.5 + 1.0, -1.0 - 0.5 + 1.0])
        np.testing.assert_allclose(lam_next, [0.5])

    def test_update_fixed_points(self):
        """
        x = z with Δx = 0 keeps z; λ^QP = λ keeps λ.
        """
        z = [np.array([0.4, -0.1])]
        for form in (LITERAL_UPDATE, STANDARD_UPDATE):
            z_next, lam_next = aladin_update(z, z, [np.zeros(2)], np.array([3.0]), np.array([3.0]), form=form)
            np.testing.assert_array_equal(z_next[0], z[0])
            np.testing.assert_array_equal(lam_next, [3.0])


class RateCertificateTests(SimpleTestCase):

    def test_quadratic_and_linear_sequences(self):
        """
        A quadratic tail passes at C = 1, a linear one does not, short runs never do.
        """
        self.assertTrue(rate_certificate([1.0, 0.1, 0.01, 1e-4], constant=1.0))
        self.assertFalse(rate_certificate([0.1, 0.05, 0.025], constant=1.0))
        self.assertFalse(rate_certificate([0.1, 0.01]))


class AladinParamsTests(SimpleTestCase):

    def test_mode_defaults(self):
        """
        Exact and BFGS modes pick their own penalties; both default to the literal update.
        """
        exact, bfgs = AladinParams.from_settings(EXACT), AladinParams.from_settings(BFGS)
        self.assertEqual((exact.rho, exact.mu), (1e2, 1e3))
        self.assertEqual((bfgs.rho, bfgs.mu), (1e4, 1e3))
        self.assertEqual(bfgs.algorithm, 'aladin-bfgs')
        self.assertEqual((exact.update_form, AladinParams().update_form), (LITERAL_UPDATE, LITERAL_UPDATE))

    def test_invalid_values(self):
        """
        Unknown modes, update forms and non-positive penalties are rejected.
        """
        with self.assertRaises(ConfigurationError):
            AladinParams(mode='newton')
        with self.assertRaises(ConfigurationError):
            AladinParams(update_form='damped')
        with self.assertRaises(ConfigurationError):
            AladinParams.from_settings(mu=0.0)


class TwoAreaRunTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = two_area_grid()
        cls.reference = solve_reference(cls.grid)
        cls.regions, cls.consensus = decompose(cls.grid)
        params = AladinParams(
            rho=1e2, mu=1e3, max_iter=40, epsilon=1e-6, keep_qp_history=True, update_form=STANDARD_UPDATE,
        )
        cls.runner = AladinRunner(cls.regions, cls.consensus, params, reference=cls.reference)
        cls.report = cls.runner.run()

    def test_converges_to_reference(self):
        """
        Exact-Hessian ALADIN reaches consensus and the centralized cost.
        """
        self.assertTrue(self.report.converged)
        self.assertLessEqual(self.report.consensus_violation, 1e-6)
        self.assertLessEqual(self.report.cost_gap, 1e-5)
        self.assertLessEqual(kkt_residual(self.runner.central, self.report.x)['error'], 1e-4)

    def test_qp_history_matches_dense_oracle(self):
        """
        Every stored coordinator QP is reproduced by the dense KKT solve.
        """
        history = self.report.extras['qp_history']
        self.assertEqual(len(history), self.report.iterations - 1)
        for qp, result in history:
            assert_same_qp_solution(result, dense_coupled_qp(qp))
            for hessian in qp.hessians:
                self.assertGreaterEqual(np.linalg.eigvalsh(hessian).min(), 0.99e-6)

    def test_kkt_gap_at_final_iterate(self):
        """
        The last local solutions satisfy the first-order condition; a perturbed point does not.
        """
        solutions = list(self.runner.state.solutions)
        lam = self.report.extras['lam']
        self.assertLessEqual(max(check_kkt_gap(self.regions, solutions, lam)), 1e-4)
        x = solutions[0].x.copy()
        x[0] += 1e-3
        solutions[0] = replace(solutions[0], x=x)
        self.assertGreater(max(check_kkt_gap(self.regions, solutions, lam)), 1e-8)

    def test_fixed_point(self):
        """
        One full iteration from the converged (x, λ) barely moves z.
        """
        lam = self.report.extras['lam']
        zs = [x.copy() for x in self.report.local]
        solutions = [aladin_local_step(region, z, lam, 1e2) for region, z in zip(self.regions, zs)]
        packs = [extract_sensitivities(region, solution) for region, solution in zip(self.regions, solutions)]
        qp = QpInput.from_packs(packs, [region.coupling for region in self.regions], lam, 1e3)
        result = solve_coupled_qp(qp)
        z_next, _ = aladin_update([s.x for s in solutions], zs, result.dx, lam, result.lambda_qp, form=STANDARD_UPDATE)
        self.assertLessEqual(max(np.max(np.abs(a - b)) for a, b in zip(z_next, zs)), 1e-4)

    def test_bfgs_mode_bookkeeping(self):
        """
        BFGS runs count their forward floats with the 3n rule and track update outcomes.
        """
        params = AladinParams.from_settings(BFGS, max_iter=10)
        report = AladinRunner(self.regions, self.consensus, params).run()
        self.assertIn('bfgs', report.extras)
        floor = 3 * sum(region.n for region in self.regions)
        self.assertTrue(all(row['communication'] >= floor for row in report.history))
        counters = report.extras['bfgs']
        self.assertEqual(sum(counters.values()), len(self.regions) * (report.iterations - 1))


@tag('slow')
class CaseReproductionTests(SimpleTestCase):

    def run_case(self, path, mode, **overrides):
        grid = load_case(path)
        reference = solve_reference(grid)
        regions, consensus = decompose(grid)
        params = AladinParams.from_settings(mode, **overrides)
        runner = AladinRunner(regions, consensus, params, reference=reference)
        return runner, runner.run()

    def test_case1_exact_hessian(self):
        """
        Case 1 with ρ = 1e2, μ = 1e3 converges quickly and superlinearly to the centralized cost.
        """
        runner, report = self.run_case(CASE1_PATH, EXACT, keep_qp_history=True, update_form=STANDARD_UPDATE)
        self.assertTrue(report.converged)
        self.assertLessEqual(report.iterations, 15)
        self.assertLessEqual(report.cost_gap, 1e-5)
        self.assertLessEqual(report.consensus_violation, 1e-4)
        self.assertLessEqual(kkt_residual(runner.central, report.x)['error'], 1e-4)
        self.assertLessEqual(report.extras['kkt_gap'][-1], 1e-4)
        self.assertTrue(rate_certificate(report.extras['z_distance'], floor=1e-6))
        for qp, result in report.extras['qp_history']:
            assert_same_qp_solution(result, dense_coupled_qp(qp))

    def test_case1_bfgs(self):
        """
        Case 1 with BFGS Hessians converges within 80 iterations near the reference.
        """
        _, report = self.run_case(CASE1_PATH, BFGS, update_form=STANDARD_UPDATE)
        self.assertTrue(report.converged)
        self.assertLessEqual(report.iterations, 80)
        self.assertLessEqual(report.distance, 1e-2)

    def test_case2_exact_hessian(self):
        """
        Case 2 converges within 25 iterations with negligible gaps.
        """
        _, report = self.run_case(CASE2_PATH, EXACT, update_form=STANDARD_UPDATE)
        self.assertTrue(report.converged)
        self.assertLessEqual(report.iterations, 25)
        self.assertLessEqual(report.cost_gap, 1e-6)
        self.assertLessEqual(report.losses_gap, 1e-6)
