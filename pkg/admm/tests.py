import numpy as np
from django.test import SimpleTestCase, tag
from scipy import sparse

from core.exceptions import ConfigurationError
from core.testing import CASE1_PATH, scalar_region, toy_problem, two_area_grid
from harness.experiment import solve_reference
from harness.reports import CONVERGED, MAX_ITER
from network.loader import load_case
from partitioner.decomposition import RegionProblem, consensus_residual, decompose

from .algorithm import (
    AdmmParams, AdmmRunner, admm_consensus_step, admm_dual_update, admm_local_step,
)


class LocalStepTests(SimpleTestCase):

    def test_proximal_quadratic(self):
        """
        f = (x − 1)², z = 3, ρ = 2 gives the closed-form minimizer 2.
        """
        region = scalar_region('a', 1.0, 1)
        solution = admm_local_step(region, np.array([3.0]), np.zeros(1), 2.0)
        self.assertAlmostEqual(solution.x[0], 2.0, places=7)

    def test_fixed_point(self):
        """
        With z at the minimizer of f the local step stays there.
        """
        region = scalar_region('a', 1.0, 1)
        for rho in (0.5, 10.0, 1e4):
            solution = admm_local_step(region, np.array([1.0]), np.zeros(1), rho)
            self.assertAlmostEqual(solution.x[0], 1.0, places=7)

    def test_zero_objective_returns_center(self):
        """
        Without an objective the local step is a pure proximal point.
        """
        problem = toy_problem([(-10.0, 10.0)], [(0.0,)])
        region = RegionProblem('a', problem, sparse.csr_matrix([[1.0]]), np.ones(1))
        solution = admm_local_step(region, np.array([-4.5]), np.zeros(1), 3.0)
        self.assertAlmostEqual(solution.x[0], -4.5, places=7)


class DualUpdateTests(SimpleTestCase):

    def test_update_values(self):
        """
        ξ grows by ρ times the copy gap and is unchanged at consensus.
        """
        xi = admm_dual_update(np.array([0.1]), np.zeros(1), np.zeros(1), 10.0)
        self.assertAlmostEqual(xi[0], 1.0)
        np.testing.assert_array_equal(admm_dual_update(np.ones(2), np.ones(2), np.array([3.0, -1.0]), 5.0), [3.0, -1.0])

    def test_linear_accumulation(self):
        """
        Two updates with the same gap add 2ρ·gap.
        """
        xi = np.zeros(1)
        for _ in range(2):
            xi = admm_dual_update(np.array([0.25]), np.zeros(1), xi, 4.0)
        self.assertAlmostEqual(xi[0], 2.0)


class ConsensusStepTests(SimpleTestCase):

    def setUp(self):
        self.couplings = [sparse.csr_matrix([[1.0]]), sparse.csr_matrix([[-1.0]])]

    def test_scalar_averaging(self):
        """
        Two copies 1 and 3 with zero multipliers average to 2.
        """
        z = admm_consensus_step([np.array([1.0]), np.array([3.0])], [np.zeros(1), np.zeros(1)], 1.0, self.couplings)
        np.testing.assert_allclose(np.concatenate(z), [2.0, 2.0])

    def test_feasible_input_is_kept(self):
        """
        Consensus-feasible copies with zero multipliers pass through.
        """
        xs = [np.array([0.7]), np.array([0.7])]
        z = admm_consensus_step(xs, [np.zeros(1), np.zeros(1)], 3.0, self.couplings)
        np.testing.assert_allclose(np.concatenate(z), [0.7, 0.7])

    def test_result_is_consensus_feasible(self):
        """
        Random copies and multipliers on the two-area grid give Σ A z = 0.
        """
        regions, _ = decompose(two_area_grid())
        rng = np.random.default_rng(11)
        for _ in range(10):
            xs = [rng.standard_normal(region.n) for region in regions]
            xis = [rng.standard_normal(region.n) for region in regions]
            zs = admm_consensus_step(xs, xis, 10.0 ** rng.uniform(0, 4), [region.coupling for region in regions])
            _, violation = consensus_residual(regions, zs)
            self.assertLessEqual(violation, 1e-10)


class AdmmParamsTests(SimpleTestCase):

    def test_defaults(self):
        """
        Settings provide ρ = 1e4 and a cap of 3e4 iterations.
        """
        params = AdmmParams.from_settings()
        self.assertEqual(params.rho, 1e4)
        self.assertEqual(params.max_iter, 30000)

    def test_invalid_values(self):
        """
        Non-positive penalties and unknown names are rejected.
        """
        with self.assertRaises(ConfigurationError):
            AdmmParams.from_settings(rho=-1.0)
        with self.assertRaises(ConfigurationError):
            AdmmParams.from_settings(mu=1.0)


class AdmmRunTests(SimpleTestCase):

    def test_scalar_toy_converges_geometrically(self):
        """
        f₁ = (x − 1)², f₂ = (x − 3)² under one consensus row meet at 2.
        """
        regions = [scalar_region('a', 1.0, 1), scalar_region('b', 3.0, -1)]
        couplings = [region.coupling for region in regions]
        rho = 2.0
        z = [np.zeros(1), np.zeros(1)]
        xi = [np.zeros(1), np.zeros(1)]
        errors = []
        for _ in range(60):
            xs = [admm_local_step(region, zl, xil, rho).x for region, zl, xil in zip(regions, z, xi)]
            xi = [admm_dual_update(x, zl, xil, rho) for x, zl, xil in zip(xs, z, xi)]
            z = admm_consensus_step(xs, xi, rho, couplings)
            errors.append(max(abs(x[0] - 2.0) for x in xs))
        self.assertLessEqual(errors[-1], 1e-6)
        self.assertLess(errors[30], errors[10])

    def test_two_area_run_bookkeeping(self):
        """
        Every iteration of a two-area run is recorded with the exact consensus residual.
        """
        grid = two_area_grid()
        regions, consensus = decompose(grid)
        params = AdmmParams(rho=1e3, max_iter=15, epsilon=1e-4)
        report = AdmmRunner(regions, consensus, params).run()
        self.assertIn(report.status, (CONVERGED, MAX_ITER))
        self.assertEqual(len(report.history), report.iterations)
        self.assertEqual(len(report.coupling), report.iterations)
        self.assertTrue(all(len(rows) == 8 for rows in report.coupling))
        self.assertTrue(all(row['communication'] == 2 * sum(r.n for r in regions) for row in report.history))
        _, violation = consensus_residual(regions, report.local)
        self.assertEqual(report.history[-1]['consensus_violation'], violation)
        self.assertIsNotNone(report.cost)
        self.assertIsNone(report.cost_gap)

    def test_zero_iterations(self):
        """
        A cap of zero returns an empty report at the iteration cap.
        """
        grid = two_area_grid()
        report = AdmmRunner(*decompose(grid), AdmmParams(max_iter=0)).run()
        self.assertEqual(report.iterations, 0)
        self.assertEqual(report.history, [])
        self.assertFalse(report.converged)

    @tag('slow')
    def test_case1_is_slow_but_approaching(self):
        """
        After 5000 iterations on Case 1 the cost gap is below 1e-2 but not yet at 1e-5.
        """
        grid = load_case(CASE1_PATH)
        reference = solve_reference(grid)
        params = AdmmParams.from_settings(max_iter=5000)
        report = AdmmRunner(*decompose(grid), params, reference=reference).run()
        self.assertLessEqual(report.cost_gap, 1e-2)
        self.assertGreaterEqual(report.cost_gap, 1e-5)
