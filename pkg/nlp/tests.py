import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigurationError
from core.testing import CASE1_PATH, toy_problem, two_area_grid
from formulation.builder import assemble_nlp
from network.loader import load_case

from .active_set import detect_active_set
from .linalg import SymmetricFactorization
from .options import SolverSettings
from .solver import INFEASIBLE, SOLVED, InteriorPointSolver, solve_nlp


class SolverTests(SimpleTestCase):

    def setUp(self):
        self.settings = SolverSettings.from_settings()

    def test_clipped_minimum(self):
        """
        min (x − 2)² on [0, 1] stops at the upper bound with multiplier 2.
        """
        problem = toy_problem([(0.0, 1.0)], [(1.0, 0, 2, 0, 0), (-4.0, 0, 1, 0, 0), (4.0,)])
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, SOLVED)
        self.assertAlmostEqual(solution.x[0], 1.0, places=7)
        self.assertAlmostEqual(solution.gamma[0], 2.0, places=6)

    def test_equality_constrained(self):
        """
        min x² + y² with x + y = 2 gives (1, 1) and ν = −2.
        """
        free = (-np.inf, np.inf)
        problem = toy_problem(
            [free, free],
            [(1.0, 0, 2, 0, 0), (1.0, 1, 2, 1, 0)],
            equalities=[[(1.0, 0, 1, 0, 0), (1.0, 1, 1, 1, 0), (-2.0,)]],
        )
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, SOLVED)
        np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-8)
        self.assertAlmostEqual(solution.nu[0], -2.0, places=7)

    def test_inequality_multiplier(self):
        """
        min x² + y² with x + y >= 1 gives (0.5, 0.5) and κ = 1.
        """
        free = (-np.inf, np.inf)
        problem = toy_problem(
            [free, free],
            [(1.0, 0, 2, 0, 0), (1.0, 1, 2, 1, 0)],
            inequalities=[[(-1.0, 0, 1, 0, 0), (-1.0, 1, 1, 1, 0), (1.0,)]],
        )
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, SOLVED)
        np.testing.assert_allclose(solution.x, [0.5, 0.5], atol=1e-7)
        self.assertAlmostEqual(solution.kappa[0], 1.0, places=6)
        self.assertLessEqual(solution.kkt['error'], 1e-7)

    def test_fixed_variable_multiplier(self):
        """
        A variable with equal bounds stays put and its multiplier comes from stationarity.
        """
        problem = toy_problem(
            [(-10.0, 10.0), (2.0, 2.0)],
            [(1.0, 0, 2, 0, 0), (-2.0, 0, 1, 0, 0), (1.0, 1, 2, 1, 0), (-6.0, 1, 1, 1, 0), (10.0,)],
        )
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, SOLVED)
        self.assertEqual(solution.x[1], 2.0)
        self.assertAlmostEqual(solution.x[0], 1.0, places=7)
        self.assertAlmostEqual(solution.gamma[1], 2.0, places=7)

    def test_convex_qp_matches_dense_kkt(self):
        """
        An equality-constrained convex QP agrees with a direct KKT solve.
        """
        rng = np.random.default_rng(3)
        n, m = 6, 2
        root = rng.standard_normal((n, n))
        q_matrix = root @ root.T + n * np.eye(n)
        q_vector = rng.standard_normal(n)
        a_matrix = rng.standard_normal((m, n))
        b_vector = rng.standard_normal(m)

        objective = [(q_vector[i], i, 1, i, 0) for i in range(n)]
        for i in range(n):
            objective.append((0.5 * q_matrix[i, i], i, 2, i, 0))
            for j in range(i + 1, n):
                objective.append((q_matrix[i, j], i, 1, j, 1))
        equalities = [
            [(a_matrix[r, i], i, 1, i, 0) for i in range(n)] + [(-b_vector[r],)] for r in range(m)
        ]
        problem = toy_problem([(-np.inf, np.inf)] * n, objective, equalities=equalities)
        solution = solve_nlp(problem, settings=self.settings)

        kkt = np.block([[q_matrix, a_matrix.T], [a_matrix, np.zeros((m, m))]])
        expected = np.linalg.solve(kkt, np.concatenate([-q_vector, b_vector]))
        self.assertEqual(solution.status, SOLVED)
        np.testing.assert_allclose(solution.x, expected[:n], atol=1e-8)
        np.testing.assert_allclose(solution.nu, expected[n:], atol=1e-7)

    def test_infeasible_problem_is_reported(self):
        """
        x = 2 with x in [0, 1] never becomes feasible.
        """
        problem = toy_problem(
            [(0.0, 1.0)], [(1.0, 0, 2, 0, 0)], equalities=[[(1.0, 0, 1, 0, 0), (-2.0,)]],
        )
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, INFEASIBLE)
        self.assertLess(solution.iterations, self.settings.max_iter)
        self.assertFalse(solution.usable)

    def test_violation_stationary_at_the_bound(self):
        """
        At the upper bound nothing reduces |x − 2|; inside the box the violation still has a descent direction.
        """
        problem = toy_problem(
            [(0.0, 1.0)], [(1.0, 0, 2, 0, 0)], equalities=[[(1.0, 0, 1, 0, 0), (-2.0,)]],
        )
        solver = InteriorPointSolver(problem, self.settings)

        def locally_infeasible(value):
            x = np.array([value])
            return solver._locally_infeasible(
                x, problem.equalities(x), problem.inequalities(x),
                problem.equality_jacobian(x), problem.inequality_jacobian(x),
            )

        self.assertTrue(locally_infeasible(1.0))
        self.assertFalse(locally_infeasible(0.5))

    def test_dependent_equalities(self):
        """
        A repeated constraint row leaves the KKT matrix singular until δ_c is added.
        """
        free = (-np.inf, np.inf)
        row = [(1.0, 0, 1, 0, 0), (1.0, 1, 1, 1, 0), (-2.0,)]
        problem = toy_problem([free, free], [(1.0, 0, 2, 0, 0), (1.0, 1, 2, 1, 0)], equalities=[row, row])
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, SOLVED)
        np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-7)
        self.assertAlmostEqual(float(np.sum(solution.nu)), -2.0, places=6)

    def test_case1_flat_start(self):
        """
        The centralized four-region case solves from the flat start.
        """
        problem = assemble_nlp(load_case(CASE1_PATH))
        solution = solve_nlp(problem, settings=self.settings)
        self.assertEqual(solution.status, SOLVED)
        self.assertLessEqual(solution.kkt['error'], 1e-6)

    def test_warm_start_converges_quickly(self):
        """
        Restarting from a solution of the same problem takes few iterations.
        """
        problem = assemble_nlp(two_area_grid())
        cold = solve_nlp(problem, settings=self.settings)
        self.assertEqual(cold.status, SOLVED)
        self.assertLessEqual(cold.kkt['error'], 1e-6)
        warm = solve_nlp(problem, settings=self.settings, warm_start=cold)
        self.assertEqual(warm.status, SOLVED)
        self.assertLess(warm.iterations, cold.iterations)
        self.assertAlmostEqual(warm.objective, cold.objective, delta=1e-6 * abs(cold.objective))

    def test_deterministic(self):
        """
        Two solves of the same problem return identical iterates.
        """
        problem = assemble_nlp(two_area_grid(), 'ac1')
        first = solve_nlp(problem, settings=self.settings)
        second = solve_nlp(problem, settings=self.settings)
        np.testing.assert_array_equal(first.x, second.x)
        self.assertEqual(first.iterations, second.iterations)


class ActiveSetTests(SimpleTestCase):

    def test_thresholds(self):
        """
        Rows are active exactly when their residual is within the tolerance.
        """
        problem = toy_problem(
            [(0.0, 1.0), (2.0, 2.0), (-np.inf, np.inf)],
            [(1.0, 0, 2, 0, 0)],
            inequalities=[[(1.0, 2, 1, 2, 0), (-0.5,)], [(1.0, 2, 1, 2, 0), (-1.0,)]],
        )
        active = detect_active_set(problem, np.array([1.0, 2.0, 0.5]), tol=1e-6)
        np.testing.assert_array_equal(active.inequalities, [0])
        np.testing.assert_array_equal(active.upper, [0, 1])
        np.testing.assert_array_equal(active.lower, [])
        self.assertEqual(len(active), 3)
        jacobian = active.jacobian(problem, np.array([1.0, 2.0, 0.5])).toarray()
        np.testing.assert_array_equal(jacobian, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])

    def test_inactive_row(self):
        """
        A strictly negative residual is inactive.
        """
        problem = toy_problem([(-np.inf, np.inf)], [(1.0, 0, 2, 0, 0)], inequalities=[[(1.0, 0, 1, 0, 0)]])
        active = detect_active_set(problem, np.array([-0.5]), tol=1e-6)
        self.assertEqual(len(active), 0)


class SettingsTests(SimpleTestCase):

    def test_defaults(self):
        """
        Defaults come from settings.NLP_SOLVER.
        """
        options = SolverSettings.from_settings()
        self.assertEqual(options.tol, 1e-8)
        self.assertEqual(options.max_iter, 200)
        self.assertEqual(options.activity_tol, 1e-6)

    def test_invalid_settings(self):
        """
        Non-positive values, unknown names and a loose KKT tolerance are rejected.
        """
        with self.assertRaises(ConfigurationError):
            SolverSettings.from_settings(tol=-1.0)
        with self.assertRaises(ConfigurationError):
            SolverSettings.from_settings(activity_tol=1e-10)
        with self.assertRaises(ConfigurationError):
            SolverSettings.from_settings(line_search=True)


class FactorizationTests(SimpleTestCase):

    def test_inertia_and_solve(self):
        """
        Inertia counts match the eigenvalues and solves match numpy.
        """
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        matrix = q @ np.diag([3.0, 1.0, 0.5, -2.0, -0.1]) @ q.T
        factorization = SymmetricFactorization(matrix)
        self.assertEqual(factorization.inertia, (3, 2, 0))
        rhs = rng.standard_normal(5)
        np.testing.assert_allclose(factorization.solve(rhs), np.linalg.solve(matrix, rhs), atol=1e-12)

    def test_singular_matrix(self):
        """
        A rank-deficient matrix reports a zero eigenvalue.
        """
        factorization = SymmetricFactorization(np.array([[1.0, 1.0], [1.0, 1.0]]))
        self.assertTrue(factorization.is_singular)

    def test_tiny_pivots_are_not_zero(self):
        """
        Constraint rows scaled down to 1e-6 give pivots near −1e-12 that still count as negative.
        """
        hessian = np.diag([1.0, 2.0, 3.0])
        jacobian = 1e-6 * np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
        matrix = np.block([[hessian, jacobian.T], [jacobian, np.zeros((2, 2))]])
        factorization = SymmetricFactorization(matrix)
        self.assertEqual(factorization.inertia, (3, 2, 0))
        self.assertFalse(factorization.is_singular)
        expected = np.array([1.0, -2.0, 0.5, 3.0, -4.0])
        np.testing.assert_allclose(factorization.solve(matrix @ expected), expected, rtol=1e-6)
