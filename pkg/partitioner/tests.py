import numpy as np
from django.test import SimpleTestCase

from core.exceptions import FormulationError
from core.testing import CASE1_PATH, single_region_grid, two_area_grid
from formulation.builder import assemble_nlp
from formulation.derivatives import random_point
from network.loader import load_case
from nlp.options import SolverSettings
from nlp.solver import SOLVED, solve_nlp

from .decomposition import (
    build_scaling, compose_global, consensus_residual, decompose, split_global,
)
from .residuals import kkt_residual


def labelled_values(problem, x):
    values = dict(zip(problem.equality_labels, problem.equalities(x)))
    values.update(zip(problem.inequality_labels, problem.inequalities(x)))
    return values


class DecomposeTests(SimpleTestCase):

    def setUp(self):
        self.grid = two_area_grid()
        self.regions, self.consensus = decompose(self.grid)
        self.central = assemble_nlp(self.grid)

    def test_region_and_row_counts(self):
        """
        Two AC regions plus the MTDC region, four consensus rows per tie-line.
        """
        self.assertEqual([region.region_id for region in self.regions], ['ac1', 'ac2', 'mtdc'])
        self.assertEqual(len(self.consensus), 8)
        self.assertEqual(self.consensus.labels[:4], ['tie1:vm_k', 'tie1:vm_kp', 'tie1:va_k', 'tie1:va_kp'])

    def test_sign_structure(self):
        """
        Every consensus row has exactly one +1 and one −1 across regions.
        """
        stacked = np.hstack([region.coupling.toarray() for region in self.regions])
        for row in stacked:
            self.assertEqual(sorted(row[row != 0].tolist()), [-1.0, 1.0])

    def test_case1_decomposition(self):
        """
        The four-region benchmark splits into five regions and sixteen rows.
        """
        regions, consensus = decompose(load_case(CASE1_PATH))
        self.assertEqual(len(regions), 5)
        self.assertEqual(len(consensus), 16)

    def test_grid_without_tie_lines(self):
        """
        Without tie-lines the coupling matrices and the index are empty.
        """
        regions, consensus = decompose(single_region_grid())
        self.assertEqual(len(consensus), 0)
        self.assertEqual(regions[0].coupling.shape, (0, regions[0].n))
        residual, norm = consensus_residual(regions, [regions[0].problem.x0])
        self.assertEqual(residual.size, 0)
        self.assertEqual(norm, 0.0)

    def test_split_point_is_equivalent(self):
        """
        Copying any central point into the regions reproduces every value and zero consensus residual.
        """
        rng = np.random.default_rng(11)
        x = random_point(self.central, rng)
        xs = split_global(x, self.central.layout, self.regions)
        _, norm = consensus_residual(self.regions, xs)
        self.assertEqual(norm, 0.0)
        self.assertAlmostEqual(
            sum(region.problem.objective(local) for region, local in zip(self.regions, xs)),
            self.central.objective(x),
        )
        merged = {}
        for region, local in zip(self.regions, xs):
            merged.update(labelled_values(region.problem, local))
        expected = labelled_values(self.central, x)
        self.assertEqual(set(merged), set(expected))
        for label, value in expected.items():
            self.assertAlmostEqual(merged[label], value, places=12, msg=label)

    def test_compose_inverts_split(self):
        """
        Owned variables map back to the central layout unchanged.
        """
        x = random_point(self.central, np.random.default_rng(5))
        xs = split_global(x, self.central.layout, self.regions)
        np.testing.assert_array_equal(compose_global(xs, self.regions, self.central.layout), x)

    def test_consensus_residual_row(self):
        """
        A voltage mismatch on one tie-line shows up on its row only.
        """
        xs = split_global(self.central.x0, self.central.layout, self.regions)
        ac1 = self.regions[0]
        xs[0][ac1.layout[('vm', ('vsc', 'vsc1', 'k'))]] = 1.02
        residual, norm = consensus_residual(self.regions, xs)
        self.assertAlmostEqual(residual[0], 0.02)
        self.assertAlmostEqual(norm, 0.02)
        self.assertEqual(np.count_nonzero(residual), 1)

    def test_dimension_mismatch(self):
        """
        Vectors of the wrong length are rejected.
        """
        with self.assertRaises(FormulationError):
            consensus_residual(self.regions, [np.zeros(3)] * 3)
        with self.assertRaises(FormulationError):
            consensus_residual(self.regions, [])


class ScalingTests(SimpleTestCase):

    def test_scaling_entries(self):
        """
        Voltage magnitudes get 1/range, free and fixed variables get 1.
        """
        problem = assemble_nlp(two_area_grid(), 'ac1')
        scaling = build_scaling(problem)
        layout = problem.layout
        self.assertAlmostEqual(scaling[layout[('vm', ('ac', 'ac1', 2))]], 10.0)
        self.assertEqual(scaling[layout[('va', ('ac', 'ac1', 2))]], 1.0)
        self.assertEqual(scaling[layout[('va', ('ac', 'ac1', 1))]], 1.0)
        self.assertTrue(np.all(scaling > 0))


class KktResidualTests(SimpleTestCase):

    def test_residual_at_and_off_optimum(self):
        """
        The fitted KKT residual vanishes at the optimum and grows when x moves.
        """
        problem = assemble_nlp(two_area_grid())
        solution = solve_nlp(problem, settings=SolverSettings.from_settings())
        self.assertEqual(solution.status, SOLVED)
        self.assertLessEqual(kkt_residual(problem, solution.x)['error'], 1e-6)
        moved = solution.x.copy()
        moved[problem.layout[('vm', ('ac', 'ac1', 3))]] += 1e-3
        self.assertGreater(kkt_residual(problem, moved)['error'], 1e-5)
