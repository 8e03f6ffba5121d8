import json

import numpy as np
from django.test import SimpleTestCase, tag

from core.exceptions import FormulationError
from core.testing import CASE1_PATH, VSC_DEFAULTS, single_region_grid, two_area_grid
from network.loader import load_case

from .builder import CENTRAL, CONVERTER_CURRENT_START, ObjectiveConfig, assemble_nlp, pi_model_coefficients
from .derivatives import check_derivatives, random_point
from .layout import VariableLayout
from .oracles import (
    converter_current, eval_ac_balance, eval_ac_branch_flow, eval_dc_constraints,
    eval_objective, eval_vsc_constraints,
)


class VariableLayoutTests(SimpleTestCase):

    def test_duplicate_key_is_rejected(self):
        """
        Adding the same variable twice must fail.
        """
        layout = VariableLayout()
        layout.add(('pm', 'vsc1'))
        with self.assertRaises(FormulationError):
            layout.add(('pm', 'vsc1'))

    def test_inverted_bounds_are_rejected(self):
        """
        A lower bound above the upper bound must fail.
        """
        with self.assertRaises(FormulationError):
            VariableLayout().add(('vdc', 1), 1.1, 0.9)

    def test_unknown_key_lookup(self):
        """
        Looking up a missing key raises FormulationError, not KeyError.
        """
        with self.assertRaises(FormulationError):
            VariableLayout()[('vm', ('ac', 'ac1', 1))]


class AssemblyTests(SimpleTestCase):

    def setUp(self):
        self.grid = two_area_grid()
        self.central = assemble_nlp(self.grid)

    def test_central_dimensions(self):
        """
        The centralized problem holds every bus, generator, station and DC bus once.
        """
        self.assertEqual(self.central.n, 38)
        self.assertEqual(self.central.m_eq, 30)
        self.assertEqual(self.central.m_ineq, 18)

    def test_regional_dimensions(self):
        """
        Local problems add exactly the tie-line voltage copies.
        """
        ac1 = assemble_nlp(self.grid, 'ac1')
        mtdc = assemble_nlp(self.grid, 'mtdc')
        self.assertEqual((ac1.n, ac1.m_eq, ac1.m_ineq), (10, 6, 4))
        self.assertEqual((mtdc.n, mtdc.m_eq, mtdc.m_ineq), (26, 18, 10))
        ac2 = assemble_nlp(self.grid, 'ac2')
        self.assertEqual(ac1.n + ac2.n + mtdc.n, self.central.n + 4 * len(self.grid.tie_lines))

    def test_flat_start_and_slack_bounds(self):
        """
        Voltage magnitudes start at 1, converter currents off zero, the slack angle and DC reference
        are pinned.
        """
        layout = self.central.layout
        x0 = self.central.x0
        self.assertEqual(x0[layout[('vm', ('ac', 'ac1', 2))]], 1.0)
        self.assertEqual(x0[layout[('pg', ('ac1', 0))]], 0.0)
        slack = layout[('va', ('ac', 'ac1', 1))]
        self.assertEqual((self.central.lower[slack], self.central.upper[slack]), (0.0, 0.0))
        reference = layout[('vdc', 2)]
        self.assertEqual((self.central.lower[reference], self.central.upper[reference]), (1.0, 1.0))
        self.assertEqual(self.central.upper[layout[('im', 'vsc1')]], VSC_DEFAULTS['i_max'])
        self.assertEqual(x0[layout[('im', 'vsc1')]], CONVERTER_CURRENT_START)

    def test_unknown_scope(self):
        """
        Asking for a region that does not exist fails.
        """
        with self.assertRaises(FormulationError):
            assemble_nlp(self.grid, 'ac9')

    def test_ac_only_grid_has_no_converter_blocks(self):
        """
        Without an MTDC grid the central problem is a plain AC OPF.
        """
        problem = assemble_nlp(single_region_grid(), CENTRAL)
        self.assertFalse(problem.has_block('vsc_balance'))
        self.assertFalse(problem.has_block('dc_balance'))
        self.assertEqual(problem.n, 8)


class OracleTests(SimpleTestCase):

    def setUp(self):
        self.grid = two_area_grid()
        self.problem = assemble_nlp(self.grid)
        self.layout = self.problem.layout

    def test_flat_start_branch_flow(self):
        """
        Equal voltages on a lossy, shunt-free section carry no active power.
        """
        p, q, residual = eval_ac_branch_flow(self.problem, self.problem.x0)
        # Rows: two ends per branch, branch 0 of ac1 first.
        self.assertAlmostEqual(p[0], 0.0)
        self.assertAlmostEqual(p[1], 0.0)
        self.assertAlmostEqual(q[0], -0.176 / 2)
        self.assertAlmostEqual(residual[0], q[0] ** 2 - 2.5 ** 2)
        self.assertEqual(residual[2], -np.inf)

    def test_pi_model_is_symmetric_without_tap(self):
        """
        The two ends of an untapped branch share every coefficient.
        """
        from_end, to_end = pi_model_coefficients(complex(1.0, -10.0), 0.2)
        self.assertEqual(from_end, to_end)

    def test_ac_balance_at_flat_start(self):
        """
        A load-free bus between untapped lines only sees their charging.
        """
        p, q = eval_ac_balance(self.problem, self.problem.x0)
        self.assertEqual(len(p), 6)
        self.assertAlmostEqual(p[1], 0.0)
        self.assertAlmostEqual(q[1], (0.176 + 0.158) / 2)

    def test_converter_loss_at_rest(self):
        """
        An idle converter draws its no-load loss a3 from the DC side.
        """
        x = self.problem.x0.copy()
        x[self.layout[('im', 'vsc1')]] = 0.0
        x[self.layout[('pn', 'vsc1')]] = -VSC_DEFAULTS['a3']
        groups = eval_vsc_constraints(self.problem, x)
        self.assertAlmostEqual(groups['loss'][0], 0.0)
        self.assertAlmostEqual(groups['current'][0], 0.0)
        self.assertEqual(len(groups['limits']), 8)

    def test_converter_current_matches_definition(self):
        """
        The current constraint vanishes at I = sqrt(P² + Q²) / V.
        """
        x = self.problem.x0.copy()
        p_m, q_m, v_m = 0.8, -0.3, 0.98
        x[self.layout[('pm', 'vsc1')]] = p_m
        x[self.layout[('qm', 'vsc1')]] = q_m
        x[self.layout[('vm', ('vsc', 'vsc1', 'm'))]] = v_m
        x[self.layout[('im', 'vsc1')]] = converter_current(p_m, q_m, v_m)
        self.assertAlmostEqual(eval_vsc_constraints(self.problem, x)['current'][0], 0.0)

    def test_dc_grid_at_flat_start(self):
        """
        Equal DC voltages carry no power, so every DC row is balanced.
        """
        balance, limits = eval_dc_constraints(self.problem, self.problem.x0)
        np.testing.assert_allclose(balance, 0.0)
        np.testing.assert_allclose(limits, -1.5)

    def test_objective_units(self):
        """
        Costs are evaluated in $ while generation is per-unit.
        """
        x = self.problem.x0.copy()
        x[self.layout[('pg', ('ac1', 0))]] = 1.0
        total, cost, losses = eval_objective(self.problem, x)
        self.assertAlmostEqual(cost, 0.11 * 100 ** 2 + 5.0 * 100 + 150.0 + 150.0)
        self.assertAlmostEqual(losses, 100.0 - 180.0)
        self.assertAlmostEqual(total, cost + 10.0 * losses)
        self.assertAlmostEqual(self.problem.objective(x), total)

    def test_loss_weight_override(self):
        """
        The loss weight of the configuration replaces the grid default.
        """
        problem = assemble_nlp(self.grid, config=ObjectiveConfig(loss_weight=0.0))
        total, cost, _ = eval_objective(problem, problem.x0)
        self.assertAlmostEqual(total, cost)

    def test_case1_cost_accounting(self):
        """
        With every generator at 100 MW the cost is the case9 variable cost times each region's ratio.
        """
        grid = load_case(CASE1_PATH)
        problem = assemble_nlp(grid)
        x = problem.x0.copy()
        for region in grid.ac_regions:
            for gen in region.generators:
                x[problem.layout[('pg', (region.id, gen.id))]] = 1.0
        per_region = (0.11 + 0.085 + 0.1225) * 100 ** 2 + (5.0 + 1.2 + 1.0) * 100
        breakdown = problem.cost_breakdown(x)
        self.assertAlmostEqual(breakdown['cost'], (1.0 + 1.3 + 1.7 + 2.2) * per_region, places=6)
        self.assertAlmostEqual(breakdown['losses'], 12 * 100.0 - (315 + 318 + 321 + 324), places=6)
        self.assertAlmostEqual(breakdown['objective'], breakdown['cost'] + 10.0 * breakdown['losses'], places=6)

    def test_describe_is_json_serializable(self):
        """
        The debug dump round-trips through json with null infinite bounds.
        """
        dump = self.problem.describe()
        json.dumps(dump, allow_nan=False)
        self.assertEqual(len(dump['bounds']), self.problem.n)
        names = {block['name'] for block in dump['blocks']}
        self.assertIn('vsc_current', names)
        self.assertIn('dc_flow_limit', names)


class DerivativeTests(SimpleTestCase):

    def test_two_area_derivatives(self):
        """
        Analytic derivatives agree with central differences.
        """
        rng = np.random.default_rng(7)
        for scope in ('central', 'ac1', 'mtdc'):
            problem = assemble_nlp(two_area_grid(), scope)
            points = [random_point(problem, rng) for _ in range(5)]
            errors = check_derivatives(problem, points, rng=rng)
            for oracle, error in errors.items():
                self.assertLess(error, 1e-5, f"{scope} {oracle}")

    @tag('slow')
    def test_case1_derivatives(self):
        """
        The four-region benchmark passes the check at 100 random points.
        """
        problem = assemble_nlp(load_case(CASE1_PATH))
        rng = np.random.default_rng(0)
        points = [random_point(problem, rng) for _ in range(100)]
        for oracle, error in check_derivatives(problem, points, rng=rng).items():
            self.assertLess(error, 1e-5, oracle)
