import json
import tempfile
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from core.exceptions import ConfigurationError
from core.testing import CASE1_PATH
from formulation.builder import assemble_nlp
from network.loader import load_case

from .communication import count_admm_communication, count_communication
from .experiment import ExperimentConfig, load_reference, run_experiment
from .models import ExperimentRun, ReferenceSolution
from .outputs import CONVERGENCE_COLUMNS, COUPLING_COLUMNS, emit_outputs
from .reports import MAX_ITER, RunReport, solution_gap
from .serializers import SUMMARY_COLUMNS


class CommunicationTests(SimpleTestCase):

    def test_exact_hessian_count(self):
        """
        n = 2 with one active row sends 2 + 3 + 2 = 7 floats.
        """
        self.assertEqual(count_communication([(2, 1)], 'exact'), 7)

    def test_bfgs_count(self):
        """
        n = 2 with one active row sends 3·2 + 2 = 8 floats.
        """
        self.assertEqual(count_communication([(2, 1)], 'bfgs'), 8)

    def test_without_active_rows(self):
        """
        The Jacobian term vanishes when nothing is active.
        """
        self.assertEqual(count_communication([(4, 0), (3, 0)], 'exact'), 4 + 10 + 3 + 6)

    def test_admm_count_and_unknown_mode(self):
        """
        ADMM sends x and ξ; unknown modes are rejected.
        """
        self.assertEqual(count_admm_communication([3, 5]), 16)
        with self.assertRaises(ValueError):
            count_communication([(1, 0)], 'newton')


class ConfigTests(SimpleTestCase):

    def test_unknown_algorithm(self):
        """
        An unknown algorithm is rejected before any solve.
        """
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_settings(CASE1_PATH, 'sqp')

    def test_non_positive_parameters(self):
        """
        Penalties and tolerances must be positive.
        """
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_settings(CASE1_PATH, 'admm', rho=0.0)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_settings(CASE1_PATH, 'aladin-exact', epsilon=-1e-4)

    def test_defaults_and_parameters(self):
        """
        Unset values stay unset and only requested parameters are recorded.
        """
        config = ExperimentConfig.from_settings(CASE1_PATH, 'aladin-bfgs', rho=1e4)
        self.assertIsNone(config.mu)
        self.assertEqual(config.parameters, {'rho': 1e4, 'loss_weight': 10.0})

    def test_solution_gap(self):
        """
        Gaps are relative to the reference and undefined without one.
        """
        self.assertAlmostEqual(solution_gap(101.0, 100.0), 0.01)
        self.assertAlmostEqual(solution_gap(99.0, 100.0), 0.01)
        self.assertIsNone(solution_gap(1.0, None))


class OutputTests(TestCase):

    def test_empty_history_gives_headers_only(self):
        """
        A run without iterations writes header-only convergence and coupling files.
        """
        report = RunReport(algorithm='admm', status=MAX_ITER)
        run = ExperimentRun.objects.create(case_path='none', algorithm='admm', status=MAX_ITER)
        with tempfile.TemporaryDirectory() as directory:
            paths = emit_outputs([report], directory, [run])
            convergence = pd.read_csv(paths['convergence'])
            self.assertEqual(list(convergence.columns), CONVERGENCE_COLUMNS)
            self.assertTrue(convergence.empty)
            self.assertEqual(list(pd.read_csv(paths['coupling']).columns), COUPLING_COLUMNS)
            summary = pd.read_csv(paths['summary'])
            self.assertEqual(list(summary.columns), SUMMARY_COLUMNS)
            self.assertEqual(len(summary), 1)
            self.assertTrue(paths['plot'].is_file())


class ExperimentTests(TestCase):

    def test_reference_is_cached(self):
        """
        The second reference request is served from the database.
        """
        grid = load_case(CASE1_PATH)
        first, record = load_reference(CASE1_PATH, grid)
        second, cached = load_reference(CASE1_PATH, grid)
        self.assertEqual(ReferenceSolution.objects.count(), 1)
        self.assertEqual(record.pk, cached.pk)
        self.assertEqual(first.cost, second.cost)
        self.assertEqual(list(first.x), list(second.x))

    def test_capped_aladin_run_outputs(self):
        """
        A two-iteration ALADIN run records its rows, the coupling trajectories and consistent gaps.
        """
        with tempfile.TemporaryDirectory() as directory:
            config = ExperimentConfig.from_settings(
                CASE1_PATH, 'aladin-exact', max_iter=2, output_dir=Path(directory),
            )
            report, run = run_experiment(config)
            self.assertEqual(report.status, MAX_ITER)
            self.assertEqual(run.iterations, 2)
            convergence = pd.read_csv(Path(directory) / 'convergence.csv')
            coupling = pd.read_csv(Path(directory) / 'coupling.csv')
            self.assertEqual(len(convergence), 2)
            self.assertEqual(len(coupling), 2 * 16)
            summary = pd.read_csv(Path(directory) / 'summary.csv')
            reference = run.reference
            self.assertEqual(summary.loc[0, 'cost_gap'], abs(run.cost - reference.cost) / abs(reference.cost))
            self.assertEqual(summary.loc[0, 'losses_gap'], abs(run.losses - reference.losses) / abs(reference.losses))


class CommandTests(TestCase):

    def test_centralized_run_exits_cleanly(self):
        """
        A centralized run writes a one-row summary, records where it went and returns normally.
        """
        with tempfile.TemporaryDirectory() as directory:
            call_command('run_experiment', '--case', str(CASE1_PATH), '--algo', 'centralized', '--out', directory)
            summary = pd.read_csv(Path(directory) / 'summary.csv')
            self.assertEqual(list(summary['algorithm']), ['centralized'])
            self.assertEqual(summary.loc[0, 'cost_gap'], 0.0)
            run = ExperimentRun.objects.get()
            self.assertEqual(run.output_dir, directory)

    def test_centralized_run_reuses_reference(self):
        """
        The centralized row reports the reference solve instead of solving again.
        """
        with tempfile.TemporaryDirectory() as directory:
            config = ExperimentConfig.from_settings(CASE1_PATH, 'centralized', output_dir=Path(directory))
            report, run = run_experiment(config, emit=False)
            self.assertFalse((Path(directory) / 'summary.csv').exists())
        reference = ReferenceSolution.objects.get()
        self.assertEqual(run.reference.pk, reference.pk)
        self.assertGreater(reference.iterations, 0)
        self.assertEqual(report.iterations, reference.iterations)
        self.assertEqual(report.wall_time, reference.solve_time)
        self.assertEqual(report.distance, 0.0)
        self.assertEqual(run.output_dir, directory)

    def test_iteration_cap_exit_code(self):
        """
        A run stopped by the cap reports exit code 2.
        """
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(CommandError) as caught:
                call_command(
                    'run_experiment', '--case', str(CASE1_PATH), '--algo', 'aladin-bfgs',
                    '--max-iter', '1', '--out', directory,
                )
        self.assertEqual(caught.exception.returncode, 2)

    def test_missing_case_exit_code(self):
        """
        An unreadable case file reports exit code 1.
        """
        with self.assertRaises(CommandError) as caught:
            call_command('run_experiment', '--case', 'does-not-exist.json', '--algo', 'centralized')
        self.assertEqual(caught.exception.returncode, 1)

    def test_dump_nlp(self):
        """
        The dump lists every variable of the requested scope.
        """
        with tempfile.TemporaryDirectory() as directory:
            target = Path(directory) / 'central.json'
            call_command('dump_nlp', '--case', str(CASE1_PATH), '--out', str(target))
            dump = json.loads(target.read_text())
        self.assertEqual(dump['variables'], assemble_nlp(load_case(CASE1_PATH)).n)
        self.assertEqual(len(dump['bounds']), dump['variables'])


@tag('slow')
class CentralizedAcceptanceTests(TestCase):

    def test_case1_cost_and_losses(self):
        """
        Case 1 reproduces 249.354×10² $ and 23.484 MW within 1%.
        """
        config = ExperimentConfig.from_settings(CASE1_PATH, 'centralized', use_cache=False)
        report, _ = run_experiment(config, emit=False)
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.cost / 24935.4, 1.0, delta=0.01)
        self.assertAlmostEqual(report.losses / 23.484, 1.0, delta=0.01)
