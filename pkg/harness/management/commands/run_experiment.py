import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import OpfError
from harness.experiment import ALGORITHMS, ExperimentConfig, run_experiment
from harness.outputs import emit_outputs
from harness.reports import CONVERGED, MAX_ITER
from network.loader import load_case
from partitioner.decomposition import build_consensus_index

logger = logging.getLogger('harness')

EXIT_ITERATION_CAP = 2
EXIT_ERROR = 1


class Command(BaseCommand):
    help = (
        "Runs one or more OPF algorithms on a case against the centralized reference and writes "
        "convergence.csv, summary.csv, coupling.csv and plot_convergence.py. Exit code 0 when every "
        "run converged, 2 when a run hit the iteration cap, 1 on error."
    )

    def add_arguments(self, parser):
        parser.add_argument('--case', required=True, help="Path to the case JSON file.")
        parser.add_argument(
            '--algo', nargs='+', default=['aladin-exact'], choices=ALGORITHMS,
            help="Algorithms to run, in order.",
        )
        parser.add_argument('--rho', type=float, help="Penalty ρ (per-algorithm default otherwise).")
        parser.add_argument('--mu', type=float, help="QP penalty μ (ALADIN only).")
        parser.add_argument('--eps', type=float, help="Termination tolerance ε.")
        parser.add_argument('--max-iter', type=int, help="Iteration cap.")
        parser.add_argument('--threads', type=int, help="Worker threads for the region solves.")
        parser.add_argument('--out', help="Output directory (settings.HARNESS['OUTPUT_DIR'] by default).")
        parser.add_argument('--no-cache', action='store_true', help="Recompute the centralized reference.")

    def handle(self, *args, **options):
        try:
            configs = [
                ExperimentConfig.from_settings(
                    options['case'], algorithm,
                    rho=options['rho'], mu=options['mu'], epsilon=options['eps'],
                    max_iter=options['max_iter'], threads=options['threads'],
                    output_dir=Path(options['out']) if options['out'] else None,
                    use_cache=not options['no_cache'],
                )
                for algorithm in options['algo']
            ]
            reports, runs = [], []
            for config in configs:
                report, run = run_experiment(config, emit=False)
                reports.append(report)
                runs.append(run)
                self.stdout.write(
                    f"{report.algorithm:<13} {report.status:<9} it={report.iterations:<6} "
                    f"time={report.wall_time:.3f}s cost={report.cost} gap={report.cost_gap}"
                )
            consensus = build_consensus_index(load_case(configs[0].case_path))
            paths = emit_outputs(reports, configs[0].output_dir, runs, consensus)
        except OpfError as exc:
            logger.error(f"Experiment failed: {exc}")
            raise CommandError(str(exc), returncode=EXIT_ERROR)

        self.stdout.write(self.style.SUCCESS(f"Outputs written to {paths['summary'].parent}"))
        statuses = {report.status for report in reports}
        if statuses == {CONVERGED}:
            return
        if statuses <= {CONVERGED, MAX_ITER}:
            raise CommandError("At least one run stopped at the iteration cap.", returncode=EXIT_ITERATION_CAP)
        failed = ', '.join(f"{r.algorithm}: {r.message}" for r in reports if r.status not in (CONVERGED, MAX_ITER))
        raise CommandError(f"Runs failed: {failed}", returncode=EXIT_ERROR)
