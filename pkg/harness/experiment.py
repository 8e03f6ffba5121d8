"""
Experiment orchestration: centralized reference (cached per case), one
algorithm run, and the bookkeeping that feeds summary.csv.
"""

import hashlib
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from django.conf import settings

from admm.algorithm import AdmmParams, AdmmRunner
from aladin.algorithm import AladinRunner
from aladin.params import BFGS, EXACT, AladinParams
from core.exceptions import ConfigurationError, SolverError
from formulation.builder import ObjectiveConfig
from network.loader import load_case
from nlp.options import SolverSettings
from nlp.solver import solve_nlp
from partitioner.decomposition import central_problem, decompose

from .models import ExperimentRun, ReferenceSolution
from .outputs import emit_outputs
from .reports import CONVERGED, MAX_ITER, Reference, RunReport, solution_gap

logger = logging.getLogger('harness')

CENTRALIZED = 'centralized'
ADMM = 'admm'
ALADIN_EXACT = 'aladin-exact'
ALADIN_BFGS = 'aladin-bfgs'
ALGORITHMS = (CENTRALIZED, ADMM, ALADIN_EXACT, ALADIN_BFGS)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One algorithm on one case. Unset penalties and caps fall back to the
    per-algorithm defaults in settings.DISTRIBUTED.
    """
    case_path: Path
    algorithm: str
    rho: Optional[float] = None
    mu: Optional[float] = None
    epsilon: Optional[float] = None
    max_iter: Optional[int] = None
    threads: Optional[int] = None
    output_dir: Optional[Path] = None
    loss_weight: float = 10.0
    use_cache: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"Unknown algorithm '{self.algorithm}'. Choose from {', '.join(ALGORITHMS)}."
            )
        for name in ('rho', 'mu', 'epsilon', 'threads'):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigurationError(f"Parameter '{name}' must be positive.")
        if self.max_iter is not None and self.max_iter < 0:
            raise ConfigurationError("The iteration cap must be non-negative.")
        if self.loss_weight < 0:
            raise ConfigurationError("The loss weight must be non-negative.")

    @classmethod
    def from_settings(cls, case_path, algorithm, **overrides):
        values = {
            'output_dir': settings.HARNESS['OUTPUT_DIR'],
            'loss_weight': settings.OPF_MODEL['LOSS_WEIGHT'],
        }
        values.update({name: value for name, value in overrides.items() if value is not None})
        return cls(case_path=Path(case_path), algorithm=algorithm, **values)

    @property
    def parameters(self):
        """Explicitly requested parameters, for the run record."""
        return {
            name: value for name, value in asdict(self).items()
            if name in ('rho', 'mu', 'epsilon', 'max_iter', 'threads', 'loss_weight') and value is not None
        }


def reference_digest(case_path, loss_weight, tol):
    digest = hashlib.sha256(Path(case_path).read_bytes())
    digest.update(f"|{loss_weight!r}|{tol!r}".encode())
    return digest.hexdigest()


def solve_reference(grid, config=None, tol=None):
    """Centralized interior-point solve that every distributed run is measured against."""
    problem = central_problem(grid, config)
    solver_settings = SolverSettings.from_settings(tol=tol or settings.HARNESS['REFERENCE_TOL'])
    started = time.perf_counter()
    solution = solve_nlp(problem, settings=solver_settings)
    elapsed = time.perf_counter() - started
    if not solution.usable:
        raise SolverError(
            f"Centralized reference for '{grid.name}' failed with status {solution.status} "
            f"(KKT error {solution.kkt['error']:.2e})."
        )
    breakdown = problem.cost_breakdown(solution.x)
    logger.info(
        f"Reference for '{grid.name}': cost {breakdown['cost']:.3f} $, losses {breakdown['losses']:.3f} MW "
        f"in {solution.iterations} iterations ({elapsed:.3f} s)."
    )
    return Reference(
        x=solution.x, cost=breakdown['cost'], losses=breakdown['losses'], objective=breakdown['objective'],
        nu=solution.nu, kappa=solution.kappa, gamma=solution.gamma, solve_time=elapsed,
        iterations=solution.iterations, converged=solution.converged,
    )


def load_reference(case_path, grid, config=None, tol=None, use_cache=True):
    """
    Returns (Reference, ReferenceSolution record), solving and storing it
    when no cached solution matches the case digest.
    """
    config = config or ObjectiveConfig(settings.OPF_MODEL['LOSS_WEIGHT'])
    tol = tol or settings.HARNESS['REFERENCE_TOL']
    digest = reference_digest(case_path, config.loss_weight, tol)
    layout = central_problem(grid, config).layout
    record = ReferenceSolution.objects.filter(digest=digest).first() if use_cache else None
    if record is not None and set(record.values) == set(layout.labels):
        logger.info(f"Using cached reference for {case_path}.")
        x = np.array([record.values[label] for label in layout.labels], dtype=float)
        reference = Reference(
            x=x, cost=record.cost, losses=record.losses, objective=record.objective, solve_time=record.solve_time,
            iterations=record.iterations, converged=record.converged,
        )
        return reference, record

    reference = solve_reference(grid, config, tol)
    record, _ = ReferenceSolution.objects.update_or_create(
        digest=digest,
        defaults={
            'case_path': str(case_path),
            'loss_weight': config.loss_weight,
            'tolerance': tol,
            'values': dict(zip(layout.labels, reference.x.tolist())),
            'cost': reference.cost,
            'losses': reference.losses,
            'objective': reference.objective,
            'solve_time': reference.solve_time,
            'iterations': reference.iterations,
            'converged': reference.converged,
        },
    )
    return reference, record


def run_centralized(reference):
    """
    The centralized run is the reference solve itself, so its report is
    read off the reference instead of solving a second time.
    """
    report = RunReport(algorithm=CENTRALIZED, iterations=reference.iterations)
    report.wall_time = reference.solve_time
    report.status = CONVERGED if reference.converged else MAX_ITER
    report.message = '' if reference.converged else "Reference accepted at the interior-point iteration cap."
    report.x = reference.x
    report.cost, report.losses, report.objective = reference.cost, reference.losses, reference.objective
    report.cost_gap = solution_gap(report.cost, reference.cost)
    report.losses_gap = solution_gap(report.losses, reference.losses)
    report.distance = 0.0
    return report


def build_runner(config, regions, consensus, reference, central):
    """The distributed runner selected by `config.algorithm`."""
    if config.algorithm == ADMM:
        if config.mu is not None:
            logger.info("ADMM has no μ parameter; ignoring --mu.")
        params = AdmmParams.from_settings(
            rho=config.rho, epsilon=config.epsilon, max_iter=config.max_iter, threads=config.threads,
        )
        return AdmmRunner(regions, consensus, params, reference=reference, central=central)
    mode = EXACT if config.algorithm == ALADIN_EXACT else BFGS
    params = AladinParams.from_settings(
        mode, rho=config.rho, mu=config.mu, epsilon=config.epsilon, max_iter=config.max_iter, threads=config.threads,
    )
    return AladinRunner(regions, consensus, params, reference=reference, central=central)


def record_run(config, report, reference_record=None, output_dir=''):
    return ExperimentRun.objects.create(
        case_path=str(config.case_path),
        algorithm=report.algorithm,
        status=report.status,
        parameters=config.parameters,
        iterations=report.iterations,
        wall_time=report.wall_time,
        cost=report.cost,
        cost_gap=report.cost_gap,
        losses=report.losses,
        losses_gap=report.losses_gap,
        distance=report.distance,
        message=report.message,
        output_dir=str(output_dir or ''),
        reference=reference_record,
    )


def run_experiment(config, emit=True):
    """
    Solves (or loads) the centralized reference, then runs the configured
    algorithm. The run is stored as an ExperimentRun naming the configured
    output directory; the CSV files are written there only when `emit` is set.

    Returns (RunReport, ExperimentRun).
    """
    grid = load_case(config.case_path)
    objective = ObjectiveConfig(config.loss_weight)
    reference, reference_record = load_reference(config.case_path, grid, objective, use_cache=config.use_cache)

    if config.algorithm == CENTRALIZED:
        report, consensus = run_centralized(reference), None
    else:
        regions, consensus = decompose(grid, objective)
        runner = build_runner(config, regions, consensus, reference, central_problem(grid, objective))
        report = runner.run()

    run = record_run(config, report, reference_record, config.output_dir)
    if emit and config.output_dir:
        emit_outputs([report], config.output_dir, [run], consensus)
    logger.info(
        f"{config.algorithm} on {Path(config.case_path).name}: {report.status}, "
        f"{report.iterations} iterations, {report.wall_time:.3f} s."
    )
    return report, run
