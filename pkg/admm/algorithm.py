"""
Consensus ADMM over the duplicated tie-line voltages.

Each iteration:
  1. x_ℓ⁺ = argmin f_ℓ(x_ℓ) + ξ_ℓᵀx_ℓ + (ρ/2)‖x_ℓ − z_ℓ‖²   (per region)
  2. ξ_ℓ⁺ = ξ_ℓ + ρ(x_ℓ⁺ − z_ℓ)
  3. z⁺ = argmin Σ_ℓ (ρ/2)‖x_ℓ⁺ − z_ℓ‖² − ξ_ℓ⁺ᵀz_ℓ  s.t.  Σ_ℓ A_ℓ z_ℓ = 0
"""

import logging
import time
from dataclasses import dataclass, fields

import numpy as np
from django.conf import settings
from scipy.linalg import LinAlgError, solve

from core.exceptions import ConfigurationError, CoordinationError, SubproblemError
from core.mixins import RegionPoolMixin
from formulation.builder import CENTRAL, ObjectiveConfig, assemble_nlp
from formulation.problem import ProximalProblem
from harness.communication import count_admm_communication
from harness.reports import CONVERGED, DIVERGED, MAX_ITER, MetricRecorder, RunReport
from nlp.options import SolverSettings
from nlp.solver import solve_nlp

logger = logging.getLogger('distributed')


@dataclass(frozen=True)
class AdmmParams:
    rho: float = 1e4
    max_iter: int = 30000
    epsilon: float = 1e-4
    threads: int = 1
    rho_growth: float = 1.0
    rho_max: float = 1e8

    def __post_init__(self):
        if self.rho <= 0 or self.epsilon <= 0 or self.max_iter < 0 or self.threads < 1:
            raise ConfigurationError("ADMM needs rho > 0, epsilon > 0, max_iter >= 0 and threads >= 1.")
        if self.rho_growth < 1.0 or self.rho_max < self.rho:
            raise ConfigurationError("The rho ramp must be non-decreasing and capped above rho.")

    @classmethod
    def from_settings(cls, **overrides):
        conf = settings.DISTRIBUTED
        values = {
            'rho': conf['ADMM']['RHO'],
            'max_iter': conf['ADMM']['MAX_ITER'],
            'epsilon': conf['EPSILON'],
            'threads': conf['THREADS'],
            'rho_growth': conf['RHO_GROWTH'],
            'rho_max': conf['RHO_MAX'],
        }
        values.update({name: value for name, value in overrides.items() if value is not None})
        unknown = set(values) - {item.name for item in fields(cls)}
        if unknown:
            raise ConfigurationError(f"Unknown ADMM parameters: {', '.join(sorted(unknown))}.")
        return cls(**values)


@dataclass
class AdmmState:
    z: list
    xi: list
    rho: float
    x: list = None
    solutions: list = None


def admm_local_step(region, z, xi, rho, solver_settings=None, warm_start=None):
    """Solves the proximal local problem of one region; returns its NlpSolution."""
    problem = ProximalProblem(region.problem, linear=xi, center=z, weights=1.0, rho=rho)
    solution = solve_nlp(problem, x0=z, settings=solver_settings, warm_start=warm_start)
    if not solution.usable:
        raise SubproblemError(region.region_id, solution)
    if not solution.converged:
        logger.warning(f"Region '{region.region_id}' accepted at {solution.status} with KKT error {solution.kkt['error']:.2e}.")
    return solution


def admm_dual_update(x, z, xi, rho):
    return xi + rho * (x - z)


def admm_consensus_step(xs, xis, rho, couplings):
    """
    z_ℓ = x_ℓ + (ξ_ℓ − A_ℓᵀν)/ρ with ν = (Σ A_ℓA_ℓᵀ)⁻¹(ρ Σ A_ℓx_ℓ + Σ A_ℓξ_ℓ).
    """
    rows = couplings[0].shape[0] if couplings else 0
    if rows == 0:
        return [x + xi / rho for x, xi in zip(xs, xis)]
    gram = sum((a @ a.T).toarray() for a in couplings)
    rhs = sum(rho * (a @ x) + a @ xi for a, x, xi in zip(couplings, xs, xis))
    try:
        nu = solve(gram, rhs, assume_a='pos')
    except LinAlgError as exc:
        raise CoordinationError(f"Consensus system is singular: {exc}")
    return [x + (xi - a.T @ nu) / rho for a, x, xi in zip(couplings, xs, xis)]


class AdmmRunner(RegionPoolMixin):
    algorithm = 'admm'

    def __init__(self, regions, consensus, params=None, solver_settings=None, reference=None, central=None):
        self.regions = regions
        self.consensus = consensus
        self.params = params or AdmmParams.from_settings()
        self.threads = self.params.threads
        self.solver_settings = solver_settings or SolverSettings.from_settings()
        if central is None:
            problem = regions[0].problem
            central = assemble_nlp(problem.grid, CENTRAL, ObjectiveConfig(problem.loss_weight))
        self.recorder = MetricRecorder(regions, central, consensus, reference)

    def initial_state(self):
        return AdmmState(
            z=[region.problem.x0.copy() for region in self.regions],
            xi=[np.zeros(region.n) for region in self.regions],
            rho=self.params.rho,
        )

    def run(self, state=None):
        state = state or self.initial_state()
        report = RunReport(algorithm=self.algorithm)
        couplings = [region.coupling for region in self.regions]
        # Forward message per region: x_ℓ⁺ and ξ_ℓ⁺.
        communication = count_admm_communication(region.n for region in self.regions)
        warm = [None] * len(self.regions)
        started = time.perf_counter()
        try:
            for iteration in range(1, self.params.max_iter + 1):
                solutions = self.map_regions(
                    lambda region, z, xi, start: admm_local_step(region, z, xi, state.rho, self.solver_settings, start),
                    self.regions, state.z, state.xi, warm,
                )
                xs = [solution.x for solution in solutions]
                dual_residual = np.max(np.abs(sum(a @ (x - z) for a, x, z in zip(couplings, xs, state.z)))) if len(self.consensus) else 0.0
                state.xi = [admm_dual_update(x, z, xi, state.rho) for x, z, xi in zip(xs, state.z, state.xi)]
                state.z = admm_consensus_step(xs, state.xi, state.rho, couplings)
                state.x, state.solutions, warm = xs, solutions, solutions

                row = self.recorder.record(report, iteration, xs, dual_residual, communication)
                self.log_iteration(row)
                if row['consensus_violation'] <= self.params.epsilon:
                    report.status = CONVERGED
                    break
                state.rho = min(state.rho * self.params.rho_growth, self.params.rho_max)
            else:
                report.status = MAX_ITER
        except (SubproblemError, CoordinationError) as exc:
            report.status = DIVERGED
            report.message = str(exc)
            logger.warning(f"ADMM stopped: {exc}")
        report.wall_time = time.perf_counter() - started
        report.extras['rho'] = state.rho
        return self.recorder.finish(report, state.x or [])
