"""
ALADIN over the duplicated tie-line voltages.

Each iteration:
  1. x_ℓ = argmin f_ℓ(x_ℓ) + λᵀA_ℓx_ℓ + (ρ/2)‖x_ℓ − z_ℓ‖²_Σℓ   (per region)
  2. gradients, Hessians and active Jacobians at x_ℓ          (per region)
  3. stop when ‖Σ A_ℓx_ℓ‖∞ ≤ ε and max_ℓ ‖Σ_ℓ(x_ℓ − z_ℓ)‖∞ ≤ ε
  4. coupled QP at the coordinator
  5. z⁺ = x + α₁(x − z) + α₂Δx,  λ⁺ = λ + α₃(λ^QP − λ)
     (or z + α₁(x − z) + α₂Δx with update_form='standard')
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from core.exceptions import CoordinationError, SubproblemError
from core.mixins import RegionPoolMixin
from formulation.builder import CENTRAL, ObjectiveConfig, assemble_nlp
from formulation.problem import ProximalProblem
from harness.communication import count_communication
from harness.reports import CONVERGED, DIVERGED, MAX_ITER, MetricRecorder, RunReport
from nlp.options import SolverSettings
from nlp.solver import solve_nlp
from partitioner.decomposition import split_global

from .params import BFGS, LITERAL_UPDATE, AladinParams
from .qp import QpInput, solve_coupled_qp
from .sensitivities import BfgsMemory, extract_sensitivities

logger = logging.getLogger('distributed')


@dataclass
class AladinState:
    z: list
    lam: np.ndarray
    rho: float
    mu: float
    memories: list = None
    x: list = None
    solutions: list = None


def aladin_local_step(region, z, lam, rho, solver_settings=None, warm_start=None):
    """Solves the penalized local problem of one region; returns its NlpSolution."""
    linear = region.coupling.T @ lam
    problem = ProximalProblem(region.problem, linear=linear, center=z, weights=region.scaling, rho=rho)
    solution = solve_nlp(problem, x0=z, settings=solver_settings, warm_start=warm_start)
    if not solution.usable:
        raise SubproblemError(region.region_id, solution)
    if not solution.converged:
        logger.warning(f"Region '{region.region_id}' accepted at {solution.status} with KKT error {solution.kkt['error']:.2e}.")
    return solution


def aladin_update(xs, zs, dxs, lam, lam_qp, alphas=(1.0, 1.0, 1.0), form=LITERAL_UPDATE):
    a1, a2, a3 = alphas
    if form == LITERAL_UPDATE:
        z_next = [x + a1 * (x - z) + a2 * dx for x, z, dx in zip(xs, zs, dxs)]
    else:
        z_next = [z + a1 * (x - z) + a2 * dx for x, z, dx in zip(xs, zs, dxs)]
    return z_next, lam + a3 * (lam_qp - lam)


def check_kkt_gap(regions, solutions, lam):
    """
    Per region ‖∇(f_ℓ + νᵀc_ℓ + κᵀh_ℓ) + γ_ℓ + A_ℓᵀλ‖∞ relative to
    max(1, ‖∇f_ℓ‖∞), evaluated independently of the local solver.
    """
    gaps = []
    for region, solution in zip(regions, solutions):
        problem = region.problem
        residual = problem.lagrangian_gradient(solution.x, solution.nu, solution.kappa, solution.gamma)
        residual = residual + region.coupling.T @ lam
        scale = max(1.0, float(np.max(np.abs(problem.gradient(solution.x)), initial=0.0)))
        gaps.append(float(np.max(np.abs(residual), initial=0.0)) / scale)
    return gaps


def rate_certificate(errors, order=1.5, constant=1e3, floor=1e-12):
    """True when each of the last three errors satisfies e⁺ ≤ C·e^order."""
    tail = [float(e) for e in errors[-3:]]
    if len(tail) < 3:
        return False
    return all(after <= max(constant * before ** order, floor) for before, after in zip(tail, tail[1:]))


class AladinRunner(RegionPoolMixin):

    def __init__(self, regions, consensus, params=None, solver_settings=None, reference=None, central=None):
        self.regions = regions
        self.consensus = consensus
        self.params = params or AladinParams.from_settings()
        self.algorithm = self.params.algorithm
        self.threads = self.params.threads
        self.solver_settings = solver_settings or SolverSettings.from_settings()
        if central is None:
            problem = regions[0].problem
            central = assemble_nlp(problem.grid, CENTRAL, ObjectiveConfig(problem.loss_weight))
        self.central = central
        self.reference = reference
        self.recorder = MetricRecorder(regions, central, consensus, reference)
        self.reference_split = None
        self.state = None
        if reference is not None:
            self.reference_split = split_global(reference.x, central.layout, regions)

    def initial_state(self):
        memories = None
        if self.params.mode == BFGS:
            memories = [BfgsMemory(region.n, damping=self.params.bfgs_damping) for region in self.regions]
        return AladinState(
            z=[region.problem.x0.copy() for region in self.regions],
            lam=np.zeros(len(self.consensus)),
            rho=self.params.rho,
            mu=self.params.mu,
            memories=memories,
        )

    def _sensitivities(self, region, solution, memory):
        return extract_sensitivities(
            region, solution, self.params.mode, memory,
            hessian_floor=self.params.hessian_floor, activity_tol=self.params.activity_tol,
        )

    def _z_distance(self, zs):
        if self.reference_split is None:
            return None
        return max(float(np.max(np.abs(z - ref), initial=0.0)) for z, ref in zip(zs, self.reference_split))

    def run(self, state=None):
        state = state or self.initial_state()
        params = self.params
        report = RunReport(algorithm=self.algorithm)
        report.extras.update({'z_distance': [], 'kkt_gap': []})
        if params.keep_qp_history:
            report.extras['qp_history'] = []
        couplings = [region.coupling for region in self.regions]
        memories = state.memories or [None] * len(self.regions)
        warm = [None] * len(self.regions)
        started = time.perf_counter()
        try:
            for iteration in range(1, params.max_iter + 1):
                report.extras['z_distance'].append(self._z_distance(state.z))
                solutions = self.map_regions(
                    lambda region, z, start: aladin_local_step(region, z, state.lam, state.rho, self.solver_settings, start),
                    self.regions, state.z, warm,
                )
                xs = [solution.x for solution in solutions]
                state.x, state.solutions, warm = xs, solutions, solutions
                packs = self.map_regions(self._sensitivities, self.regions, solutions, memories)
                communication = count_communication([pack.dimensions for pack in packs], params.mode)

                dual_residual = max(
                    (float(np.max(np.abs(region.scaling * (x - z)), initial=0.0))
                     for region, x, z in zip(self.regions, xs, state.z)),
                    default=0.0,
                )
                row = self.recorder.record(report, iteration, xs, dual_residual, communication)
                report.extras['kkt_gap'].append(max(check_kkt_gap(self.regions, solutions, state.lam), default=0.0))
                self.log_iteration(row)
                if row['consensus_violation'] <= params.epsilon and dual_residual <= params.epsilon:
                    report.status = CONVERGED
                    break

                qp = QpInput.from_packs(packs, couplings, state.lam, state.mu)
                result = solve_coupled_qp(qp, params.qp_regularization)
                if params.keep_qp_history:
                    report.extras['qp_history'].append((qp, result))
                state.z, state.lam = aladin_update(
                    xs, state.z, result.dx, state.lam, result.lambda_qp, params.alphas, params.update_form,
                )
                state.rho = min(state.rho * params.rho_growth, params.rho_max)
            else:
                report.status = MAX_ITER
        except (SubproblemError, CoordinationError) as exc:
            report.status = DIVERGED
            report.message = str(exc)
            logger.warning(f"{self.algorithm} stopped: {exc}")
        report.wall_time = time.perf_counter() - started
        self.state = state
        report.extras.update({'rho': state.rho, 'lam': state.lam.copy(), 'z': [z.copy() for z in state.z]})
        if state.memories:
            report.extras['bfgs'] = {
                'accepted': sum(memory.accepted for memory in state.memories),
                'damped': sum(memory.damped for memory in state.memories),
                'skipped': sum(memory.skipped for memory in state.memories),
            }
        return self.recorder.finish(report, state.x or [])
