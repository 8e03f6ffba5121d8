"""
Primal-dual interior-point method for

    min f(x)  s.t.  c_E(x) = 0,  h(x) <= 0,  lower <= x <= upper.

Inequalities get slacks h(x) + s = 0, s >= 0. Each iteration eliminates the
slack, bound and inequality multiplier steps and solves the reduced
symmetric system

    [ W + Σ + J_Iᵀ Σ_s J_I + δ_w I    J_Eᵀ   ] [Δx  ]     [ r_x ]
    [ J_E                           −δ_c I  ] [Δy_E] = − [ c_E ]

with an LDLᵀ factorization. δ_w corrects the inertia; δ_c grows while the
matrix is singular, i.e. while the equality Jacobian is rank deficient.
Steps are limited by the fraction-to-the-boundary rule only; the barrier
parameter follows the monotone Fiacco-McCormick strategy. Variables with
equal bounds are removed from the Newton system.

A cold start takes least-squares equality multipliers. The solve stops as
infeasible when the violation stalls or sits at a stationary point of
½‖c_E‖² + ½‖h⁺‖² over the box.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import lstsq

from core.exceptions import SolverError

from .certificate import kkt_certificate
from .linalg import SymmetricFactorization
from .options import SolverSettings

logger = logging.getLogger('solver_trace')

SOLVED = 'solved'
MAX_ITER = 'max-iter'
INFEASIBLE = 'infeasible-detected'
NUMERICAL_FAILURE = 'numerical-failure'

SCALED_ERROR_MAX = 100.0
MULTIPLIER_SAFEGUARD = 1e10
INFEASIBILITY_WINDOW = 25
INFEASIBILITY_STATIONARITY = 1e-6
INFEASIBILITY_CONFIRMATIONS = 2
DELTA_C_INIT = 1e-8
DELTA_C_MAX = 1e-4
SOLVE_RESIDUAL_TOL = 1e-8
MULTIPLIER_INIT_MAX = 1e3


@dataclass
class NlpSolution:
    """
    Primal-dual point returned by the solver. Multipliers follow

        ∇f + J_Eᵀν + J_hᵀκ + γ = 0,   κ >= 0,   γ = z_upper − z_lower.
    """
    x: np.ndarray
    nu: np.ndarray
    kappa: np.ndarray
    gamma: np.ndarray
    status: str
    iterations: int
    objective: float
    kkt: dict = field(default_factory=dict)
    slacks: np.ndarray = None
    z_lower: np.ndarray = None
    z_upper: np.ndarray = None
    mu: float = None
    acceptable: bool = False

    @property
    def converged(self):
        return self.status == SOLVED

    @property
    def usable(self):
        """Solved, or stopped at the cap within the acceptable tolerance."""
        return self.converged or (self.status == MAX_ITER and self.acceptable)


def _max_step(values, steps, tau):
    shrinking = steps < 0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, np.min(-tau * values[shrinking] / steps[shrinking])))


class InteriorPointSolver:

    def __init__(self, problem, settings=None):
        self.problem = problem
        self.settings = settings or SolverSettings.from_settings()
        lower, upper = problem.lower, problem.upper
        self.fixed = lower == upper
        self.free = np.flatnonzero(~self.fixed)
        self.has_lower = ~self.fixed & np.isfinite(lower)
        self.has_upper = ~self.fixed & np.isfinite(upper)
        self.last_delta_w = 0.0

    # Initialization

    def _push_into_box(self, x, push):
        lower, upper = self.problem.lower, self.problem.upper
        width = np.where(self.has_lower & self.has_upper, upper - lower, np.inf)
        x = x.copy()
        x[self.fixed] = lower[self.fixed]
        lower_push = np.minimum(push * np.maximum(1.0, np.abs(np.where(self.has_lower, lower, 0.0))), push * width)
        upper_push = np.minimum(push * np.maximum(1.0, np.abs(np.where(self.has_upper, upper, 0.0))), push * width)
        x[self.has_lower] = np.maximum(x[self.has_lower], lower[self.has_lower] + lower_push[self.has_lower])
        x[self.has_upper] = np.minimum(x[self.has_upper], upper[self.has_upper] - upper_push[self.has_upper])
        return x

    def _objective_scale(self, x):
        norm = float(np.max(np.abs(self.problem.gradient(x)))) if self.problem.n else 0.0
        if norm == 0.0:
            return 1.0
        return min(1.0, self.settings.obj_scaling_max_gradient / norm)

    def _initial_point(self, x0, warm_start):
        p, opts = self.problem, self.settings
        if warm_start is not None:
            push = opts.warm_bound_push
            x = self._push_into_box(np.asarray(warm_start.x, dtype=float), push)
            scale = self._objective_scale(x)
            h = p.inequalities(x)
            slacks = -h
            if warm_start.slacks is not None and len(warm_start.slacks) == p.m_ineq:
                slacks = warm_start.slacks
            s = np.maximum(slacks, push)
            y_eq = scale * np.asarray(warm_start.nu, dtype=float)
            y_in = np.maximum(scale * np.asarray(warm_start.kappa, dtype=float), push)
            z_lower = np.where(self.has_lower, np.maximum(scale * np.maximum(-warm_start.gamma, 0.0), push), 0.0)
            z_upper = np.where(self.has_upper, np.maximum(scale * np.maximum(warm_start.gamma, 0.0), push), 0.0)
            return x, s, y_eq, y_in, z_lower, z_upper, scale, opts.warm_mu_init

        x = np.array(p.x0 if x0 is None else x0, dtype=float)
        x = self._push_into_box(x, opts.bound_push)
        scale = self._objective_scale(x)
        s = np.maximum(-p.inequalities(x), opts.bound_push)
        y_in = np.ones(p.m_ineq)
        z_lower, z_upper = self.has_lower.astype(float), self.has_upper.astype(float)
        y_eq = self._least_squares_multipliers(x, scale, y_in, z_lower, z_upper)
        return x, s, y_eq, y_in, z_lower, z_upper, scale, opts.mu_init

    def _least_squares_multipliers(self, x, scale, y_in, z_lower, z_upper):
        """ν minimizing the stationarity residual at x, or zero when it is implausibly large."""
        p, free = self.problem, self.free
        if not p.m_eq or not free.size:
            return np.zeros(p.m_eq)
        residual = scale * p.gradient(x) + p.inequality_jacobian(x).T @ y_in - z_lower + z_upper
        j_eq = p.equality_jacobian(x)[:, free].toarray()
        y_eq = lstsq(j_eq.T, -residual[free])[0]
        if not np.all(np.isfinite(y_eq)) or np.max(np.abs(y_eq)) > MULTIPLIER_INIT_MAX:
            return np.zeros(p.m_eq)
        return y_eq

    # Newton system

    def _newton_step(self, reduced_hessian, j_eq, rhs, mu):
        """
        Solves the regularized Newton system. δ_c grows while the matrix is
        singular or a nearly singular solve misses its right-hand side; δ_w
        grows while the inertia is wrong.
        """
        nf, m = reduced_hessian.shape[0], j_eq.shape[0]
        opts = self.settings
        delta_w, delta_c = 0.0, 0.0
        while True:
            kkt = np.block([
                [reduced_hessian + delta_w * np.eye(nf), j_eq.T],
                [j_eq, -delta_c * np.eye(m)],
            ])
            factorization = SymmetricFactorization(kkt)
            positive, negative, zero = factorization.inertia
            if positive == nf and negative == m and zero == 0:
                step = self._checked_solve(factorization, kkt, rhs, final=not m or delta_c >= DELTA_C_MAX)
                if step is not None:
                    self.last_delta_w = delta_w
                    return step, delta_w
                zero = 1
            if zero and m and delta_c < DELTA_C_MAX:
                delta_c = max(opts.reg_growth * delta_c, DELTA_C_INIT * mu ** 0.25)
                continue
            if delta_w == 0.0:
                delta_w = max(opts.reg_init, self.last_delta_w / 3) if self.last_delta_w else opts.reg_init
            else:
                delta_w *= opts.reg_growth
            if delta_w > opts.reg_max:
                raise SolverError(f"Inertia correction exceeded {opts.reg_max:.0e} on '{self.problem.name}'.")

    @staticmethod
    def _checked_solve(factorization, kkt, rhs, final):
        """The step, or None when a nearly singular factorization solves inaccurately."""
        try:
            step = factorization.solve(rhs)
        except SolverError:
            if final:
                raise
            return None
        if final or not factorization.nearly_singular:
            return step
        residual = float(np.max(np.abs(kkt @ step - rhs))) if rhs.size else 0.0
        if residual <= SOLVE_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(rhs)))):
            return step
        return None

    # Infeasibility

    def _infeasibility(self, x, c, h, j_eq, j_in):
        """
        Constraint violation and the projected gradient of ½‖c‖² + ½‖h⁺‖²
        over the box. A violated point where the projected gradient vanishes
        cannot reduce its violation locally.
        """
        p = self.problem
        violation_h = np.maximum(h, 0.0)
        violation = max(
            float(np.max(np.abs(c))) if c.size else 0.0,
            float(np.max(violation_h)) if h.size else 0.0,
        )
        gradient = j_eq.T @ c + j_in.T @ violation_h
        projected = x - np.clip(x - gradient, p.lower, p.upper)
        return violation, float(np.max(np.abs(projected))) if projected.size else 0.0

    def _locally_infeasible(self, x, c, h, j_eq, j_in):
        violation, projected = self._infeasibility(x, c, h, j_eq, j_in)
        return violation > max(1e-6, 1e2 * self.settings.tol) and projected <= INFEASIBILITY_STATIONARITY * violation

    # Main loop

    def solve(self, x0=None, warm_start=None):
        p, opts = self.problem, self.settings
        lower, upper = p.lower, p.upper
        has_lower, has_upper, free = self.has_lower, self.has_upper, self.free
        x, s, y_eq, y_in, z_lower, z_upper, scale, mu = self._initial_point(x0, warm_start)

        status, infeasibility, iteration, infeasible_hits = MAX_ITER, [], 0, 0
        for iteration in range(opts.max_iter + 1):
            grad = scale * p.gradient(x)
            c, h = p.equalities(x), p.inequalities(x)
            j_eq, j_in = p.equality_jacobian(x), p.inequality_jacobian(x)
            d_lower = np.where(has_lower, x - lower, 1.0)
            d_upper = np.where(has_upper, upper - x, 1.0)

            dual = grad + j_eq.T @ y_eq + j_in.T @ y_in - z_lower + z_upper
            dual_inf = float(np.max(np.abs(dual[free]))) if free.size else 0.0
            primal_inf = max(
                float(np.max(np.abs(c))) if c.size else 0.0,
                float(np.max(np.abs(h + s))) if h.size else 0.0,
            )
            multiplier_sum = np.sum(np.abs(y_eq)) + np.sum(y_in) + np.sum(z_lower) + np.sum(z_upper)
            bound_count = int(np.sum(has_lower) + np.sum(has_upper)) + p.m_ineq
            s_d = max(SCALED_ERROR_MAX, multiplier_sum / max(1, p.m_eq + bound_count)) / SCALED_ERROR_MAX
            s_c = max(SCALED_ERROR_MAX, (multiplier_sum - np.sum(np.abs(y_eq))) / max(1, bound_count)) / SCALED_ERROR_MAX

            def scaled_error(barrier):
                complementarity = np.concatenate([
                    (d_lower * z_lower - barrier)[has_lower],
                    (d_upper * z_upper - barrier)[has_upper],
                    s * y_in - barrier,
                ])
                comp = float(np.max(np.abs(complementarity))) if complementarity.size else 0.0
                return max(dual_inf / s_d, primal_inf, comp / s_c)

            error = scaled_error(0.0)
            objective = p.objective(x)
            if not (np.isfinite(error) and np.isfinite(objective)):
                status = INFEASIBLE if infeasible_hits else NUMERICAL_FAILURE
                logger.warning(f"{p.name}: non-finite iterate at iteration {iteration}.")
                break
            if error <= opts.tol:
                status = SOLVED
                break

            infeasibility.append(primal_inf)
            if (len(infeasibility) > INFEASIBILITY_WINDOW
                    and primal_inf > max(1e-6, 1e2 * opts.tol)
                    and primal_inf > 0.99 * infeasibility[-INFEASIBILITY_WINDOW - 1]):
                status = INFEASIBLE
                logger.warning(f"{p.name}: primal infeasibility stalled at {primal_inf:.3e}.")
                break
            infeasible_hits = infeasible_hits + 1 if self._locally_infeasible(x, c, h, j_eq, j_in) else 0
            if infeasible_hits >= INFEASIBILITY_CONFIRMATIONS:
                status = INFEASIBLE
                logger.warning(f"{p.name}: stationary point of the constraint violation at {primal_inf:.3e}.")
                break
            if iteration == opts.max_iter:
                status = MAX_ITER
                break

            while mu > opts.tol / 10 and scaled_error(mu) <= opts.barrier_tol_factor * mu:
                mu = max(opts.tol / 10, min(opts.mu_reduction * mu, mu ** opts.mu_superlinear))

            sigma = np.where(has_lower, z_lower / d_lower, 0.0) + np.where(has_upper, z_upper / d_upper, 0.0)
            sigma_s = y_in / s
            j_in_free = j_in[:, free]
            reduced = p.hessian(x, scale, y_eq, y_in).toarray()[np.ix_(free, free)]
            reduced += np.diag(sigma[free])
            if p.m_ineq:
                reduced += (j_in_free.T @ sparse.diags(sigma_s) @ j_in_free).toarray()
            r_x = grad + j_eq.T @ y_eq + j_in.T @ (y_in + mu / s + sigma_s * h)
            r_x -= np.where(has_lower, mu / d_lower, 0.0)
            r_x += np.where(has_upper, mu / d_upper, 0.0)

            try:
                step, delta_w = self._newton_step(reduced, j_eq[:, free].toarray(), -np.concatenate([r_x[free], c]), mu)
            except SolverError as exc:
                infeasible = infeasible_hits or self._locally_infeasible(x, c, h, j_eq, j_in)
                status = INFEASIBLE if infeasible else NUMERICAL_FAILURE
                logger.warning(f"{p.name}: {exc}")
                break

            dx = np.zeros(p.n)
            dx[free] = step[:free.size]
            dy_eq = step[free.size:]
            ds = -(h + s) - j_in @ dx
            dy_in = mu / s - y_in - sigma_s * ds
            dz_lower = np.where(has_lower, mu / d_lower - z_lower - z_lower / d_lower * dx, 0.0)
            dz_upper = np.where(has_upper, mu / d_upper - z_upper + z_upper / d_upper * dx, 0.0)

            tau = max(opts.tau_min, 1.0 - mu)
            alpha_pr = min(
                _max_step(d_lower[has_lower], dx[has_lower], tau),
                _max_step(d_upper[has_upper], -dx[has_upper], tau),
                _max_step(s, ds, tau),
            )
            alpha_du = min(
                _max_step(y_in, dy_in, tau),
                _max_step(z_lower[has_lower], dz_lower[has_lower], tau),
                _max_step(z_upper[has_upper], dz_upper[has_upper], tau),
            )

            logger.debug(
                f"{p.name} it={iteration:3d} obj={objective:.8e} inf_pr={primal_inf:.2e} inf_du={dual_inf:.2e} "
                f"mu={mu:.1e} |dx|={np.max(np.abs(dx)) if dx.size else 0.0:.2e} reg={delta_w:.1e} "
                f"a_pr={alpha_pr:.2e} a_du={alpha_du:.2e}"
            )

            x = x + alpha_pr * dx
            s = s + alpha_pr * ds
            y_eq = y_eq + alpha_pr * dy_eq
            y_in = y_in + alpha_du * dy_in
            z_lower = z_lower + alpha_du * dz_lower
            z_upper = z_upper + alpha_du * dz_upper

            # Keep each multiplier within a fixed factor of its barrier value.
            d_lower = np.where(has_lower, x - lower, 1.0)
            d_upper = np.where(has_upper, upper - x, 1.0)
            z_lower = np.where(has_lower, np.clip(z_lower, mu / (MULTIPLIER_SAFEGUARD * d_lower), MULTIPLIER_SAFEGUARD * mu / d_lower), 0.0)
            z_upper = np.where(has_upper, np.clip(z_upper, mu / (MULTIPLIER_SAFEGUARD * d_upper), MULTIPLIER_SAFEGUARD * mu / d_upper), 0.0)
            y_in = np.clip(y_in, mu / (MULTIPLIER_SAFEGUARD * s), MULTIPLIER_SAFEGUARD * mu / s)

        return self._solution(x, s, y_eq, y_in, z_lower, z_upper, scale, mu, status, iteration)

    def _solution(self, x, s, y_eq, y_in, z_lower, z_upper, scale, mu, status, iterations):
        p = self.problem
        nu, kappa = y_eq / scale, y_in / scale
        z_lower, z_upper = z_lower / scale, z_upper / scale
        gamma = z_upper - z_lower
        if np.any(self.fixed):
            stationarity = p.lagrangian_gradient(x, nu, kappa)
            gamma[self.fixed] = -stationarity[self.fixed]
            z_upper[self.fixed] = np.maximum(gamma[self.fixed], 0.0)
            z_lower[self.fixed] = np.maximum(-gamma[self.fixed], 0.0)
        kkt = kkt_certificate(p, x, nu, kappa, gamma)
        acceptable = kkt['error'] <= self.settings.acceptable_tol
        log = logger.info if status == SOLVED else logger.warning
        log(f"{p.name}: {status} after {iterations} iterations, objective {p.objective(x):.8e}, KKT error {kkt['error']:.2e}")
        return NlpSolution(
            x=x, nu=nu, kappa=kappa, gamma=gamma, status=status, iterations=iterations,
            objective=p.objective(x), kkt=kkt, slacks=s, z_lower=z_lower, z_upper=z_upper,
            mu=mu, acceptable=acceptable,
        )


def solve_nlp(problem, x0=None, settings=None, warm_start=None):
    """Solves `problem` from x0 (flat start by default) or from a previous solution."""
    return InteriorPointSolver(problem, settings).solve(x0, warm_start)
