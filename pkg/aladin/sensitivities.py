import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh

from nlp.active_set import detect_active_set

from .params import BFGS, EXACT

logger = logging.getLogger('distributed')


@dataclass
class SensitivityPack:
    """What one region sends to the coordinator after its local solve."""
    region_id: str
    x: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    jacobian: np.ndarray
    active: object
    nu: np.ndarray
    kappa: np.ndarray
    gamma: np.ndarray

    @property
    def n(self):
        return len(self.x)

    @property
    def dimensions(self):
        """(n_ℓ, rows of J_ℓ) for communication accounting."""
        return self.n, self.jacobian.shape[0]


def regularize_hessian(hessian, floor):
    """Flips negative eigenvalues to their absolute value, then raises them to `floor`."""
    hessian = np.asarray(hessian, dtype=float)
    if hessian.size == 0:
        return hessian
    eigenvalues, vectors = eigh(0.5 * (hessian + hessian.T))
    eigenvalues = np.maximum(np.abs(eigenvalues), floor)
    return (vectors * eigenvalues) @ vectors.T


@dataclass
class BfgsMemory:
    """
    Damped BFGS approximation of one region's Lagrangian Hessian.

    Pairs with sᵀy >= θ·sᵀHs update exactly (so H⁺s = y); others are
    Powell-damped and counted; degenerate pairs are skipped.
    """
    size: int
    damping: float = 0.2
    hessian: np.ndarray = None
    x: np.ndarray = None
    accepted: int = 0
    damped: int = 0
    skipped: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.hessian is None:
            self.hessian = np.eye(self.size)

    def update(self, s, y):
        """Returns 'accepted', 'damped' or 'skipped'."""
        s, y = np.asarray(s, dtype=float), np.asarray(y, dtype=float)
        hs = self.hessian @ s
        curvature = float(s @ hs)
        if not np.any(s) or curvature <= np.finfo(float).tiny:
            self.skipped += 1
            return 'skipped'
        sy = float(s @ y)
        outcome = 'accepted'
        if sy < self.damping * curvature:
            phi = (1.0 - self.damping) * curvature / (curvature - sy)
            y = phi * y + (1.0 - phi) * hs
            sy = float(s @ y)
            outcome = 'damped'
        if sy <= 0:
            self.skipped += 1
            return 'skipped'
        self.hessian = self.hessian - np.outer(hs, hs) / curvature + np.outer(y, y) / sy
        self.hessian = 0.5 * (self.hessian + self.hessian.T)
        if outcome == 'accepted':
            self.accepted += 1
        else:
            self.damped += 1
        return outcome


def lagrangian_gradient(problem, x, solution):
    """∇(f + νᵀc_E + κᵀh) of the region's own problem; bound terms are linear and cancel in differences."""
    return problem.lagrangian_gradient(x, solution.nu, solution.kappa)


def extract_sensitivities(region, solution, mode=EXACT, memory=None, hessian_floor=1e-6, activity_tol=1e-6):
    """
    Gradient, regularized Hessian and active-constraint Jacobian of one
    region at its local solution. J stacks the equality Jacobian and the
    active rows of h̃ = [h; x − upper; lower − x].
    """
    problem = region.problem
    x = solution.x
    active = detect_active_set(problem, x, solution.kappa, solution.gamma, tol=activity_tol)
    jacobian = sparse.vstack([problem.equality_jacobian(x), active.jacobian(problem, x)]).toarray()

    if mode == BFGS:
        if memory.x is not None:
            step = x - memory.x
            change = lagrangian_gradient(problem, x, solution) - lagrangian_gradient(problem, memory.x, solution)
            memory.history.append(memory.update(step, change))
        memory.x = x.copy()
        hessian = memory.hessian.copy()
    else:
        hessian = problem.hessian(x, 1.0, solution.nu, solution.kappa).toarray()
        hessian = regularize_hessian(hessian, hessian_floor)

    return SensitivityPack(
        region_id=region.region_id,
        x=x.copy(),
        gradient=problem.gradient(x),
        hessian=hessian,
        jacobian=jacobian,
        active=active,
        nu=solution.nu,
        kappa=solution.kappa,
        gamma=solution.gamma,
    )
