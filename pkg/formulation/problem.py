import numpy as np
from scipy import sparse

from core.exceptions import FormulationError


class NlpProblem:
    """
    min f(x)  s.t.  c_E(x) = 0,  h(x) <= 0,  lower <= x <= upper.

    The objective is a one-row block; equalities and inequalities are lists
    of blocks stacked in order. Oracles are pure functions of x, so one
    instance may be evaluated from several threads.
    """

    def __init__(self, layout, objective, equalities=(), inequalities=(), name='nlp'):
        self.name = name
        self.layout = layout
        self.objective_block = objective
        self.equality_blocks = [block for block in equalities if block.size]
        self.inequality_blocks = [block for block in inequalities if block.size]
        self.n = len(layout)
        self.lower = layout.lower
        self.upper = layout.upper
        self.x0 = layout.initial
        self.m_eq = sum(block.size for block in self.equality_blocks)
        self.m_ineq = sum(block.size for block in self.inequality_blocks)
        if objective.size != 1:
            raise FormulationError(f"Objective of '{name}' must be scalar, got {objective.size} rows.")

    def block(self, name):
        for block in self.equality_blocks + self.inequality_blocks:
            if block.name == name:
                return block
        raise FormulationError(f"Problem '{self.name}' has no block '{name}'.")

    def has_block(self, name):
        return any(block.name == name for block in self.equality_blocks + self.inequality_blocks)

    @property
    def equality_labels(self):
        return [label for block in self.equality_blocks for label in block.labels]

    @property
    def inequality_labels(self):
        return [label for block in self.inequality_blocks for label in block.labels]

    def objective(self, x):
        return float(self.objective_block.value(x)[0])

    def gradient(self, x):
        return self.objective_block.jacobian(x, self.n).toarray().ravel()

    def _stack_values(self, blocks, x):
        if not blocks:
            return np.zeros(0)
        return np.concatenate([block.value(x) for block in blocks])

    def _stack_jacobians(self, blocks, x):
        if not blocks:
            return sparse.csr_matrix((0, self.n))
        return sparse.vstack([block.jacobian(x, self.n) for block in blocks]).tocsr()

    def equalities(self, x):
        return self._stack_values(self.equality_blocks, x)

    def inequalities(self, x):
        return self._stack_values(self.inequality_blocks, x)

    def equality_jacobian(self, x):
        return self._stack_jacobians(self.equality_blocks, x)

    def inequality_jacobian(self, x):
        return self._stack_jacobians(self.inequality_blocks, x)

    def hessian(self, x, obj_factor=1.0, nu=None, kappa=None):
        """Hessian of obj_factor·f + νᵀc_E + κᵀh."""
        total = self.objective_block.hessian(x, [obj_factor], self.n)
        for blocks, weights in ((self.equality_blocks, nu), (self.inequality_blocks, kappa)):
            if weights is None:
                continue
            start = 0
            for block in blocks:
                part = weights[start:start + block.size]
                start += block.size
                if np.any(part):
                    total = total + block.hessian(x, part, self.n)
        return total.tocsr()

    def lagrangian_gradient(self, x, nu, kappa, gamma=None):
        """∇f + J_Eᵀν + J_hᵀκ (+ γ for the bounds)."""
        grad = self.gradient(x) + self.equality_jacobian(x).T @ nu + self.inequality_jacobian(x).T @ kappa
        if gamma is not None:
            grad = grad + gamma
        return grad


class ProximalProblem(NlpProblem):
    """
    Wraps a problem with the augmented objective used by local steps:

        f(x) + linearᵀx + (rho/2)·Σ_i weights_i·(x_i − center_i)²

    Constraints and bounds are shared with the wrapped problem.
    """

    def __init__(self, base, linear, center, weights, rho):
        self.base = base
        self.name = base.name
        self.layout = base.layout
        self.objective_block = base.objective_block
        self.equality_blocks = base.equality_blocks
        self.inequality_blocks = base.inequality_blocks
        self.n, self.m_eq, self.m_ineq = base.n, base.m_eq, base.m_ineq
        self.lower, self.upper, self.x0 = base.lower, base.upper, base.x0
        self.linear = np.asarray(linear, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.weights = np.broadcast_to(np.asarray(weights, dtype=float), (self.n,))
        self.rho = rho

    def objective(self, x):
        d = x - self.center
        return self.base.objective(x) + self.linear @ x + 0.5 * self.rho * np.sum(self.weights * d ** 2)

    def gradient(self, x):
        return self.base.gradient(x) + self.linear + self.rho * self.weights * (x - self.center)

    def hessian(self, x, obj_factor=1.0, nu=None, kappa=None):
        prox = sparse.diags(obj_factor * self.rho * self.weights)
        return (self.base.hessian(x, obj_factor, nu, kappa) + prox).tocsr()
