from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass
class ActiveSet:
    """
    Active rows of h̃ = [h(x); x − upper; lower − x].

    `inequalities` index rows of h, `upper` and `lower` index variables.
    A fixed variable (equal bounds) only appears in `upper`.
    """
    inequalities: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    multipliers: np.ndarray = None

    def __len__(self):
        return len(self.inequalities) + len(self.upper) + len(self.lower)

    @property
    def signature(self):
        return (tuple(self.inequalities.tolist()), tuple(self.upper.tolist()), tuple(self.lower.tolist()))

    def __eq__(self, other):
        return isinstance(other, ActiveSet) and self.signature == other.signature

    def jacobian(self, problem, x):
        """Gradients of the active rows of h̃, stacked in (h, upper, lower) order."""
        n = problem.n
        rows = [problem.inequality_jacobian(x)[self.inequalities]]
        if len(self.upper):
            rows.append(sparse.csr_matrix(
                (np.ones(len(self.upper)), (np.arange(len(self.upper)), self.upper)), shape=(len(self.upper), n)
            ))
        if len(self.lower):
            rows.append(sparse.csr_matrix(
                (-np.ones(len(self.lower)), (np.arange(len(self.lower)), self.lower)), shape=(len(self.lower), n)
            ))
        return sparse.vstack(rows).tocsr()


def detect_active_set(problem, x, kappa=None, gamma=None, tol=1e-6):
    """
    i is active iff |h̃_i(x)| <= tol. Multiplier magnitudes of the active
    rows are recorded for diagnostics when given.
    """
    h = problem.inequalities(x)
    inequalities = np.flatnonzero(np.abs(h) <= tol)
    at_upper = np.isfinite(problem.upper) & (np.abs(x - problem.upper) <= tol)
    fixed = problem.lower == problem.upper
    at_lower = np.isfinite(problem.lower) & (np.abs(problem.lower - x) <= tol) & ~fixed
    upper, lower = np.flatnonzero(at_upper), np.flatnonzero(at_lower)

    multipliers = None
    if kappa is not None:
        bound = np.zeros(problem.n) if gamma is None else np.abs(gamma)
        multipliers = np.concatenate([np.abs(kappa[inequalities]), bound[upper], bound[lower]])
    return ActiveSet(inequalities, upper, lower, multipliers)
