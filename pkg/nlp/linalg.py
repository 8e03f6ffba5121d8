import numpy as np
from scipy.linalg import LinAlgError, eigvalsh_tridiagonal, ldl, solve_banded, solve_triangular

from core.exceptions import SolverError

ZERO_PIVOT_TOL = 1e-30


class SymmetricFactorization:
    """
    Bunch-Kaufman LDLᵀ of a dense symmetric matrix with its inertia.

    `ldl` returns lu, d, perm with lu[perm] unit lower triangular and d
    block diagonal (1x1 and 2x2 blocks), so solves go through two
    triangular sweeps and one tridiagonal solve.
    """

    def __init__(self, matrix, zero_tol=None):
        self.matrix = np.asarray(matrix, dtype=float)
        size = self.matrix.shape[0]
        if size == 0:
            self.inertia, self.nearly_singular = (0, 0, 0), False
            return
        lu, d, perm = ldl(self.matrix, lower=True, hermitian=True)
        if not np.all(np.isfinite(d)):
            raise SolverError("LDLᵀ factorization produced non-finite pivots.")
        self.perm = perm
        self.lower = lu[perm]
        diagonal, off = np.diag(d).copy(), np.diag(d, -1).copy()
        self.banded = np.zeros((3, size))
        self.banded[0, 1:] = off
        self.banded[1] = diagonal
        self.banded[2, :-1] = off
        eigenvalues = eigvalsh_tridiagonal(diagonal, off) if size > 1 else diagonal
        # Only pivots at the underflow floor are zero. Nearly degenerate rows give tiny real pivots.
        zero_tol = ZERO_PIVOT_TOL if zero_tol is None else zero_tol
        # Pivots at roundoff level relative to the largest one make the solve suspect.
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        self.nearly_singular = bool(np.min(np.abs(eigenvalues)) <= size * np.finfo(float).eps * scale)
        self.inertia = (
            int(np.sum(eigenvalues > zero_tol)),
            int(np.sum(eigenvalues < -zero_tol)),
            int(np.sum(np.abs(eigenvalues) <= zero_tol)),
        )

    @property
    def is_singular(self):
        return self.inertia[2] > 0

    def _solve_once(self, rhs):
        y = solve_triangular(self.lower, rhs[self.perm], lower=True, unit_diagonal=True, check_finite=False)
        y = solve_banded((1, 1), self.banded, y, check_finite=False)
        y = solve_triangular(self.lower, y, lower=True, trans='T', unit_diagonal=True, check_finite=False)
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def solve(self, rhs, refinement_steps=1):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.size == 0:
            return rhs.copy()
        try:
            solution = self._solve_once(rhs)
            for _ in range(refinement_steps):
                solution += self._solve_once(rhs - self.matrix @ solution)
        except LinAlgError as exc:
            raise SolverError(f"KKT solve failed: {exc}")
        if not np.all(np.isfinite(solution)):
            raise SolverError("KKT solve produced non-finite values.")
        return solution
