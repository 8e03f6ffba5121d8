"""
Coupled QP of the coordinator:

    min  Σ_ℓ ½Δx_ℓᵀH_ℓΔx_ℓ + g_ℓᵀΔx_ℓ + λᵀs + (μ/2)‖s‖²
    s.t. Σ_ℓ A_ℓ(x_ℓ + Δx_ℓ) = b + s   | λ^QP
         J_ℓΔx_ℓ = 0                     | κ_ℓ^QP

Eliminating each region through its bordered matrix M_ℓ = [[H_ℓ, J_ℓᵀ], [J_ℓ, 0]]
and E_ℓ = [A_ℓᵀ; 0] leaves one system in λ^QP:

    (Σ E_ℓᵀM_ℓ⁻¹E_ℓ + μ⁻¹I) λ^QP = μ⁻¹λ − b + Σ E_ℓᵀ([x_ℓ; 0] − M_ℓ⁻¹[g_ℓ; 0])

then [Δx_ℓ; κ_ℓ^QP] = M_ℓ⁻¹([−g_ℓ; 0] − E_ℓλ^QP) and s = (λ^QP − λ)/μ.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, lapack, lu_factor, lu_solve, solve

from core.exceptions import CoordinationError

logger = logging.getLogger('distributed')


@dataclass
class QpSolution:
    dx: list
    kappa: list
    lambda_qp: np.ndarray
    slack: np.ndarray


@dataclass
class QpInput:
    """Everything the coordinator needs; kept per iteration for replay."""
    hessians: list
    jacobians: list
    gradients: list
    couplings: list
    xs: list
    lam: np.ndarray
    mu: float
    b: np.ndarray = None

    @classmethod
    def from_packs(cls, packs, couplings, lam, mu, b=None):
        return cls(
            hessians=[pack.hessian for pack in packs],
            jacobians=[pack.jacobian for pack in packs],
            gradients=[pack.gradient for pack in packs],
            couplings=[np.asarray(a.toarray() if hasattr(a, 'toarray') else a, dtype=float) for a in couplings],
            xs=[pack.x for pack in packs],
            lam=np.asarray(lam, dtype=float),
            mu=mu,
            b=b,
        )

    @property
    def rows(self):
        return len(self.lam)

    @property
    def rhs_offset(self):
        return np.zeros(self.rows) if self.b is None else np.asarray(self.b, dtype=float)


def _bordered(hessian, jacobian, regularization=0.0):
    n, m = hessian.shape[0], jacobian.shape[0]
    return np.block([
        [hessian + regularization * np.eye(n), jacobian.T],
        [jacobian, -regularization * np.eye(m)],
    ])


def _factor_bordered(hessian, jacobian, regularization, region_index):
    """LU of the bordered matrix; one regularized retry when it is numerically singular."""
    for attempt, delta in enumerate((0.0, regularization)):
        matrix = _bordered(hessian, jacobian, delta)
        if matrix.size == 0:
            return None
        try:
            factors = lu_factor(matrix, check_finite=True)
        except (LinAlgError, ValueError):
            factors = None
        if factors is not None:
            rcond, info = lapack.dgecon(factors[0], np.linalg.norm(matrix, 1), norm='1')
            if info == 0 and rcond > np.finfo(float).eps:
                if attempt:
                    logger.warning(f"Bordered matrix of region {region_index} regularized by {delta:.1e}.")
                return factors
    raise CoordinationError(f"Bordered matrix of region {region_index} is singular after regularization.")


def solve_coupled_qp(qp, regularization=1e-10):
    """Schur-complement solution of the coupled QP."""
    rows = qp.rows
    schur = np.eye(rows) / qp.mu
    rhs = qp.lam / qp.mu - qp.rhs_offset
    cached = []
    for index, (hessian, jacobian, gradient, coupling, x) in enumerate(
            zip(qp.hessians, qp.jacobians, qp.gradients, qp.couplings, qp.xs)):
        n, m = hessian.shape[0], jacobian.shape[0]
        factors = _factor_bordered(hessian, jacobian, regularization, index)
        embed = np.vstack([coupling.T, np.zeros((m, rows))])
        if factors is None:
            solved_embed, solved_gradient = np.zeros((0, rows)), np.zeros(0)
        else:
            solved_embed = lu_solve(factors, embed)
            solved_gradient = lu_solve(factors, np.concatenate([gradient, np.zeros(m)]))
        schur += embed.T @ solved_embed
        rhs += coupling @ x - embed.T @ solved_gradient
        cached.append((n, solved_embed, solved_gradient))

    try:
        lambda_qp = solve(schur, rhs, assume_a='sym')
    except LinAlgError as exc:
        raise CoordinationError(f"Coupled QP Schur complement is singular: {exc}")

    dx, kappa = [], []
    for n, solved_embed, solved_gradient in cached:
        # M⁻¹([−g; 0] − Eλ) from the cached solves.
        step = -solved_gradient - solved_embed @ lambda_qp
        dx.append(step[:n])
        kappa.append(step[n:])
    slack = (lambda_qp - qp.lam) / qp.mu
    return QpSolution(dx=dx, kappa=kappa, lambda_qp=lambda_qp, slack=slack)


def dense_coupled_qp(qp):
    """
    Reference solution of the same QP from its full KKT system

        [ H   Jᵀ  0    Aᵀ ] [Δx  ]   [ −g      ]
        [ J   0   0    0  ] [κ   ] = [ 0       ]
        [ 0   0   μI  −I  ] [s   ]   [ −λ      ]
        [ A   0  −I    0  ] [λ^QP]   [ b − Ax  ]
    """
    n_total = sum(h.shape[0] for h in qp.hessians)
    m_total = sum(j.shape[0] for j in qp.jacobians)
    rows = qp.rows
    size = n_total + m_total + 2 * rows
    kkt = np.zeros((size, size))
    rhs = np.zeros(size)
    x_offset, j_offset = 0, n_total
    s_offset, l_offset = n_total + m_total, n_total + m_total + rows
    coupled_x = np.zeros(rows)
    for hessian, jacobian, gradient, coupling, x in zip(qp.hessians, qp.jacobians, qp.gradients, qp.couplings, qp.xs):
        n, m = hessian.shape[0], jacobian.shape[0]
        xs_slice = slice(x_offset, x_offset + n)
        js_slice = slice(j_offset, j_offset + m)
        kkt[xs_slice, xs_slice] = hessian
        kkt[xs_slice, js_slice] = jacobian.T
        kkt[js_slice, xs_slice] = jacobian
        kkt[xs_slice, l_offset:] = coupling.T
        kkt[l_offset:, xs_slice] = coupling
        rhs[xs_slice] = -gradient
        coupled_x += coupling @ x
        x_offset += n
        j_offset += m
    kkt[s_offset:l_offset, s_offset:l_offset] = qp.mu * np.eye(rows)
    kkt[s_offset:l_offset, l_offset:] = -np.eye(rows)
    kkt[l_offset:, s_offset:l_offset] = -np.eye(rows)
    rhs[s_offset:l_offset] = -qp.lam
    rhs[l_offset:] = qp.rhs_offset - coupled_x

    solution = solve(kkt, rhs, assume_a='sym')
    dx, kappa = [], []
    x_offset, j_offset = 0, n_total
    for hessian, jacobian in zip(qp.hessians, qp.jacobians):
        n, m = hessian.shape[0], jacobian.shape[0]
        dx.append(solution[x_offset:x_offset + n])
        kappa.append(solution[j_offset:j_offset + m])
        x_offset += n
        j_offset += m
    return QpSolution(dx=dx, kappa=kappa, lambda_qp=solution[l_offset:], slack=solution[s_offset:l_offset])
