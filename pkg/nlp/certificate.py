import numpy as np


def _inf_norm(values):
    values = np.asarray(values)
    return float(np.max(np.abs(values))) if values.size else 0.0


def kkt_certificate(problem, x, nu, kappa, gamma):
    """
    First-order conditions evaluated from scratch at (x, ν, κ, γ):

        ∇f + J_Eᵀν + J_hᵀκ + γ = 0,  c_E = 0,  h <= 0,  κ >= 0,  κ∘h = 0,
        lower <= x <= upper with γ the net bound multiplier (upper − lower).

    Stationarity is reported relative to max(1, ‖∇f‖∞).
    """
    gradient = problem.gradient(x)
    stationarity = _inf_norm(problem.lagrangian_gradient(x, nu, kappa, gamma)) / max(1.0, _inf_norm(gradient))
    c = problem.equalities(x)
    h = problem.inequalities(x)
    bound_violation = np.concatenate([np.maximum(problem.lower - x, 0.0), np.maximum(x - problem.upper, 0.0)])
    feasibility = max(_inf_norm(c), _inf_norm(np.maximum(h, 0.0)), _inf_norm(bound_violation))

    # Complementarity on h and on each finite bound.
    gap_lower = np.where(np.isfinite(problem.lower), x - problem.lower, np.inf)
    gap_upper = np.where(np.isfinite(problem.upper), problem.upper - x, np.inf)
    z_lower, z_upper = np.maximum(-gamma, 0.0), np.maximum(gamma, 0.0)
    fixed = problem.lower == problem.upper
    complementarity = max(
        _inf_norm(np.minimum(np.maximum(kappa, 0.0), -np.minimum(h, 0.0))),
        _inf_norm(np.minimum(z_lower, gap_lower)[~fixed]),
        _inf_norm(np.minimum(z_upper, gap_upper)[~fixed]),
        _inf_norm(np.minimum(kappa, 0.0)),
    )
    return {
        'stationarity': stationarity,
        'feasibility': feasibility,
        'complementarity': complementarity,
        'error': max(stationarity, feasibility, complementarity),
    }
