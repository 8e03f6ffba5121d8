import numpy as np
from scipy import sparse
from scipy.optimize import lsq_linear

from nlp.active_set import detect_active_set


def kkt_residual(problem, x, activity_tol=1e-6):
    """
    KKT residual of a point without trusting any multiplier estimate.

    Multipliers are fitted by bounded least squares on the equalities and
    the active inequality and bound rows (non-negative except for fixed
    variables); stationarity is reported relative to max(1, ‖∇f‖∞).
    """
    x = np.asarray(x, dtype=float)
    gradient = problem.gradient(x)
    active = detect_active_set(problem, x, tol=activity_tol)
    j_eq = problem.equality_jacobian(x)
    j_active = active.jacobian(problem, x)
    columns = sparse.vstack([j_eq, j_active]).T.toarray()

    m_eq = j_eq.shape[0]
    lower = np.concatenate([np.full(m_eq, -np.inf), np.zeros(j_active.shape[0])])
    # A fixed variable's single bound row takes either sign.
    fixed = problem.lower == problem.upper
    offset = m_eq + len(active.inequalities)
    lower[offset + np.flatnonzero(fixed[active.upper])] = -np.inf

    if columns.shape[1]:
        fit = lsq_linear(columns, -gradient, bounds=(lower, np.full(columns.shape[1], np.inf)))
        residual = gradient + columns @ fit.x
    else:
        residual = gradient
    stationarity = float(np.max(np.abs(residual))) / max(1.0, float(np.max(np.abs(gradient))))

    c, h = problem.equalities(x), problem.inequalities(x)
    feasibility = max(
        float(np.max(np.abs(c))) if c.size else 0.0,
        float(np.max(h)) if h.size else 0.0,
        float(np.max(problem.lower - x)),
        float(np.max(x - problem.upper)),
        0.0,
    )
    return {'stationarity': stationarity, 'feasibility': feasibility, 'error': max(stationarity, feasibility)}
