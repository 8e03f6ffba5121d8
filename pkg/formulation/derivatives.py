import logging

import numpy as np

logger = logging.getLogger('harness')

# Sampling box for variables without finite bounds.
FREE_RANGE = {'va': 0.3, 'pm': 2.0, 'qm': 2.0, 'pn': 2.0}


def random_point(problem, rng):
    """Draws a point inside the variable box of `problem`."""
    lower, upper = problem.lower.copy(), problem.upper.copy()
    for i, (quantity, _) in enumerate(problem.layout.keys):
        width = FREE_RANGE.get(quantity, 1.0)
        if not np.isfinite(lower[i]):
            lower[i] = upper[i] - 2 * width if np.isfinite(upper[i]) else -width
        if not np.isfinite(upper[i]):
            upper[i] = lower[i] + 2 * width
    return rng.uniform(lower, upper)


def _relative_error(analytic, numeric):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def _central_difference(func, x, step):
    columns = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        columns.append((np.atleast_1d(func(x + e)) - np.atleast_1d(func(x - e))) / (2 * step))
    return np.column_stack(columns)


def check_derivatives(problem, points, step=1e-6, rng=None):
    """
    Compares analytic gradients, Jacobians and the Lagrangian Hessian with
    central differences at every point. Returns the worst relative error per
    oracle.
    """
    rng = rng or np.random.default_rng(0)
    worst = {'gradient': 0.0, 'equality_jacobian': 0.0, 'inequality_jacobian': 0.0, 'hessian': 0.0}
    for x in points:
        x = np.asarray(x, dtype=float)
        nu = rng.standard_normal(problem.m_eq)
        kappa = rng.standard_normal(problem.m_ineq)

        numeric = _central_difference(problem.objective, x, step).ravel()
        worst['gradient'] = max(worst['gradient'], _relative_error(problem.gradient(x), numeric))

        for name, values, jacobian, m in (
            ('equality_jacobian', problem.equalities, problem.equality_jacobian, problem.m_eq),
            ('inequality_jacobian', problem.inequalities, problem.inequality_jacobian, problem.m_ineq),
        ):
            if not m:
                continue
            numeric = _central_difference(values, x, step)
            worst[name] = max(worst[name], _relative_error(jacobian(x).toarray(), numeric))

        numeric = _central_difference(lambda y: problem.lagrangian_gradient(y, nu, kappa), x, step)
        analytic = problem.hessian(x, 1.0, nu, kappa).toarray()
        worst['hessian'] = max(worst['hessian'], _relative_error(analytic, numeric))

    logger.debug(f"Derivative check of {problem.name}: {worst}")
    return worst
