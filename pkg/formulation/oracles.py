"""
Residual oracles grouped by physical component.

All functions take an assembled OpfProblem and a vector in its layout. They
are thin views over the problem's blocks and exist for tests, `describe`
dumps and post-processing of solutions.
"""

import numpy as np


def eval_objective(problem, x):
    """Returns (C, C1, C2) with C1 in $ and C2 in MW."""
    breakdown = problem.cost_breakdown(x)
    return breakdown['objective'], breakdown['cost'], breakdown['losses']


def _block_values(problem, name, x):
    if not problem.has_block(name):
        return np.zeros(0)
    return problem.block(name).value(x)


def eval_ac_balance(problem, x):
    """Active and reactive power balance residuals of every AC bus in scope."""
    return _block_values(problem, 'ac_balance_p', x), _block_values(problem, 'ac_balance_q', x)


def eval_ac_branch_flow(problem, x):
    """
    Flows at both ends of every AC branch in scope, plus the apparent power
    residual P² + Q² − s_max² (−inf where the branch has no rating).
    """
    p_block, q_block, limits = problem.branch_flows
    p, q = p_block.value(x), q_block.value(x)
    return p, q, p ** 2 + q ** 2 - limits ** 2


def eval_vsc_constraints(problem, x):
    """Residuals of the converter model, keyed by constraint group."""
    return {
        group: _block_values(problem, f'vsc_{group}', x)
        for group in ('balance', 'injection', 'current', 'loss', 'limits')
    }


def eval_dc_constraints(problem, x):
    """DC power balance and DC line flow limit residuals."""
    return _block_values(problem, 'dc_balance', x), _block_values(problem, 'dc_flow_limit', x)


def converter_current(p_m, q_m, v_m):
    """Converter current from its AC-side power and voltage."""
    return np.sqrt((np.square(p_m) + np.square(q_m)) / np.square(v_m))
