"""
Forward communication volume per iteration, counted in floats sent from the
regions to the coordinator (dense worst-case accounting).
"""

EXACT = 'exact'
BFGS = 'bfgs'


def count_communication(dimensions, mode=EXACT):
    """
    `dimensions` holds (n_ℓ, active rows m_ℓ) per region.

    exact: n + n(n+1)/2 + n·m   (gradient, symmetric Hessian, Jacobian)
    bfgs:  3n + n·m             (gradient, step, gradient change, Jacobian)
    """
    if mode not in (EXACT, BFGS):
        raise ValueError(f"Unknown communication mode '{mode}'.")
    total = 0
    for n, m in dimensions:
        if mode == EXACT:
            total += n + n * (n + 1) // 2 + n * m
        else:
            total += 3 * n + n * m
    return total


def count_admm_communication(sizes):
    """x_ℓ⁺ and ξ_ℓ⁺ per region."""
    return sum(2 * n for n in sizes)
