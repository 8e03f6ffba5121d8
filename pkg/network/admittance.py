import numpy as np
from scipy import sparse

from core.exceptions import FormulationError


def branch_admittances(branch):
    """
    Pi-model entries (y_ff, y_ft, y_tf, y_tt) of one branch with an
    off-nominal tap on the from side.
    """
    if branch.r == 0 and branch.x == 0:
        raise FormulationError(f"Branch {branch.id} ({branch.from_bus}-{branch.to_bus}) has zero series impedance.")
    y_series = branch.series_admittance
    y_tt = y_series + 0.5j * branch.b_sh
    tap = branch.ratio
    return y_tt / tap ** 2, -y_series / tap, -y_series / tap, y_tt


def build_ac_admittance(region):
    """
    Builds the nodal admittance matrix of an AC region.

    Returns (G, B) as CSR matrices ordered like `region.buses`.
    """
    index = {bus.id: i for i, bus in enumerate(region.buses)}
    n = len(index)
    rows, cols, vals = [], [], []
    for branch in region.branches:
        y_ff, y_ft, y_tf, y_tt = branch_admittances(branch)
        f, t = index[branch.from_bus], index[branch.to_bus]
        rows += [f, f, t, t]
        cols += [f, t, f, t]
        vals += [y_ff, y_ft, y_tf, y_tt]
    for bus in region.buses:
        i = index[bus.id]
        rows.append(i)
        cols.append(i)
        vals.append(complex(bus.g_shunt, bus.b_shunt))
    y_bus = sparse.coo_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(n, n)
    ).tocsr()
    return y_bus.real, y_bus.imag


def build_dc_conductance(mtdc):
    """Conductance g_ij = 1/r_ij of every DC branch, in branch order."""
    return np.array([branch.g for branch in mtdc.dc_branches], dtype=float)
