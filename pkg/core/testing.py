"""Small grids shared by the test suites of every app."""

from pathlib import Path

import numpy as np
from django.conf import settings
from scipy import sparse

from formulation.blocks import BlockBuilder
from formulation.layout import VariableLayout
from formulation.problem import NlpProblem
from network.grid import (
    AcBranch, AcBus, AcRegion, BaseQuantities, DcBranch, DcBus, Generator,
    MeshedGrid, MtdcRegion, TieLine, VscStation,
)
from partitioner.decomposition import RegionProblem

CASES_DIR = Path(settings.BASE_DIR) / 'cases'
CASE1_PATH = CASES_DIR / 'case1_4x9bus_mtdc.json'
CASE2_PATH = CASES_DIR / 'case2_4x118bus_mtdc.json'

VSC_DEFAULTS = dict(
    r_f=0.0005, x_f=0.0125, b_f=0.2, r_m=0.00025, x_m=0.04,
    a1=0.011, a2=0.003, a3=0.0043, delta=1.05, gamma=0.5,
    s_nom=11.0, i_max=11.0, v_max_conv=1.05,
)


def three_bus_region(region_id, load=0.9, c1=0.11, c2=5.0):
    """Triangle region: slack generator at bus 1, load at bus 3."""
    buses = (
        AcBus(1, region_id, 0.95, 1.05, is_slack=True),
        AcBus(2, region_id, 0.95, 1.05),
        AcBus(3, region_id, 0.95, 1.05, p_load=load, q_load=0.3 * load),
    )
    generators = (
        Generator(0, 1, 0.0, 3.0, -3.0, 3.0, c1=c1, c2=c2, c3=150.0),
    )
    branches = (
        AcBranch(0, 1, 2, 0.01, 0.085, b_sh=0.176, s_max=2.5),
        AcBranch(1, 2, 3, 0.017, 0.092, b_sh=0.158),
        AcBranch(2, 1, 3, 0.039, 0.17, b_sh=0.358, s_max=2.5, ratio=1.02),
    )
    return AcRegion(region_id, buses, generators, branches)


def single_region_grid():
    """An AC-only grid with no converters."""
    return MeshedGrid(name='triangle', base=BaseQuantities(), ac_regions=(three_bus_region('ac1'),))


def two_area_grid(loss_weight=10.0):
    """
    Two triangle regions joined through a two-terminal DC link. The second
    region carries the dearer generator, so power flows across the link.
    """
    regions = (
        three_bus_region('ac1', load=0.6),
        three_bus_region('ac2', load=1.2, c1=0.2, c2=9.0),
    )
    mtdc = MtdcRegion(
        dc_buses=(DcBus(1, 0.9, 1.1), DcBus(2, 0.9, 1.1, is_reference=True)),
        dc_branches=(DcBranch(0, 1, 2, r=0.0042, p_max=1.5),),
        stations=(
            VscStation('vsc1', dc_bus=1, **VSC_DEFAULTS),
            VscStation('vsc2', dc_bus=2, **VSC_DEFAULTS),
        ),
    )
    ties = (
        TieLine('tie1', 'ac1', 2, 'vsc1'),
        TieLine('tie2', 'ac2', 2, 'vsc2'),
    )
    return MeshedGrid(
        name='two-area', base=BaseQuantities(), ac_regions=regions,
        mtdc=mtdc, tie_lines=ties, loss_weight=loss_weight,
    )


def toy_problem(bounds, objective, equalities=(), inequalities=()):
    """
    Builds an NlpProblem over variables ('x', i).

    `objective` is a list of (coef, i, px, j, py) monomials plus a constant
    given as (value,); constraint rows use the same encoding.
    """
    layout = VariableLayout()
    for i, (lower, upper) in enumerate(bounds):
        layout.add(('x', i), lower, upper)

    def block(name, rows):
        builder = BlockBuilder(name)
        for terms in rows:
            row = builder.new_row(f"{name}{builder.size}")
            for term in terms:
                if len(term) == 1:
                    builder.add_constant(row, term[0])
                else:
                    coef, i, px, j, py = term
                    builder.add_monomial(row, i, coef, px, j, py)
        return builder.build()

    return NlpProblem(
        layout, block('objective', [objective]),
        [block('equality', equalities)], [block('inequality', inequalities)], name='toy',
    )


def scalar_region(region_id, target, sign, bounds=(-10.0, 10.0)):
    """One-variable region with f = (x − target)² and a single ±1 consensus entry."""
    problem = toy_problem([bounds], [(1.0, 0, 2, 0, 0), (-2.0 * target, 0, 1, 0, 0), (target ** 2,)])
    return RegionProblem(region_id, problem, sparse.csr_matrix([[float(sign)]]), np.ones(1))
