"""
Splitting a MeshedGrid into affinely coupled regional problems.

Every AC region and the MTDC region get their own NLP. The voltage at
both ends of each tie-line is duplicated in the AC region and in the MTDC
region; four consensus rows per tie-line force the copies to agree:

    Σ_ℓ A_ℓ x_ℓ = 0,   A_ℓ entries in {-1, 0, +1}.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from core.exceptions import FormulationError
from formulation.builder import CENTRAL, ac_bus, assemble_nlp, vsc_bus
from formulation.layout import key_label

logger = logging.getLogger('harness')

CONSENSUS_QUANTITIES = ('vm_k', 'vm_kp', 'va_k', 'va_kp')


@dataclass(frozen=True)
class ConsensusRow:
    tie: str
    quantity: str
    row: int
    key: tuple

    @property
    def label(self):
        return f"{self.tie}:{self.quantity}"


@dataclass
class ConsensusIndex:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def labels(self):
        return [row.label for row in self.rows]


@dataclass
class RegionProblem:
    """One region's NLP with its coupling matrix A_ℓ and scaling Σ_ℓ."""
    region_id: str
    problem: object
    coupling: sparse.csr_matrix
    scaling: np.ndarray

    @property
    def n(self):
        return self.problem.n

    @property
    def layout(self):
        return self.problem.layout


def consensus_keys(grid, tie):
    """Variable keys of (V_k, V_k', θ_k, θ_k') for one tie-line."""
    k = vsc_bus(tie.station, 'k')
    k_prime = ac_bus(tie.ac_region, tie.ac_bus)
    return {
        'vm_k': ('vm', k),
        'vm_kp': ('vm', k_prime),
        'va_k': ('va', k),
        'va_kp': ('va', k_prime),
    }


def build_consensus_index(grid):
    index = ConsensusIndex()
    for tie in sorted(grid.tie_lines, key=lambda t: t.id):
        keys = consensus_keys(grid, tie)
        for quantity in CONSENSUS_QUANTITIES:
            index.rows.append(ConsensusRow(tie.id, quantity, len(index.rows), keys[quantity]))
    return index


def build_scaling(problem):
    """Σ_ℓ diagonal: 1/(upper − lower) where both bounds are finite and distinct, else 1."""
    width = problem.upper - problem.lower
    scaling = np.ones(problem.n)
    bounded = np.isfinite(width) & (width > 0)
    scaling[bounded] = 1.0 / width[bounded]
    return scaling


def _coupling_matrix(grid, region_id, problem, consensus):
    sign = -1.0 if region_id == grid.mtdc.id else 1.0
    tie_ids = {tie.id for tie in grid.tie_lines if region_id in (tie.ac_region, grid.mtdc.id)}
    rows, cols = [], []
    for row in consensus:
        if row.tie in tie_ids:
            rows.append(row.row)
            cols.append(problem.layout[row.key])
    return sparse.csr_matrix(
        (np.full(len(rows), sign), (rows, cols)), shape=(len(consensus), problem.n)
    )


def decompose(grid, config=None):
    """
    Builds one RegionProblem per region (AC regions first, MTDC last) and
    the consensus index shared by their coupling matrices.
    """
    consensus = build_consensus_index(grid)
    regions = []
    for region_id in grid.region_ids:
        problem = assemble_nlp(grid, region_id, config)
        try:
            coupling = _coupling_matrix(grid, region_id, problem, consensus)
        except FormulationError as exc:
            raise FormulationError(f"Tie-line endpoint missing in region '{region_id}': {exc}")
        regions.append(RegionProblem(region_id, problem, coupling, build_scaling(problem)))
    logger.info(
        f"Decomposed '{grid.name}' into {len(regions)} regions with {len(consensus)} consensus rows."
    )
    return regions, consensus


def _check_dimensions(regions, xs):
    if len(xs) != len(regions):
        raise FormulationError(f"Expected {len(regions)} region vectors, got {len(xs)}.")
    for region, x in zip(regions, xs):
        if len(x) != region.n:
            raise FormulationError(f"Region '{region.region_id}' expects {region.n} variables, got {len(x)}.")


def consensus_residual(regions, xs):
    """Returns Σ_ℓ A_ℓ x_ℓ and its infinity norm."""
    _check_dimensions(regions, xs)
    if not regions:
        return np.zeros(0), 0.0
    residual = sum(region.coupling @ np.asarray(x, dtype=float) for region, x in zip(regions, xs))
    norm = float(np.max(np.abs(residual))) if residual.size else 0.0
    return residual, norm


def owner_of(grid, key):
    """Region that owns the physical variable behind `key`."""
    quantity, ref = key
    if quantity in ('pg', 'qg'):
        return ref[0]
    if quantity in ('vm', 'va') and ref[0] == 'ac':
        return ref[1]
    return grid.mtdc.id


def split_global(x, central_layout, regions):
    """Copies a centralized point into every region, duplicates included."""
    x = np.asarray(x, dtype=float)
    return [x[central_layout.indices(region.layout.keys)] for region in regions]


def compose_global(xs, regions, central_layout):
    """Maps region iterates back to the centralized layout using owned variables only."""
    _check_dimensions(regions, xs)
    grid = regions[0].problem.grid if regions else None
    x = np.full(len(central_layout), np.nan)
    for region, local in zip(regions, xs):
        for i, key in enumerate(region.layout.keys):
            if owner_of(grid, key) == region.region_id:
                x[central_layout[key]] = local[i]
    missing = np.flatnonzero(np.isnan(x))
    if missing.size:
        raise FormulationError(f"No region owns {key_label(central_layout.keys[missing[0]])}.")
    return x


def central_problem(grid, config=None):
    return assemble_nlp(grid, CENTRAL, config)
