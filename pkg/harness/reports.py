import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from partitioner.decomposition import compose_global, consensus_residual

logger = logging.getLogger('harness')

CONVERGED = 'converged'
MAX_ITER = 'max-iter'
DIVERGED = 'diverged'


@dataclass
class RunReport:
    """
    Outcome of one algorithm run: per-iteration metric rows, final costs
    and, when a reference is known, the solution gaps.
    """
    algorithm: str
    status: str = MAX_ITER
    iterations: int = 0
    wall_time: float = 0.0
    history: list = field(default_factory=list)
    coupling: list = field(default_factory=list)
    cost: Optional[float] = None
    losses: Optional[float] = None
    objective: Optional[float] = None
    cost_gap: Optional[float] = None
    losses_gap: Optional[float] = None
    distance: Optional[float] = None
    x: Optional[np.ndarray] = None
    local: list = field(default_factory=list)
    message: str = ''
    extras: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == CONVERGED

    @property
    def consensus_violation(self):
        return self.history[-1]['consensus_violation'] if self.history else None


def solution_gap(value, reference):
    """Absolute relative gap |value − reference| / |reference|."""
    if value is None or reference is None or reference == 0:
        return None
    return abs(value - reference) / abs(reference)


class MetricRecorder:
    """
    Turns region iterates into metric rows: consensus violation, dual
    residual, distance to the reference, objective, cost, losses and the
    AC/MTDC copies on every consensus row.
    """

    def __init__(self, regions, central, consensus, reference=None):
        self.regions = regions
        self.central = central
        self.consensus = consensus
        self.reference = reference
        self.plus, self.minus = self._sides()

    def _sides(self):
        """For each consensus row, the (region index, local column) of its +1 and −1 entries."""
        plus, minus = {}, {}
        for index, region in enumerate(self.regions):
            coupling = region.coupling.tocoo()
            for row, col, value in zip(coupling.row, coupling.col, coupling.data):
                (plus if value > 0 else minus)[int(row)] = (index, int(col))
        return plus, minus

    def compose(self, xs):
        return compose_global(xs, self.regions, self.central.layout)

    def record(self, report, iteration, xs, dual_residual, communication):
        _, violation = consensus_residual(self.regions, xs)
        x = self.compose(xs)
        breakdown = self.central.cost_breakdown(x)
        distance = None
        if self.reference is not None:
            distance = float(np.max(np.abs(x - self.reference.x))) if x.size else 0.0
        row = {
            'iteration': iteration,
            'consensus_violation': violation,
            'dual_residual': float(dual_residual),
            'distance': distance,
            'objective': breakdown['objective'],
            'cost': breakdown['cost'],
            'losses': breakdown['losses'],
            'communication': int(communication),
        }
        report.history.append(row)
        report.coupling.append([
            (xs[self.plus[r][0]][self.plus[r][1]], xs[self.minus[r][0]][self.minus[r][1]])
            for r in range(len(self.consensus))
        ])
        report.iterations = iteration
        return row

    def finish(self, report, xs):
        """Fills the final costs, gaps and distance from the last iterate."""
        if not xs:
            return report
        x = self.compose(xs)
        breakdown = self.central.cost_breakdown(x)
        report.x = x
        report.local = [np.array(local) for local in xs]
        report.cost = breakdown['cost']
        report.losses = breakdown['losses']
        report.objective = breakdown['objective']
        if self.reference is not None:
            report.cost_gap = solution_gap(report.cost, self.reference.cost)
            report.losses_gap = solution_gap(report.losses, self.reference.losses)
            report.distance = float(np.max(np.abs(x - self.reference.x))) if x.size else 0.0
        logger.info(
            f"{report.algorithm}: {report.status} after {report.iterations} iterations, "
            f"cost {report.cost:.3f} $, losses {report.losses:.3f} MW"
        )
        return report


@dataclass
class Reference:
    """Centralized reference x* with its cost and losses."""
    x: np.ndarray
    cost: float
    losses: float
    objective: float
    nu: Optional[np.ndarray] = None
    kappa: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    solve_time: float = 0.0
    iterations: int = 0
    converged: bool = True
