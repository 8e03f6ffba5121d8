"""
Assembly of the AC/DC OPF as an explicit NLP.

The same builder produces the centralized problem and every regional
problem of the decomposition. A scope selects what is built:

  CENTRAL         all AC regions, all VSC stations and the DC grid.
  <ac region id>  that region plus copies of the PCC voltages (V_k, θ_k)
                  of the stations its tie-lines reach.
  'mtdc'          all stations and the DC grid plus copies of the AC-side
                  tie-line bus voltages (V_k', θ_k').

Shared variables carry the same key in every scope, so mapping between
regional and centralized vectors is a key lookup.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import FormulationError
from network.admittance import branch_admittances
from network.units import cost_to_pu

from .blocks import BlockBuilder, ExpressionBlock, FlowLimitBlock
from .layout import VariableLayout
from .problem import NlpProblem

logger = logging.getLogger('harness')

CENTRAL = 'central'
CONVERTER_CURRENT_START = 0.5


@dataclass(frozen=True)
class ObjectiveConfig:
    loss_weight: float = 10.0

    def __post_init__(self):
        if self.loss_weight < 0:
            raise FormulationError("The loss weight must be non-negative.")


def ac_bus(region_id, bus_id):
    return ('ac', region_id, bus_id)


def vsc_bus(station_id, node):
    return ('vsc', station_id, node)


def pi_model_coefficients(y_series, b_sh=0.0, tap=1.0):
    """
    Trig-term coefficients (alpha, beta, gamma) of the P and Q injections
    at the from end and at the to end of a pi-model branch.
    """
    g, b = y_series.real, y_series.imag
    p_from = (g / tap ** 2, -g / tap, -b / tap)
    q_from = (-(b + b_sh / 2) / tap ** 2, b / tap, -g / tap)
    p_to = (g, -g / tap, -b / tap)
    q_to = (-(b + b_sh / 2), b / tap, -g / tap)
    return (p_from, q_from), (p_to, q_to)


class OpfProblem(NlpProblem):
    """NLP of one scope of a MeshedGrid with cost/loss bookkeeping."""

    def __init__(self, grid, scope, loss_weight, cost, losses, branch_flows, **kwargs):
        super().__init__(**kwargs)
        self.grid = grid
        self.scope = scope
        self.s_base = grid.base.s_base
        self.loss_weight = loss_weight
        self.cost_block = cost
        self.loss_block = losses
        self.branch_flows = branch_flows

    def cost_breakdown(self, x):
        """Generation cost C1 ($), losses C2 (MW) and C = C1 + η·C2."""
        cost = float(self.cost_block.value(x)[0])
        losses = float(self.loss_block.value(x)[0]) * self.s_base
        return {'cost': cost, 'losses': losses, 'objective': cost + self.loss_weight * losses}

    def describe(self, x=None):
        """Debug dump: dimensions, bounds and block residuals at x."""
        x = self.x0 if x is None else np.asarray(x, dtype=float)

        def finite(value):
            return float(value) if np.isfinite(value) else None

        blocks = []
        for kind, group in (('equality', self.equality_blocks), ('inequality', self.inequality_blocks)):
            for block in group:
                residual = block.value(x)
                blocks.append({
                    'name': block.name,
                    'kind': kind,
                    'rows': block.size,
                    'max_abs_residual': float(np.max(np.abs(residual))) if block.size else 0.0,
                    'residuals': dict(zip(block.labels, residual.tolist())),
                })
        return {
            'name': self.name,
            'scope': self.scope,
            'variables': len(self.layout),
            'equalities': self.m_eq,
            'inequalities': self.m_ineq,
            'objective': self.objective(x),
            **self.cost_breakdown(x),
            'bounds': [
                {'name': label, 'lower': finite(lo), 'upper': finite(up), 'value': float(value)}
                for label, lo, up, value in zip(self.layout.labels, self.lower, self.upper, x)
            ],
            'blocks': blocks,
        }


class OpfBuilder:

    def __init__(self, grid, scope=CENTRAL, config=None):
        self.grid = grid
        self.scope = scope
        self.config = config or ObjectiveConfig(loss_weight=grid.loss_weight)
        mtdc = grid.mtdc
        if scope == CENTRAL:
            self.regions = list(grid.ac_regions)
            self.ties = list(grid.tie_lines)
            self.with_mtdc = not mtdc.is_empty
        elif scope == mtdc.id and not mtdc.is_empty:
            self.regions = []
            self.ties = list(grid.tie_lines)
            self.with_mtdc = True
        else:
            try:
                self.regions = [grid.ac_region(scope)]
            except KeyError:
                raise FormulationError(f"Unknown scope '{scope}'.")
            self.ties = grid.tie_lines_of(scope)
            self.with_mtdc = False
        self.layout = VariableLayout()

    # Variables

    def _add_ac_bus(self, region, bus):
        ref = ac_bus(region.id, bus.id)
        self.layout.add(('vm', ref), bus.v_min, bus.v_max, initial=1.0)
        # Slack angle pinned by equal bounds.
        if bus.is_slack:
            self.layout.add(('va', ref), 0.0, 0.0)
        else:
            self.layout.add(('va', ref))

    def _add_variables(self):
        layout = self.layout
        for region in self.regions:
            for bus in region.buses:
                self._add_ac_bus(region, bus)
            for gen in region.generators:
                layout.add(('pg', (region.id, gen.id)), gen.p_min, gen.p_max)
                layout.add(('qg', (region.id, gen.id)), gen.q_min, gen.q_max)
        if not self.with_mtdc:
            for tie in self.ties:
                station = self.grid.mtdc.station(tie.station)
                ref = vsc_bus(station.id, 'k')
                layout.add(('vm', ref), station.v_min, station.v_max, initial=1.0)
                layout.add(('va', ref))
            return
        if self.scope != CENTRAL:
            for tie in self.ties:
                region = self.grid.ac_region(tie.ac_region)
                self._add_ac_bus(region, region.bus(tie.ac_bus))
        for station in self.grid.mtdc.stations:
            for node in ('k', 'f', 'm'):
                upper = station.v_max_conv if node == 'm' else station.v_max
                layout.add(('vm', vsc_bus(station.id, node)), station.v_min, upper, initial=1.0)
                layout.add(('va', vsc_bus(station.id, node)))
            layout.add(('pm', station.id))
            layout.add(('qm', station.id))
            # I = 0 makes the current row I²V² = P² + Q² degenerate.
            layout.add(('im', station.id), 0.0, station.i_max, initial=min(CONVERTER_CURRENT_START, station.i_max / 2))
            layout.add(('pn', station.id))
        for bus in self.grid.mtdc.dc_buses:
            if bus.is_reference:
                layout.add(('vdc', bus.id), 1.0, 1.0, initial=1.0)
            else:
                layout.add(('vdc', bus.id), bus.v_min, bus.v_max, initial=1.0)

    # Helpers

    def _v(self, ref):
        return self.layout[('vm', ref)], self.layout[('va', ref)]

    def _add_flow(self, p_rows, q_rows, coefficients, from_ref, to_ref, sign=-1.0):
        """Adds sign·(flow leaving from_ref towards to_ref) to the given rows."""
        (p_coef, q_coef) = coefficients
        vi, ti = self._v(from_ref)
        vj, tj = self._v(to_ref)
        p_builder, p_row = p_rows
        q_builder, q_row = q_rows
        p_builder.add_trig(p_row, vi, vj, ti, tj, *(sign * c for c in p_coef))
        q_builder.add_trig(q_row, vi, vj, ti, tj, *(sign * c for c in q_coef))

    # Equalities

    def _ac_balance(self):
        p_balance, q_balance = BlockBuilder('ac_balance_p'), BlockBuilder('ac_balance_q')
        for region in self.regions:
            rows = {}
            for bus in region.buses:
                ref = ac_bus(region.id, bus.id)
                name = f"{region.id}:{bus.id}"
                rows[bus.id] = (p_balance.new_row(f"P[{name}]", -bus.p_load), q_balance.new_row(f"Q[{name}]", -bus.q_load))
                vm = self.layout[('vm', ref)]
                if bus.g_shunt:
                    p_balance.add_monomial(rows[bus.id][0], vm, -bus.g_shunt, px=2)
                if bus.b_shunt:
                    q_balance.add_monomial(rows[bus.id][1], vm, bus.b_shunt, px=2)
            for gen in region.generators:
                p_row, q_row = rows[gen.bus]
                p_balance.add_monomial(p_row, self.layout[('pg', (region.id, gen.id))], 1.0)
                q_balance.add_monomial(q_row, self.layout[('qg', (region.id, gen.id))], 1.0)
            for branch in region.branches:
                branch_admittances(branch)  # rejects zero impedance
                from_end, to_end = pi_model_coefficients(branch.series_admittance, branch.b_sh, branch.ratio)
                f, t = ac_bus(region.id, branch.from_bus), ac_bus(region.id, branch.to_bus)
                pf, qf = rows[branch.from_bus]
                pt, qt = rows[branch.to_bus]
                self._add_flow((p_balance, pf), (q_balance, qf), from_end, f, t)
                self._add_flow((p_balance, pt), (q_balance, qt), to_end, t, f)
            for tie in self.grid.tie_lines_of(region.id):
                from_end, _ = pi_model_coefficients(tie.series_admittance)
                p_row, q_row = rows[tie.ac_bus]
                self._add_flow(
                    (p_balance, p_row), (q_balance, q_row), from_end,
                    ac_bus(region.id, tie.ac_bus), vsc_bus(tie.station, 'k'),
                )
        return [p_balance.build(), q_balance.build()]

    def _vsc_equalities(self):
        balance = BlockBuilder('vsc_balance')
        injection = BlockBuilder('vsc_injection')
        current = BlockBuilder('vsc_current')
        loss = BlockBuilder('vsc_loss')
        for station in self.grid.mtdc.stations:
            sid = station.id
            tie = self.grid.tie_line_of_station(sid)
            k, f, m = vsc_bus(sid, 'k'), vsc_bus(sid, 'f'), vsc_bus(sid, 'm')
            k_prime = ac_bus(tie.ac_region, tie.ac_bus)
            tie_end, _ = pi_model_coefficients(tie.series_admittance)
            transformer_from, transformer_to = pi_model_coefficients(station.transformer_admittance)
            reactor_from, reactor_to = pi_model_coefficients(station.reactor_admittance)

            pk, qk = balance.new_row(f"P[{sid}:k]"), balance.new_row(f"Q[{sid}:k]")
            self._add_flow((balance, pk), (balance, qk), tie_end, k, k_prime)
            self._add_flow((balance, pk), (balance, qk), transformer_from, k, f)

            pf, qf = balance.new_row(f"P[{sid}:f]"), balance.new_row(f"Q[{sid}:f]")
            self._add_flow((balance, pf), (balance, qf), transformer_to, f, k)
            self._add_flow((balance, pf), (balance, qf), reactor_from, f, m)
            # Filter demand Q_f^D = -V_f²·b_f enters as an injection.
            balance.add_monomial(qf, self.layout[('vm', f)], station.b_f, px=2)

            # P_m, Q_m equal the power leaving m towards the filter.
            row_p, row_q = injection.new_row(f"Pm[{sid}]"), injection.new_row(f"Qm[{sid}]")
            injection.add_monomial(row_p, self.layout[('pm', sid)], 1.0)
            injection.add_monomial(row_q, self.layout[('qm', sid)], 1.0)
            self._add_flow((injection, row_p), (injection, row_q), reactor_to, m, f)

            vm, pm, qm = self.layout[('vm', m)], self.layout[('pm', sid)], self.layout[('qm', sid)]
            im, pn = self.layout[('im', sid)], self.layout[('pn', sid)]
            row = current.new_row(f"I[{sid}]")
            current.add_monomial(row, im, 1.0, px=2, ycol=vm, py=2)
            current.add_monomial(row, pm, -1.0, px=2)
            current.add_monomial(row, qm, -1.0, px=2)

            row = loss.new_row(f"loss[{sid}]", station.a3)
            loss.add_monomial(row, pm, 1.0)
            loss.add_monomial(row, pn, 1.0)
            loss.add_monomial(row, im, station.a1, px=2)
            loss.add_monomial(row, im, station.a2)
        return [balance.build(), injection.build(), current.build(), loss.build()]

    def _dc_balance(self):
        balance = BlockBuilder('dc_balance')
        rows = {bus.id: balance.new_row(f"P[dc:{bus.id}]") for bus in self.grid.mtdc.dc_buses}
        for station in self.grid.mtdc.stations:
            balance.add_monomial(rows[station.dc_bus], self.layout[('pn', station.id)], 1.0)
        for branch in self.grid.mtdc.dc_branches:
            vi, vj = self.layout[('vdc', branch.from_bus)], self.layout[('vdc', branch.to_bus)]
            for row, a, b in ((rows[branch.from_bus], vi, vj), (rows[branch.to_bus], vj, vi)):
                balance.add_monomial(row, a, -branch.g, px=2)
                balance.add_monomial(row, a, branch.g, px=1, ycol=b, py=1)
        return balance.build()

    # Inequalities

    def _ac_branch_flows(self):
        """P/Q of every branch end in scope, plus the limit block for rated ones."""
        flows_p, flows_q = BlockBuilder('ac_flow_p'), BlockBuilder('ac_flow_q')
        limited_p, limited_q = BlockBuilder('ac_flow_limit_p'), BlockBuilder('ac_flow_limit_q')
        all_limits, limits = [], []
        for region in self.regions:
            for branch in region.branches:
                ends = pi_model_coefficients(branch.series_admittance, branch.b_sh, branch.ratio)
                f, t = ac_bus(region.id, branch.from_bus), ac_bus(region.id, branch.to_bus)
                for coefficients, a, b, arrow in ((ends[0], f, t, '>'), (ends[1], t, f, '<')):
                    label = f"S[{region.id}:{branch.from_bus}-{branch.to_bus}{arrow}]"
                    row_p, row_q = flows_p.new_row(label), flows_q.new_row(label)
                    self._add_flow((flows_p, row_p), (flows_q, row_q), coefficients, a, b, sign=1.0)
                    all_limits.append(branch.s_max if branch.s_max is not None else np.inf)
                    if branch.s_max is None:
                        continue
                    row_p, row_q = limited_p.new_row(label), limited_q.new_row(label)
                    self._add_flow((limited_p, row_p), (limited_q, row_q), coefficients, a, b, sign=1.0)
                    limits.append(branch.s_max)
        branch_flows = (flows_p.build(), flows_q.build(), np.array(all_limits, dtype=float))
        limit_block = FlowLimitBlock('ac_flow_limit', limited_p.build(), limited_q.build(), limits, limited_p.labels)
        return branch_flows, limit_block

    def _vsc_limits(self):
        limits = BlockBuilder('vsc_limits')
        for station in self.grid.mtdc.stations:
            sid = station.id
            vm = self.layout[('vm', vsc_bus(sid, 'm'))]
            vf = self.layout[('vm', vsc_bus(sid, 'f'))]
            pm, qm = self.layout[('pm', sid)], self.layout[('qm', sid)]
            vdc = self.layout[('vdc', station.dc_bus)]

            row = limits.new_row(f"modulation[{sid}]")
            limits.add_monomial(row, vm, 1.0)
            limits.add_monomial(row, vdc, -station.delta)

            row = limits.new_row(f"capacity[{sid}]")
            limits.add_monomial(row, pm, 1.0, px=2)
            limits.add_monomial(row, qm, 1.0, px=2)
            limits.add_monomial(row, vm, -station.i_max ** 2, px=2)

            limits.add_monomial(limits.new_row(f"q_min[{sid}]", -station.gamma * station.s_nom), qm, -1.0)

            b_m = station.reactor_admittance.imag
            v_cap = station.v_max_conv
            row = limits.new_row(f"q_max[{sid}]", b_m * v_cap ** 2)
            limits.add_monomial(row, qm, 1.0)
            limits.add_monomial(row, vf, -b_m * v_cap)
        return limits.build()

    def _dc_flow_limits(self):
        limits = BlockBuilder('dc_flow_limit')
        for branch in self.grid.mtdc.dc_branches:
            vi, vj = self.layout[('vdc', branch.from_bus)], self.layout[('vdc', branch.to_bus)]
            for sign, arrow in ((1.0, '+'), (-1.0, '-')):
                row = limits.new_row(f"P[dc:{branch.from_bus}-{branch.to_bus}{arrow}]", -branch.p_max)
                limits.add_monomial(row, vi, sign * branch.g, px=2)
                limits.add_monomial(row, vi, -sign * branch.g, px=1, ycol=vj, py=1)
        return limits.build()

    # Objective

    def _objective(self):
        s_base = self.grid.base.s_base
        weight = self.config.loss_weight * s_base
        cost, losses, objective = BlockBuilder('cost'), BlockBuilder('losses'), BlockBuilder('objective')
        for builder in (cost, losses, objective):
            builder.new_row(builder.name)
        for region in self.regions:
            for gen in region.generators:
                pg = self.layout[('pg', (region.id, gen.id))]
                c1, c2, c3 = cost_to_pu(gen.c1, gen.c2, gen.c3, s_base)
                for builder, scale in ((cost, 0.0), (objective, weight)):
                    builder.add_constant(0, c3)
                    if c1:
                        builder.add_monomial(0, pg, c1, px=2)
                    builder.add_monomial(0, pg, c2 + scale)
                losses.add_monomial(0, pg, 1.0)
            load = sum(bus.p_load for bus in region.buses)
            losses.add_constant(0, -load)
            objective.add_constant(0, -weight * load)
        return cost.build(), losses.build(), objective.build()

    def build(self):
        self._add_variables()
        equalities = self._ac_balance()
        inequalities = []
        branch_flows, flow_limits = self._ac_branch_flows()
        inequalities.append(flow_limits)
        if self.with_mtdc:
            equalities += self._vsc_equalities()
            equalities.append(self._dc_balance())
            inequalities.append(self._vsc_limits())
            inequalities.append(self._dc_flow_limits())
        cost, losses, objective = self._objective()
        problem = OpfProblem(
            grid=self.grid,
            scope=self.scope,
            loss_weight=self.config.loss_weight,
            cost=cost,
            losses=losses,
            branch_flows=branch_flows,
            layout=self.layout,
            objective=objective,
            equalities=equalities,
            inequalities=inequalities,
            name=f"{self.grid.name}/{self.scope}",
        )
        logger.debug(f"Assembled {problem.name}: n={problem.n}, m_eq={problem.m_eq}, m_ineq={problem.m_ineq}")
        return problem


def assemble_nlp(grid, scope=CENTRAL, config=None):
    """Builds the NLP of the whole grid (scope CENTRAL) or of one region."""
    return OpfBuilder(grid, scope, config).build()
