import json
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import CaseFileError, FormulationError
from core.testing import CASE1_PATH, three_bus_region, two_area_grid

from .admittance import branch_admittances, build_ac_admittance, build_dc_conductance
from .grid import AcBranch, AcBus, BaseQuantities
from .loader import load_case, parse_case, validate
from .units import (
    cost_from_pu, cost_to_pu, impedance_from_pu, impedance_to_pu, power_from_pu, power_to_pu,
)


def case1_data():
    return json.loads(Path(CASE1_PATH).read_text())


class UnitTests(SimpleTestCase):

    def test_power_and_impedance(self):
        """
        100 MW is 1 pu on a 100 MVA base; 345 kV gives a 1190.25 Ω base.
        """
        base = BaseQuantities(s_base=100.0, v_base=345.0)
        self.assertEqual(power_to_pu(100.0, base.s_base), 1.0)
        self.assertAlmostEqual(power_from_pu(0.723, base.s_base), 72.3)
        self.assertAlmostEqual(base.z_base, 1190.25)
        self.assertAlmostEqual(impedance_to_pu(1190.25, base), 1.0)
        self.assertAlmostEqual(impedance_from_pu(0.01, base), 11.9025)

    def test_cost_rescaling(self):
        """
        The per-unit polynomial evaluated at p equals the MW polynomial at P = S·p.
        """
        c1, c2, c3 = cost_to_pu(0.11, 5.0, 150.0, 100.0)
        self.assertEqual((c1, c2, c3), (1100.0, 500.0, 150.0))
        p = 0.723
        self.assertAlmostEqual(c1 * p ** 2 + c2 * p + c3, 0.11 * 72.3 ** 2 + 5.0 * 72.3 + 150.0)
        self.assertEqual(cost_from_pu(c1, c2, c3, 100.0), (0.11, 5.0, 150.0))


class AdmittanceTests(SimpleTestCase):

    def test_zero_impedance_branch(self):
        """
        A branch with r = x = 0 cannot be stamped.
        """
        with self.assertRaises(FormulationError):
            branch_admittances(AcBranch(0, 1, 2, 0.0, 0.0))

    def test_nominal_tap_is_symmetric(self):
        """
        Without a tap both diagonal entries match and the off-diagonals are −y.
        """
        branch = AcBranch(0, 1, 2, 0.01, 0.1, b_sh=0.2)
        y_ff, y_ft, y_tf, y_tt = branch_admittances(branch)
        y = 1.0 / complex(0.01, 0.1)
        self.assertAlmostEqual(y_ff, y_tt)
        self.assertAlmostEqual(y_ft, -y)
        self.assertAlmostEqual(y_tt, y + 0.1j)

    def test_off_nominal_tap(self):
        """
        The from-side diagonal is divided by the squared ratio.
        """
        y_ff, y_ft, _, y_tt = branch_admittances(AcBranch(0, 1, 2, 0.0, 0.1, ratio=1.1))
        self.assertAlmostEqual(y_ff, y_tt / 1.21)
        self.assertAlmostEqual(y_ft, 1j * 10.0 / 1.1)

    def test_bus_matrix(self):
        """
        The triangle's matrix is symmetric and its rows sum to the shunt terms.
        """
        region = replace(three_bus_region('ac1'), branches=tuple(
            replace(branch, ratio=1.0) for branch in three_bus_region('ac1').branches
        ))
        G, B = build_ac_admittance(region)
        np.testing.assert_allclose(G.toarray(), G.toarray().T)
        np.testing.assert_allclose(B.toarray(), B.toarray().T)
        np.testing.assert_allclose(np.asarray(G.sum(axis=1)).ravel(), 0.0, atol=1e-12)
        charging = np.array([0.176 + 0.358, 0.176 + 0.158, 0.158 + 0.358]) / 2
        np.testing.assert_allclose(np.asarray(B.sum(axis=1)).ravel(), charging, atol=1e-12)

    def test_dc_conductance(self):
        """
        DC conductances are reciprocal resistances in branch order.
        """
        grid = two_area_grid()
        expected = [1.0 / branch.r for branch in grid.mtdc.dc_branches]
        np.testing.assert_allclose(build_dc_conductance(grid.mtdc), expected)


class LoadCaseTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = load_case(CASE1_PATH)

    def test_case1_structure(self):
        """
        Four AC regions plus the MTDC region, one tie-line per station.
        """
        self.assertEqual(self.grid.region_ids, ['ac1', 'ac2', 'ac3', 'ac4', 'mtdc'])
        self.assertEqual(len(self.grid.tie_lines), 4)
        self.assertEqual([station.id for station in self.grid.mtdc.stations], ['vsc1', 'vsc2', 'vsc3', 'vsc4'])
        self.assertEqual([bus.id for bus in self.grid.mtdc.dc_buses if bus.is_reference], [3])
        self.assertEqual(validate(self.grid), [])

    def test_per_unit_conversion(self):
        """
        Loads are scaled to the region total and the voltage limits override the tables.
        """
        region = self.grid.ac_region('ac1')
        self.assertAlmostEqual(sum(bus.p_load for bus in region.buses), 3.15)
        self.assertAlmostEqual(sum(bus.q_load for bus in region.buses), 1.15)
        self.assertTrue(all(bus.v_min == 0.95 and bus.v_max == 1.05 for bus in region.buses))
        self.assertEqual(region.slack.id, 1)
        self.assertAlmostEqual(region.branches[0].s_max, 2.5)
        self.assertAlmostEqual(region.generators[0].p_max, 2.5)

    def test_cost_ratio(self):
        """
        Each region's costs are the shared tables times its ratio; the tables carry no no-load term.
        """
        base = self.grid.ac_region('ac1').generators[0]
        scaled = self.grid.ac_region('ac4').generators[0]
        self.assertAlmostEqual(scaled.c1, 2.2 * base.c1)
        self.assertAlmostEqual(scaled.c2, 2.2 * base.c2)
        self.assertEqual((base.c3, scaled.c3), (0.0, 0.0))

    def test_missing_file(self):
        """
        A missing path is reported under `path`.
        """
        with self.assertRaises(CaseFileError) as caught:
            load_case('no/such/case.json')
        self.assertIn('path', caught.exception.detail)
        self.assertIn('no/such/case.json', str(caught.exception))

    def test_invalid_json(self):
        """
        A malformed file names the offending line.
        """
        with tempfile.NamedTemporaryFile('w', suffix='.json', delete=False) as handle:
            handle.write('{"schema_version": 1,\n "ac_regions": [\n')
        try:
            with self.assertRaises(CaseFileError) as caught:
                load_case(handle.name)
        finally:
            Path(handle.name).unlink()
        self.assertIn('line', str(caught.exception.detail['non_field_errors'][0]))


class CaseSchemaTests(SimpleTestCase):

    def test_bad_tie_line_bus(self):
        """
        A tie-line to a missing AC bus is located by row and field.
        """
        data = case1_data()
        data['tie_lines'][2]['ac_bus'] = 99
        with self.assertRaises(CaseFileError) as caught:
            parse_case(data)
        self.assertIn('ac_bus', caught.exception.detail['tie_lines'][2])

    def test_station_linked_twice(self):
        """
        Two tie-lines on one station are rejected, leaving the other station unlinked.
        """
        data = case1_data()
        data['tie_lines'][1]['station'] = 'vsc1'
        with self.assertRaises(CaseFileError) as caught:
            parse_case(data)
        detail = caught.exception.detail
        self.assertIn('station', detail['tie_lines'][1])
        self.assertIn('id', detail['mtdc']['stations'][1])

    def test_phase_shifter_rejected(self):
        """
        Nonzero SHIFT is reported on the branch row of its region.
        """
        data = case1_data()
        data['ac_regions'][0]['matpower']['branch'][3][9] = 5.0
        with self.assertRaises(CaseFileError) as caught:
            parse_case(data)
        tables = caught.exception.detail['ac_regions'][0]['matpower']
        self.assertIn('shift', tables['branch'][3])

    def test_two_reference_dc_buses(self):
        """
        Exactly one DC bus may be the voltage reference.
        """
        data = case1_data()
        data['mtdc']['dc_buses'][0]['is_reference'] = True
        with self.assertRaises(CaseFileError) as caught:
            parse_case(data)
        self.assertIn('non_field_errors', caught.exception.detail['mtdc']['dc_buses'])

    def test_case_voltage_limits_take_precedence(self):
        """
        Case-wide voltage limits replace per-bus DC limits; without them the per-bus values hold.
        """
        data = case1_data()
        data['mtdc']['dc_buses'][0]['v_min'] = 0.9
        data['mtdc']['dc_buses'][0]['v_max'] = 1.1
        bus = parse_case(data).mtdc.dc_buses[0]
        self.assertEqual((bus.v_min, bus.v_max), (0.95, 1.05))
        del data['voltage_limits']
        bus = parse_case(data).mtdc.dc_buses[0]
        self.assertEqual((bus.v_min, bus.v_max), (0.9, 1.1))

    def test_unknown_schema_version(self):
        """
        Only schema version 1 is understood.
        """
        data = case1_data()
        data['schema_version'] = 2
        with self.assertRaises(CaseFileError) as caught:
            parse_case(data)
        self.assertIn('schema_version', caught.exception.detail)

    def test_unlimited_branch_and_station_override(self):
        """
        rateA = 0 leaves the branch unlimited; station fields override the defaults.
        """
        data = case1_data()
        data['ac_regions'][0]['matpower']['branch'][0][5] = 0
        data['mtdc']['stations'][0]['i_max'] = 7.5
        grid = parse_case(data)
        self.assertIsNone(grid.ac_region('ac1').branches[0].s_max)
        self.assertEqual(grid.mtdc.station('vsc1').i_max, 7.5)
        self.assertEqual(grid.mtdc.station('vsc2').i_max, 11.0)

    def test_stock_case_without_mtdc(self):
        """
        A region may name a PYPOWER case; without converters only AC regions remain.
        """
        grid = parse_case({'schema_version': 1, 'ac_regions': [{'id': 'north', 'matpower': 'case118'}]})
        self.assertEqual(grid.region_ids, ['north'])
        self.assertEqual(len(grid.ac_region('north').buses), 118)
        self.assertEqual(grid.tie_lines, ())

    def test_unknown_stock_case(self):
        """
        A case name PYPOWER does not ship is a schema error.
        """
        with self.assertRaises(CaseFileError) as caught:
            parse_case({'schema_version': 1, 'ac_regions': [{'id': 'north', 'matpower': 'case_unknown'}]})
        self.assertIn('matpower', caught.exception.detail['ac_regions'][0])

    def test_reserved_region_id(self):
        """
        An AC region may not take the MTDC region's id.
        """
        data = case1_data()
        data['ac_regions'][3]['id'] = 'mtdc'
        with self.assertRaises(CaseFileError) as caught:
            parse_case(data)
        self.assertIn('id', caught.exception.detail['ac_regions'][3])


class ValidateTests(SimpleTestCase):

    def test_disconnected_region(self):
        """
        A region whose buses are not all linked is flagged.
        """
        region = three_bus_region('ac1')
        grid = replace(two_area_grid(), ac_regions=(replace(region, branches=region.branches[:1]), three_bus_region('ac2')))
        self.assertIn(('ac_regions.ac1', "AC region is not connected."), validate(grid))

    def test_slack_count(self):
        """
        Regions need exactly one slack bus.
        """
        region = three_bus_region('ac2')
        buses = region.buses[:1] + (AcBus(2, 'ac2', 0.95, 1.05, is_slack=True),) + region.buses[2:]
        grid = replace(two_area_grid(), ac_regions=(three_bus_region('ac1'), replace(region, buses=buses)))
        locations = [location for location, _ in validate(grid)]
        self.assertEqual(locations, ['ac_regions.ac2.buses'])

    def test_dangling_tie_line(self):
        """
        A tie-line pointing at a missing bus is reported by id.
        """
        grid = two_area_grid()
        ties = (replace(grid.tie_lines[0], ac_bus=42),) + grid.tie_lines[1:]
        findings = validate(replace(grid, tie_lines=ties))
        self.assertIn((f"tie_lines.{ties[0].id}", "Dangling AC endpoint."), findings)
