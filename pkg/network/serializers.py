import importlib
import re

import numpy as np
from django.conf import settings
from rest_framework import serializers

from .grid import (
    MTDC_REGION, AcBranch, AcBus, AcRegion, BaseQuantities, DcBranch, DcBus,
    Generator, MeshedGrid, MtdcRegion, TieLine, VscStation,
)
from .units import power_to_pu

# MATPOWER column positions used by the parser.
BUS_I, BUS_TYPE, PD, QD, GS, BS, VMAX, VMIN = 0, 1, 2, 3, 4, 5, 11, 12
GEN_BUS, QMAX, QMIN, GEN_STATUS, PMAX, PMIN = 0, 3, 4, 7, 8, 9
F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, TAP, SHIFT, BR_STATUS = 0, 1, 2, 3, 4, 5, 8, 9, 10
MODEL, NCOST, COST = 0, 3, 4

REF_BUS_TYPE = 3
ISOLATED_BUS_TYPE = 4
POLYNOMIAL_COST = 2

VSC_PARAMETERS = (
    'r_f', 'x_f', 'b_f', 'r_m', 'x_m', 'a1', 'a2', 'a3',
    'delta', 'gamma', 's_nom', 'i_max', 'v_max_conv',
)


def tie_line_r():
    return settings.OPF_MODEL['TIE_LINE_R']


def tie_line_x():
    return settings.OPF_MODEL['TIE_LINE_X']


def default_loss_weight():
    return settings.OPF_MODEL['LOSS_WEIGHT']


def load_stock_case(name):
    """Returns the MATPOWER tables of a case shipped with PYPOWER."""
    if not re.fullmatch(r'case\w+', name):
        raise serializers.ValidationError(f"'{name}' is not a MATPOWER case name.")
    try:
        module = importlib.import_module(f'pypower.{name}')
    except ImportError:
        raise serializers.ValidationError(f"PYPOWER ships no case named '{name}'.")
    ppc = getattr(module, name)()
    return {key: np.asarray(ppc[key], dtype=float).tolist() for key in ('bus', 'gen', 'branch', 'gencost')}


def matrix_field(min_columns, **kwargs):
    return serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=min_columns),
        **kwargs
    )


class MatpowerTablesSerializer(serializers.Serializer):
    """Inline bus/gen/branch/gencost tables with MATPOWER column semantics."""
    bus = matrix_field(13, min_length=1)
    gen = matrix_field(10, required=False, default=list)
    branch = matrix_field(11, required=False, default=list)
    gencost = matrix_field(5, required=False, default=list)

    def validate(self, attrs):
        errors = {}

        def report(table, row, column, message):
            errors.setdefault(table, {}).setdefault(row, {}).setdefault(column, []).append(message)

        bus_ids = set()
        slack_rows = []
        for row, bus in enumerate(attrs['bus']):
            bus_id = int(bus[BUS_I])
            if bus_id in bus_ids:
                report('bus', row, 'bus_i', f"Duplicate bus id {bus_id}.")
            bus_ids.add(bus_id)
            if int(bus[BUS_TYPE]) == REF_BUS_TYPE:
                slack_rows.append(row)
            if int(bus[BUS_TYPE]) == ISOLATED_BUS_TYPE:
                report('bus', row, 'bus_type', "Isolated buses are not supported.")
            if bus[VMIN] > bus[VMAX]:
                report('bus', row, 'vmin', "vmin exceeds vmax.")
        if len(slack_rows) != 1:
            errors.setdefault('bus', {}).setdefault('non_field_errors', []).append(
                f"Exactly one reference (type 3) bus required, found {len(slack_rows)}."
            )

        for row, gen in enumerate(attrs['gen']):
            if int(gen[GEN_BUS]) not in bus_ids:
                report('gen', row, 'gen_bus', f"Unknown bus {int(gen[GEN_BUS])}.")
            if gen[PMIN] > gen[PMAX]:
                report('gen', row, 'pmin', "pmin exceeds pmax.")
            if gen[QMIN] > gen[QMAX]:
                report('gen', row, 'qmin', "qmin exceeds qmax.")

        for row, branch in enumerate(attrs['branch']):
            for column, name in ((F_BUS, 'f_bus'), (T_BUS, 't_bus')):
                if int(branch[column]) not in bus_ids:
                    report('branch', row, name, f"Unknown bus {int(branch[column])}.")
            if branch[BR_R] == 0 and branch[BR_X] == 0:
                report('branch', row, 'br_x', "Zero series impedance.")
            if branch[SHIFT] != 0:
                report('branch', row, 'shift', "Phase shifting transformers are not supported.")
            if branch[RATE_A] < 0:
                report('branch', row, 'rate_a', "Negative flow limit.")

        if len(attrs['gencost']) != len(attrs['gen']):
            errors.setdefault('gencost', {}).setdefault('non_field_errors', []).append(
                f"Expected {len(attrs['gen'])} cost rows, found {len(attrs['gencost'])}."
            )
        for row, cost in enumerate(attrs['gencost']):
            ncost = int(cost[NCOST])
            if int(cost[MODEL]) != POLYNOMIAL_COST:
                report('gencost', row, 'model', "Only polynomial costs (model 2) are supported.")
            elif ncost > 3 or len(cost) < COST + ncost:
                report('gencost', row, 'ncost', "Expected at most 3 polynomial coefficients.")
            elif ncost == 3 and cost[COST] < 0:
                report('gencost', row, 'c1', "Quadratic cost coefficient must be non-negative.")

        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class MatpowerField(serializers.Field):
    """Either inline MATPOWER tables or the name of a stock PYPOWER case."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = load_stock_case(data)
        elif not isinstance(data, dict):
            raise serializers.ValidationError("Expected MATPOWER tables or a case name.")
        tables = MatpowerTablesSerializer(data=data)
        tables.is_valid(raise_exception=True)
        return tables.validated_data

    def to_representation(self, value):
        return value


class LoadScalingSerializer(serializers.Serializer):
    """Target region totals in MW / MVAr; bus loads are scaled proportionally."""
    p_total = serializers.FloatField(min_value=0)
    q_total = serializers.FloatField(required=False)


class AcRegionSerializer(serializers.Serializer):
    id = serializers.CharField(max_length=64)
    matpower = MatpowerField()
    load_scaling = LoadScalingSerializer(required=False)
    cost_ratio = serializers.FloatField(min_value=0, default=1.0)

    def validate_id(self, value):
        if value == MTDC_REGION:
            raise serializers.ValidationError(f"'{MTDC_REGION}' is reserved for the MTDC region.")
        return value

    def validate(self, attrs):
        scaling = attrs.get('load_scaling')
        if scaling:
            buses = attrs['matpower']['bus']
            if sum(bus[PD] for bus in buses) == 0 and scaling['p_total'] > 0:
                raise serializers.ValidationError({'load_scaling': ["Region has no active load to scale."]})
            if scaling.get('q_total') is not None and sum(bus[QD] for bus in buses) == 0:
                raise serializers.ValidationError({'load_scaling': ["Region has no reactive load to scale."]})
        return attrs


class VscParametersSerializer(serializers.Serializer):
    """Converter station parameters in per-unit; every field is optional here."""
    r_f = serializers.FloatField(required=False, min_value=0)
    x_f = serializers.FloatField(required=False)
    b_f = serializers.FloatField(required=False)
    r_m = serializers.FloatField(required=False, min_value=0)
    x_m = serializers.FloatField(required=False)
    a1 = serializers.FloatField(required=False)
    a2 = serializers.FloatField(required=False)
    a3 = serializers.FloatField(required=False)
    delta = serializers.FloatField(required=False)
    gamma = serializers.FloatField(required=False)
    s_nom = serializers.FloatField(required=False, min_value=0)
    i_max = serializers.FloatField(required=False)
    v_max_conv = serializers.FloatField(required=False, min_value=0)


class VscStationSerializer(VscParametersSerializer):
    id = serializers.CharField(max_length=64)
    dc_bus = serializers.IntegerField()


class DcBusSerializer(serializers.Serializer):
    id = serializers.IntegerField()
    is_reference = serializers.BooleanField(default=False)
    v_min = serializers.FloatField(required=False, min_value=0)
    v_max = serializers.FloatField(required=False, min_value=0)


class DcBranchSerializer(serializers.Serializer):
    from_bus = serializers.IntegerField()
    to_bus = serializers.IntegerField()
    r = serializers.FloatField()
    p_max = serializers.FloatField()

    def validate_r(self, value):
        if value <= 0:
            raise serializers.ValidationError("DC branch resistance must be positive.")
        return value

    def validate_p_max(self, value):
        if value <= 0:
            raise serializers.ValidationError("DC branch flow limit must be positive.")
        return value


class MtdcSerializer(serializers.Serializer):
    id = serializers.CharField(default=MTDC_REGION)
    dc_buses = DcBusSerializer(many=True, required=False)
    dc_branches = DcBranchSerializer(many=True, required=False)
    vsc_defaults = VscParametersSerializer(required=False)
    stations = VscStationSerializer(many=True, required=False)

    def validate(self, attrs):
        errors = {}
        dc_buses = attrs.setdefault('dc_buses', [])
        dc_branches = attrs.setdefault('dc_branches', [])
        stations = attrs.setdefault('stations', [])
        defaults = attrs.get('vsc_defaults', {})

        bus_ids = [bus['id'] for bus in dc_buses]
        for row, bus_id in enumerate(bus_ids):
            if bus_ids.index(bus_id) != row:
                errors.setdefault('dc_buses', {})[row] = {'id': [f"Duplicate DC bus id {bus_id}."]}
        references = sum(bus['is_reference'] for bus in dc_buses)
        if dc_buses and references != 1:
            errors.setdefault('dc_buses', {})['non_field_errors'] = [f"Exactly one reference DC bus required, found {references}."]

        for row, branch in enumerate(dc_branches):
            for end in ('from_bus', 'to_bus'):
                if branch[end] not in bus_ids:
                    errors.setdefault('dc_branches', {}).setdefault(row, {})[end] = [f"Unknown DC bus {branch[end]}."]

        station_ids = set()
        merged = []
        for row, station in enumerate(stations):
            location = errors.setdefault('stations', {}).setdefault(row, {})
            if station['id'] in station_ids:
                location['id'] = [f"Duplicate station id '{station['id']}'."]
            station_ids.add(station['id'])
            if station['dc_bus'] not in bus_ids:
                location['dc_bus'] = [f"Unknown DC bus {station['dc_bus']}."]
            params = {**defaults, **station}
            for name in VSC_PARAMETERS:
                if name not in params:
                    location[name] = ["Missing and no vsc_defaults value."]
            if not location:
                location.update(self.check_station_invariants(params))
            if not location:
                del errors['stations'][row]
            merged.append(params)
        if not errors.get('stations'):
            errors.pop('stations', None)

        if errors:
            raise serializers.ValidationError(errors)
        attrs['stations'] = merged
        return attrs

    @staticmethod
    def check_station_invariants(params):
        problems = {}
        if params['a1'] <= 0:
            problems['a1'] = ["Quadratic loss coefficient must be positive."]
        if params['a3'] < 0:
            problems['a3'] = ["No-load loss must be non-negative."]
        if params['delta'] <= 0:
            problems['delta'] = ["Modulation factor must be positive."]
        if not 0 < params['gamma'] <= 1:
            problems['gamma'] = ["Reactive constant must lie in (0, 1]."]
        if params['i_max'] <= 0:
            problems['i_max'] = ["Current limit must be positive."]
        if params['r_f'] == 0 and params['x_f'] == 0:
            problems['x_f'] = ["Zero transformer impedance."]
        if params['r_m'] == 0 and params['x_m'] == 0:
            problems['x_m'] = ["Zero phase reactor impedance."]
        return problems


class TieLineSerializer(serializers.Serializer):
    id = serializers.CharField(max_length=64)
    ac_region = serializers.CharField()
    ac_bus = serializers.IntegerField()
    station = serializers.CharField()
    r = serializers.FloatField(default=tie_line_r, min_value=0)
    x = serializers.FloatField(default=tie_line_x)

    def validate(self, attrs):
        if attrs['r'] == 0 and attrs['x'] == 0:
            raise serializers.ValidationError({'x': ["Tie-line needs a nonzero impedance."]})
        return attrs


class BaseQuantitiesSerializer(serializers.Serializer):
    s_base = serializers.FloatField(default=100.0)
    v_base = serializers.FloatField(default=345.0)

    def validate(self, attrs):
        for name in ('s_base', 'v_base'):
            if attrs[name] <= 0:
                raise serializers.ValidationError({name: ["Base quantities must be positive."]})
        return attrs


class VoltageLimitsSerializer(serializers.Serializer):
    v_min = serializers.FloatField(min_value=0)
    v_max = serializers.FloatField(min_value=0)

    def validate(self, attrs):
        if attrs['v_min'] > attrs['v_max']:
            raise serializers.ValidationError({'v_min': ["v_min exceeds v_max."]})
        return attrs


class CaseFileSerializer(serializers.Serializer):
    """
    Versioned case-file schema. `save()` returns the per-unit MeshedGrid.
    """
    schema_version = serializers.ChoiceField(choices=[1])
    name = serializers.CharField(default='case')
    base = BaseQuantitiesSerializer(required=False)
    loss_weight = serializers.FloatField(min_value=0, default=default_loss_weight)
    voltage_limits = VoltageLimitsSerializer(required=False)
    ac_regions = AcRegionSerializer(many=True, allow_empty=False)
    mtdc = MtdcSerializer(required=False)
    tie_lines = TieLineSerializer(many=True, required=False)

    def validate(self, attrs):
        errors = {}
        regions = {region['id']: region for region in attrs['ac_regions']}
        if len(regions) != len(attrs['ac_regions']):
            errors['ac_regions'] = {'non_field_errors': ["Duplicate AC region ids."]}

        mtdc = attrs.get('mtdc') or {'stations': []}
        stations = {station['id'] for station in mtdc['stations']}
        tie_lines = attrs.setdefault('tie_lines', [])
        tie_ids, seen_stations = set(), {}
        for row, tie in enumerate(tie_lines):
            location = {}
            if tie['id'] in tie_ids:
                location['id'] = [f"Duplicate tie-line id '{tie['id']}'."]
            tie_ids.add(tie['id'])
            region = regions.get(tie['ac_region'])
            if region is None:
                location['ac_region'] = [f"Unknown AC region '{tie['ac_region']}'."]
            elif tie['ac_bus'] not in {int(bus[BUS_I]) for bus in region['matpower']['bus']}:
                location['ac_bus'] = [f"Region '{tie['ac_region']}' has no bus {tie['ac_bus']}."]
            if tie['station'] not in stations:
                location['station'] = [f"Unknown VSC station '{tie['station']}'."]
            elif tie['station'] in seen_stations:
                location['station'] = [f"Station already linked by tie-line '{seen_stations[tie['station']]}'."]
            seen_stations.setdefault(tie['station'], tie['id'])
            if location:
                errors.setdefault('tie_lines', {})[row] = location

        for row, station in enumerate(mtdc['stations']):
            if station['id'] not in seen_stations:
                errors.setdefault('mtdc', {}).setdefault('stations', {})[row] = {
                    'id': [f"Station '{station['id']}' is not linked by any tie-line."]
                }

        if errors:
            raise serializers.ValidationError(errors)
        return attrs

    def create(self, validated_data):
        base = BaseQuantities(**validated_data.get('base', {}))
        limits = validated_data.get('voltage_limits')
        ac_regions = tuple(
            build_ac_region(region, base, limits) for region in validated_data['ac_regions']
        )
        mtdc_data = validated_data.get('mtdc')
        mtdc = build_mtdc_region(mtdc_data, limits) if mtdc_data else MtdcRegion()
        tie_lines = tuple(TieLine(**tie) for tie in validated_data['tie_lines'])
        return MeshedGrid(
            name=validated_data['name'],
            base=base,
            ac_regions=ac_regions,
            mtdc=mtdc,
            tie_lines=tie_lines,
            loss_weight=validated_data['loss_weight'],
        )


def build_ac_region(data, base, limits):
    tables = data['matpower']
    s_base = base.s_base
    p_factor = q_factor = 1.0
    scaling = data.get('load_scaling')
    if scaling:
        p_factor = scaling['p_total'] / sum(bus[PD] for bus in tables['bus'])
        q_factor = p_factor
        if scaling.get('q_total') is not None:
            q_factor = scaling['q_total'] / sum(bus[QD] for bus in tables['bus'])

    buses = tuple(
        AcBus(
            id=int(bus[BUS_I]),
            region=data['id'],
            v_min=limits['v_min'] if limits else bus[VMIN],
            v_max=limits['v_max'] if limits else bus[VMAX],
            p_load=power_to_pu(bus[PD] * p_factor, s_base),
            q_load=power_to_pu(bus[QD] * q_factor, s_base),
            g_shunt=power_to_pu(bus[GS], s_base),
            b_shunt=power_to_pu(bus[BS], s_base),
            is_slack=int(bus[BUS_TYPE]) == REF_BUS_TYPE,
        )
        for bus in tables['bus']
    )

    ratio = data['cost_ratio']
    generators = []
    for row, (gen, cost) in enumerate(zip(tables['gen'], tables['gencost'])):
        if gen[GEN_STATUS] <= 0:
            continue
        ncost = int(cost[NCOST])
        c1, c2, c3 = [0.0] * (3 - ncost) + list(cost[COST:COST + ncost])
        generators.append(Generator(
            id=row,
            bus=int(gen[GEN_BUS]),
            p_min=power_to_pu(gen[PMIN], s_base),
            p_max=power_to_pu(gen[PMAX], s_base),
            q_min=power_to_pu(gen[QMIN], s_base),
            q_max=power_to_pu(gen[QMAX], s_base),
            c1=c1 * ratio,
            c2=c2 * ratio,
            c3=c3 * ratio,
        ))

    branches = tuple(
        AcBranch(
            id=row,
            from_bus=int(branch[F_BUS]),
            to_bus=int(branch[T_BUS]),
            r=branch[BR_R],
            x=branch[BR_X],
            b_sh=branch[BR_B],
            # rateA = 0 means unlimited in MATPOWER.
            s_max=power_to_pu(branch[RATE_A], s_base) if branch[RATE_A] > 0 else None,
            ratio=branch[TAP] if branch[TAP] != 0 else 1.0,
        )
        for row, branch in enumerate(tables['branch'])
        if branch[BR_STATUS] > 0
    )
    return AcRegion(id=data['id'], buses=buses, generators=tuple(generators), branches=branches)


def build_mtdc_region(data, limits):
    # Case-wide limits override the per-bus DC values.
    v_min, v_max = (limits['v_min'], limits['v_max']) if limits else (0.95, 1.05)
    dc_buses = tuple(
        DcBus(
            id=bus['id'],
            v_min=v_min if limits else bus.get('v_min', v_min),
            v_max=v_max if limits else bus.get('v_max', v_max),
            is_reference=bus['is_reference'],
        )
        for bus in data['dc_buses']
    )
    dc_branches = tuple(
        DcBranch(id=row, **branch) for row, branch in enumerate(data['dc_branches'])
    )
    stations = tuple(
        VscStation(
            id=station['id'],
            dc_bus=station['dc_bus'],
            v_min=v_min,
            v_max=v_max,
            **{name: station[name] for name in VSC_PARAMETERS},
        )
        for station in data['stations']
    )
    return MtdcRegion(id=data['id'], dc_buses=dc_buses, dc_branches=dc_branches, stations=stations)
