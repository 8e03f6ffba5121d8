"""
In-memory grid data model.

Everything here is immutable once `load_case` returns it, so region solvers
may share one MeshedGrid across threads. Electrical quantities are per-unit;
generator cost coefficients stay in $/MW², $/MW and $ as in the case file.
"""

from dataclasses import dataclass, field
from typing import Optional

MTDC_REGION = 'mtdc'


@dataclass(frozen=True)
class BaseQuantities:
    s_base: float = 100.0
    v_base: float = 345.0

    @property
    def z_base(self):
        return self.v_base ** 2 / self.s_base


@dataclass(frozen=True)
class AcBus:
    id: int
    region: str
    v_min: float
    v_max: float
    p_load: float = 0.0
    q_load: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    is_slack: bool = False


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0


@dataclass(frozen=True)
class AcBranch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_sh: float = 0.0
    s_max: Optional[float] = None
    ratio: float = 1.0

    @property
    def series_admittance(self):
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class AcRegion:
    id: str
    buses: tuple
    generators: tuple = ()
    branches: tuple = ()

    def bus(self, bus_id):
        for bus in self.buses:
            if bus.id == bus_id:
                return bus
        raise KeyError(f"Region '{self.id}' has no bus {bus_id}.")

    @property
    def bus_ids(self):
        return [bus.id for bus in self.buses]

    @property
    def slack(self):
        return next(bus for bus in self.buses if bus.is_slack)


@dataclass(frozen=True)
class VscStation:
    """
    One converter station: PCC bus k, transformer (r_f, x_f) to filter bus f,
    filter shunt b_f, phase reactor (r_m, x_m) to converter AC bus m, and the
    converter itself between m and DC bus n.
    """
    id: str
    dc_bus: int
    r_f: float
    x_f: float
    b_f: float
    r_m: float
    x_m: float
    a1: float
    a2: float
    a3: float
    delta: float
    gamma: float
    s_nom: float
    i_max: float
    v_max_conv: float
    v_min: float = 0.95
    v_max: float = 1.05

    @property
    def transformer_admittance(self):
        return 1.0 / complex(self.r_f, self.x_f)

    @property
    def reactor_admittance(self):
        return 1.0 / complex(self.r_m, self.x_m)

    def loss(self, current):
        return self.a1 * current ** 2 + self.a2 * current + self.a3


@dataclass(frozen=True)
class DcBus:
    id: int
    v_min: float
    v_max: float
    is_reference: bool = False


@dataclass(frozen=True)
class DcBranch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    p_max: float

    @property
    def g(self):
        return 1.0 / self.r


@dataclass(frozen=True)
class MtdcRegion:
    id: str = MTDC_REGION
    dc_buses: tuple = ()
    dc_branches: tuple = ()
    stations: tuple = ()

    def station(self, station_id):
        for station in self.stations:
            if station.id == station_id:
                return station
        raise KeyError(f"No VSC station '{station_id}'.")

    @property
    def is_empty(self):
        return not (self.dc_buses or self.stations)


@dataclass(frozen=True)
class TieLine:
    """AC link between bus k' of an AC region and the PCC bus k of a station."""
    id: str
    ac_region: str
    ac_bus: int
    station: str
    r: float = 0.0
    x: float = 0.01

    @property
    def series_admittance(self):
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class MeshedGrid:
    name: str
    base: BaseQuantities
    ac_regions: tuple
    mtdc: MtdcRegion = field(default_factory=MtdcRegion)
    tie_lines: tuple = ()
    loss_weight: float = 10.0

    @property
    def region_ids(self):
        ids = [region.id for region in self.ac_regions]
        if not self.mtdc.is_empty:
            ids.append(self.mtdc.id)
        return ids

    def ac_region(self, region_id):
        for region in self.ac_regions:
            if region.id == region_id:
                return region
        raise KeyError(f"No AC region '{region_id}'.")

    def tie_lines_of(self, region_id):
        return [tie for tie in self.tie_lines if tie.ac_region == region_id]

    def tie_line_of_station(self, station_id):
        return next(tie for tie in self.tie_lines if tie.station == station_id)
