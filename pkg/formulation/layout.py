import numpy as np

from core.exceptions import FormulationError


def bus_label(bus_ref):
    kind, owner, bus = bus_ref
    return f"{owner}:{bus}"


def key_label(key):
    """Human readable name of a variable key, e.g. vm[ac1:2] or pm[vsc1]."""
    quantity, ref = key
    if quantity in ('vm', 'va'):
        return f"{quantity}[{bus_label(ref)}]"
    if quantity in ('pg', 'qg'):
        return f"{quantity}[{ref[0]}:g{ref[1]}]"
    return f"{quantity}[{ref}]"


class VariableLayout:
    """
    Ordered map from variable keys to vector positions, with box bounds and
    the flat-start value of every variable.

    Keys are tuples (quantity, reference):
      ('vm' | 'va', ('ac', region, bus) | ('vsc', station, 'k' | 'f' | 'm'))
      ('pg' | 'qg', (region, generator))
      ('vdc', dc_bus)
      ('pm' | 'qm' | 'im' | 'pn', station)
    """

    def __init__(self):
        self.keys = []
        self.index = {}
        self._lower = []
        self._upper = []
        self._initial = []

    def add(self, key, lower=-np.inf, upper=np.inf, initial=0.0):
        if key in self.index:
            raise FormulationError(f"Variable {key_label(key)} added twice.")
        if lower > upper:
            raise FormulationError(f"Variable {key_label(key)} has inverted bounds [{lower}, {upper}].")
        self.index[key] = len(self.keys)
        self.keys.append(key)
        self._lower.append(lower)
        self._upper.append(upper)
        self._initial.append(initial)
        return self.index[key]

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self.index

    def __getitem__(self, key):
        try:
            return self.index[key]
        except KeyError:
            raise FormulationError(f"Variable {key_label(key)} is not part of this layout.")

    def indices(self, keys):
        return np.array([self[key] for key in keys], dtype=int)

    @property
    def lower(self):
        return np.array(self._lower, dtype=float)

    @property
    def upper(self):
        return np.array(self._upper, dtype=float)

    @property
    def initial(self):
        """Flat start: 1 p.u. for voltage magnitudes, 0 elsewhere."""
        return np.array(self._initial, dtype=float)

    @property
    def labels(self):
        return [key_label(key) for key in self.keys]
