"""Per-unit conversions. Powers in MW/MVAr, impedances in ohm, costs in $."""


def power_to_pu(value, s_base):
    return value / s_base


def power_from_pu(value, s_base):
    return value * s_base


def impedance_to_pu(ohm, base):
    return ohm / base.z_base


def impedance_from_pu(pu, base):
    return pu * base.z_base


def cost_to_pu(c1, c2, c3, s_base):
    """
    Rescales polynomial cost coefficients so the cost can be evaluated on
    per-unit active power: c1·P² + c2·P + c3 with P in MW equals
    (c1·S²)·p² + (c2·S)·p + c3 with p = P/S.
    """
    return c1 * s_base ** 2, c2 * s_base, c3


def cost_from_pu(c1, c2, c3, s_base):
    return c1 / s_base ** 2, c2 / s_base, c3
