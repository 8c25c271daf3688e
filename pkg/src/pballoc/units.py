"""Explicit unit registry. Nothing is converted implicitly."""

from .exceptions import ConfigurationError

# unit -> (dimension, factor to the dimension's base unit)
UNITS = {
    "t CO2": ("co2", 1.0),
    "kt CO2": ("co2", 1e3),
    "Mt CO2": ("co2", 1e6),
    "Gt CO2": ("co2", 1e9),
    "t CO2eq": ("co2eq", 1.0),
    "kt CO2eq": ("co2eq", 1e3),
    "Mt CO2eq": ("co2eq", 1e6),
    "Gt CO2eq": ("co2eq", 1e9),
    "m3": ("water", 1.0),
    "Mm3": ("water", 1e6),
    "km3": ("water", 1e9),
    "m3eq": ("water_stress", 1.0),
    "Mm3eq": ("water_stress", 1e6),
    "PDF*yr": ("pdf", 1.0),
    "pico PDF*yr": ("pdf", 1e-12),
    "persons": ("population", 1.0),
    "EUR": ("currency", 1.0),
    "MEUR": ("currency", 1e6),
}

_ALIASES = {
    "tCO2": "t CO2",
    "ktCO2": "kt CO2",
    "GtCO2": "Gt CO2",
    "tCO2eq": "t CO2eq",
    "ktCO2eq": "kt CO2eq",
    "GtCO2eq": "Gt CO2eq",
    "m³": "m3",
    "Mm³": "Mm3",
    "km³": "km3",
    "PDF·yr": "PDF*yr",
    "pico PDF·yr": "pico PDF*yr",
}


def canonical(unit):
    unit = unit.strip()
    unit = _ALIASES.get(unit, unit)
    if unit not in UNITS:
        raise ConfigurationError(f"unknown unit {unit!r}; registered: {sorted(UNITS)}")
    return unit


def dimension(unit):
    return UNITS[canonical(unit)][0]


def conversion_factor(src, dst):
    """Multiplier taking a quantity in ``src`` to ``dst``."""
    src, dst = canonical(src), canonical(dst)
    dim_src, f_src = UNITS[src]
    dim_dst, f_dst = UNITS[dst]
    if dim_src != dim_dst:
        raise ConfigurationError(f"cannot convert {src!r} ({dim_src}) to {dst!r} ({dim_dst})")
    return f_src / f_dst


def convert(value, src, dst):
    return value * conversion_factor(src, dst)


def per_capita_unit(unit):
    return f"{unit}/capita"
