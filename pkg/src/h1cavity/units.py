"""Parsing of quantities written with unit suffixes in configuration files.

Lengths are canonicalized to meters, energies to electron-volts and rates to
1/s.  Bare numbers are taken to already be in the canonical unit.
"""

import re

from h1cavity.constants import HBAR_EV
from h1cavity.errors import ConfigurationError

_LENGTH = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9}
_ENERGY = {"ev": 1.0, "mev": 1e-3, "uev": 1e-6, "µev": 1e-6, "μev": 1e-6, "nev": 1e-9}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9, "ps": 1e-12, "fs": 1e-15}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*)?$")


def _split(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value), None
    if not isinstance(value, str):
        raise ConfigurationError(f"expected a number or a quantity string, got {value!r}")
    m = _QUANTITY.match(value)
    if m is None:
        raise ConfigurationError(f"cannot parse quantity {value!r}")
    unit = m.group(2)
    return float(m.group(1)), (unit.strip() if unit else None)


def _convert(value, table, kind):
    number, unit = _split(value)
    if unit is None:
        return number
    key = unit if unit in table else unit.lower()
    if key not in table:
        raise ConfigurationError(f"unknown {kind} unit {unit!r} in {value!r}")
    return number * table[key]


def parse_length(value):
    """``"270 nm"`` -> ``2.7e-07``; bare numbers are meters."""
    return _convert(value, _LENGTH, "length")


def parse_energy(value):
    """``"2 ueV"`` -> ``2e-06``; bare numbers are eV."""
    return _convert(value, _ENERGY, "energy")


def parse_time(value):
    """``"1 ns"`` -> ``1e-09``; bare numbers are seconds."""
    return _convert(value, _TIME, "time")


def parse_rate(value):
    """Angular rate in rad/s.

    Accepts ``"1e9 /s"`` (or a bare number) and energies such as ``"3 ueV"``,
    which are converted with E / hbar.
    """
    number, unit = _split(value)
    if unit is None or unit in ("/s", "1/s", "s^-1", "rad/s"):
        return number
    return parse_energy(value) / HBAR_EV
