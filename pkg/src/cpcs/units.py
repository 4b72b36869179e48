"""Conversions between Hartree atomic units and laboratory units.

All physics in the package runs in atomic units (hbar = e = m_e = 1).
Laboratory units only appear when reading configs and writing outputs.
"""

import re
from dataclasses import dataclass

# CODATA 2018
HARTREE_EV = 27.211386245988
AU_TIME_S = 2.4188843265857e-17
AU_FIELD_V_PER_M = 5.14220674763e11
DEBYE_C_M = 3.33564095198152e-30
AU_DIPOLE_C_M = 8.4783536255e-30
PLANCK_EV_S = 4.135667696e-15

FS_PER_AU = AU_TIME_S * 1e15


@dataclass(frozen=True)
class UnitContext:
    """Conversion factors *into* atomic units, keyed by quantity kind and unit name.

    Energies given in ``Hz`` are read as cyclic frequencies, E = h * nu.
    """

    hartree_ev: float = HARTREE_EV
    au_time_s: float = AU_TIME_S
    au_field: float = AU_FIELD_V_PER_M
    debye_au: float = DEBYE_C_M / AU_DIPOLE_C_M

    def factors(self, kind):
        if kind == "energy":
            hz = PLANCK_EV_S / self.hartree_ev
            return {"au": 1.0, "eV": 1.0 / self.hartree_ev, "meV": 1e-3 / self.hartree_ev, "Hz": hz}
        if kind == "time":
            return {"au": 1.0, "fs": 1e-15 / self.au_time_s, "ps": 1e-12 / self.au_time_s}
        if kind == "field":
            return {"au": 1.0, "V_per_m": 1.0 / self.au_field}
        if kind == "dipole":
            return {"au": 1.0, "D": self.debye_au}
        if kind == "rate_hz":
            return {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
        raise ValueError(f"unknown quantity kind {kind!r}")

    def to_au(self, value, unit, kind):
        f = self.factors(kind)
        if unit not in f:
            raise UnitError(f"unit {unit!r} is not valid for {kind} (allowed: {', '.join(f)})")
        return value * f[unit]

    def from_au(self, value, unit, kind):
        f = self.factors(kind)
        if unit not in f:
            raise UnitError(f"unit {unit!r} is not valid for {kind} (allowed: {', '.join(f)})")
        return value / f[unit]

    def kind_of(self, unit):
        for kind in ("energy", "time", "field", "dipole", "rate_hz"):
            if unit in self.factors(kind) and unit != "au":
                return kind
        raise UnitError(f"unknown unit {unit!r}")


class UnitError(ValueError):
    pass


UNITS = UnitContext()

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z_]+)\s*$")


def parse_quantity(text):
    """Split ``"72fs"`` or ``"1.4e-3 au"`` into ``(72.0, "fs")``."""
    m = _QUANTITY.match(str(text))
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}; expected '<number> <unit>'")
    return float(m.group(1)), m.group(2)


def fs_to_au(t_fs):
    return t_fs / FS_PER_AU


def au_to_fs(t_au):
    return t_au * FS_PER_AU


def au_to_ev(e_au):
    return e_au * HARTREE_EV
