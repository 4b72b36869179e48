"""Two-pulse photon coincidence simulations with Lindblad dynamics.

The main entry points are :func:`cpcs.lindblad.propagate`,
:func:`cpcs.regression.g2_grid`, :func:`cpcs.scan.run_delay_scan` and the
``cpcs`` command line tool.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .lindblad import Liouvillian, TimeGrid, propagate
from .models import make_coupled_emitters, make_exciton_biexciton, make_two_level
from .pulses import DriveProgram, Pulse, pulse_train
from .regression import DetectionParams, coincidence_rate, g2_grid, pair_integrals
from .scan import ScanConfig, run_delay_scan, spectrum
from .system import QuantumSystem

__all__ = [
    "DetectionParams",
    "DriveProgram",
    "Liouvillian",
    "Pulse",
    "QuantumSystem",
    "RunConfig",
    "ScanConfig",
    "TimeGrid",
    "coincidence_rate",
    "g2_grid",
    "load_config",
    "make_coupled_emitters",
    "make_exciton_biexciton",
    "make_two_level",
    "pair_integrals",
    "parse_config",
    "propagate",
    "pulse_train",
    "run_delay_scan",
    "spectrum",
]
