"""Constructors for the two-level, exciton-biexciton and coupled-emitter systems."""

from dataclasses import dataclass

import numpy as np

from .operators import dag, projector
from .system import QuantumSystem

# exciton-biexciton basis order
GROUND, XPLUS, XMINUS, BIEXCITON = 0, 1, 2, 3


def make_two_level(omega, gamma, mu):
    """Two-level emitter |g>=0, |e>=1 with one drive channel ``"x"``."""
    if omega <= 0 or gamma <= 0:
        raise ValueError("omega and gamma must be positive")
    sigma = projector(0, 1, 2)
    H0 = np.diag([0.0, omega]).astype(complex)
    return QuantumSystem(
        H0=H0,
        jumps=((sigma, gamma),),
        drives={"x": mu * (sigma + dag(sigma))},
        emission=sigma,
        excitation=np.diag([0.0, 1.0]).astype(complex),
        labels=("g", "e"),
    )


@dataclass(frozen=True)
class ExcitonBiexcitonParams:
    omega_x: float
    delta: float
    gamma: float
    mu: float

    def __post_init__(self):
        if self.omega_x <= 0 or self.gamma <= 0:
            raise ValueError("omega_x and gamma must be positive")
        if abs(self.delta) >= self.omega_x:
            raise ValueError("Zeeman splitting must be smaller than the exciton energy")


def make_exciton_biexciton(p):
    """Zeeman-split exciton-biexciton ladder without biexciton binding energy.

    Basis (|0>, |X+>, |X->, |XX>). sigma_plus drives 0<->X+ and X-<->XX,
    sigma_minus drives 0<->X- and X+<->XX, all with the same dipole. Every
    radiative cascade step is a jump channel with rate gamma and the emission
    operator is the sum of all four.
    """
    d = 4
    H0 = np.diag([0.0, p.omega_x + p.delta, p.omega_x - p.delta, 2.0 * p.omega_x]).astype(complex)
    jumps_ops = [
        projector(XPLUS, BIEXCITON, d),
        projector(XMINUS, BIEXCITON, d),
        projector(GROUND, XPLUS, d),
        projector(GROUND, XMINUS, d),
    ]

    def coupling(*pairs):
        D = np.zeros((d, d), dtype=complex)
        for lo, hi in pairs:
            D += p.mu * (projector(lo, hi, d) + projector(hi, lo, d))
        return D

    return QuantumSystem(
        H0=H0,
        jumps=tuple((J, p.gamma) for J in jumps_ops),
        drives={
            "sigma_plus": coupling((GROUND, XPLUS), (XMINUS, BIEXCITON)),
            "sigma_minus": coupling((GROUND, XMINUS), (XPLUS, BIEXCITON)),
        },
        emission=sum(jumps_ops),
        excitation=np.diag([0.0, 1.0, 1.0, 2.0]).astype(complex),
        labels=("0", "X+", "X-", "XX"),
    )


@dataclass(frozen=True)
class CoupledEmitterParams:
    omega1: float
    omega2: float
    g: float
    gamma: float
    mu: float

    def __post_init__(self):
        if self.omega1 <= 0 or self.omega2 <= 0 or self.gamma <= 0:
            raise ValueError("emitter energies and gamma must be positive")


def make_coupled_emitters(p):
    """Two coupled two-level emitters in the full product space.

    Basis |n1 n2> ordered (|00>, |10>, |01>, |11>), i.e. index = n1 + 2 n2.
    Only emitter 1 couples to the light (channel ``"x"``); photons from both
    emitters are detected, a = sigma1 + sigma2.
    """
    s = projector(0, 1, 2)
    eye = np.eye(2)
    # index = n1 + 2*n2 -> emitter 2 is the slow (left) tensor factor
    s1 = np.kron(eye, s)
    s2 = np.kron(s, eye)
    n1 = dag(s1) @ s1
    n2 = dag(s2) @ s2
    H0 = p.omega1 * n1 + p.omega2 * n2 + p.g * (dag(s1) @ s2 + s1 @ dag(s2))
    return QuantumSystem(
        H0=H0.astype(complex),
        jumps=((s1, p.gamma), (s2, p.gamma)),
        drives={"x": p.mu * (s1 + dag(s1))},
        emission=s1 + s2,
        excitation=(n1 + n2).astype(complex),
        labels=("00", "10", "01", "11"),
    )


def emitter_operators():
    """(sigma1, sigma2) in the coupled-emitter basis."""
    s = projector(0, 1, 2)
    eye = np.eye(2)
    return np.kron(eye, s).astype(complex), np.kron(s, eye).astype(complex)
