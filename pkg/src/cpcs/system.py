"""Few-level open quantum system description."""

from dataclasses import dataclass, field

import numpy as np

from .operators import dag, is_hermitian


@dataclass(frozen=True)
class QuantumSystem:
    """Bare Hamiltonian, spontaneous-emission channels and dipole couplings.

    ``drives`` maps a channel id (e.g. ``"sigma_plus"``) to the Hermitian
    coupling D = sum mu_mn (|m><n| + |n><m|); the drive Hamiltonian on that
    channel is -E(t) D. ``emission`` is the photon-generation operator used for
    correlations, normally the sum of the detected jump operators.
    ``excitation`` is the diagonal excitation-number operator, only needed
    for rotating-frame propagation.
    """

    H0: np.ndarray
    jumps: tuple
    drives: dict
    emission: np.ndarray
    excitation: np.ndarray = None
    labels: tuple = field(default=())

    def __post_init__(self):
        d = self.dim
        if self.H0.shape != (d, d):
            raise ValueError("H0 must be square")
        if not is_hermitian(self.H0):
            raise ValueError("H0 must be Hermitian")
        for J, rate in self.jumps:
            if J.shape != (d, d):
                raise ValueError("jump operator has wrong shape")
            if rate < 0:
                raise ValueError("decay rates must be non-negative")
        for ch, D in self.drives.items():
            if D.shape != (d, d) or not is_hermitian(D):
                raise ValueError(f"drive coupling {ch!r} must be a Hermitian {d}x{d} matrix")
        if self.emission.shape != (d, d):
            raise ValueError("emission operator has wrong shape")

    @property
    def dim(self):
        return self.H0.shape[0]

    @property
    def number_op(self):
        """a^dagger a for the emission operator."""
        return dag(self.emission) @ self.emission

    def flux_number_op(self, gamma_f):
        """sum_i (gamma_i / gamma_f) J_i^+ J_i: per-channel photon flux in units of gamma_f.

        Unlike a^+ a it has no cross terms between jump channels, so channels
        that emit into orthogonal modes add incoherently.
        """
        return sum((rate / gamma_f) * (dag(J) @ J) for J, rate in self.jumps)

    def fluorescence_op(self, gamma_f, mode="incoherent"):
        if mode == "incoherent":
            return self.flux_number_op(gamma_f)
        if mode == "coherent":
            return self.number_op
        raise ValueError(f"unknown fluorescence mode {mode!r}")

    @property
    def min_rate(self):
        rates = [r for _, r in self.jumps if r > 0]
        return min(rates) if rates else 0.0

    def ground_state(self):
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho

    def channel(self, name):
        try:
            return self.drives[name]
        except KeyError:
            raise KeyError(f"unknown drive channel {name!r}; system has {sorted(self.drives)}") from None
