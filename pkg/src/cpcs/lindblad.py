"""Lindblad master equation and fixed-step RK4 propagation.

Conventions: hbar = 1, drho/dt = -i[H0 + H_d(t), rho] + L(rho) with
H_d(t) = -sum_channels E_channel(t) D_channel. Density matrices are flattened
row-major, so vec(A rho B) = kron(A, B.T) vec(rho).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .operators import dag
from .pulses import pulse_envelope, pulse_field

log = logging.getLogger(__name__)

DEFAULT_DT = 0.5
# Envelope is exp(-2 ln2 x^2); at 8 durations it is ~3e-39 and treated as zero.
PULSE_SUPPORT = 8.0


class PropagationError(RuntimeError):
    pass


def _check_dim(system, rho):
    if rho.shape != (system.dim, system.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match system dim {system.dim}")


def dissipator(system, rho):
    """sum_i g_i (J rho J^+ - {J^+ J, rho}/2)."""
    rho = np.asarray(rho, dtype=complex)
    _check_dim(system, rho)
    out = np.zeros_like(rho)
    for J, rate in system.jumps:
        Jd = dag(J)
        JdJ = Jd @ J
        out += rate * (J @ rho @ Jd - 0.5 * (JdJ @ rho + rho @ JdJ))
    return out


def drive_hamiltonian(system, drive, t):
    """Lab-frame H_d(t) = -sum_i E_i(t) D_channel(i)."""
    Hd = np.zeros((system.dim, system.dim), dtype=complex)
    for p, ch in drive.assignments:
        Hd -= float(pulse_field(p, t)) * system.channel(ch)
    return Hd


def master_rhs(system, drive, rho, t):
    """Right-hand side of the lab-frame master equation at time ``t``."""
    rho = np.asarray(rho, dtype=complex)
    _check_dim(system, rho)
    H = system.H0 + drive_hamiltonian(system, drive, t)
    return -1j * (H @ rho - rho @ H) + dissipator(system, rho)


def rk4_step(rhs, y, t, dt):
    """Classical fourth-order Runge-Kutta step for dy/dt = rhs(y, t)."""
    k1 = rhs(y, t)
    k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(y + dt * k3, t + dt)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("grid needs at least one step")

    @property
    def t_end(self):
        return self.t_start + self.n_steps * self.dt

    @property
    def times(self):
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    @classmethod
    def covering(cls, t_start, t_end, dt, multiple_of=1):
        """Smallest grid from ``t_start`` reaching ``t_end`` with n_steps divisible by ``multiple_of``."""
        n = int(np.ceil((t_end - t_start) / dt - 1e-9))
        n = max(n, 1)
        n = -(-n // multiple_of) * multiple_of
        return cls(t_start, dt, n)


def superop_left(A):
    return np.kron(A, np.eye(A.shape[0]))


def superop_right(B):
    return np.kron(np.eye(B.shape[0]), B.T)


def superop_sandwich(A, B):
    """Superoperator of rho -> A rho B."""
    return np.kron(A, B.T)


class Liouvillian:
    """Generator L(t) = L0 + sum_k c_k(t) L_k in row-major vectorized form.

    In the lab frame there is one term per drive channel with coefficient
    -E_channel(t). ``frame="rotating"`` applies the rotating-wave approximation
    at ``frame_frequency``; that mode is provided for exploration only and is
    not the reference path.
    """

    def __init__(self, system, frame="lab", frame_frequency=None):
        if frame not in ("lab", "rotating"):
            raise ValueError(f"unknown frame {frame!r}")
        self.system = system
        self.frame = frame
        self.frame_frequency = frame_frequency
        d = system.dim
        self.n = d * d

        H0 = system.H0
        if frame == "rotating":
            if system.excitation is None or frame_frequency is None:
                raise ValueError("rotating frame needs an excitation operator and a frame frequency")
            H0 = H0 - frame_frequency * system.excitation

        L0 = -1j * (superop_left(H0) - superop_right(H0))
        for J, rate in system.jumps:
            JdJ = dag(J) @ J
            L0 = L0 + rate * (superop_sandwich(J, dag(J)) - 0.5 * superop_left(JdJ) - 0.5 * superop_right(JdJ))
        self.L0 = L0

        self.channels = sorted(system.drives)
        ops = []
        if frame == "lab":
            ops = [system.drives[ch] for ch in self.channels]
        else:
            for ch in self.channels:
                D = system.drives[ch]
                ops += [np.tril(D, -1), np.triu(D, 1)]
        self.terms = [-1j * (superop_left(D) - superop_right(D)) for D in ops]
        self.n_terms = len(self.terms)
        # [L0^T | L1^T | ...] so that v @ stacked gives every term at once
        self._stacked_T = np.concatenate([L0.T] + [L.T for L in self.terms], axis=1)
        self._terms_arr = np.array(self.terms) if self.terms else np.zeros((0, self.n, self.n), complex)

    def coefficients(self, drive, t):
        """Drive coefficients c_k at times ``t``; shape ``t.shape + (n_terms,)``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self.n_terms,), dtype=complex)
        for p, ch in drive.assignments:
            if ch not in self.system.drives:
                raise KeyError(f"unknown drive channel {ch!r}; system has {self.channels}")
            j = self.channels.index(ch)
            inside = np.abs(t - p.center) <= PULSE_SUPPORT * p.duration
            if self.frame == "lab":
                out[..., j] -= np.where(inside, pulse_field(p, t), 0.0)
            else:
                if not np.isclose(p.carrier, self.frame_frequency):
                    raise ValueError("rotating frame requires pulse carriers equal to the frame frequency")
                amp = np.where(inside, pulse_envelope(p, t), 0.0) * np.exp(1j * p.carrier * p.center)
                out[..., 2 * j] -= 0.5 * amp
                out[..., 2 * j + 1] -= 0.5 * np.conj(amp)
        return out

    def matrices(self, coeffs):
        """Full generator matrices for coefficient rows, shape ``(..., n, n)``."""
        coeffs = np.asarray(coeffs)
        return self.L0 + np.tensordot(coeffs, self._terms_arr, axes=([-1], [0]))

    def apply(self, v, coeffs):
        """L(t) v for vectors ``v`` of shape (B, m, n) and coefficients (B, n_terms)."""
        X = (v @ self._stacked_T).reshape(v.shape[:-1] + (1 + self.n_terms, self.n))
        out = X[..., 0, :]
        if self.n_terms:
            out = out + np.einsum("bk,bmkj->bmj", coeffs, X[..., 1:, :])
        return out

    def rk4_maps(self, ca, cb, cc, h):
        """RK4 transfer matrices P with v(t+h) = P v(t), one per coefficient row.

        ``ca``, ``cb``, ``cc`` are the coefficients at t, t+h/2, t+h.
        """
        A = self.matrices(ca)
        B = self.matrices(cb)
        C = self.matrices(cc)
        K1 = A
        K2 = B + (0.5 * h) * (B @ K1)
        K3 = B + (0.5 * h) * (B @ K2)
        K4 = C + h * (C @ K3)
        eye = np.eye(self.n)
        return eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)

    def free_map(self, h):
        z = np.zeros((1, self.n_terms), dtype=complex)
        return self.rk4_maps(z, z, z, h)[0]


def active_steps(grid, drive):
    """Boolean per step: True if any pulse overlaps [t_k, t_k + dt]."""
    t = grid.times[:-1]
    act = np.zeros(grid.n_steps, dtype=bool)
    for p in drive.pulses:
        half = PULSE_SUPPORT * p.duration
        act |= (t + grid.dt >= p.center - half) & (t <= p.center + half)
    return act


def iter_step_maps(liouv, drive, grid, block=1024):
    """Yield ``(k, P_k)`` for every step of ``grid``; field-free steps share one matrix."""
    h = grid.dt
    P0 = liouv.free_map(h)
    act = active_steps(grid, drive)
    times = grid.times
    k = 0
    while k < grid.n_steps:
        if not act[k]:
            yield k, P0
            k += 1
            continue
        k1 = k
        while k1 < grid.n_steps and act[k1] and k1 - k < block:
            k1 += 1
        t = times[k:k1]
        maps = liouv.rk4_maps(
            liouv.coefficients(drive, t),
            liouv.coefficients(drive, t + 0.5 * h),
            liouv.coefficients(drive, t + h),
            h,
        )
        for i in range(k1 - k):
            yield k + i, maps[i]
        k = k1


@dataclass
class DensityTrajectory:
    times: np.ndarray
    states: np.ndarray
    normalized: bool = True

    def expect(self, op):
        """Real part of tr(op rho(t)) along the trajectory."""
        return np.real(np.einsum("ij,tji->t", op, self.states))

    def populations(self):
        return np.real(np.einsum("tii->ti", self.states))

    def trace(self):
        return np.real(np.einsum("tii->t", self.states))


def propagate(system, drive, rho0, grid, observers=None, frame="lab", frame_frequency=None):
    """Integrate the master equation from ``rho0`` over ``grid`` with fixed-step RK4.

    Unnormalized (conditional) inputs are propagated as they are. Each observer
    is called as ``obs(k, t, rho)`` at every grid point.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    _check_dim(system, rho0)
    d = system.dim
    if frame == "rotating" and frame_frequency is None and drive.pulses:
        frame_frequency = drive.pulses[0].carrier
    liouv = Liouvillian(system, frame=frame, frame_frequency=frame_frequency)
    times = grid.times
    out = np.empty((grid.n_steps + 1, d * d), dtype=complex)
    v = rho0.reshape(-1).copy()
    out[0] = v
    # overflow is detected below and reported as a PropagationError
    with np.errstate(over="ignore", invalid="ignore"):
        for k, P in iter_step_maps(liouv, drive, grid):
            v = P @ v
            out[k + 1] = v
            if k % 512 == 0 and not np.all(np.isfinite(v)):
                raise PropagationError(f"non-finite density matrix at t={times[k + 1]:.6g}; reduce dt")
    if not np.all(np.isfinite(out[-1])):
        raise PropagationError("non-finite density matrix at end of propagation; reduce dt")
    states = out.reshape(-1, d, d)
    if observers:
        for k, t in enumerate(times):
            for obs in observers:
                obs(k, t, states[k])
    trace0 = float(np.real(np.trace(rho0)))
    return DensityTrajectory(times, states, normalized=abs(trace0 - 1.0) < 1e-8)


def convergence_check(system, drive, rho0, grid, op=None, frame="lab"):
    """Max deviation of <op>(t) (default: emission number) between dt and dt/2."""
    op = system.number_op if op is None else op
    coarse = propagate(system, drive, rho0, grid, frame=frame)
    fine = propagate(system, drive, rho0, TimeGrid(grid.t_start, grid.dt / 2, 2 * grid.n_steps), frame=frame)
    return float(np.max(np.abs(coarse.expect(op) - fine.expect(op)[::2])))
