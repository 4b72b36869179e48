"""Two-time photon correlations via the quantum regression theorem.

G2(t1, t2) = tr[a^+ a V(t2, t1)[a rho(t1) a^+]] is evaluated by launching the
jump-conditioned, unnormalized state a rho(t1) a^+ from strided t1 points and
propagating it with the same driven master equation. The coincidence rate is
the trapezoidal double integral of G2 over t1 <= t2.

``pair_integrals`` is a second route to the same double integral: by
linearity of the propagator the trapezoid sum equals the trace of a single
accumulated conditional state, which costs one extra propagation instead of
one per launch point. It is what the delay scans use.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .lindblad import (
    DEFAULT_DT,
    Liouvillian,
    PULSE_SUPPORT,
    PropagationError,
    TimeGrid,
    active_steps,
    iter_step_maps,
    propagate,
    superop_sandwich,
)
from .operators import dag

log = logging.getLogger(__name__)

MAX_LAUNCH_POINTS = 2000
DEFAULT_PAD_LIFETIMES = 12.0
RESIDUAL_TOL = 1e-4
_ROW_BLOCK = 256


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DetectionParams:
    """Detector efficiencies, repetition rate (Hz) and emission rate (a.u.)."""

    eta_c: float
    eta_f: float
    nu_rep: float
    gamma_f: float

    def __post_init__(self):
        for name in ("eta_c", "eta_f"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.nu_rep <= 0:
            raise ValueError("repetition rate must be positive")
        if self.gamma_f <= 0:
            raise ValueError("gamma_f must be positive")


def apply_emission_jump(a, rho):
    """Conditional state a rho a^+ after a photon emission (not renormalized)."""
    a = np.asarray(a)
    rho = np.asarray(rho)
    if a.shape != rho.shape:
        raise ValueError(f"operator shape {a.shape} does not match state shape {rho.shape}")
    return a @ rho @ dag(a)


def default_stride(n_steps, max_launch=MAX_LAUNCH_POINTS):
    """Smallest stride giving at most ``max_launch`` t1 launch points."""
    return max(1, int(np.ceil(n_steps / (max_launch - 1))))


def integration_window(system, drive, dt=DEFAULT_DT, pad=None, t_start=0.0, multiple_of=1):
    """Grid from ``t_start`` to last pulse center + ``pad`` (default 12 slowest lifetimes)."""
    if pad is None:
        rate = system.min_rate
        if rate <= 0:
            raise ValueError("system has no decay channel; give an explicit pad")
        pad = DEFAULT_PAD_LIFETIMES / rate
    for p in drive.pulses:
        if p.center - t_start < 5.0 * p.duration:
            log.warning("pulse at %.4g starts less than 5 durations after the window start", p.center)
    t_end = drive.last_center + pad
    return TimeGrid.covering(t_start, t_end, dt, multiple_of=multiple_of)


def excited_population(states):
    """tr(rho) - rho_00 for a stack of density matrices."""
    states = np.asarray(states)
    return np.real(np.einsum("...ii->...", states) - states[..., 0, 0])


def truncation_residual(populations):
    """Excited population at the window end relative to its peak."""
    populations = np.asarray(populations)
    peak = np.max(populations)
    if peak <= 0:
        return 0.0
    return float(populations[-1] / peak)


def check_residual(residual, strict, tol=RESIDUAL_TOL, what="window"):
    if residual > tol:
        msg = f"{what}: residual excited population {residual:.3e} of peak exceeds {tol:.0e}; increase pad"
        if strict:
            raise TruncationError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


@dataclass
class CorrelationMap:
    """G2 on the strided lattice t1 = t2 grid; ``values[i, j]`` holds G2(t_i, t_j) for j >= i."""

    grid: TimeGrid
    t1_stride: int
    values: np.ndarray
    delay: float = None
    residual: float = 0.0
    imag_residue: float = 0.0

    @property
    def indices(self):
        return np.arange(0, self.grid.n_steps + 1, self.t1_stride)

    @property
    def times(self):
        return self.grid.times[self.indices]

    @property
    def cell(self):
        return self.grid.dt * self.t1_stride

    def triangle(self):
        """Index pairs (i, j) with j >= i, t1-major."""
        return np.triu_indices(len(self.indices))


def g2_grid(system, drive, grid, t1_stride=None, trajectory=None, delay=None, workers=1):
    """Evaluate G2(t1, t2) for strided t1 and every lattice t2 >= t1.

    The unconditional trajectory is computed (or taken from ``trajectory``),
    each launch state a rho(t1) a^+ is propagated forward, and
    tr[a^+ a rho_cond(t2)] is recorded. Launch rows are handled in fixed
    blocks, so results do not depend on ``workers``.
    """
    s = default_stride(grid.n_steps) if t1_stride is None else int(t1_stride)
    if s < 1:
        raise ValueError("t1_stride must be >= 1")
    if grid.n_steps % s:
        raise ValueError(f"grid n_steps={grid.n_steps} is not a multiple of stride {s}")
    if trajectory is None:
        trajectory = propagate(system, drive, system.ground_state(), grid)

    d = system.dim
    n = d * d
    jump = superop_sandwich(system.emission, dag(system.emission))
    avec = system.number_op.T.reshape(-1)
    lattice = np.arange(0, grid.n_steps + 1, s)
    n1 = len(lattice)
    launches = trajectory.states[lattice].reshape(n1, n) @ jump.T

    liouv = Liouvillian(system)
    maps = [P for _, P in iter_step_maps(liouv, drive, grid)]

    values = np.zeros((n1, n1))
    imag = np.zeros(n1)
    blocks = [(b, min(b + _ROW_BLOCK, n1)) for b in range(0, n1, _ROW_BLOCK)]

    def run_block(lo, hi):
        R = np.zeros((hi - lo, n), dtype=complex)
        for k in range(lattice[lo], grid.n_steps + 1):
            if k % s == 0:
                m = k // s
                if m < hi:
                    R[m - lo] = launches[m]
                top = min(m, hi - 1) - lo + 1
                v = R[:top] @ avec
                values[lo:lo + top, m] = v.real
                imag[lo:lo + top] = np.maximum(imag[lo:lo + top], np.abs(v.imag))
            else:
                top = min(k // s, hi - 1) - lo + 1
            if k < grid.n_steps:
                R[:top] = R[:top] @ maps[k].T
        if not np.all(np.isfinite(R)):
            raise PropagationError("non-finite conditional state; reduce dt")

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda b: run_block(*b), blocks))
    else:
        for b in blocks:
            run_block(*b)

    worst_imag = float(imag.max())
    worst_neg = float(np.triu(values).min())
    if worst_imag > 1e-10 or worst_neg < -1e-10:
        raise PropagationError(
            f"G2 map violates realness/positivity (imag {worst_imag:.2e}, min {worst_neg:.2e}); reduce dt"
        )
    residual = truncation_residual(excited_population(trajectory.states))
    return CorrelationMap(grid, s, values, delay=delay, residual=residual, imag_residue=worst_imag)


def _lattice_weights(n1, cell):
    w = np.full(n1, cell)
    w[0] = w[-1] = 0.5 * cell
    return w


def pair_integral(cmap):
    """Trapezoidal sum of G2 over t1 <= t2 (a.u. time squared)."""
    G = cmap.values
    n1 = G.shape[0]
    H = cmap.cell
    w1 = _lattice_weights(n1, H)
    # row i integrates t2 over [t_i, t_end]: half weight on the diagonal and the end
    inner = H * np.triu(G, 1).sum(axis=1) + 0.5 * H * np.diag(G) - 0.5 * H * G[:, -1]
    inner[-1] = 0.0
    return float(np.dot(w1, inner))


def coincidence_rate(cmap, det, strict=False):
    """c(T) = eta_c^2 nu_rep gamma_f^2 * double integral of G2, in counts per second."""
    check_residual(cmap.residual, strict, what="coincidence window")
    return det.eta_c**2 * det.nu_rep * det.gamma_f**2 * pair_integral(cmap)


def coincidence_probability_map(cmap, gamma_f, dt):
    """p(t1, t2) = G2 gamma_f^2 dt^2 on the stored triangle (zeros below the diagonal)."""
    return np.triu(cmap.values) * (gamma_f * dt) ** 2


def fluorescence_integral(trajectory, op):
    return float(np.trapezoid(trajectory.expect(op), trajectory.times))


def fluorescence_rate(trajectory, det, op, strict=False):
    """f(T) = eta_f nu_rep gamma_f * integral of tr[a^+ a rho(t)] dt, counts per second.

    ``op`` is the number operator a^+ a of the emitting system.
    """
    check_residual(truncation_residual(excited_population(trajectory.states)), strict, what="fluorescence window")
    return det.eta_f * det.nu_rep * det.gamma_f * fluorescence_integral(trajectory, op)


@dataclass
class PairIntegrals:
    """Per-drive double integral of G2, time integral of <a^+ a>, and diagnostics."""

    pairs: np.ndarray
    fluorescence: np.ndarray
    residual: np.ndarray
    peak_excited: np.ndarray
    max_trace_drift: float
    max_hermiticity: float
    min_eigenvalue: float


def pair_integrals(system, drives, grid, stride=1, fluor_op=None, diag_every=16):
    """Double integral of G2 and single integral of <a^+ a> for each drive program.

    All drives share ``grid`` and are propagated together. For every drive the
    result equals ``pair_integral(g2_grid(..., t1_stride=stride))`` up to
    round-off: S_k = sum_{j<k} w_j V(t_k, t_j)[a rho_j a^+] obeys
    S_{k+1} = V_k (S_k + w_k a rho_k a^+), and the weighted traces of S_k
    reproduce the triangular trapezoid rule. The fluorescence integral uses
    ``fluor_op`` (default a^+ a).
    """
    drives = list(drives)
    if grid.n_steps % stride:
        raise ValueError(f"grid n_steps={grid.n_steps} is not a multiple of stride {stride}")
    B = len(drives)
    d = system.dim
    n = d * d
    h = grid.dt
    H = stride * h
    N = grid.n_steps
    liouv = Liouvillian(system)
    jumpT = superop_sandwich(system.emission, dag(system.emission)).T
    avec = system.number_op.T.reshape(-1)
    fvec = (system.number_op if fluor_op is None else fluor_op).T.reshape(-1)
    P0T = liouv.free_map(h).T
    times = grid.times

    act = np.zeros(N, dtype=bool)
    for dr in drives:
        act |= active_steps(grid, dr)

    V = np.zeros((B, 2, n), dtype=complex)  # [:, 0] rho, [:, 1] accumulated conditional state
    V[:, 0] = system.ground_state().reshape(-1)
    acc_S = np.zeros((B, n), dtype=complex)
    acc_diag = np.zeros((B, n), dtype=complex)
    acc_f = np.zeros((B, n), dtype=complex)

    diag_idx = np.arange(d) * (d + 1)
    peak = np.zeros(B)
    drift = herm = 0.0
    min_ev = np.inf

    def diagnostics(k):
        nonlocal drift, herm, min_ev
        rho = V[:, 0].reshape(B, d, d)
        tr = np.real(rho[:, diag_idx // d, diag_idx % d].sum(axis=1))
        drift = max(drift, float(np.max(np.abs(tr - 1.0))))
        herm = max(herm, float(np.max(np.abs(rho - rho.conj().transpose(0, 2, 1)))))
        ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().transpose(0, 2, 1)))
        min_ev = min(min_ev, float(ev.min()))
        np.maximum(peak, tr - np.real(rho[:, 0, 0]), out=peak)

    def record(k):
        rho_k = V[:, 0]
        acc_f[:] += (0.5 * h if k in (0, N) else h) * rho_k
        if k % stride == 0:
            w = 0.5 * H if k in (0, N) else H
            acc_S[:] += (0.5 * H if k == N else H) * V[:, 1]
            if k < N:
                acc_diag[:] += (w * 0.5 * H) * rho_k
            V[:, 1] += w * (rho_k @ jumpT)
        if k % diag_every == 0 or k == N:
            diagnostics(k)

    blk_start = blk_end = 0
    for k in range(N + 1):
        record(k)
        if k == N:
            break
        if not act[k]:
            V = V @ P0T
            continue
        if k >= blk_end:
            blk_start, blk_end = k, k
            while blk_end < N and act[blk_end] and blk_end - k < 512:
                blk_end += 1
            tb = times[k:blk_end]
            ca, cb, cc = (
                np.stack([liouv.coefficients(dr, tb + off) for dr in drives], axis=1)
                for off in (0.0, 0.5 * h, h)
            )
        i = k - blk_start
        k1 = liouv.apply(V, ca[i])
        k2 = liouv.apply(V + (0.5 * h) * k1, cb[i])
        k3 = liouv.apply(V + (0.5 * h) * k2, cb[i])
        k4 = liouv.apply(V + h * k3, cc[i])
        V = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(V)):
        raise PropagationError("non-finite state in pair integration; reduce dt")
    pairs = np.real((acc_S + acc_diag @ jumpT) @ avec)
    fluor = np.real(acc_f @ fvec)
    end_pop = np.real(V[:, 0].reshape(B, d, d)[:, diag_idx // d, diag_idx % d].sum(axis=1) - V[:, 0, 0])
    residual = np.where(peak > 0, end_pop / np.where(peak > 0, peak, 1.0), 0.0)
    return PairIntegrals(pairs, fluor, residual, peak, drift, herm, min_ev)
