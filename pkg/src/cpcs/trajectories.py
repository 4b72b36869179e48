"""Monte-Carlo wave-function unraveling used to cross-check photon-pair counts.

Each trajectory starts in the ground state. Per step, channel i fires with
probability gamma_i ||J_i psi||^2 dt; otherwise psi evolves under the
non-Hermitian H_eff = H0 + H_d(t) - i/2 sum gamma_i J_i^+ J_i (one RK4 step)
and is renormalized. The comparator for the regression engine is the mean
number of ordered photon pairs per cycle, k(k-1)/2 for k clicks.
"""

from dataclasses import dataclass, field

import numpy as np

from .lindblad import PULSE_SUPPORT, active_steps
from .operators import dag

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x):
    """SplitMix64 finalizer on a uint64 array."""
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def trajectory_keys(seed, traj_ids):
    """Per-trajectory RNG keys derived from (master seed, trajectory index)."""
    ids = np.asarray(traj_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed) ^ _mix64((ids + np.uint64(1)) * _GOLDEN))


def uniforms(keys, step, draw):
    """Counter-based uniform [0, 1) numbers for (trajectory key, step, draw)."""
    ctr = np.uint64(2 * step + draw + 1)
    with np.errstate(over="ignore"):
        x = _mix64(keys + ctr * _GOLDEN)
    return (x >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass
class TrajectoryRun:
    """Summary statistics of an unraveling; ``clicks`` rows are (trajectory, time, channel)."""

    n_traj: int
    seed: int
    counts: np.ndarray
    p1: float
    p2: float
    pairs: float
    se_p1: float
    se_p2: float
    se_pairs: float
    rho_mean: dict = field(default_factory=dict)
    rho_se: dict = field(default_factory=dict)
    clicks: np.ndarray = None


def _heff_maps(system, drive, grid):
    """RK4 transfer matrices for psi' = -i H_eff(t) psi; field-free steps share one."""
    d = system.dim
    h = grid.dt
    decay = sum(rate * dag(J) @ J for J, rate in system.jumps)
    base = -1j * (system.H0 - 0.5j * decay)

    def gen(t):
        G = base.copy()
        for p, ch in drive.assignments:
            if abs(t - p.center) <= PULSE_SUPPORT * p.duration:
                x = (t - p.center) / p.duration
                E = p.amplitude * np.exp(-2.0 * np.log(2.0) * x * x) * np.cos(p.carrier * (t - p.center))
                G = G + 1j * E * system.channel(ch)
        return G

    def rk4(t):
        A, B, C = gen(t), gen(t + 0.5 * h), gen(t + h)
        K1 = A
        K2 = B + 0.5 * h * B @ K1
        K3 = B + 0.5 * h * B @ K2
        K4 = C + h * C @ K3
        return np.eye(d) + (h / 6.0) * (K1 + 2 * K2 + 2 * K3 + K4)

    free = rk4(-np.inf)
    act = active_steps(grid, drive)
    times = grid.times
    return [rk4(times[k]) if act[k] else free for k in range(grid.n_steps)]


def mc_coincidence(system, drive, grid, n_traj, seed, record_steps=(), keep_clicks=False, block=20000, psi0=None):
    """Estimate per-cycle click statistics from ``n_traj`` jump trajectories.

    Returns the probability of at least one and at least two clicks, the mean
    number of ordered click pairs, and their standard errors. ``record_steps``
    selects grid indices at which the ensemble-averaged density matrix is kept.
    Trajectories start in the pure state ``psi0`` (default: ground state).
    """
    if n_traj < 100:
        raise ValueError("use at least 100 trajectories")
    d = system.dim
    h = grid.dt
    Js = np.array([J for J, _ in system.jumps])
    rates = np.array([rate for _, rate in system.jumps])
    maps = _heff_maps(system, drive, grid)
    times = grid.times
    record = set(int(k) for k in record_steps)

    counts = np.zeros(n_traj, dtype=np.int64)
    sums = {k: np.zeros((d, d), complex) for k in record}
    sq = {k: np.zeros((d, d)) for k in record}
    clicks = []

    for lo in range(0, n_traj, block):
        hi = min(lo + block, n_traj)
        b = hi - lo
        ids = np.arange(lo, hi)
        keys = trajectory_keys(seed, ids)
        psi = np.zeros((b, d), dtype=complex)
        if psi0 is None:
            psi[:, 0] = 1.0
        else:
            psi[:] = np.asarray(psi0, dtype=complex) / np.linalg.norm(psi0)
        for k in range(grid.n_steps + 1):
            if k in record:
                outer = psi[:, :, None] * psi[:, None, :].conj()
                sums[k] += outer.sum(axis=0)
                sq[k] += (np.abs(outer) ** 2).sum(axis=0)
            if k == grid.n_steps:
                break
            Jpsi = np.einsum("cij,bj->bci", Js, psi)
            p = rates * np.sum(np.abs(Jpsi) ** 2, axis=2) * h
            ptot = p.sum(axis=1)
            r = uniforms(keys, k, 0)
            jumped = r < ptot
            psi = psi @ maps[k].T
            if jumped.any():
                idx = np.nonzero(jumped)[0]
                r2 = uniforms(keys[idx], k, 1) * ptot[idx]
                ch = np.sum(np.cumsum(p[idx], axis=1) <= r2[:, None], axis=1)
                ch = np.minimum(ch, len(rates) - 1)
                psi[idx] = Jpsi[idx, ch]
                counts[lo + idx] += 1
                if keep_clicks:
                    clicks.append(np.column_stack([lo + idx, np.full(len(idx), times[k]), ch]))
            psi /= np.linalg.norm(psi, axis=1, keepdims=True)

    n = float(n_traj)
    p1 = float(np.mean(counts >= 1))
    p2 = float(np.mean(counts >= 2))
    pair_counts = counts * (counts - 1) / 2.0
    pairs = float(pair_counts.mean())
    se_pairs = float(pair_counts.std(ddof=1) / np.sqrt(n))
    rho_mean = {k: sums[k] / n for k in record}
    clicks = np.concatenate(clicks) if clicks else np.zeros((0, 3))
    clicks = clicks[np.lexsort((clicks[:, 1], clicks[:, 0]))]  # by trajectory, then time
    rho_se = {k: np.sqrt(np.maximum(sq[k] / n - np.abs(rho_mean[k]) ** 2, 0.0) / n) for k in record}
    return TrajectoryRun(
        n_traj=n_traj,
        seed=seed,
        counts=counts,
        p1=p1,
        p2=p2,
        pairs=pairs,
        se_p1=float(np.sqrt(p1 * (1 - p1) / n)),
        se_p2=float(np.sqrt(p2 * (1 - p2) / n)),
        se_pairs=se_pairs,
        rho_mean=rho_mean,
        rho_se=rho_se,
        clicks=clicks,
    )
