"""Self-checks shared by ``cpcs validate`` and the test suite."""

import numpy as np

from .lindblad import DEFAULT_DT, TimeGrid, propagate
from .models import ExcitonBiexcitonParams, make_exciton_biexciton, make_two_level
from .operators import ket_projector
from .pulses import DriveProgram
from .regression import apply_emission_jump, g2_grid, pair_integrals
from .trajectories import mc_coincidence

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = -1e-8


def invariant_report(states, normalized=True):
    """Worst trace drift, Hermiticity defect and smallest eigenvalue over ``states`` (N, d, d)."""
    states = np.asarray(states)
    trace = np.real(np.einsum("kii->k", states))
    herm = np.abs(states - np.conj(np.swapaxes(states, 1, 2))).max()
    sym = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    return {
        "max_trace_drift": float(np.max(np.abs(trace - 1.0))) if normalized else None,
        "max_hermiticity": float(herm),
        "min_eigenvalue": float(np.linalg.eigvalsh(sym).min()),
    }


def invariants_ok(rep):
    drift = rep["max_trace_drift"]
    return (
        (drift is None or drift < TRACE_TOL)
        and rep["max_hermiticity"] < HERMITICITY_TOL
        and rep["min_eigenvalue"] > POSITIVITY_TOL
    )


def decay_error(gamma, lifetimes=5.0, dt=DEFAULT_DT):
    """Max relative error of the undriven excited population against exp(-gamma t)."""
    tls = make_two_level(0.0735, gamma, 1.0)
    n = int(np.ceil(lifetimes / gamma / dt))
    grid = TimeGrid(0.0, dt, n)
    traj = propagate(tls, DriveProgram(()), ket_projector(1, 2), grid)
    exact = np.exp(-gamma * traj.times)
    return float(np.max(np.abs(traj.populations()[:, 1] - exact) / exact))


def biexciton_algebra():
    """(jump trace, G2(t1, t1)) for the pure biexciton state; exact values are 2 and 4."""
    sysx = make_exciton_biexciton(ExcitonBiexcitonParams(0.0735, 0.0, 3.3e-3, 3.93))
    rho = ket_projector(3, 4)
    cond = apply_emission_jump(sysx.emission, rho)
    return float(np.real(np.trace(cond))), float(np.real(np.trace(sysx.number_op @ cond)))


def _check(name, passed, detail, **data):
    return {"name": name, "passed": bool(passed), "detail": detail, **data}


def run_validation(cfg, n_traj=5000, seed=20240611):
    """Run the invariant suite and oracle comparisons for the drive of ``cfg``."""
    checks = []
    gamma = cfg.model["gamma"]
    err = decay_error(gamma)
    checks.append(_check("decay oracle", err < 1e-6, f"max relative error {err:.3e} (limit 1e-6)"))

    tr, g2 = biexciton_algebra()
    ok = abs(tr - 2) < 1e-12 and abs(g2 - 4) < 1e-12
    checks.append(_check("biexciton algebra", ok, f"jump trace {tr!r}, G2 {g2!r} (exact 2, 4)"))

    system = cfg.build_system()
    delay = cfg.numerics["delay"]
    if delay is None:
        delay = 0.5 * (cfg.numerics["delay_min"] + cfg.numerics["delay_max"])
    drive = cfg.drive(delay)
    grid, stride = cfg.grid(system, drive)
    traj = propagate(system, drive, system.ground_state(), grid)
    rep = invariant_report(traj.states)
    checks.append(_check(
        "density invariants",
        invariants_ok(rep),
        f"trace drift {rep['max_trace_drift']:.2e}, hermiticity {rep['max_hermiticity']:.2e}, "
        f"min eigenvalue {rep['min_eigenvalue']:.2e}",
    ))

    if cfg.kind == "tls":
        cmap = g2_grid(system, drive, grid, stride, trajectory=traj)
        diag = float(np.abs(np.diag(cmap.values)).max())
        checks.append(_check("antibunching", diag < 1e-10, f"max |G2(t,t)| {diag:.2e} (limit 1e-10)"))

    if len(system.jumps) == 1:
        (_, rate), = system.jumps
        reg = pair_integrals(system, [drive], grid).pairs[0] * rate**2
        mc = mc_coincidence(system, drive, grid, n_traj, seed)
        z = abs(mc.pairs - reg) / mc.se_pairs if mc.se_pairs > 0 else np.inf
        checks.append(_check(
            "monte-carlo pairs",
            z < 3.0,
            f"trajectories {mc.pairs:.5g} +/- {mc.se_pairs:.2g}, regression {reg:.5g} ({z:.2f} SE, n={n_traj})",
        ))
    else:
        checks.append(_check(
            "monte-carlo pairs", True,
            "skipped: emission operator sums several jump channels, so click counts do not map onto G2",
            skipped=True,
        ))
    return checks
