import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpcs.lindblad import (
    Liouvillian,
    PropagationError,
    TimeGrid,
    active_steps,
    convergence_check,
    dissipator,
    master_rhs,
    propagate,
    rk4_step,
)
from cpcs.models import ExcitonBiexcitonParams, make_exciton_biexciton, make_two_level
from cpcs.operators import ket_projector
from cpcs.pulses import DriveProgram, Pulse, two_pulse_program
from cpcs.validation import decay_error, invariant_report, invariants_ok

from conftest import GAMMA, OMEGA, random_density


@pytest.fixture(scope="module")
def xx_system():
    return make_exciton_biexciton(ExcitonBiexcitonParams(OMEGA, 1e-3, GAMMA, 3.93))


@pytest.fixture(scope="module")
def xx_drive():
    return two_pulse_program(Pulse(1.4e-3, 0.0, 100.0, OMEGA), 500.0, 900.0, ("sigma_plus", "sigma_minus"))


def test_dissipator_is_traceless(rng, xx_system):
    rho = random_density(rng, 4)
    assert abs(np.trace(dissipator(xx_system, rho))) < 1e-15


def test_liouvillian_matches_direct_rhs(rng, xx_system, xx_drive):
    L = Liouvillian(xx_system)
    for t in (480.0, 500.0, 1410.0, 5000.0):
        rho = random_density(rng, 4)
        direct = master_rhs(xx_system, xx_drive, rho, t)
        c = L.coefficients(xx_drive, np.array([t]))
        vec = L.apply(rho.reshape(1, 1, -1), c)[0, 0]
        assert np.allclose(vec, direct.reshape(-1), atol=1e-15)


def test_step_maps_match_plain_rk4(rng, xx_system, xx_drive):
    grid = TimeGrid(300.0, 0.5, 800)
    rho = random_density(rng, 4)
    traj = propagate(xx_system, xx_drive, rho, grid)
    y = rho.copy()
    for k in range(grid.n_steps):
        y = rk4_step(lambda r, t: master_rhs(xx_system, xx_drive, r, t), y, grid.times[k], grid.dt)
    assert np.allclose(traj.states[-1], y, atol=1e-13)


def test_free_decay_matches_exponential():
    assert decay_error(GAMMA) < 1e-6


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    tls = make_two_level(OMEGA, GAMMA, 3.93)
    drive = DriveProgram(((Pulse(5e-3, 200.0, 100.0, OMEGA), "x"),))
    grid = TimeGrid(0.0, 0.5, 1000)
    r1, r2 = random_density(rng, 2), random_density(rng, 2)
    lhs = propagate(tls, drive, a * r1 + b * r2, grid).states
    rhs = a * propagate(tls, drive, r1, grid).states + b * propagate(tls, drive, r2, grid).states
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_invariants_during_pulses(xx_system, xx_drive):
    grid = TimeGrid(0.0, 0.5, 6000)
    traj = propagate(xx_system, xx_drive, xx_system.ground_state(), grid)
    rep = invariant_report(traj.states)
    assert invariants_ok(rep), rep
    assert traj.populations()[:, 1:].sum(axis=1).max() > 0.01


def test_conditional_state_not_renormalized(tls):
    rho = 0.3 * ket_projector(1, 2)
    traj = propagate(tls, DriveProgram(()), rho, TimeGrid(0.0, 0.5, 100))
    assert not traj.normalized
    assert traj.trace()[0] == pytest.approx(0.3)
    assert traj.trace()[-1] == pytest.approx(0.3, abs=1e-14)


def test_observers_called(tls):
    seen = []
    propagate(tls, DriveProgram(()), tls.ground_state(), TimeGrid(0.0, 1.0, 4), observers=[lambda k, t, r: seen.append((k, t))])
    assert seen == [(0, 0.0), (1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0)]


def test_unstable_step_raises():
    fast = make_two_level(OMEGA, 1.0, 1.0)
    with pytest.raises(PropagationError, match="reduce dt"):
        propagate(fast, DriveProgram(()), ket_projector(1, 2), TimeGrid(0.0, 10.0, 2000))


def test_dimension_mismatch(tls):
    with pytest.raises(ValueError):
        propagate(tls, DriveProgram(()), np.eye(3) / 3, TimeGrid(0.0, 1.0, 2))


def test_rotating_frame_tracks_lab_frame(tls):
    # long pulse: narrow bandwidth, so the rotating-wave picture is accurate
    drive = DriveProgram(((Pulse(2e-4, 5000.0, 1000.0, OMEGA), "x"),))
    grid = TimeGrid(0.0, 0.5, 20000)
    lab = propagate(tls, drive, tls.ground_state(), grid).populations()[:, 1]
    rot = propagate(tls, drive, tls.ground_state(), grid, frame="rotating").populations()[:, 1]
    # while the field is on, the lab frame carries a counter-rotating admixture of order 1/(w0 tp)
    after = grid.times > 9000.0
    assert np.max(np.abs(lab - rot)[after]) < 1e-8 * lab.max()
    assert np.max(np.abs(lab - rot)) < 0.05 * lab.max()


def test_active_steps_cover_pulse_support():
    drive = DriveProgram(((Pulse(1.0, 1000.0, 10.0, OMEGA), "x"),))
    act = active_steps(TimeGrid(0.0, 1.0, 2000), drive)
    assert not act[:919].any() and act[920:1080].all() and not act[1081:].any()


def test_time_grid():
    g = TimeGrid.covering(0.0, 10.2, 0.5, multiple_of=4)
    assert g.n_steps == 24 and g.t_end == 12.0
    assert TimeGrid.covering(0.0, 10.0, 0.5).n_steps == 20
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0.0, 3)


def test_convergence_check_small(tls):
    drive = DriveProgram(((Pulse(1.4e-3, 600.0, 100.0, OMEGA), "x"),))
    assert convergence_check(tls, drive, tls.ground_state(), TimeGrid(0.0, 0.5, 2000)) < 1e-7


def test_dissipator_examples(tls):
    g = GAMMA
    assert np.allclose(dissipator(tls, ket_projector(1, 2)), np.diag([g, -g]))
    assert np.allclose(dissipator(tls, ket_projector(0, 2)), 0)
    coh = np.array([[0, 0.3 + 0.1j], [0, 0]])
    assert dissipator(tls, coh)[0, 1] == pytest.approx(-(g / 2) * (0.3 + 0.1j))


def test_rhs_phase_convention(tls):
    c = 0.2 - 0.05j
    coh = np.array([[0, c], [0, 0]])
    out = master_rhs(tls, DriveProgram(()), coh, 0.0)
    assert out[0, 1] == pytest.approx((1j * OMEGA - GAMMA / 2) * c)
    assert np.allclose(master_rhs(tls, DriveProgram(()), tls.ground_state(), 0.0), 0)


def test_rhs_hermiticity_preserving(rng, xx_system, xx_drive):
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    lhs = master_rhs(xx_system, xx_drive, z, 500.0).conj().T
    assert np.allclose(lhs, master_rhs(xx_system, xx_drive, z.conj().T, 500.0), atol=1e-15)


def test_rhs_against_independent_terms(rng, xx_system, xx_drive):
    # test-only re-implementation: -i[H0 + Hd, rho] + sum_i g_i (J rho J+ - {J+J, rho}/2)
    rho = random_density(rng, 4)
    t = 500.0  # first pulse peak
    p = xx_drive.pulses[0]
    E = p.amplitude * np.cos(p.carrier * (t - p.center))
    H = xx_system.H0 - E * xx_system.drives["sigma_plus"]
    expected = -1j * (H @ rho - rho @ H)
    for J, g in xx_system.jumps:
        Jd = J.conj().T
        expected = expected + g * (J @ rho @ Jd - 0.5 * (Jd @ J @ rho + rho @ Jd @ J))
    assert np.allclose(master_rhs(xx_system, xx_drive, rho, t), expected, atol=1e-15)


def test_unknown_channel_rejected(tls):
    drive = DriveProgram(((Pulse(1e-3, 0.0, 10.0, OMEGA), "sigma_plus"),))
    with pytest.raises(KeyError):
        master_rhs(tls, drive, tls.ground_state(), 0.0)
    with pytest.raises(KeyError):
        propagate(tls, drive, tls.ground_state(), TimeGrid(0.0, 1.0, 4))


def test_rk4_scalar_surrogate():
    y = rk4_step(lambda y, t: -y, 1.0, 0.0, 0.1)
    assert y == pytest.approx(0.9048375, abs=5e-8)
    assert rk4_step(lambda y, t: 0.0 * y, 2.5, 0.0, 0.1) == 2.5
    e1 = abs(rk4_step(lambda y, t: -y, 1.0, 0.0, 0.1) - np.exp(-0.1))
    e2 = abs(rk4_step(lambda y, t: -y, 1.0, 0.0, 0.05) - np.exp(-0.05))
    assert e1 / e2 == pytest.approx(32, rel=0.05)


def test_ground_state_stationary(tls):
    traj = propagate(tls, DriveProgram(()), tls.ground_state(), TimeGrid(0.0, 0.5, 500))
    assert np.all(traj.states == traj.states[0])
