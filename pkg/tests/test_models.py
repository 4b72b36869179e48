import numpy as np
import pytest

from cpcs.models import (
    BIEXCITON,
    GROUND,
    XMINUS,
    XPLUS,
    CoupledEmitterParams,
    ExcitonBiexcitonParams,
    emitter_operators,
    make_coupled_emitters,
    make_exciton_biexciton,
    make_two_level,
)
from cpcs.operators import dag, is_hermitian, ket_projector


def test_two_level(tls):
    assert tls.dim == 2
    assert np.allclose(tls.H0, np.diag([0, 7.35e-2]))
    (J, rate), = tls.jumps
    assert rate == 3.3e-3 and J[0, 1] == 1
    assert np.allclose(tls.channel("x"), 3.93 * np.array([[0, 1], [1, 0]]))
    with pytest.raises(KeyError, match="unknown drive channel"):
        tls.channel("y")


def test_biexciton_structure():
    s = make_exciton_biexciton(ExcitonBiexcitonParams(0.07, 1e-3, 2e-3, 1.5))
    assert (GROUND, XPLUS, XMINUS, BIEXCITON) == (0, 1, 2, 3)
    assert np.allclose(np.diag(s.H0).real, [0, 0.071, 0.069, 0.14])
    assert len(s.jumps) == 4
    assert np.allclose(s.emission, sum(J for J, _ in s.jumps))
    sp, sm = s.channel("sigma_plus"), s.channel("sigma_minus")
    assert sp[GROUND, XPLUS] == 1.5 and sp[XMINUS, BIEXCITON] == 1.5 and sp[GROUND, XMINUS] == 0
    assert sm[GROUND, XMINUS] == 1.5 and sm[XPLUS, BIEXCITON] == 1.5 and sm[GROUND, XPLUS] == 0
    # sigma+ then sigma- reaches the biexciton only through X+
    path = sm @ sp @ ket_projector(GROUND, 4) @ sp @ sm
    assert abs(path[BIEXCITON, BIEXCITON]) > 0


def test_biexciton_emission_on_xx():
    s = make_exciton_biexciton(ExcitonBiexcitonParams(0.07, 0.0, 2e-3, 1.5))
    psi = s.emission[:, BIEXCITON]
    assert np.allclose(psi, [0, 1, 1, 0])


def test_biexciton_validation():
    with pytest.raises(ValueError):
        ExcitonBiexcitonParams(0.07, 0.0, -1.0, 1.0)


def test_coupled_emitters():
    s = make_coupled_emitters(CoupledEmitterParams(0.07, 0.08, 4e-3, 3e-3, 2.0))
    assert s.dim == 4
    assert is_hermitian(s.H0)
    # single-excitation block splits into 0.075 +- sqrt(0.005^2 + g^2)
    ev = np.linalg.eigvalsh(s.H0[1:3, 1:3])
    assert np.allclose(ev, 0.075 + np.array([-1, 1]) * np.hypot(0.005, 4e-3))
    s1, s2 = emitter_operators()
    assert np.allclose(s.emission, s1 + s2)
    assert np.allclose(s.channel("x"), 2.0 * (s1 + dag(s1)))


def test_two_level_rejects_negative_rate():
    with pytest.raises(ValueError):
        make_two_level(0.07, -1e-3, 1.0)


def test_spectra_from_parameters(tls):
    assert np.allclose(np.linalg.eigvalsh(tls.H0), [0, 7.35e-2])
    assert np.allclose(tls.number_op, ket_projector(1, 2))
    s = make_exciton_biexciton(ExcitonBiexcitonParams(7.35e-2, 1e-3, 3.3e-3, 3.93))
    assert np.allclose(sorted(np.diag(s.H0).real), [0, 0.0725, 0.0745, 0.147])
    s0 = make_exciton_biexciton(ExcitonBiexcitonParams(7.35e-2, 0.0, 3.3e-3, 3.93))
    assert s0.H0[XPLUS, XPLUS] == s0.H0[XMINUS, XMINUS] == 7.35e-2


def test_excitation_number_structure():
    s = make_exciton_biexciton(ExcitonBiexcitonParams(7.35e-2, 1e-3, 3.3e-3, 3.93))
    N = s.excitation
    assert np.allclose(s.H0 @ N, N @ s.H0)
    for D in s.drives.values():
        # every nonzero coupling changes N by exactly one
        m, n = np.nonzero(D)
        assert np.all(np.abs(np.diag(N)[m] - np.diag(N)[n]) == 1)
    c = make_coupled_emitters(CoupledEmitterParams(7.35e-2, 7.35e-2, 4e-3, 3.3e-3, 3.93))
    s1, s2 = emitter_operators()
    Ntot = dag(s1) @ s1 + dag(s2) @ s2
    assert np.allclose(c.H0 @ Ntot, Ntot @ c.H0)
    ev = np.linalg.eigvalsh(c.H0)
    assert np.allclose(ev, [0, 7.35e-2 - 4e-3, 7.35e-2 + 4e-3, 2 * 7.35e-2])


def test_uncoupled_second_emitter_stays_dark():
    from cpcs.lindblad import TimeGrid, propagate
    from cpcs.pulses import Pulse, two_pulse_program

    c = make_coupled_emitters(CoupledEmitterParams(7.35e-2, 7.35e-2, 0.0, 3.3e-3, 3.93))
    drive = two_pulse_program(Pulse(5e-3, 0.0, 100.0, 7.35e-2), 500.0, 800.0, ("x", "x"))
    traj = propagate(c, drive, c.ground_state(), TimeGrid(0.0, 0.5, 4000))
    s1, s2 = emitter_operators()
    assert np.max(np.abs(traj.expect(dag(s2) @ s2))) == 0.0
    assert traj.expect(dag(s1) @ s1).max() > 1e-3
