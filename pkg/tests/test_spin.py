import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanmc import spin
from chanmc.spin import SINGLET, TRIPLET_0, TRIPLET_MINUS, TRIPLET_PLUS, SpinParams

freq = st.floats(-5, 5)


def test_zero_params_give_zero_matrix():
    assert np.all(spin.build_hamiltonian(SpinParams()) == 0)


def test_diagonal_levels():
    h = spin.build_hamiltonian(SpinParams(omega_s=1.0, omega_l=0.1, a_hyper=0.01))
    w, _ = spin.eigensystem(h)
    np.testing.assert_allclose(w, [-0.5475, -0.4525, 0.4475, 0.5525], atol=1e-15)
    np.testing.assert_allclose(np.diag(h).real, [0.5525, 0.4475, -0.4525, -0.5475], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(freq, freq, freq, freq)
def test_eigensystem_reconstructs(om, wl, a, b):
    h = spin.build_hamiltonian(SpinParams(omega_s=om, omega_l=wl, a_hyper=a, b_hyper=b))
    w, v = spin.eigensystem(h)
    scale = max(np.abs(h).max(), 1.0)
    assert np.abs(v.conj().T @ v - np.eye(4)).max() <= 1e-12
    assert np.abs(v @ np.diag(w) @ v.conj().T - h).max() <= 1e-12 * scale
    assert np.all(np.diff(w) >= 0)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        spin.eigensystem(np.array([[0, 1], [0, 0]]))


def test_pseudosecular_tilt():
    p = SpinParams(omega_l=0.3, a_hyper=0.2, b_hyper=0.15)
    h = spin.build_hamiltonian(p)
    # Electron-up block acts on the nucleus as (w_l + A/2) I_z + (B/2) I_x.
    block = h[:2, :2] - np.trace(h[:2, :2]) / 2
    w, v = np.linalg.eigh(block)
    upper = v[:, 1]
    angle = 2 * np.arctan2(abs(upper[1]), abs(upper[0]))
    assert angle == pytest.approx(spin.tilt_angle(p), rel=1e-12)
    assert spin.commutator_with_z(h) > 0


def test_dipolar_constructor():
    p = SpinParams.dipolar(2.0, np.pi / 6)
    assert p.b_hyper == pytest.approx(3 * 2.0 * np.cos(np.pi / 6) * np.sin(np.pi / 6))
    assert p.omega == 0.0
    assert SpinParams(omega_s=np.nan).validate() == ["omega_s: must be finite"]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_heisenberg_commutes_with_total_z(n):
    assert spin.commutator_with_z(spin.heisenberg(1.3, n)) == 0.0


def test_commutator_rejects_large_systems():
    with pytest.raises(ValueError):
        spin.commutator_with_z(np.eye(32))


def test_singlet_triplet_structure():
    for t in (TRIPLET_0, TRIPLET_PLUS, TRIPLET_MINUS):
        assert abs(SINGLET.conj() @ t) < 1e-15
    swap = np.eye(4)[[0, 2, 1, 3]]
    np.testing.assert_allclose(swap @ SINGLET, -SINGLET)
    np.testing.assert_allclose(swap @ TRIPLET_0, TRIPLET_0)


@given(st.floats(0.01, 10))
def test_exchange_gap(lam):
    h = spin.heisenberg(lam)
    assert spin.singlet_triplet_gap(h) == pytest.approx(lam, abs=1e-12)
    assert spin.is_singlet_ground(h)
    assert not spin.is_singlet_ground(spin.heisenberg(-lam))
    assert spin.exchange_coupling(-0.75, 0.25) == 1.0


def test_overlap():
    l0, b, eps = spin.overlap(0.0, 1.0, 0.0, 1.0)
    assert (l0, b, eps) == (1.0, 1.0, 0.0)
    l, b, eps = spin.overlap(0.5, 1.0, 3.0, 1.0, f=2.0, hbar_omega_e=3.0)
    assert b == 2.0 and eps == 3.0
    assert l == pytest.approx(np.exp(0.25 * (0.5 - 4.0)))
    with pytest.raises(ValueError):
        spin.overlap(0.5, 1.0, -2.0, 1.0)


def test_transition_frequency():
    assert spin.transition_frequency(10.0, 0.0, 1.0, 2.0) == 10.0
    assert spin.transition_frequency(10.0, 2.0, 1.0, 2.0) == 8.0
    assert spin.transition_frequency(10.0, 2.0, 1.0, 2.0, quartic=0.5) == 16.0


def test_rotations():
    up_up = TRIPLET_PLUS
    flipped = spin.rotate(up_up, "electron", "x", np.pi)
    assert abs(flipped[2]) == pytest.approx(1.0)
    back = spin.rotate(flipped, 0, "x", -np.pi)
    np.testing.assert_allclose(back, up_up, atol=1e-15)
    assert np.linalg.norm(spin.rotate(SINGLET, "nuclear", "y", 0.3)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        spin.rotate(2 * up_up, 0, "x", 1.0)
    with pytest.raises(ValueError):
        spin.rotate(up_up, 0, "w", 1.0)


def test_level_sweep_shape():
    rows = spin.level_sweep(SpinParams(omega_l=0.1), "omega_s", np.linspace(0, 1, 5))
    assert rows.shape == (5, 6)
    np.testing.assert_allclose(rows[:, 0], np.linspace(0, 1, 5))
