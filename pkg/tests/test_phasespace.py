import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanmc.dynamics import PropagationOptions, ProtonState
from chanmc.ensemble import BeamConfig, RecordBatch, run_ensemble, sample_batch
from chanmc.phasespace import (J4, CausticError, DensityGrid, beam_sigma, boundary_angle, central_yield,
                               default_window, estimate_transfer_matrix, find_profile_peaks, flux_enhancement,
                               free_drift, fwhm, harmonic_stiffness, histogram2d, invariants, jacobian_map,
                               scan_moments, symplectic_residual)


def synthetic(x, y, tx=None, ty=None, flags=None):
    n = len(x)
    z = np.zeros(n)
    return RecordBatch(np.arange(n), np.asarray(x), np.asarray(y), z if tx is None else tx, z if ty is None else ty,
                       np.full(n, 2e6), np.zeros(n, np.int32) if flags is None else flags)


def test_gaussian_fwhm():
    g = np.random.default_rng(0)
    b = synthetic(g.normal(0, 1, 1_000_000), g.normal(0, 1, 1_000_000))
    grid = histogram2d(b, "configuration", 200, (-6, 6, -6, 6))
    assert fwhm(grid, 0) == pytest.approx(2.3548, rel=0.02)
    assert find_profile_peaks(grid.marginal(0)).size == 1


def test_histogram_counts_and_exclusions():
    flags = np.array([0, 0, 1, 0], np.int32)
    b = synthetic([0.1, 0.9, 0.5, 5.0], [0.1, 0.9, 0.5, 0.5], flags=flags)
    grid = histogram2d(b, "configuration", 2, (0, 1, 0, 1))
    assert grid.counts.tolist() == [[1, 0], [0, 1]]
    assert grid.out_of_window == 1 and grid.total == 3
    assert grid.merge(grid).counts.sum() == 4


def test_zero_area_window_rejected():
    with pytest.raises(ValueError):
        histogram2d(synthetic([0.0], [0.0]), "angular", 8, (1, 1, -1, 1))
    with pytest.raises(ValueError):
        histogram2d(synthetic([0.0], [0.0]), "momentum", 8, (0, 1, 0, 1))


def test_fwhm_flat_profile_raises():
    grid = DensityGrid("angular", (4, 1), (0, 4, 0, 1), np.ones((4, 1), dtype=np.int64))
    with pytest.raises(ValueError):
        fwhm(grid, 0)


def test_fwhm_of_split_profile_spans_both_peaks():
    m = np.array([0, 0, 10, 4, 4, 10, 0, 0], dtype=np.int64)
    grid = DensityGrid("configuration", (8, 1), (0, 8, 0, 1), m[:, None])
    assert fwhm(grid, 0) == pytest.approx(4.0)
    # Unequal lobes with a dip below half maximum: still measured across both.
    m = np.array([0, 0, 10, 4, 4, 8, 0, 0], dtype=np.int64)
    grid = DensityGrid("configuration", (8, 1), (0, 8, 0, 1), m[:, None])
    assert fwhm(grid, 0) == pytest.approx((5.0 + 3.0 / 8.0) - (2.0 - 5.0 / 10.0))
    spike = DensityGrid("configuration", (8, 1), (0, 8, 0, 1), np.eye(8, 1, -3, dtype=np.int64))
    assert fwhm(spike, 0) <= 1.0


def test_grid_csv_header(geometry):
    grid = histogram2d(synthetic([0.0], [0.0]), "configuration", 4, geometry=geometry)
    text = grid.to_csv()
    assert text.startswith("# plane=configuration\n# bins=4,4\n")
    assert len(text.strip().splitlines()) == 5 + 4
    assert default_window("angular", geometry)[1] == pytest.approx(1.5 * geometry.psi_c)


def test_two_peaks_found():
    profile = np.concatenate([np.zeros(10), np.full(5, 1000.0), np.zeros(10), np.full(5, 800.0), np.zeros(10)])
    assert find_profile_peaks(profile).size == 2
    assert find_profile_peaks(profile + 200.0 * np.sin(np.arange(40))).size >= 2


def test_central_yield_counts_all_launched():
    b = synthetic([0, 0, 0, 0], [0, 0, 0, 0], tx=np.array([0.0, 0.1, 5.0, 0.0]),
                  flags=np.array([0, 0, 0, 1], np.int32))
    assert central_yield(b, 0.5) == 0.5


def test_sigma_of_entry_beam(field):
    beam = BeamConfig(n_protons=100_000, divergence=0.2)
    x, y, px, py = sample_batch(beam, field, np.arange(beam.n_protons))
    sig = beam_sigma(subspace="X", entry={"x": x, "y": y, "phi_x": px, "phi_y": py})
    assert sig.matrix[1, 1] == pytest.approx(0.02, rel=0.02)  # mrad^2
    assert sig.matrix[0, 0] == pytest.approx(field.geometry.site_spacing**2 / 6, rel=0.02)
    assert np.allclose(sig.matrix, sig.matrix.T)
    with pytest.raises(ValueError):
        beam_sigma(subspace="X")
    with pytest.raises(ValueError):
        beam_sigma(subspace="Z")


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(-3, 3))
def test_invariants_preserved_by_symplectic_maps(a, b, c):
    g = np.random.default_rng(1)
    d = g.normal(size=(4, 4))
    s = d @ d.T + np.eye(4)
    block = np.array([[b, a], [0.0, 1.0 / b]]) @ np.array([[1.0, 0.0], [c, 1.0]])
    m = np.block([[block, np.zeros((2, 2))], [np.zeros((2, 2)), np.eye(2)]])
    assert symplectic_residual(m) < 1e-12
    i0, d0 = invariants(s)
    i1, d1 = invariants(m @ s @ m.T)
    assert i1 == pytest.approx(i0, rel=1e-9)
    assert d1 == pytest.approx(d0, rel=1e-9)


def test_transfer_matrix_of_free_flight(field):
    ref = ProtonState(0.02, 0.01, 1e-4, 0.0, 0.0, 2e6)
    tm = estimate_transfer_matrix(field, 50.0, ref, options=PropagationOptions(steps=10, transverse_force=False))
    np.testing.assert_allclose(tm.matrix, free_drift(50.0), atol=1e-9)
    assert symplectic_residual(free_drift(3.0)) == 0.0


def test_transfer_matrix_needs_conservative_flow(field):
    ref = ProtonState(0.0, 0.0, 0.0, 0.0, 0.0, 2e6)
    with pytest.raises(ValueError):
        estimate_transfer_matrix(field, 10.0, ref, options=PropagationOptions(energy_loss=True))
    steep = ProtonState(0.0, 0.0, 0.2, 0.0, 0.0, 2e6)  # past the angle limit
    with pytest.raises(CausticError):
        estimate_transfer_matrix(field, 10.0, steep, h=1e-4)


def test_order_two_converges_quadratically(field):
    ref = ProtonState(0.02, -0.01, 1e-4, 0.0, 0.0, 2e6)
    e1 = estimate_transfer_matrix(field, 92.0, ref, h=4e-3, order=2).symplectic_error
    e2 = estimate_transfer_matrix(field, 92.0, ref, h=2e-3, order=2).symplectic_error
    assert 3.0 < e1 / e2 < 5.0


def test_jacobian_map(field):
    xs = np.array([0.0, 0.03, field.geometry.site_spacing - 1e-5])
    jm = jacobian_map(field, 40.0, xs, np.zeros(3), options=PropagationOptions(steps=256))
    assert jm.valid.tolist() == [True, True, False]
    assert np.isnan(jm.jacobian[2]) and np.isnan(jm.sigma[2])
    assert jm.sigma[1] == pytest.approx(1 / abs(jm.jacobian[1]))
    assert jm.to_csv().count("\n") == 4
    free = jacobian_map(field, 40.0, [0.01], [0.0], options=PropagationOptions(steps=4, transverse_force=False))
    assert free.caustic[0]


def test_scan_moments(field):
    b = run_ensemble(BeamConfig(n_protons=200), field, 10.0, PropagationOptions(steps=16))
    m = scan_moments([b])
    assert m.shape == (6, 6)
    assert m[4, 4] == pytest.approx(b.reduced_thickness**2)


def test_flux_enhancement(field):
    k = harmonic_stiffness(field)
    e = 2e6
    phi_b = boundary_angle(0.01, e, k)
    assert flux_enhancement(0.01, e, phi_b, k) == 0.0
    assert flux_enhancement(0.01, e, 0.0, k) == np.inf
    assert flux_enhancement(0.01, e, 0.0, k, form="full") == 0.0
    assert flux_enhancement(0.01, e, phi_b, k, form="full") == np.inf
    assert flux_enhancement(0.01, e, 0.01 * phi_b, k, form="full") == pytest.approx(1e-4, rel=1e-3)
    with pytest.raises(ValueError):
        boundary_angle(0.0, e, k)
