import numpy as np
import pytest

from chanmc import backend
from chanmc.dynamics import (DechanneledError, PropagationOptions, ProtonState, energy_loss_clamped,
                             energy_loss_rate, kernel_model, multiple_scattering_kick, propagate, scattering_rate,
                             step_gauss_legendre, step_rk4, transverse_energy, write_trajectory_csv)
from chanmc.potential import transverse_frequency
from chanmc.constants import proton_speed


def start(x=0.02, y=-0.01, px=1e-4, py=2e-4):
    return ProtonState(x, y, px, py, 0.0, 2e6)


@pytest.mark.parametrize("mode", ["radial", "grid", "exact"])
def test_conservation_by_field_mode(field, mode):
    options = PropagationOptions(steps=512, field_mode=mode)
    s0 = start()
    rec, _ = propagate(s0, field, 40.0, options)
    s1 = ProtonState(rec.x, rec.y, 1e-3 * rec.theta_x, 1e-3 * rec.theta_y, 40.0, rec.e_exit)
    tol = {"radial": 1e-9, "exact": 1e-9, "grid": 1e-4}[mode]
    assert transverse_energy(s1, field) == pytest.approx(transverse_energy(s0, field), rel=tol)


def test_free_flight_without_force(field):
    options = PropagationOptions(steps=16, transverse_force=False)
    rec, _ = propagate(start(), field, 50.0, options)
    assert rec.x == pytest.approx(0.02 + 50.0 * 1e-4, rel=1e-13)
    assert rec.theta_x == pytest.approx(0.1)


def test_reversibility(field):
    options = PropagationOptions(steps=4096)
    s0 = start(0.03, 0.01, 5e-4, -3e-4)
    rec, _ = propagate(s0, field, 92.0, options)
    back = ProtonState(rec.x, rec.y, -1e-3 * rec.theta_x, -1e-3 * rec.theta_y, 0.0, rec.e_exit)
    rec2, _ = propagate(back, field, 92.0, options)
    assert abs(rec2.x - s0.x) < 1e-6 and abs(rec2.y - s0.y) < 1e-6


def test_harmonic_period(field):
    """Small oscillations have the period 1/f of the axis curvature."""
    e = 2e6
    wavelength = proton_speed(e) / transverse_frequency(field)
    options = PropagationOptions(steps=4000, record_trajectory=True)
    _, traj = propagate(ProtonState(0.01, 0.0, 0.0, 0.0, 0.0, e), field, 2.0 * wavelength, options)
    x = traj[:, 1]
    z = traj[:, 0]
    i = np.flatnonzero((x[:-1] > 0) & (x[1:] <= 0))
    crossings = z[i] + (z[i + 1] - z[i]) * x[i] / (x[i] - x[i + 1])
    assert np.diff(crossings)[0] == pytest.approx(wavelength, rel=0.01)


def test_gauss_legendre_matches_rk4(field):
    a = start()
    n, length = 256, 92.0
    for _ in range(n):
        a = step_gauss_legendre(a, field, length / n)
    rec, _ = propagate(start(), field, length, PropagationOptions(steps=n))
    assert a.x == pytest.approx(rec.x, abs=1e-9)
    assert 1e3 * a.phi_x == pytest.approx(rec.theta_x, abs=1e-8)
    assert transverse_energy(a, field) == pytest.approx(transverse_energy(start(), field), rel=1e-10)


def test_step_rk4_matches_propagate(field):
    s = step_rk4(start(), field, 0.5)
    rec, _ = propagate(start(), field, 0.5, PropagationOptions(steps=1))
    assert (s.x, s.z) == (rec.x, 0.5)


def test_dechanneling_raises(field):
    near = ProtonState(field.geometry.site_spacing - 1e-6, 0.0, 0.0, 0.0, 0.0, 2e6)
    with pytest.raises(DechanneledError):
        step_rk4(near, field, 0.01)
    steep = ProtonState(0.0, 0.0, 0.2, 0.0, 0.0, 2e6)
    with pytest.raises(DechanneledError):
        step_gauss_legendre(steep, field, 0.01)


def test_invalid_inputs(field):
    with pytest.raises(ValueError):
        ProtonState(0, 0, 0, 0, 0, 0.0)
    with pytest.raises(ValueError):
        step_rk4(start(), field, 0.0)
    with pytest.raises(ValueError):
        PropagationOptions(step=10.0).n_steps(5.0)
    with pytest.raises(ValueError):
        kernel_model(field, PropagationOptions(field_mode="spline"))


def test_energy_loss_and_scattering_rates(field):
    s = start()
    rate = energy_loss_rate(s, field)
    assert rate > 0 and not energy_loss_clamped(s, field)
    assert scattering_rate(s, field) == pytest.approx(510998.95 / (2 * 938272088.16 * 2e6) * rate)
    rec, _ = propagate(s, field, 92.0, PropagationOptions(steps=256, energy_loss=True))
    assert 0 < 2e6 - rec.e_exit < 92.0 * 1e3


def test_scattering_kick_variance(field):
    g = np.random.default_rng(0)
    s = start()
    dz = 1.0
    kicks = np.array([multiple_scattering_kick(s, field, dz, g).phi_x - s.phi_x for _ in range(20000)])
    assert np.var(kicks) == pytest.approx(0.5 * scattering_rate(s, field) * dz, rel=0.05)


def test_backends_agree(field):
    if "compiled" not in backend.KERNELS:
        pytest.skip("compiled kernel not built")
    g = np.random.default_rng(5)
    n = 64
    x, y = g.uniform(-0.05, 0.05, (2, n))
    px, py = g.normal(0, 1e-3, (2, n))
    keys = np.arange(n, dtype=np.uint64)
    for mode in ("radial", "grid", "exact"):
        model = kernel_model(field, PropagationOptions(field_mode=mode))
        out = [backend.propagate_batch(model, x, y, px, py, np.full(n, 2e6), keys, 0.2, 200, True, True,
                                       backend=b) for b in ("compiled", "python")]
        np.testing.assert_allclose(out[0][0], out[1][0], rtol=1e-10, atol=1e-13)
        np.testing.assert_array_equal(out[0][1], out[1][1])


def test_trajectory_csv(field, tmp_path):
    _, traj = propagate(start(), field, 1.0, PropagationOptions(steps=4, record_trajectory=True))
    assert traj.shape == (5, 6)
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj)
    assert path.read_text().splitlines()[0].startswith("z_nm,")
