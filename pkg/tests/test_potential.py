import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from chanmc.constants import COULOMB_E2
from chanmc.crystal import ChannelGeometry, CrystalConfig, build_channel
from chanmc.potential import (PotentialField, SingularityError, channel_potential, electron_density,
                              field_derivatives, potential_gradient, potential_hessian, string_potential,
                              thermal_potential, transverse_frequency)

half = 0.5 * 0.135775
points = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(lambda p: (half * (p[0] + p[1]) * 0.9,
                                                                       half * (p[0] - p[1]) * 0.9))


def test_additivity(field):
    x, y = 0.031, -0.012
    r = np.hypot(x - field.geometry.string_positions[:, 0], y - field.geometry.string_positions[:, 1])
    assert channel_potential(x, y, field) == pytest.approx(string_potential(r, field).sum(), rel=1e-14)


def test_symmetry(field):
    u = channel_potential(0.03, 0.01, field)
    for x, y in [(-0.03, 0.01), (0.03, -0.01), (0.01, 0.03)]:
        assert channel_potential(x, y, field) == pytest.approx(u, rel=1e-12)


def test_centre_is_minimum(field):
    gx, gy = potential_gradient(0.0, 0.0, field, thermal=True)
    assert abs(gx) < 1e-10 and abs(gy) < 1e-10
    assert thermal_potential(0.0, 0.0, field) < thermal_potential(0.02, 0.0, field)


def test_singular_on_string(field):
    with pytest.raises(SingularityError):
        channel_potential(field.geometry.site_spacing, 0.0, field)


@settings(max_examples=50, deadline=None)
@given(points)
def test_gradient_matches_finite_differences(p):
    field = PotentialField(build_channel())
    x, y = p
    h = 1e-5
    for thermal in (False, True):
        u = field_derivatives
        gx, gy = potential_gradient(x, y, field, thermal)
        fx = (u(field, x + h, y, thermal)[0] - u(field, x - h, y, thermal)[0]) / (2 * h)
        fy = (u(field, x, y + h, thermal)[0] - u(field, x, y - h, thermal)[0]) / (2 * h)
        assert gx == pytest.approx(fx, rel=1e-5, abs=1e-4)
        assert gy == pytest.approx(fy, rel=1e-5, abs=1e-4)


def test_thermal_gradient_is_derivative_of_thermal_potential(field):
    x, y, h = 0.021, 0.034, 1e-5
    gx, gy = potential_gradient(x, y, field, thermal=True)
    fx = (thermal_potential(x + h, y, field) - thermal_potential(x - h, y, field)) / (2 * h)
    assert gx == pytest.approx(fx, rel=1e-6)


def test_hessian_mixed_term(field):
    x, y, h = 0.02, 0.03, 1e-5
    uxy = field_derivatives(field, x, y, False)[5]
    gx_up = potential_gradient(x, y + h, field)[0]
    gx_dn = potential_gradient(x, y - h, field)[0]
    assert uxy == pytest.approx((gx_up - gx_dn) / (2 * h), rel=1e-6)


def test_lattice_cutoff_converged():
    k3 = PotentialField(build_channel(CrystalConfig(coordination_lines=3)))
    k5 = PotentialField(build_channel(CrystalConfig(coordination_lines=5)))
    assert abs(channel_potential(0, 0, k5) / channel_potential(0, 0, k3) - 1) < 1e-3


def test_thermal_vibrations_off_restores_bare(geometry):
    cold = PotentialField(geometry, thermal_enabled=False)
    assert thermal_potential(0.01, 0.02, cold) == channel_potential(0.01, 0.02, cold)


def test_electron_count_per_string():
    """Without thermal smearing an isolated string holds Z2 electrons per atomic spacing."""
    base = build_channel()
    single = ChannelGeometry(np.zeros((1, 2)), base.d_string, base.lattice_constant, base.screening_radius, 1, 14,
                             base.sigma_th, base.energy, 1)
    f = PotentialField(single, thermal_enabled=False)
    # Radial integral in log r handles the logarithmic singularity at the axis.
    total, _ = integrate.quad(lambda t: 2 * np.pi * np.exp(2 * t) * electron_density(np.exp(t), 0.0, f),
                              np.log(1e-9), np.log(2.0), limit=400)
    assert total == pytest.approx(14 / base.d_string, rel=1e-6)


def test_density_positive_and_poisson(field):
    x, y = 0.01, -0.04
    uxx, uyy = potential_hessian(x, y, field, thermal=True)
    ne = electron_density(x, y, field)
    assert ne > 0
    assert ne == pytest.approx((uxx + uyy) / (4 * np.pi * COULOMB_E2), rel=1e-12)


def test_transverse_frequency_energy_independent(field):
    assert transverse_frequency(field, 1e6) == transverse_frequency(field, 5e6)
