"""Transverse motion of a single proton through the crystal.

Equations of motion in the small-angle continuum model, with depth z as the
evolution variable::

    dx/dz = phi_x,   dphi_x/dz = -(1 / 2E) dU_th/dx   (same for y)

``E`` is the kinetic energy, held fixed within a step and reduced between
steps when electronic energy loss is enabled.
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import backend, rng
from ._model import ANGLE_LIMIT, DECHANNELED, STRING_APPROACH, make_model
from ._pykernel import potential_gradient, stopping
from .constants import COULOMB_E2, ELECTRON_MASS, HBAR, HBAR_C, PROTON_MASS
from .potential import electron_density, thermal_potential
from .tables import DEFAULT_SPACING, build_grid, build_radial


@dataclass(frozen=True)
class ProtonState:
    x: float  # nm
    y: float  # nm
    phi_x: float  # rad
    phi_y: float  # rad
    z: float  # nm
    e: float  # eV

    def __post_init__(self):
        if not self.e > 0:
            raise ValueError(f"proton energy must be positive, got {self.e}")


@dataclass(frozen=True)
class PropagationOptions:
    steps: int = 4096
    step: Optional[float] = None  # nm; overrides ``steps`` when given
    energy_loss: bool = False
    multiple_scattering: bool = False
    record_trajectory: bool = False
    transverse_force: bool = True
    field_mode: str = "radial"  # "radial", "exact" or "grid"
    table_spacing: float = DEFAULT_SPACING  # nm, grid mode
    r_min_factor: float = 1.0e-3  # dechanneling radius in screening radii
    phi_max: float = 0.1  # rad

    def n_steps(self, length):
        if not length > 0:
            raise ValueError("crystal length must be positive")
        if self.step is None:
            if self.steps < 1:
                raise ValueError("steps must be >= 1")
            return int(self.steps)
        if not 0 < self.step <= length:
            raise ValueError("step must satisfy 0 < step <= length")
        return int(np.ceil(length / self.step - 1e-9))


@dataclass(frozen=True)
class ExitRecord:
    proton_index: int
    x: float  # nm
    y: float  # nm
    theta_x: float  # mrad
    theta_y: float  # mrad
    e_exit: float  # eV
    flags: int

    @property
    def channeled(self):
        return not self.flags & DECHANNELED


def kernel_model(field, options=None):
    """Kernel description of ``field``; tables are built once and cached on the field."""
    options = options or PropagationOptions()
    mode = options.field_mode
    if mode == "exact":
        return make_model(field, "exact", options.r_min_factor, options.phi_max)
    if mode not in ("radial", "grid"):
        raise ValueError(f"unknown field mode {mode!r}")
    key = (mode, options.table_spacing if mode == "grid" else None)
    table = field._cache.get(key)
    if table is None:
        table = build_radial(field) if mode == "radial" else build_grid(field, options.table_spacing)
        field._cache[key] = table
    tables = {mode: table}
    return make_model(field, mode, options.r_min_factor, options.phi_max, **tables)


def transverse_energy(state, field):
    """``E (phi_x^2 + phi_y^2) + U_th(x, y)`` in eV."""
    return state.e * (state.phi_x**2 + state.phi_y**2) + float(thermal_potential(state.x, state.y, field))


def step_rk4(state, field, dz, options=None):
    """One classical fourth-order Runge-Kutta step of length ``dz`` (no dissipation).

    A step that ends in a dechanneling condition raises ``DechanneledError``.
    """
    if not dz > 0:
        raise ValueError("dz must be positive")
    options = options or PropagationOptions()
    model = kernel_model(field, options)
    states, flags = backend.propagate_batch(
        model, state.x, state.y, state.phi_x, state.phi_y, state.e, [0], dz, 1,
        force=options.transverse_force,
    )
    if flags[-1, 0] & DECHANNELED:
        raise DechanneledError(int(flags[-1, 0]))
    x, y, px, py, e = states[-1, 0]
    return ProtonState(x, y, px, py, state.z + dz, e)


_GL_C = np.sqrt(3.0) / 6.0
# Butcher table of the two-stage Gauss-Legendre method (order 4, symplectic).
GL_A = np.array([[0.25, 0.25 - _GL_C], [0.25 + _GL_C, 0.25]])
GL_B = np.array([0.5, 0.5])


def step_gauss_legendre(state, field, dz, options=None, tol=1e-15, max_iter=100):
    """One implicit two-stage Gauss-Legendre step (no dissipation).

    The stage equations are solved by fixed-point iteration, which converges
    for ``dz`` well below the transverse oscillation length.
    """
    if not dz > 0:
        raise ValueError("dz must be positive")
    options = options or PropagationOptions()
    model = kernel_model(field, options)
    y0 = np.array([state.x, state.y, state.phi_x, state.phi_y])
    inv2e = 0.5 / state.e

    def rhs(u):
        if options.transverse_force:
            gx, gy = potential_gradient(model, u[:, 0], u[:, 1])
        else:
            gx = gy = np.zeros(u.shape[0])
        return np.column_stack([u[:, 2], u[:, 3], -inv2e * gx, -inv2e * gy])

    k = np.tile(rhs(y0[None, :]), (2, 1))
    for _ in range(max_iter):
        k_new = rhs(y0 + dz * GL_A @ k)
        change = np.abs(k_new - k).max()
        k = k_new
        if change <= tol * max(np.abs(k).max(), 1e-300):
            break
    else:
        raise RuntimeError("Gauss-Legendre stage iteration did not converge; reduce dz")
    x, y, px, py = y0 + dz * GL_B @ k
    r2 = np.min((x - model.strings[:, 0]) ** 2 + (y - model.strings[:, 1]) ** 2)
    if r2 < model.r_min**2:
        raise DechanneledError(DECHANNELED | STRING_APPROACH)
    if max(abs(px), abs(py)) >= model.phi_max:
        raise DechanneledError(DECHANNELED | ANGLE_LIMIT)
    return ProtonState(x, y, px, py, state.z + dz, state.e)


class DechanneledError(RuntimeError):
    def __init__(self, flags):
        super().__init__(f"proton dechanneled (flags={flags:#x})")
        self.flags = flags


def electron_frequency(state, field):
    """Local plasma frequency ``sqrt(4 pi e^2 n_e / m_e)`` in rad/s."""
    ne = max(float(electron_density(state.x, state.y, field)), 0.0)
    return HBAR_C * np.sqrt(4.0 * np.pi * COULOMB_E2 * ne / ELECTRON_MASS) / HBAR


def energy_loss_rate(state, field):
    """Electronic stopping ``-dE/dz`` in eV/nm at the proton's position.

    Returns 0 where the logarithm's argument drops to 1 or below (the model is
    not valid there); use :func:`energy_loss_clamped` to detect that case.
    """
    ne = float(electron_density(state.x, state.y, field))
    rate, _ = stopping(field.geometry.z1, ne, state.e)
    return float(rate)


def energy_loss_clamped(state, field):
    ne = float(electron_density(state.x, state.y, field))
    _, clamped = stopping(field.geometry.z1, ne, state.e)
    return bool(clamped)


def scattering_rate(state, field):
    """Growth rate of the mean-square scattering angle, rad^2/nm."""
    return ELECTRON_MASS / (2.0 * PROTON_MASS * state.e) * energy_loss_rate(state, field)


def multiple_scattering_kick(state, field, dz, generator):
    """Add Gaussian angular kicks for a path ``dz``; variance per component is half the total."""
    if not dz > 0:
        raise ValueError("dz must be positive")
    sd = np.sqrt(0.5 * scattering_rate(state, field) * dz)
    if sd == 0.0:
        return state
    gx, gy = generator.standard_normal(2)
    return replace(state, phi_x=state.phi_x + sd * gx, phi_y=state.phi_y + sd * gy)


def propagate(initial, field, length, options=None, seed=0, index=0):
    """Integrate one proton from its entry state through ``length`` nm of crystal.

    Returns ``(record, trajectory)``.  ``trajectory`` is ``None`` unless
    ``options.record_trajectory`` is set, in which case it is an array of
    rows ``(z, x, y, phi_x, phi_y, e)``, one per step including the entry.
    Random kicks come from the stream of ``(seed, index)``.
    """
    options = options or PropagationOptions()
    nsteps = options.n_steps(length)
    dz = length / nsteps
    model = kernel_model(field, options)
    snapshots = np.arange(nsteps + 1) if options.record_trajectory else [nsteps]
    states, flags = backend.propagate_batch(
        model, initial.x, initial.y, initial.phi_x, initial.phi_y, initial.e,
        rng.stream_key(seed, [index]), dz, nsteps,
        energy_loss=options.energy_loss, scattering=options.multiple_scattering,
        force=options.transverse_force, snapshots=snapshots,
    )
    x, y, px, py, e = states[-1, 0]
    record = ExitRecord(index, x, y, 1e3 * px, 1e3 * py, e, int(flags[-1, 0]))
    trajectory = None
    if options.record_trajectory:
        z = initial.z + dz * np.asarray(snapshots, dtype=float)
        trajectory = np.column_stack([z, states[:, 0, :]])
    return record, trajectory


def write_trajectory_csv(path, trajectory):
    header = "z_nm,x_nm,y_nm,phi_x_rad,phi_y_rad,e_eV"
    np.savetxt(path, trajectory, delimiter=",", header=header, comments="", fmt="%.12g")
