"""Flat description of a field that both propagation kernels consume.

Three ways of evaluating the force and the electron density:

``exact``
    Direct sums of K0/K1 over every string; the reference.
``radial``
    Sums over every string of a cubic Hermite table of the single-string
    radial profile.  Agrees with ``exact`` to ~1e-12 and avoids Bessel calls.
``grid``
    Bicubic Hermite table over the channel cross-section; cheapest per step,
    but loses accuracy within ~0.03 nm of a string axis.
"""
from dataclasses import dataclass

import numpy as np

from .constants import COULOMB_E2

MODE_EXACT = 0
MODE_GRID = 1
MODE_RADIAL = 2
MODES = {"exact": MODE_EXACT, "grid": MODE_GRID, "radial": MODE_RADIAL}

# Record flag bits.
DECHANNELED = 1
STRING_APPROACH = 2
ANGLE_LIMIT = 4
LEFT_MESH = 8
LOSS_CLAMPED = 16
ENERGY_EXHAUSTED = 32


@dataclass
class KernelModel:
    mode: int
    strings: np.ndarray  # (M, 2)
    coeffs_u: np.ndarray  # thermal K0 amplitudes, eV
    coeffs_ne: np.ndarray  # K0 amplitudes of n_e, nm^-3
    ks: np.ndarray
    z1: int
    site_spacing: float
    r_min: float
    phi_max: float
    mesh_limit: float
    grid: object = None  # tables.FieldTable
    radial: object = None  # tables.RadialTable


def density_coefficients(field):
    ks = np.asarray(field.wavenumbers, dtype=float)
    return field.thermal_coefficients * ks * ks / (4.0 * np.pi * field.geometry.z1 * COULOMB_E2)


def make_model(field, mode="radial", r_min_factor=1.0e-3, phi_max=0.1, grid=None, radial=None):
    """Collect what the kernels need from a field and its tables."""
    code = MODES[mode]
    g = field.geometry
    if code == MODE_EXACT and field.born_repulsion is not None:
        raise ValueError("the repulsion correction needs the 'radial' or 'grid' field mode")
    if code == MODE_GRID and grid is None:
        raise ValueError("grid mode needs a FieldTable")
    if code == MODE_RADIAL and radial is None:
        raise ValueError("radial mode needs a RadialTable")
    return KernelModel(
        mode=code,
        strings=np.ascontiguousarray(g.string_positions, dtype=float),
        coeffs_u=np.ascontiguousarray(field.thermal_coefficients, dtype=float),
        coeffs_ne=np.ascontiguousarray(density_coefficients(field), dtype=float),
        ks=np.ascontiguousarray(field.wavenumbers, dtype=float),
        z1=g.z1,
        site_spacing=g.site_spacing,
        r_min=r_min_factor * g.screening_radius,
        phi_max=phi_max,
        mesh_limit=g.mesh_limit,
        grid=grid,
        radial=radial,
    )
