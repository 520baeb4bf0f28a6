"""Moliere continuum potential of the <100> channel and derived fields.

Each string contributes ``c_i K0(k_i r)`` per Moliere term with
``c_i = (2 Z1 Z2 e^2 / d) alpha_i`` and ``k_i = beta_i / a``.  Because
``Laplacian K0(k r) = k^2 K0(k r)`` away from the axis, the thermally averaged
potential ``U + (sigma^2 / 2) Laplacian U`` is again a K0 sum with
coefficients ``c_i (1 + sigma^2 k_i^2 / 2)``; gradients and Hessians of both
are therefore available in closed form.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bessel import UNDERFLOW_ARG, bessel_k0, bessel_k1
from .constants import COULOMB_E2, PROTON_MASS, SPEED_OF_LIGHT

MOLIERE_ALPHA = (0.35, 0.55, 0.10)
MOLIERE_BETA = (0.30, 1.20, 6.00)

# Points closer than this to a string axis are treated as on the axis.
AXIS_TOLERANCE = 1.0e-12  # nm


class SingularityError(ValueError):
    """Evaluation requested on (or numerically at) a string axis."""


class DegenerateChannelError(ValueError):
    """The potential has no confining curvature at the channel axis."""


@dataclass(frozen=True)
class BornRepulsion:
    """Optional short-range repulsion added to every string.

    ``form="power"`` adds ``b / r**n``; ``form="exponential"`` adds the
    Born-Mayer term ``b * exp(-r / rho)``.  Energies in eV, lengths in nm.
    """

    b: float
    n: float = 12.0
    form: str = "power"
    rho: float = 0.03

    def radial(self, r):
        """Return ``(f, f', f'')`` of the radial profile at ``r``."""
        if self.form == "power":
            f = self.b * r ** (-self.n)
            return f, -self.n * f / r, self.n * (self.n + 1.0) * f / (r * r)
        if self.form == "exponential":
            f = self.b * np.exp(-r / self.rho)
            return f, -f / self.rho, f / self.rho**2
        raise ValueError(f"unknown repulsion form {self.form!r}")


@dataclass(frozen=True)
class PotentialField:
    geometry: object
    moliere_alpha: tuple = MOLIERE_ALPHA
    moliere_beta: tuple = MOLIERE_BETA
    thermal_enabled: bool = True
    born_repulsion: Optional[BornRepulsion] = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if abs(sum(self.moliere_alpha) - 1.0) > 1e-12:
            raise ValueError("Moliere alpha coefficients must sum to 1")
        if len(self.moliere_alpha) != len(self.moliere_beta):
            raise ValueError("alpha and beta must have the same length")

    @property
    def prefactor(self):
        """``2 Z1 Z2 e^2 / d`` in eV."""
        g = self.geometry
        return 2.0 * g.z1 * g.z2 * COULOMB_E2 / g.d_string

    @property
    def wavenumbers(self):
        return np.asarray(self.moliere_beta, dtype=float) / self.geometry.screening_radius

    @property
    def coefficients(self):
        """Per-term amplitudes ``c_i`` of the bare potential, eV."""
        return self.prefactor * np.asarray(self.moliere_alpha, dtype=float)

    @property
    def sigma_th(self):
        return self.geometry.sigma_th if self.thermal_enabled else 0.0

    @property
    def thermal_coefficients(self):
        k = self.wavenumbers
        return self.coefficients * (1.0 + 0.5 * self.sigma_th**2 * k * k)


def _offsets(geometry, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    x = np.broadcast_to(x, shape).reshape(-1, 1)
    y = np.broadcast_to(y, shape).reshape(-1, 1)
    pos = geometry.string_positions
    dx = x - pos[:, 0]
    dy = y - pos[:, 1]
    r = np.hypot(dx, dy)
    if np.any(r < AXIS_TOLERANCE):
        raise SingularityError("point coincides with an atomic string axis")
    return shape, dx, dy, r


def k0_sum_derivatives(geometry, coeffs, ks, x, y):
    """Value, gradient and Hessian of ``sum_j sum_i c_i K0(k_i r_j)``.

    Returns ``(f, fx, fy, fxx, fyy, fxy)`` with the broadcast shape of
    ``x`` and ``y``.
    """
    shape, dx, dy, r = _offsets(geometry, x, y)
    out = [np.zeros(dx.shape[0]) for _ in range(6)]
    inv_r = 1.0 / r
    ux = dx * inv_r
    uy = dy * inv_r
    for c, k in zip(coeffs, ks):
        arg = k * r
        live = arg < UNDERFLOW_ARG
        k0 = np.zeros_like(arg)
        k1 = np.zeros_like(arg)
        k0[live] = bessel_k0(arg[live])
        k1[live] = bessel_k1(arg[live])
        d1 = -c * k * k1  # f'(r)
        a = c * k * k * k0  # part of f''(r)
        b = c * k * k1 * inv_r  # f'(r) / r with sign flipped
        out[0] += (c * k0).sum(axis=1)
        out[1] += (d1 * ux).sum(axis=1)
        out[2] += (d1 * uy).sum(axis=1)
        out[3] += (a * ux * ux + b * (2.0 * ux * ux - 1.0)).sum(axis=1)
        out[4] += (a * uy * uy + b * (2.0 * uy * uy - 1.0)).sum(axis=1)
        out[5] += ((a + 2.0 * b) * ux * uy).sum(axis=1)
    return tuple(o.reshape(shape) if shape else o[0] for o in out)


def _born_derivatives(geometry, born, x, y):
    shape, dx, dy, r = _offsets(geometry, x, y)
    f, d1, d2 = born.radial(r)
    ux = dx / r
    uy = dy / r
    dr = d1 / r
    out = (
        f.sum(axis=1),
        (d1 * ux).sum(axis=1),
        (d1 * uy).sum(axis=1),
        (d2 * ux * ux + dr * (1.0 - ux * ux)).sum(axis=1),
        (d2 * uy * uy + dr * (1.0 - uy * uy)).sum(axis=1),
        ((d2 - dr) * ux * uy).sum(axis=1),
    )
    return tuple(o.reshape(shape) if shape else o[0] for o in out)


def field_derivatives(field, x, y, thermal=True):
    """``(U, Ux, Uy, Uxx, Uyy, Uxy)`` of the bare or thermally averaged potential."""
    coeffs = field.thermal_coefficients if thermal else field.coefficients
    out = k0_sum_derivatives(field.geometry, coeffs, field.wavenumbers, x, y)
    if field.born_repulsion is not None:
        extra = _born_derivatives(field.geometry, field.born_repulsion, x, y)
        out = tuple(a + b for a, b in zip(out, extra))
    return out


def string_potential(r, field):
    """Continuum potential of a single string at distance ``r`` (nm), in eV."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0.0)):
        raise SingularityError("string potential is singular at r <= 0")
    total = np.zeros_like(r)
    for c, k in zip(field.coefficients, field.wavenumbers):
        arg = k * r
        total = total + c * np.where(arg < UNDERFLOW_ARG, bessel_k0(np.minimum(arg, UNDERFLOW_ARG)), 0.0)
    return total if total.ndim else float(total)


def channel_potential(x, y, field):
    """Bare continuum potential summed over all strings, eV."""
    return field_derivatives(field, x, y, thermal=False)[0]


def potential_gradient(x, y, field, thermal=False):
    _, ux, uy, *_ = field_derivatives(field, x, y, thermal=thermal)
    return ux, uy


def potential_hessian(x, y, field, thermal=False):
    """Second partial derivatives ``(u_xx, u_yy)`` in eV/nm^2."""
    _, _, _, uxx, uyy, _ = field_derivatives(field, x, y, thermal=thermal)
    return uxx, uyy


def laplacian(x, y, field, thermal=False):
    """Analytic Laplacian ``sum c_i k_i^2 K0(k_i r)`` of the potential, eV/nm^2."""
    coeffs = field.thermal_coefficients if thermal else field.coefficients
    ks = field.wavenumbers
    lap = k0_sum_derivatives(field.geometry, coeffs * ks * ks, ks, x, y)[0]
    if field.born_repulsion is not None:
        extra = _born_derivatives(field.geometry, field.born_repulsion, x, y)
        lap = lap + extra[3] + extra[4]
    return lap


def thermal_potential(x, y, field):
    """Thermally averaged potential ``U + (sigma_th^2 / 2)(U_xx + U_yy)``, eV."""
    u = channel_potential(x, y, field)
    if field.sigma_th == 0.0:
        return u
    uxx, uyy = potential_hessian(x, y, field)
    return u + 0.5 * field.sigma_th**2 * (uxx + uyy)


def electron_density(x, y, field):
    """Electron density averaged along z, nm^-3.

    Poisson's equation for the thermally averaged Moliere potential gives
    ``n_e = Laplacian U_th / (4 pi Z1 e^2)``.  The optional repulsion term is
    not part of the atomic charge cloud and is left out.
    """
    coeffs = field.thermal_coefficients
    ks = field.wavenumbers
    lap = k0_sum_derivatives(field.geometry, coeffs * ks * ks, ks, x, y)[0]
    return lap / (4.0 * np.pi * field.geometry.z1 * COULOMB_E2)


def axis_curvature(field):
    """``d^2 U_th / dx^2`` at the channel axis, eV/nm^2."""
    return float(field_derivatives(field, 0.0, 0.0, thermal=True)[3])


def transverse_frequency(field, e=None):
    """Frequency (Hz) of small transverse oscillations about the channel axis.

    Non-relativistic, so independent of the proton energy ``e``; the argument
    is accepted for symmetry with the other kinematic helpers.
    """
    k = axis_curvature(field)
    if not k > 0.0:
        raise DegenerateChannelError(f"axis curvature {k} eV/nm^2 is not confining")
    omega = SPEED_OF_LIGHT * np.sqrt(k / PROTON_MASS)
    return omega / (2.0 * np.pi)
