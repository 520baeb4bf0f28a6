"""Precomputed Hermite tables of the thermal potential and electron density.

Two kinds of table back the fast field modes:

* :class:`RadialTable` holds the single-string profile ``g`` as a function
  of ``q = r^2``.  Nodes sit where the low mantissa bits of ``q`` are zero,
  so a cell is found from the float's bit pattern (no log or sqrt) and the
  relative node spacing never exceeds ``2**-MANTISSA_BITS``.  Summing the
  cubic Hermite interpolant over all strings reproduces the closed-form field
  to about 1e-12.
* :class:`FieldTable` holds ``U, U_x, U_y, U_xy`` (and the same for ``n_e``)
  on a square grid; the bicubic Hermite interpolant is C1.

In both cases the integrator's force is the exact gradient of the
interpolant, so the interpolated transverse energy is conserved to
integrator accuracy.
"""
from dataclasses import dataclass

import numpy as np

from ._model import density_coefficients
from .bessel import UNDERFLOW_ARG, bessel_k0, bessel_k1
from .potential import _born_derivatives, k0_sum_derivatives

try:
    from ._kernels import k0_sum_points as _compiled_k0_sum
except ImportError:  # pragma: no cover - exercised only without the extension
    _compiled_k0_sum = None

DEFAULT_SPACING = 0.002  # nm, grid tables
MANTISSA_BITS = 10  # radial nodes per binade of q = 2**MANTISSA_BITS
RADIAL_RMIN = 1.0e-6  # nm
_CHUNK = 4096


@dataclass(frozen=True)
class FieldTable:
    origin: float  # coordinate of node 0 on both axes, nm
    spacing: float
    n: int
    potential: np.ndarray  # (4, n, n): U_th, dU/dx, dU/dy, d2U/dxdy
    density: np.ndarray  # (4, n, n): n_e and the same derivatives


@dataclass(frozen=True)
class RadialTable:
    shift: int  # 52 - mantissa bits
    base: int  # bit pattern of the first node, shifted
    nodes: np.ndarray  # (n + 1,) node positions in q = r^2, nm^2
    potential: np.ndarray  # (n, 5) per cell: g0, h g0', g1, h g1', 1/h  (primes are d/dq)
    density: np.ndarray  # (n, 5): the same for n_e

    @property
    def n(self):
        return self.nodes.size - 1


def _k0_sum_points(geometry, coeffs, ks, x, y):
    if _compiled_k0_sum is not None:
        return _compiled_k0_sum(geometry.string_positions, coeffs, ks, x, y)
    out = np.empty((6, x.size))
    for start in range(0, x.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[:, sl] = k0_sum_derivatives(geometry, coeffs, ks, x[sl], y[sl])
    return out


def _quadrant_fill(values, n):
    """Extend ``(4, m, m)`` values on the ``x, y >= 0`` quadrant to the full grid."""
    c = (n - 1) // 2
    full = np.empty((4, n, n))
    full[:, c:, c:] = values
    # Parity of (f, f_x, f_y, f_xy) under x -> -x and y -> -y.
    px = np.array([1.0, -1.0, 1.0, -1.0])[:, None, None]
    py = np.array([1.0, 1.0, -1.0, -1.0])[:, None, None]
    full[:, :c, c:] = px * values[:, :0:-1, :]
    full[:, c:, :c] = py * values[:, :, :0:-1]
    full[:, :c, :c] = px * py * values[:, :0:-1, :0:-1]
    return full


def build_grid(field, spacing=DEFAULT_SPACING, half_width=None):
    """Tabulate ``U_th`` and ``n_e`` on a centred square grid over the trusted mesh region.

    Uses the square symmetry of the channel: only the ``x, y >= 0`` quadrant
    is evaluated.
    """
    geometry = field.geometry
    if half_width is None:
        half_width = geometry.mesh_limit + 4.0 * spacing
    half = int(np.ceil(half_width / spacing))
    n = 2 * half + 1
    origin = -half * spacing
    q = spacing * np.arange(half + 1)
    gx, gy = np.meshgrid(q, q, indexing="ij")
    gx = gx.ravel()
    gy = gy.ravel()
    ks = np.asarray(field.wavenumbers, dtype=float)

    def quadrant(coeffs, with_born):
        d = _k0_sum_points(geometry, np.asarray(coeffs, dtype=float), ks, gx, gy)
        if with_born and field.born_repulsion is not None:
            d = d + np.asarray(_born_derivatives(geometry, field.born_repulsion, gx, gy))
        return d[[0, 1, 2, 5]].reshape(4, half + 1, half + 1)

    pot = _quadrant_fill(quadrant(field.thermal_coefficients, True), n)
    dens = _quadrant_fill(quadrant(density_coefficients(field), False), n)
    return FieldTable(origin=origin, spacing=spacing, n=n, potential=pot, density=dens)


def _profile(coeffs, ks, r):
    g = np.zeros_like(r)
    dg = np.zeros_like(r)
    for c, k in zip(coeffs, ks):
        arg = k * r
        live = arg < UNDERFLOW_ARG
        g[live] += c * bessel_k0(arg[live])
        dg[live] -= c * k * bessel_k1(arg[live])
    return g, dg


def _cells(g, dg_dq, nodes):
    h = np.diff(nodes)
    return np.ascontiguousarray(np.column_stack([g[:-1], h * dg_dq[:-1], g[1:], h * dg_dq[1:], 1.0 / h]))


def build_radial(field, mantissa_bits=MANTISSA_BITS, r_max=None):
    """Tabulate the single-string profiles of ``U_th`` and ``n_e`` out to ``r_max``."""
    geometry = field.geometry
    if r_max is None:
        reach = np.abs(geometry.string_positions).sum(axis=1).max()
        r_max = np.sqrt(2.0) * (reach + geometry.mesh_limit) + 0.05
    shift = 52 - int(mantissa_bits)
    lo = int(np.array(RADIAL_RMIN**2).view(np.uint64)) >> shift
    hi = (int(np.array(float(r_max) ** 2).view(np.uint64)) >> shift) + 1
    nodes = (np.arange(lo, hi + 1, dtype=np.uint64) << np.uint64(shift)).view(np.float64)
    r = np.sqrt(nodes)
    ks = np.asarray(field.wavenumbers, dtype=float)
    g, dg = _profile(field.thermal_coefficients, ks, r)
    if field.born_repulsion is not None:
        f, d1, _ = field.born_repulsion.radial(r)
        g = g + f
        dg = dg + d1
    ne, dne = _profile(density_coefficients(field), ks, r)
    pot = _cells(g, dg / (2.0 * r), nodes)
    dens = _cells(ne, dne / (2.0 * r), nodes)
    return RadialTable(shift=shift, base=lo, nodes=nodes, potential=pot, density=dens)


def _basis(s):
    s2 = s * s
    s3 = s2 * s
    return (2 * s3 - 3 * s2 + 1, -2 * s3 + 3 * s2, s3 - 2 * s2 + s, s3 - s2)


def _dbasis(s):
    s2 = s * s
    return (6 * s2 - 6 * s, -6 * s2 + 6 * s, 3 * s2 - 4 * s + 1, 3 * s2 - 2 * s)


def radial_eval(table, cells, q, derivative=False):
    """Cubic Hermite interpolant of a radial profile at ``q = r^2``.

    With ``derivative`` also returns ``dg/dq``.
    """
    q = np.ascontiguousarray(q, dtype=float)
    bits = q.view(np.uint64)
    i = (bits >> np.uint64(table.shift)).astype(np.int64) - table.base
    inside = (i >= 0) & (i < table.n)
    mask = np.uint64((1 << table.shift) - 1)
    t = (bits & mask).astype(float) * 2.0 ** -table.shift
    i = np.clip(i, 0, table.n - 1)
    c = cells[i]
    # Outside the table the end cell is extrapolated.
    t = np.where(inside, t, (q - table.nodes[i]) * c[..., 4])
    b = _basis(t)
    value = c[..., 0] * b[0] + c[..., 2] * b[1] + c[..., 1] * b[2] + c[..., 3] * b[3]
    if not derivative:
        return value
    d = _dbasis(t)
    slope = ((c[..., 0] - c[..., 2]) * d[0] + c[..., 1] * d[2] + c[..., 3] * d[3]) * c[..., 4]
    return value, slope


def hermite_eval(table, values, x, y, gradient=False):
    """Evaluate one gridded field (``table.potential`` or ``table.density``)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = table.spacing
    px = (x - table.origin) / h
    py = (y - table.origin) / h
    i = np.clip(np.floor(px).astype(np.int64), 0, table.n - 2)
    j = np.clip(np.floor(py).astype(np.int64), 0, table.n - 2)
    t = px - i
    u = py - j
    f, fx, fy, fxy = values
    bt = _basis(t)
    bu = _basis(u)

    def combine(at, au):
        total = 0.0
        for a in (0, 1):
            for b in (0, 1):
                ia = i + a
                jb = j + b
                total = total + (
                    f[ia, jb] * at[a] * au[b]
                    + h * fx[ia, jb] * at[2 + a] * au[b]
                    + h * fy[ia, jb] * at[a] * au[2 + b]
                    + h * h * fxy[ia, jb] * at[2 + a] * au[2 + b]
                )
        return total

    value = combine(bt, bu)
    if not gradient:
        return value
    return value, combine(_dbasis(t), bu) / h, combine(bt, _dbasis(u)) / h
