"""Pure numpy propagation kernel, vectorised over protons.

Used when the compiled extension is unavailable and as the reference the
compiled kernel is tested against.  The step sequence is identical: one RK4
step of the transverse motion at fixed energy, then energy loss and a
scattering kick evaluated at the step midpoint, then the dechanneling checks.
"""
import numpy as np

from . import rng
from ._model import (
    ANGLE_LIMIT,
    DECHANNELED,
    ENERGY_EXHAUSTED,
    LEFT_MESH,
    LOSS_CLAMPED,
    MODE_EXACT,
    MODE_RADIAL,
    STRING_APPROACH,
)
from .bessel import UNDERFLOW_ARG, bessel_k0, bessel_k1
from .constants import COULOMB_E2, ELECTRON_MASS, HBAR_C, PROTON_MASS
from .tables import hermite_eval, radial_eval


def _k_sum(model, coeffs, x, y, order):
    dx = x[:, None] - model.strings[:, 0]
    dy = y[:, None] - model.strings[:, 1]
    r = np.maximum(np.hypot(dx, dy), 1e-300)
    if order == 0:
        total = np.zeros(x.shape)
        for c, k in zip(coeffs, model.ks):
            arg = np.minimum(k * r, UNDERFLOW_ARG)
            total += (c * bessel_k0(arg)).sum(axis=1)
        return total
    gx = np.zeros(x.shape)
    gy = np.zeros(x.shape)
    for c, k in zip(coeffs, model.ks):
        arg = np.minimum(k * r, UNDERFLOW_ARG)
        w = -c * k * bessel_k1(arg) / r
        gx += (w * dx).sum(axis=1)
        gy += (w * dy).sum(axis=1)
    return gx, gy


def _radial_sum(model, values, x, y, gradient):
    dx = x[:, None] - model.strings[:, 0]
    dy = y[:, None] - model.strings[:, 1]
    q = np.maximum(dx * dx + dy * dy, 1e-300)
    if not gradient:
        return radial_eval(model.radial, values, q).sum(axis=1)
    _, slope = radial_eval(model.radial, values, q, derivative=True)
    w = 2.0 * slope
    return (w * dx).sum(axis=1), (w * dy).sum(axis=1)


def potential_gradient(model, x, y):
    if model.mode == MODE_EXACT:
        return _k_sum(model, model.coeffs_u, x, y, 1)
    if model.mode == MODE_RADIAL:
        return _radial_sum(model, model.radial.potential, x, y, True)
    _, gx, gy = hermite_eval(model.grid, model.grid.potential, x, y, gradient=True)
    return gx, gy


def potential_value(model, x, y):
    if model.mode == MODE_EXACT:
        return _k_sum(model, model.coeffs_u, x, y, 0)
    if model.mode == MODE_RADIAL:
        return _radial_sum(model, model.radial.potential, x, y, False)
    return hermite_eval(model.grid, model.grid.potential, x, y)


def density(model, x, y):
    if model.mode == MODE_EXACT:
        return _k_sum(model, model.coeffs_ne, x, y, 0)
    if model.mode == MODE_RADIAL:
        return _radial_sum(model, model.radial.density, x, y, False)
    return hermite_eval(model.grid, model.grid.density, x, y)


def stopping(z1, ne, energy):
    """Electronic stopping (eV/nm) and a mask of clamped (invalid-log) entries."""
    ne, energy = np.broadcast_arrays(np.maximum(ne, 0.0), np.asarray(energy, dtype=float))
    mv2 = ELECTRON_MASS * 2.0 * energy / PROTON_MASS
    hw = HBAR_C * np.sqrt(4.0 * np.pi * COULOMB_E2 * ne / ELECTRON_MASS)
    with np.errstate(divide="ignore"):
        arg = 2.0 * mv2 / hw
    valid = (ne > 0.0) & (arg > 1.0)
    clamped = (ne > 0.0) & (arg <= 1.0)
    rate = np.zeros(ne.shape)
    rate[valid] = 4.0 * np.pi * z1 * z1 * COULOMB_E2**2 * ne[valid] / mv2[valid] * np.log(arg[valid])
    return rate, clamped


def _nearest_string_r2(model, x, y):
    s = model.site_spacing
    p = x / s
    q = y / s
    i0 = np.floor(p)
    j0 = np.floor(q)
    best = np.full(x.shape, np.inf)
    for di in (0.0, 1.0):
        for dj in (0.0, 1.0):
            i = i0 + di
            j = j0 + dj
            odd = np.mod(i + j, 2.0) == 1.0
            d2 = ((p - i) ** 2 + (q - j) ** 2) * s * s
            best = np.where(odd, np.minimum(best, d2), best)
    return best


def propagate_batch(model, x, y, px, py, e, keys, step, nsteps, energy_loss, scattering, force, snapshots):
    """Advance a batch of protons; see :func:`chanmc.backend.propagate_batch`."""
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    px = np.array(px, dtype=float)
    py = np.array(py, dtype=float)
    e = np.array(e, dtype=float)
    keys = np.asarray(keys, dtype=np.uint64)
    n = x.size
    snapshots = np.asarray(snapshots, dtype=np.int64)
    states = np.empty((snapshots.size, n, 5))
    flags_out = np.empty((snapshots.size, n), dtype=np.int32)
    flags = np.zeros(n, dtype=np.int32)
    r_min2 = model.r_min**2
    dz = step

    def accel(xa, ya, inv2e):
        if not force:
            return np.zeros_like(xa), np.zeros_like(ya)
        gx, gy = potential_gradient(model, xa, ya)
        return -inv2e * gx, -inv2e * gy

    def record(slot):
        states[slot, :, 0] = x
        states[slot, :, 1] = y
        states[slot, :, 2] = px
        states[slot, :, 3] = py
        states[slot, :, 4] = e
        flags_out[slot] = flags

    slot = 0
    while slot < snapshots.size and snapshots[slot] == 0:
        record(slot)
        slot += 1

    for s in range(nsteps):
        live = (flags & DECHANNELED) == 0
        if not live.any():
            while slot < snapshots.size:
                record(slot)
                slot += 1
            break
        inv2e = 0.5 / e
        ax1, ay1 = accel(x, y, inv2e)
        x2 = x + 0.5 * dz * px
        y2 = y + 0.5 * dz * py
        px2 = px + 0.5 * dz * ax1
        py2 = py + 0.5 * dz * ay1
        ax2, ay2 = accel(x2, y2, inv2e)
        x3 = x + 0.5 * dz * px2
        y3 = y + 0.5 * dz * py2
        px3 = px + 0.5 * dz * ax2
        py3 = py + 0.5 * dz * ay2
        ax3, ay3 = accel(x3, y3, inv2e)
        x4 = x + dz * px3
        y4 = y + dz * py3
        px4 = px + dz * ax3
        py4 = py + dz * ay3
        ax4, ay4 = accel(x4, y4, inv2e)
        nx = x + dz / 6.0 * (px + 2.0 * px2 + 2.0 * px3 + px4)
        ny = y + dz / 6.0 * (py + 2.0 * py2 + 2.0 * py3 + py4)
        npx = px + dz / 6.0 * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
        npy = py + dz / 6.0 * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
        new_e = e

        if energy_loss or scattering:
            ne = density(model, 0.5 * (x + nx), 0.5 * (y + ny))
            rate, clamped = stopping(model.z1, ne, e)
            flags = np.where(live & clamped, flags | LOSS_CLAMPED, flags)
            if scattering:
                var = 0.5 * ELECTRON_MASS / (2.0 * PROTON_MASS * e) * rate * dz
                g1, g2 = rng.normal_pair(keys, np.uint64(rng.DRAW_KICK + 2 * s))
                sd = np.sqrt(var)
                npx = npx + sd * g1
                npy = npy + sd * g2
            if energy_loss:
                new_e = e - rate * dz

        x = np.where(live, nx, x)
        y = np.where(live, ny, y)
        px = np.where(live, npx, px)
        py = np.where(live, npy, py)
        e = np.where(live, new_e, e)

        bad = np.zeros(n, dtype=np.int32)
        bad |= np.where(_nearest_string_r2(model, x, y) < r_min2, STRING_APPROACH, 0).astype(np.int32)
        bad |= np.where((np.abs(px) >= model.phi_max) | (np.abs(py) >= model.phi_max), ANGLE_LIMIT, 0).astype(
            np.int32
        )
        bad |= np.where(np.abs(x) + np.abs(y) > model.mesh_limit, LEFT_MESH, 0).astype(np.int32)
        bad |= np.where(e <= 0.0, ENERGY_EXHAUSTED, 0).astype(np.int32)
        bad = np.where(live & (bad != 0), bad | DECHANNELED, 0).astype(np.int32)
        flags = flags | bad

        while slot < snapshots.size and snapshots[slot] == s + 1:
            record(slot)
            slot += 1

    while slot < snapshots.size:
        record(slot)
        slot += 1
    return states, flags_out
