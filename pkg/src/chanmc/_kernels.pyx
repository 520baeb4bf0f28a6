# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernel.

Same step sequence and random streams as ``chanmc._pykernel``; protons are
processed one at a time with the GIL released.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, log, cos, sin, floor, fabs, M_PI

from ._bessel_coeffs import K0_CHEB, K1_CHEB
from .bessel import I0_SERIES, K0_SERIES, I1_SERIES, K1_SERIES, UNDERFLOW_ARG
from .constants import COULOMB_E2, ELECTRON_MASS, HBAR_C, PROTON_MASS, EULER_GAMMA
from ._model import (
    ANGLE_LIMIT, DECHANNELED, ENERGY_EXHAUSTED, LEFT_MESH, LOSS_CLAMPED,
    MODE_EXACT, MODE_GRID, MODE_RADIAL, STRING_APPROACH,
)

cnp.import_array()

ctypedef unsigned long long u64

cdef double _K0C[64]
cdef double _K1C[64]
cdef int _NK0 = len(K0_CHEB)
cdef int _NK1 = len(K1_CHEB)
cdef double _I0S[32]
cdef double _K0S[32]
cdef double _I1S[32]
cdef double _K1S[32]
cdef int _NS = len(I0_SERIES)
cdef double _UNDERFLOW = UNDERFLOW_ARG
cdef double _GAMMA = EULER_GAMMA

for _i in range(_NK0):
    _K0C[_i] = K0_CHEB[_i]
for _i in range(_NK1):
    _K1C[_i] = K1_CHEB[_i]
for _i in range(_NS):
    _I0S[_i] = I0_SERIES[_i]
    _K0S[_i] = K0_SERIES[_i]
    _I1S[_i] = I1_SERIES[_i]
    _K1S[_i] = K1_SERIES[_i]

cdef double _E2 = COULOMB_E2
cdef double _ME = ELECTRON_MASS
cdef double _MP = PROTON_MASS
cdef double _HBARC = HBAR_C
cdef int _DECH = DECHANNELED
cdef int _STR = STRING_APPROACH
cdef int _ANG = ANGLE_LIMIT
cdef int _MESH = LEFT_MESH
cdef int _CLAMP = LOSS_CLAMPED
cdef int _EXH = ENERGY_EXHAUSTED

cdef u64 _GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline double _clenshaw(double* c, int n, double t) noexcept nogil:
    cdef double b1 = 0.0, b2 = 0.0, tmp, t2 = 2.0 * t
    cdef int j
    for j in range(n - 1, 0, -1):
        tmp = t2 * b1 - b2 + c[j]
        b2 = b1
        b1 = tmp
    return t * b1 - b2 + c[0]


cdef inline double _horner(double* c, int n, double q) noexcept nogil:
    cdef double acc = 0.0
    cdef int j
    for j in range(n - 1, -1, -1):
        acc = acc * q + c[j]
    return acc


cdef inline double _k0(double x) noexcept nogil:
    cdef double q
    if x <= 2.0:
        q = 0.25 * x * x
        return -(log(0.5 * x) + _GAMMA) * _horner(_I0S, _NS, q) + q * _horner(&_K0S[1], _NS - 1, q)
    if x >= _UNDERFLOW:
        return 0.0
    return exp(-x) * sqrt(0.5 * M_PI / x) * _clenshaw(_K0C, _NK0, 4.0 / x - 1.0)


cdef inline double _k1(double x) noexcept nogil:
    cdef double q, i1
    if x <= 2.0:
        q = 0.25 * x * x
        i1 = 0.5 * x * _horner(_I1S, _NS, q)
        return 1.0 / x + log(0.5 * x) * i1 - 0.25 * x * _horner(_K1S, _NS, q)
    if x >= _UNDERFLOW:
        return 0.0
    return exp(-x) * sqrt(0.5 * M_PI / x) * _clenshaw(_K1C, _NK1, 4.0 / x - 1.0)


def k0_array(double[::1] x):
    """Vectorised K0 used by the benchmark and tests."""
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _k0(x[i])
    return out


def k1_array(double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _k1(x[i])
    return out


cdef inline u64 _mix64(u64 z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(u64 key, u64 counter) noexcept nogil:
    return <double>(_mix64(key + (counter + 1) * _GOLDEN) >> 11) * 1.1102230246251565e-16


cdef struct Field:
    int mode
    int nstr
    int nterm
    double* sx
    double* sy
    double* cu
    double* cne
    double* ks
    double origin
    double h
    int n
    double* tu
    double* tne
    u64 shift
    long long base
    u64 mask
    double tscale
    long long nr
    double* qnodes
    double* ru
    double* rne


cdef inline void _grad_exact(Field* f, double x, double y, double* gx, double* gy) noexcept nogil:
    cdef int j, i
    cdef double dx, dy, r, w, arg, sx = 0.0, sy = 0.0
    for j in range(f.nstr):
        dx = x - f.sx[j]
        dy = y - f.sy[j]
        r = sqrt(dx * dx + dy * dy)
        if r < 1e-300:
            r = 1e-300
        for i in range(f.nterm):
            arg = f.ks[i] * r
            if arg < _UNDERFLOW:
                w = -f.cu[i] * f.ks[i] * _k1(arg) / r
                sx += w * dx
                sy += w * dy
    gx[0] = sx
    gy[0] = sy


cdef inline double _value_exact(Field* f, double* coeffs, double x, double y) noexcept nogil:
    cdef int j, i
    cdef double dx, dy, r, arg, total = 0.0
    for j in range(f.nstr):
        dx = x - f.sx[j]
        dy = y - f.sy[j]
        r = sqrt(dx * dx + dy * dy)
        if r < 1e-300:
            r = 1e-300
        for i in range(f.nterm):
            arg = f.ks[i] * r
            if arg < _UNDERFLOW:
                total += coeffs[i] * _k0(arg)
    return total


cdef inline void _hermite(Field* f, double* tab, double x, double y, int want_grad,
                          double* val, double* gx, double* gy) noexcept nogil:
    cdef double h = f.h
    cdef int n = f.n
    cdef double px = (x - f.origin) / h
    cdef double py = (y - f.origin) / h
    cdef long i = <long>floor(px)
    cdef long j = <long>floor(py)
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    if j < 0:
        j = 0
    elif j > n - 2:
        j = n - 2
    cdef double t = px - i, u = py - j
    cdef double t2 = t * t, t3 = t2 * t, u2 = u * u, u3 = u2 * u
    cdef double bt[4]
    cdef double bu[4]
    cdef double dt[4]
    cdef double du[4]
    bt[0] = 2 * t3 - 3 * t2 + 1
    bt[1] = -2 * t3 + 3 * t2
    bt[2] = t3 - 2 * t2 + t
    bt[3] = t3 - t2
    bu[0] = 2 * u3 - 3 * u2 + 1
    bu[1] = -2 * u3 + 3 * u2
    bu[2] = u3 - 2 * u2 + u
    bu[3] = u3 - u2
    cdef Py_ssize_t plane = <Py_ssize_t>n * n
    cdef double* F = tab
    cdef double* FX = tab + plane
    cdef double* FY = tab + 2 * plane
    cdef double* FXY = tab + 3 * plane
    cdef int a, b
    cdef Py_ssize_t idx
    cdef double v = 0.0, vx = 0.0, vy = 0.0
    if want_grad:
        dt[0] = 6 * t2 - 6 * t
        dt[1] = -6 * t2 + 6 * t
        dt[2] = 3 * t2 - 4 * t + 1
        dt[3] = 3 * t2 - 2 * t
        du[0] = 6 * u2 - 6 * u
        du[1] = -6 * u2 + 6 * u
        du[2] = 3 * u2 - 4 * u + 1
        du[3] = 3 * u2 - 2 * u
    for a in range(2):
        for b in range(2):
            idx = (i + a) * n + (j + b)
            v += (F[idx] * bt[a] * bu[b] + h * FX[idx] * bt[2 + a] * bu[b]
                  + h * FY[idx] * bt[a] * bu[2 + b] + h * h * FXY[idx] * bt[2 + a] * bu[2 + b])
            if want_grad:
                vx += (F[idx] * dt[a] * bu[b] + h * FX[idx] * dt[2 + a] * bu[b]
                       + h * FY[idx] * dt[a] * bu[2 + b] + h * h * FXY[idx] * dt[2 + a] * bu[2 + b])
                vy += (F[idx] * bt[a] * du[b] + h * FX[idx] * bt[2 + a] * du[b]
                       + h * FY[idx] * bt[a] * du[2 + b] + h * h * FXY[idx] * bt[2 + a] * du[2 + b])
    val[0] = v
    if want_grad:
        gx[0] = vx / h
        gy[0] = vy / h


cdef inline void _radial(Field* f, double* tab, double q, int want_slope, double* val, double* slope) noexcept nogil:
    # Cell from the bit pattern of q; see chanmc.tables.RadialTable.
    cdef u64 bits = (<u64*>&q)[0]
    cdef long long i = <long long>(bits >> f.shift) - f.base
    cdef double t
    cdef double* c
    if 0 <= i < f.nr:
        c = tab + 5 * i
        t = <double>(bits & f.mask) * f.tscale
    else:
        i = 0 if i < 0 else f.nr - 1
        c = tab + 5 * i
        t = (q - f.qnodes[i]) * c[4]
    cdef double t2 = t * t, t3 = t2 * t
    val[0] = (c[0] * (2 * t3 - 3 * t2 + 1) + c[2] * (-2 * t3 + 3 * t2)
              + c[1] * (t3 - 2 * t2 + t) + c[3] * (t3 - t2))
    if want_slope:
        slope[0] = ((c[0] - c[2]) * (6 * t2 - 6 * t) + c[1] * (3 * t2 - 4 * t + 1)
                    + c[3] * (3 * t2 - 2 * t)) * c[4]


cdef inline void _grad_radial(Field* f, double x, double y, double* gx, double* gy) noexcept nogil:
    cdef int j
    cdef double dx, dy, q, v, sl, w, sx = 0.0, sy = 0.0
    for j in range(f.nstr):
        dx = x - f.sx[j]
        dy = y - f.sy[j]
        q = dx * dx + dy * dy
        _radial(f, f.ru, q, 1, &v, &sl)
        w = 2.0 * sl
        sx += w * dx
        sy += w * dy
    gx[0] = sx
    gy[0] = sy


cdef inline double _value_radial(Field* f, double* tab, double x, double y) noexcept nogil:
    cdef int j
    cdef double dx, dy, q, v, sl, total = 0.0
    for j in range(f.nstr):
        dx = x - f.sx[j]
        dy = y - f.sy[j]
        q = dx * dx + dy * dy
        _radial(f, tab, q, 0, &v, &sl)
        total += v
    return total


cdef inline void _accel(Field* f, int force, double x, double y, double inv2e,
                        double* ax, double* ay) noexcept nogil:
    cdef double gx, gy, v
    if not force:
        ax[0] = 0.0
        ay[0] = 0.0
        return
    if f.mode == 0:
        _grad_exact(f, x, y, &gx, &gy)
    elif f.mode == 2:
        _grad_radial(f, x, y, &gx, &gy)
    else:
        _hermite(f, f.tu, x, y, 1, &v, &gx, &gy)
    ax[0] = -inv2e * gx
    ay[0] = -inv2e * gy


cdef inline double _density(Field* f, double x, double y) noexcept nogil:
    cdef double v, gx, gy
    if f.mode == 0:
        return _value_exact(f, f.cne, x, y)
    if f.mode == 2:
        return _value_radial(f, f.rne, x, y)
    _hermite(f, f.tne, x, y, 0, &v, &gx, &gy)
    return v


cdef inline double _nearest_r2(double s, double x, double y) noexcept nogil:
    cdef double p = x / s, q = y / s
    cdef double i0 = floor(p), j0 = floor(q)
    cdef double best = 1e300, i, j, d2, m
    cdef int di, dj
    for di in range(2):
        for dj in range(2):
            i = i0 + di
            j = j0 + dj
            m = (i + j) - 2.0 * floor(0.5 * (i + j))
            if m == 1.0:
                d2 = ((p - i) * (p - i) + (q - j) * (q - j)) * s * s
                if d2 < best:
                    best = d2
    return best


def propagate_batch(model, x, y, px, py, e, keys, double step, long nsteps,
                    bint energy_loss, bint scattering, bint force, snapshots):
    """Advance a batch of protons; see :func:`chanmc.backend.propagate_batch`."""
    cdef const double[::1] X = np.array(x, dtype=np.float64)
    cdef const double[::1] Y = np.array(y, dtype=np.float64)
    cdef double[::1] PX = np.array(px, dtype=np.float64)
    cdef double[::1] PY = np.array(py, dtype=np.float64)
    cdef double[::1] E = np.array(e, dtype=np.float64)
    cdef cnp.uint64_t[::1] KEYS = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef long[::1] SNAP = np.ascontiguousarray(snapshots, dtype=np.int64)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t nsnap = SNAP.shape[0]
    states = np.empty((nsnap, n, 5))
    flags_arr = np.zeros((nsnap, n), dtype=np.int32)
    cdef double[:, :, ::1] S = states
    cdef int[:, ::1] FL = flags_arr

    cdef double[::1] sx = np.ascontiguousarray(model.strings[:, 0], dtype=np.float64)
    cdef double[::1] sy = np.ascontiguousarray(model.strings[:, 1], dtype=np.float64)
    cdef double[::1] cu = np.ascontiguousarray(model.coeffs_u, dtype=np.float64)
    cdef double[::1] cne = np.ascontiguousarray(model.coeffs_ne, dtype=np.float64)
    cdef double[::1] ks = np.ascontiguousarray(model.ks, dtype=np.float64)
    cdef double[::1] tu
    cdef double[::1] tne
    cdef double[::1] ru
    cdef double[::1] rne
    cdef double[::1] qn
    cdef Field f
    f.mode = model.mode
    f.nstr = sx.shape[0]
    f.nterm = ks.shape[0]
    f.sx = &sx[0]
    f.sy = &sy[0]
    f.cu = &cu[0]
    f.cne = &cne[0]
    f.ks = &ks[0]
    f.tu = NULL
    f.tne = NULL
    f.ru = NULL
    f.rne = NULL
    if f.mode == MODE_GRID:
        tu = np.ascontiguousarray(model.grid.potential, dtype=np.float64).ravel()
        tne = np.ascontiguousarray(model.grid.density, dtype=np.float64).ravel()
        f.tu = &tu[0]
        f.tne = &tne[0]
        f.origin = model.grid.origin
        f.h = model.grid.spacing
        f.n = model.grid.n
    elif f.mode == MODE_RADIAL:
        ru = np.ascontiguousarray(model.radial.potential, dtype=np.float64).ravel()
        rne = np.ascontiguousarray(model.radial.density, dtype=np.float64).ravel()
        qn = np.ascontiguousarray(model.radial.nodes, dtype=np.float64)
        f.qnodes = &qn[0]
        f.ru = &ru[0]
        f.rne = &rne[0]
        f.shift = model.radial.shift
        f.base = model.radial.base
        f.mask = (<u64>1 << f.shift) - 1
        f.tscale = 2.0 ** -(<int>model.radial.shift)
        f.nr = model.radial.n

    cdef double r_min2 = model.r_min * model.r_min
    cdef double phi_max = model.phi_max
    cdef double mesh = model.mesh_limit
    cdef double site = model.site_spacing
    cdef double z1 = model.z1
    cdef double dz = step
    cdef double loss_pref = 4.0 * M_PI * z1 * z1 * _E2 * _E2
    cdef double plasma = 4.0 * M_PI * _E2 / _ME

    cdef Py_ssize_t p
    cdef long s, slot
    cdef int flags, bad
    cdef double xx, yy, qx, qy, ee, inv2e
    cdef double ax1, ay1, ax2, ay2, ax3, ay3, ax4, ay4
    cdef double x2, y2, px2, py2, x3, y3, px3, py3, x4, y4, px4, py4
    cdef double nx, ny, npx, npy, new_e, ne, mv2, hw, arg, rate, var, sd, u1, u2, rad
    cdef u64 key

    with nogil:
        for p in range(n):
            xx = X[p]
            yy = Y[p]
            qx = PX[p]
            qy = PY[p]
            ee = E[p]
            key = KEYS[p]
            flags = 0
            slot = 0
            while slot < nsnap and SNAP[slot] == 0:
                S[slot, p, 0] = xx
                S[slot, p, 1] = yy
                S[slot, p, 2] = qx
                S[slot, p, 3] = qy
                S[slot, p, 4] = ee
                FL[slot, p] = flags
                slot += 1
            for s in range(nsteps):
                if flags & _DECH:
                    break
                inv2e = 0.5 / ee
                _accel(&f, force, xx, yy, inv2e, &ax1, &ay1)
                x2 = xx + 0.5 * dz * qx
                y2 = yy + 0.5 * dz * qy
                px2 = qx + 0.5 * dz * ax1
                py2 = qy + 0.5 * dz * ay1
                _accel(&f, force, x2, y2, inv2e, &ax2, &ay2)
                x3 = xx + 0.5 * dz * px2
                y3 = yy + 0.5 * dz * py2
                px3 = qx + 0.5 * dz * ax2
                py3 = qy + 0.5 * dz * ay2
                _accel(&f, force, x3, y3, inv2e, &ax3, &ay3)
                x4 = xx + dz * px3
                y4 = yy + dz * py3
                px4 = qx + dz * ax3
                py4 = qy + dz * ay3
                _accel(&f, force, x4, y4, inv2e, &ax4, &ay4)
                nx = xx + dz / 6.0 * (qx + 2.0 * px2 + 2.0 * px3 + px4)
                ny = yy + dz / 6.0 * (qy + 2.0 * py2 + 2.0 * py3 + py4)
                npx = qx + dz / 6.0 * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
                npy = qy + dz / 6.0 * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
                new_e = ee

                if energy_loss or scattering:
                    ne = _density(&f, 0.5 * (xx + nx), 0.5 * (yy + ny))
                    rate = 0.0
                    if ne > 0.0:
                        mv2 = _ME * 2.0 * ee / _MP
                        hw = _HBARC * sqrt(plasma * ne)
                        arg = 2.0 * mv2 / hw
                        if arg > 1.0:
                            rate = loss_pref * ne / mv2 * log(arg)
                        else:
                            flags = flags | _CLAMP
                    if scattering:
                        var = 0.5 * _ME / (2.0 * _MP * ee) * rate * dz
                        u1 = 1.0 - _uniform(key, 4 + 2 * s)
                        u2 = _uniform(key, 5 + 2 * s)
                        rad = sqrt(-2.0 * log(u1))
                        sd = sqrt(var)
                        npx = npx + sd * (rad * cos(2.0 * M_PI * u2))
                        npy = npy + sd * (rad * sin(2.0 * M_PI * u2))
                    if energy_loss:
                        new_e = ee - rate * dz

                xx = nx
                yy = ny
                qx = npx
                qy = npy
                ee = new_e

                bad = 0
                if _nearest_r2(site, xx, yy) < r_min2:
                    bad = bad | _STR
                if fabs(qx) >= phi_max or fabs(qy) >= phi_max:
                    bad = bad | _ANG
                if fabs(xx) + fabs(yy) > mesh:
                    bad = bad | _MESH
                if ee <= 0.0:
                    bad = bad | _EXH
                if bad:
                    flags = flags | bad | _DECH

                while slot < nsnap and SNAP[slot] == s + 1:
                    S[slot, p, 0] = xx
                    S[slot, p, 1] = yy
                    S[slot, p, 2] = qx
                    S[slot, p, 3] = qy
                    S[slot, p, 4] = ee
                    FL[slot, p] = flags
                    slot += 1
            while slot < nsnap:
                S[slot, p, 0] = xx
                S[slot, p, 1] = yy
                S[slot, p, 2] = qx
                S[slot, p, 3] = qy
                S[slot, p, 4] = ee
                FL[slot, p] = flags
                slot += 1
    return states, flags_arr


def k0_sum_points(positions, coeffs, ks, x, y):
    """``(f, fx, fy, fxx, fyy, fxy)`` of ``sum_j sum_i c_i K0(k_i r_j)`` at each point."""
    cdef const double[:, ::1] pos = np.ascontiguousarray(positions, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] k = np.ascontiguousarray(ks, dtype=np.float64)
    cdef const double[::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = pos.shape[0], nt = k.shape[0]
    out = np.zeros((6, n))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t p, j, i
    cdef double dx, dy, r, ux, uy, arg, k0v, k1v, d1, a, b
    with nogil:
        for p in range(n):
            for j in range(m):
                dx = X[p] - pos[j, 0]
                dy = Y[p] - pos[j, 1]
                r = sqrt(dx * dx + dy * dy)
                if r < 1e-300:
                    r = 1e-300
                ux = dx / r
                uy = dy / r
                for i in range(nt):
                    arg = k[i] * r
                    if arg >= _UNDERFLOW:
                        continue
                    k0v = _k0(arg)
                    k1v = _k1(arg)
                    d1 = -c[i] * k[i] * k1v
                    a = c[i] * k[i] * k[i] * k0v
                    b = c[i] * k[i] * k1v / r
                    o[0, p] += c[i] * k0v
                    o[1, p] += d1 * ux
                    o[2, p] += d1 * uy
                    o[3, p] += a * ux * ux + b * (2.0 * ux * ux - 1.0)
                    o[4, p] += a * uy * uy + b * (2.0 * uy * uy - 1.0)
                    o[5, p] += (a + 2.0 * b) * ux * uy
    return out
