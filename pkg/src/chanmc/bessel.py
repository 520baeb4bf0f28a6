"""Modified Bessel functions of the second kind, orders 0 and 1.

Power series are used for ``x <= 2`` and Chebyshev expansions of the
exponentially scaled functions above that.  Both routines accept scalars or
arrays and agree with high-precision references to about 1e-15 relative.
"""
import math

import numpy as np

from ._bessel_coeffs import K0_CHEB, K1_CHEB
from .constants import EULER_GAMMA

UNDERFLOW_ARG = 700.0
_NSERIES = 16


def _series_tables():
    i0 = []
    k0 = []
    i1 = []
    k1 = []
    harmonic = 0.0
    for k in range(_NSERIES):
        if k > 0:
            harmonic += 1.0 / k
        fk = math.factorial(k)
        i0.append(1.0 / (fk * fk))
        k0.append(harmonic / (fk * fk))
        i1.append(1.0 / (fk * math.factorial(k + 1)))
        # psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
        psi_sum = 2.0 * harmonic + 1.0 / (k + 1) - 2.0 * EULER_GAMMA
        k1.append(psi_sum / (fk * math.factorial(k + 1)))
    return (np.array(i0), np.array(k0), np.array(i1), np.array(k1))


I0_SERIES, K0_SERIES, I1_SERIES, K1_SERIES = _series_tables()


def _horner(coeffs, q):
    acc = np.zeros_like(q)
    for c in coeffs[::-1]:
        acc = acc * q + c
    return acc


def _clenshaw(coeffs, t):
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    t2 = 2.0 * t
    for c in coeffs[:0:-1]:
        b1, b2 = t2 * b1 - b2 + c, b1
    return t * b1 - b2 + coeffs[0]


def _check(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0.0)):
        raise ValueError("modified Bessel K requires x > 0")
    return x


def _evaluate(x, order):
    x = _check(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)

    small = x <= 2.0
    if np.any(small):
        xs = x[small]
        q = 0.25 * xs * xs
        log_half = np.log(0.5 * xs)
        if order == 0:
            out[small] = -(log_half + EULER_GAMMA) * _horner(I0_SERIES, q) + q * _horner(K0_SERIES[1:], q)
        else:
            i1 = 0.5 * xs * _horner(I1_SERIES, q)
            out[small] = 1.0 / xs + log_half * i1 - 0.25 * xs * _horner(K1_SERIES, q)

    large = (~small) & (x < UNDERFLOW_ARG)
    if np.any(large):
        xl = x[large]
        cheb = K0_CHEB if order == 0 else K1_CHEB
        out[large] = np.exp(-xl) * np.sqrt(0.5 * np.pi / xl) * _clenshaw(cheb, 4.0 / xl - 1.0)

    return out[0] if scalar else out


def bessel_k0(x):
    """Modified Bessel function of the second kind of order zero, K0(x)."""
    return _evaluate(x, 0)


def bessel_k1(x):
    """Modified Bessel function of the second kind of order one, K1(x)."""
    return _evaluate(x, 1)
