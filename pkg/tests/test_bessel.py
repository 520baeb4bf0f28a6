import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanmc.bessel import bessel_k0, bessel_k1

mpmath.mp.dps = 30


@pytest.mark.parametrize("x", [1e-4, 0.01, 0.5, 1.999, 2.0, 2.001, 7.5, 30.0, 120.0])
def test_against_mpmath(x):
    assert bessel_k0(x) == pytest.approx(float(mpmath.besselk(0, x)), rel=1e-13)
    assert bessel_k1(x) == pytest.approx(float(mpmath.besselk(1, x)), rel=1e-13)


def test_array_and_scalar_agree():
    xs = np.array([0.3, 3.0, 12.0])
    np.testing.assert_array_equal(bessel_k0(xs), [bessel_k0(v) for v in xs])
    assert np.ndim(bessel_k1(0.3)) == 0


def test_rejects_nonpositive():
    with pytest.raises(ValueError):
        bessel_k0(0.0)
    with pytest.raises(ValueError):
        bessel_k1(np.array([1.0, -1.0]))


def test_underflow_is_zero():
    assert bessel_k0(800.0) == 0.0
    assert bessel_k1(800.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 40.0))
def test_derivative_of_k0_is_minus_k1(x):
    h = 1e-6 * x
    deriv = (bessel_k0(x + h) - bessel_k0(x - h)) / (2 * h)
    assert deriv == pytest.approx(-bessel_k1(x), rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 600.0))
def test_positive_ordered_and_decreasing(x):
    k0, k1 = bessel_k0(x), bessel_k1(x)
    assert 0 < k0 < k1
    assert bessel_k0(1.01 * x) < k0
