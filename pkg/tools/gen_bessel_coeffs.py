"""Regenerate the Chebyshev tables in src/chanmc/_bessel_coeffs.py.

For x > 2 the scaled functions g_nu(t) = K_nu(x) * exp(x) * sqrt(2x/pi), with
t = 4/x - 1 in (-1, 1], are expanded in Chebyshev polynomials.  Reference
values come from mpmath at 60 digits.

    python tools/gen_bessel_coeffs.py > src/chanmc/_bessel_coeffs.py
"""
import mpmath as mp

mp.mp.dps = 60
NTERMS = 34
NODES = 200


def scaled(nu, t):
    x = 4 / (t + 1)
    return mp.besselk(nu, x) * mp.exp(x) * mp.sqrt(2 * x / mp.pi)


def chebyshev(nu):
    n = NODES
    vals = []
    for k in range(n):
        theta = mp.pi * (k + mp.mpf(1) / 2) / n
        vals.append((mp.cos(theta), scaled(nu, mp.cos(theta))))
    coeffs = []
    for j in range(NTERMS):
        s = mp.fsum(v * mp.cos(j * mp.acos(t)) for t, v in vals)
        coeffs.append(2 * s / n)
    coeffs[0] /= 2
    return coeffs


def main():
    print('"""Chebyshev coefficients for exp(x)*sqrt(2x/pi)*K_nu(x), x > 2, in t = 4/x - 1.')
    print()
    print("Generated by tools/gen_bessel_coeffs.py; do not edit by hand.")
    print('"""')
    for nu in (0, 1):
        cs = chebyshev(nu)
        while abs(cs[-1]) < 1e-17:
            cs.pop()
        print(f"K{nu}_CHEB = (")
        for c in cs:
            print(f"    {mp.nstr(c, 20, min_fixed=1, max_fixed=0)},")
        print(")")


if __name__ == "__main__":
    main()
