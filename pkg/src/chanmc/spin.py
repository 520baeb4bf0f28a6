"""Electron-nuclear two-spin model, exchange splitting and overlap formulas.

Basis order is ``|up Up>, |up Dn>, |dn Up>, |dn Dn>`` (electron first, then
nucleus); spin operators have eigenvalues +-1/2 (hbar = 1).  Frequencies are
plain reals in whatever unit the caller uses.
"""
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm

SX = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
SY = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
PAULI = {"x": 2 * SX, "y": 2 * SY, "z": 2 * SZ}

_R2 = 1.0 / np.sqrt(2.0)
# Two-spin states in the product basis |11>, |10>, |01>, |00> (1 = up).
SINGLET = np.array([0, _R2, -_R2, 0], dtype=complex)
TRIPLET_0 = np.array([0, _R2, _R2, 0], dtype=complex)
TRIPLET_PLUS = np.array([1, 0, 0, 0], dtype=complex)
TRIPLET_MINUS = np.array([0, 0, 0, 1], dtype=complex)


@dataclass(frozen=True)
class SpinParams:
    omega_s: float = 0.0  # electron Zeeman
    omega_l: float = 0.0  # nuclear Zeeman
    omega_rf: float = 0.0  # drive frame
    a_hyper: float = 0.0  # secular A
    b_hyper: float = 0.0  # pseudosecular B
    d_dip: float = 0.0  # dipolar D
    phi_tilt: float = 0.0  # rad

    @property
    def omega(self):
        """Rotating-frame electron offset ``omega_s - omega_rf``."""
        return self.omega_s - self.omega_rf

    @classmethod
    def dipolar(cls, d_dip, phi_tilt, **kw):
        """Parameters with ``B = 3 D cos(phi) sin(phi)``."""
        return cls(d_dip=d_dip, phi_tilt=phi_tilt, b_hyper=3.0 * d_dip * np.cos(phi_tilt) * np.sin(phi_tilt), **kw)

    def validate(self):
        problems = []
        for name in ("omega_s", "omega_l", "omega_rf", "a_hyper", "b_hyper", "d_dip", "phi_tilt"):
            if not np.isfinite(getattr(self, name)):
                problems.append(f"{name}: must be finite")
        return problems


def kron(*ops):
    return reduce(np.kron, ops)


def site_operator(op, site, n=2):
    """``op`` acting on spin ``site`` of ``n``."""
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside 0..{n - 1}")
    return kron(*[op if k == site else I2 for k in range(n)])


def build_hamiltonian(params):
    """``Omega S_z + omega_l I_z + A S_z I_z + B S_z I_x`` as a 4x4 Hermitian matrix."""
    s_z = kron(SZ, I2)
    i_z = kron(I2, SZ)
    i_x = kron(I2, SX)
    return (params.omega * s_z + params.omega_l * i_z + params.a_hyper * s_z @ i_z
            + params.b_hyper * s_z @ i_x)


def heisenberg(lam, n=2):
    """Isotropic exchange ``lam * sum_{i<j} S_i . S_j`` on ``n`` spins."""
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            for op in (SX, SY, SZ):
                h += site_operator(op, i, n) @ site_operator(op, j, n)
    return lam * h


def total_z(n=2):
    """``Z = sum_j sigma_z^j``."""
    return sum(site_operator(2 * SZ, j, n) for j in range(n))


def commutator_with_z(h):
    """``||H Z - Z H||_inf`` (max row sum) for a Hamiltonian on ``n`` spins."""
    h = np.asarray(h)
    dim = h.shape[0]
    n = int(round(np.log2(dim))) if dim > 0 else 0
    if h.ndim != 2 or h.shape != (dim, dim) or 2**n != dim or not 1 <= n <= 4:
        raise ValueError(f"expected a 2**n square matrix with n <= 4, got shape {h.shape}")
    z = total_z(n)
    return float(np.abs(h @ z - z @ h).sum(axis=1).max())


def eigensystem(h, tol=1e-12):
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a Hermitian matrix."""
    h = np.asarray(h, dtype=complex)
    scale = max(np.abs(h).max(), 1.0)
    if np.abs(h - h.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigh(0.5 * (h + h.conj().T))


def state_energy(h, state):
    """Expectation value of ``h`` in ``state``."""
    state = np.asarray(state, dtype=complex)
    return float(np.real(state.conj() @ h @ state) / np.real(state.conj() @ state))


def exchange_coupling(singlet_energy, triplet_energy):
    """``J = E(T0) - E(S)``."""
    return triplet_energy - singlet_energy


def singlet_triplet_gap(h):
    """``J = <T0|H|T0> - <S|H|S>`` for a two-spin Hamiltonian.

    When S and T0 are eigenstates (any isotropic exchange) this is the gap
    between the two eigenvalues.
    """
    return exchange_coupling(state_energy(h, SINGLET), state_energy(h, TRIPLET_0))


def is_singlet_ground(h, tol=1e-10):
    w, v = eigensystem(h)
    return bool(np.abs(SINGLET.conj() @ v[:, 0]) ** 2 > 1.0 - tol and w[1] - w[0] > tol)


def overlap(d_disp, a, omega_s, omega_0, f=1.0, hbar_omega_e=1.0):
    """Orbital overlap ``l = exp(d^2/a^2 (1/b - 2b))`` with ``b = sqrt(1 + omega_s/Omega)``.

    Also returns ``b`` and the level spacing ``eps = (d/a) f hbar_omega_e``,
    where ``f`` and ``hbar_omega_e`` are supplied by the caller.
    """
    if a == 0 or omega_0 == 0:
        raise ValueError("a and omega_0 must be non-zero")
    radicand = 1.0 + omega_s / omega_0
    if radicand < 0:
        raise ValueError(f"1 + omega_s/Omega = {radicand} is negative")
    b = np.sqrt(radicand)
    if b == 0:
        raise ValueError("b = 0 makes the overlap exponent singular")
    ratio = (d_disp / a) ** 2
    return float(np.exp(ratio * (1.0 / b - 2.0 * b))), float(b), float(d_disp / a * f * hbar_omega_e)


def transition_frequency(omega, e_perp, alpha1, alpha2, quartic=0.0):
    """``omega - |E|^2 (alpha2 - alpha1) / 2 + quartic |E|^4`` (hbar = 1)."""
    e2 = np.abs(e_perp) ** 2
    return omega - 0.5 * e2 * (alpha2 - alpha1) + quartic * e2 * e2


def rotate(state, subsystem, axis, angle, tol=1e-10):
    """Apply ``exp(-i angle sigma_axis / 2)`` to the electron (0) or nuclear (1) spin."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (4,):
        raise ValueError("state must have 4 amplitudes")
    if abs(np.linalg.norm(state) - 1.0) > tol:
        raise ValueError("state is not normalised")
    if axis not in PAULI:
        raise ValueError("axis must be 'x', 'y' or 'z'")
    u = expm(-0.5j * angle * PAULI[axis])
    return site_operator(u, {"electron": 0, "nuclear": 1}.get(subsystem, subsystem)) @ state


def tilt_angle(params):
    """Rotation of the nuclear axis in the electron-up manifold, ``arctan(B / (2 omega_l + A))``."""
    return float(np.arctan2(params.b_hyper, 2.0 * params.omega_l + params.a_hyper))


def level_sweep(params, name, values):
    """Rows ``(value, E0, E1, E2, E3, J)`` as ``name`` runs over ``values``.

    ``J`` is the S/T0 gap of the electron-nuclear pair.
    """
    from dataclasses import replace

    rows = []
    for v in values:
        h = build_hamiltonian(replace(params, **{name: float(v)}))
        w, _ = eigensystem(h)
        rows.append([float(v), *w, singlet_triplet_gap(h)])
    return np.array(rows)
