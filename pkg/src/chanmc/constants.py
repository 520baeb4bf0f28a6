"""Physical constants in the nm / eV / s unit system used throughout."""

BOHR_RADIUS = 0.0529177  # nm
COULOMB_E2 = 1.43996  # e^2 in eV*nm (Gaussian units)
HBAR_C = 197.3269804  # eV*nm
HBAR = 6.582119569e-16  # eV*s
ELECTRON_MASS = 510998.95  # m_e c^2, eV
PROTON_MASS = 938272088.16  # m_p c^2, eV
SPEED_OF_LIGHT = 2.99792458e17  # nm/s
EULER_GAMMA = 0.57721566490153286061

MEV = 1.0e6  # eV


def proton_speed(energy):
    """Non-relativistic speed in nm/s of a proton with kinetic energy ``energy`` (eV)."""
    return SPEED_OF_LIGHT * (2.0 * energy / PROTON_MASS) ** 0.5
