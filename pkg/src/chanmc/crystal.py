"""Geometry of the <100> axial channel of diamond-cubic silicon.

Projected along [001], the diamond lattice puts atomic strings on the sites
``(a/4) * (i, j)`` with ``i + j`` odd when the origin sits at a channel axis.
Every string carries one atom per lattice constant along z.  Strings are
grouped into square coordination lines ``|i| + |j| = 2k - 1``; line ``k``
holds ``4 * (2k - 1)`` strings, so ``K`` lines hold ``4 K**2`` strings.
"""
from dataclasses import dataclass, field

import numpy as np

from .constants import BOHR_RADIUS, COULOMB_E2, MEV


class ConfigError(ValueError):
    """Invalid crystal, beam or run configuration."""


def screening_radius(z2):
    """Moliere screening radius ``(9 pi^2 / (128 Z2))**(1/3) * a0`` in nm."""
    if z2 < 1:
        raise ValueError(f"target atomic number must be >= 1, got {z2}")
    return (9.0 * np.pi**2 / (128.0 * z2)) ** (1.0 / 3.0) * BOHR_RADIUS


def critical_angle(z1, z2, d, e):
    """Lindhard critical angle in mrad.

    Parameters
    ----------
    z1, z2 : int
        Projectile and target atomic numbers.
    d : float
        Atomic spacing along the string, nm.
    e : float
        Projectile kinetic energy, eV.
    """
    if z1 <= 0 or z2 <= 0 or d <= 0 or e <= 0:
        raise ValueError("critical_angle needs positive z1, z2, d and e")
    return 1.0e3 * np.sqrt(2.0 * z1 * z2 * COULOMB_E2 / (d * e))


@dataclass(frozen=True)
class CrystalConfig:
    material: str = "Si"
    axis: str = "100"
    lattice_constant: float = 0.5431  # nm
    coordination_lines: int = 3
    sigma_th: float = 0.0074  # nm
    z1: int = 1
    z2: int = 14
    energy_mev: float = 2.0

    def validate(self):
        problems = []
        if self.material != "Si":
            problems.append(f"material: only Si is supported, got {self.material!r}")
        if str(self.axis) != "100":
            problems.append(f"axis: only the <100> axis is supported, got {self.axis!r}")
        if not self.lattice_constant > 0:
            problems.append("lattice_constant: must be positive")
        if self.coordination_lines < 1:
            problems.append("coordination_lines: must be >= 1")
        if self.sigma_th < 0:
            problems.append("sigma_th: must be non-negative")
        if self.z1 < 1:
            problems.append("z1: must be >= 1")
        if self.z2 < 1:
            problems.append("z2: must be >= 1")
        if not self.energy_mev > 0:
            problems.append("energy_mev: must be positive")
        return problems


def string_sites(coordination_lines):
    """Integer lattice indices ``(i, j)`` of strings on the first ``K`` lines."""
    if coordination_lines < 1:
        raise ConfigError("coordination_lines must be >= 1")
    sites = []
    for k in range(1, coordination_lines + 1):
        m = 2 * k - 1
        for i in range(-m, m + 1):
            rest = m - abs(i)
            sites.append((i, rest))
            if rest:
                sites.append((i, -rest))
    return sorted(sites)


@dataclass(frozen=True)
class ChannelGeometry:
    string_positions: np.ndarray  # (M, 2), nm
    d_string: float
    lattice_constant: float
    screening_radius: float
    z1: int
    z2: int
    sigma_th: float
    energy: float  # eV
    coordination_lines: int
    psi_c: float = field(init=False)  # mrad

    def __post_init__(self):
        pos = np.array(self.string_positions, dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "string_positions", pos)
        object.__setattr__(self, "psi_c", critical_angle(self.z1, self.z2, self.d_string, self.energy))

    @property
    def site_spacing(self):
        """Distance between the channel axis and its nearest string, nm."""
        return 0.25 * self.lattice_constant

    @property
    def mesh_limit(self):
        """Half-diagonal ``|x| + |y|`` of the region where the string sum is trusted."""
        inner = max(1, 2 * self.coordination_lines - 3)
        return inner * self.site_spacing

    @property
    def n_strings(self):
        return len(self.string_positions)


def build_channel(config=None):
    """Build the channel geometry described by a :class:`CrystalConfig`."""
    config = config or CrystalConfig()
    problems = config.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    s = 0.25 * config.lattice_constant
    sites = np.array(string_sites(config.coordination_lines), dtype=float) * s
    return ChannelGeometry(
        string_positions=sites,
        d_string=config.lattice_constant,
        lattice_constant=config.lattice_constant,
        screening_radius=screening_radius(config.z2),
        z1=config.z1,
        z2=config.z2,
        sigma_th=config.sigma_th,
        energy=config.energy_mev * MEV,
        coordination_lines=config.coordination_lines,
    )
