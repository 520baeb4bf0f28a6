"""Densities, second moments and linearised maps of exit ensembles.

Positions are in nm and angles in mrad throughout, so a grid or a moment
matrix built from records can be compared with one built from entry states.
Phase-space vectors use the ordering ``(q1, p1, q2, p2)``, for which the
symplectic form is ``J = diag(J2, J2)`` with ``J2 = [[0, 1], [-1, 0]]``.
"""
import io
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.signal import find_peaks

from . import backend, rng
from ._model import DECHANNELED
from .constants import MEV, proton_speed
from .dynamics import PropagationOptions, kernel_model
from .potential import transverse_frequency

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
J4 = np.block([[J2, np.zeros((2, 2))], [np.zeros((2, 2)), J2]])

CAUSTIC_EPS = 1e-12  # (mrad/nm)^2
SUBSPACES = {
    # name: (source, component names in (q1, p1, q2, p2) order)
    "X": ("entry", ("x", "phi_x", "y", "phi_y")),
    "Y": ("entry", ("y", "phi_y", "x", "phi_x")),
    "Gx": ("exit", ("x", "theta_x", "y", "theta_y")),
    "Gy": ("exit", ("y", "theta_y", "x", "theta_x")),
}


class CausticError(ValueError):
    pass


@dataclass
class DensityGrid:
    plane: str  # "configuration" or "angular"
    bins: tuple  # (n_x, n_y)
    window: tuple  # (lo_x, hi_x, lo_y, hi_y)
    counts: np.ndarray  # (n_x, n_y), first index along x / theta_x
    out_of_window: int = 0
    total: int = 0

    @property
    def edges(self):
        lx, hx, ly, hy = self.window
        return np.linspace(lx, hx, self.bins[0] + 1), np.linspace(ly, hy, self.bins[1] + 1)

    @property
    def bin_width(self):
        lx, hx, ly, hy = self.window
        return (hx - lx) / self.bins[0], (hy - ly) / self.bins[1]

    def centers(self, axis):
        e = self.edges[axis]
        return 0.5 * (e[1:] + e[:-1])

    def marginal(self, axis):
        """Counts summed over the other axis; ``axis`` 0 is x (or theta_x)."""
        return self.counts.sum(axis=1 - axis)

    def merge(self, other):
        """Sum of two grids over the same plane, bins and window."""
        if (self.plane, tuple(self.bins), tuple(self.window)) != (other.plane, tuple(other.bins),
                                                                   tuple(other.window)):
            raise ValueError("grids differ in plane, bins or window")
        return DensityGrid(self.plane, self.bins, self.window, self.counts + other.counts,
                           self.out_of_window + other.out_of_window, self.total + other.total)

    def to_csv(self):
        buf = io.StringIO()
        lx, hx, ly, hy = self.window
        buf.write(f"# plane={self.plane}\n")
        buf.write(f"# bins={self.bins[0]},{self.bins[1]}\n")
        buf.write(f"# window={lx:.17g},{hx:.17g},{ly:.17g},{hy:.17g}\n")
        buf.write(f"# out_of_window={self.out_of_window}\n# total={self.total}\n")
        np.savetxt(buf, self.counts, fmt="%d", delimiter=",")
        return buf.getvalue()


def default_window(plane, geometry):
    """One channel cross-section, or +-1.5 psi_c in the angular plane."""
    if plane == "configuration":
        h = geometry.site_spacing
        return (-h, h, -h, h)
    if plane == "angular":
        w = 1.5 * geometry.psi_c
        return (-w, w, -w, w)
    raise ValueError(f"plane must be 'configuration' or 'angular', got {plane!r}")


def histogram2d(records, plane, bins=256, window=None, geometry=None):
    """Bin the channeled records of a batch in the configuration or angular plane.

    Dechanneled records are left out; channeled records outside ``window``
    are counted in ``out_of_window``.
    """
    if np.ndim(bins) == 0:
        bins = (int(bins), int(bins))
    bins = tuple(int(b) for b in bins)
    if min(bins) < 2:
        raise ValueError("need at least 2 bins per axis")
    if window is None:
        if geometry is None:
            raise ValueError("give a window or the channel geometry")
        window = default_window(plane, geometry)
    lx, hx, ly, hy = (float(v) for v in window)
    if not (np.isfinite([lx, hx, ly, hy]).all() and hx > lx and hy > ly):
        raise ValueError(f"window {window} has zero area or is not finite")
    keep = (np.asarray(records.flags) & DECHANNELED) == 0
    if plane == "configuration":
        u, v = np.asarray(records.x)[keep], np.asarray(records.y)[keep]
    elif plane == "angular":
        u, v = np.asarray(records.theta_x)[keep], np.asarray(records.theta_y)[keep]
    else:
        raise ValueError(f"plane must be 'configuration' or 'angular', got {plane!r}")
    i = np.floor((u - lx) / (hx - lx) * bins[0]).astype(np.int64)
    j = np.floor((v - ly) / (hy - ly) * bins[1]).astype(np.int64)
    inside = (i >= 0) & (i < bins[0]) & (j >= 0) & (j < bins[1])
    counts = np.bincount(i[inside] * bins[1] + j[inside], minlength=bins[0] * bins[1]).reshape(bins)
    return DensityGrid(plane, bins, (lx, hx, ly, hy), counts.astype(np.int64),
                       int((~inside).sum()), int(keep.sum()))


def fwhm(grid, axis):
    """Full width at half maximum of a marginal, interpolating linearly between bin centres.

    The width runs between the outermost half-maximum crossings, so a split
    or horned profile is measured across all of its lobes rather than by
    the tallest one alone.
    """
    m = np.asarray(grid.marginal(axis), dtype=float)
    peak = m.max()
    if peak <= 0 or np.all(m == peak):
        raise ValueError("profile is flat; FWHM undefined")
    half = 0.5 * peak
    w = grid.bin_width[axis]
    above = np.flatnonzero(m > half)
    left, right = int(above[0]), int(above[-1])
    # Outside the window the profile is taken as zero.
    lo_val = m[left - 1] if left > 0 else 0.0
    hi_val = m[right + 1] if right < m.size - 1 else 0.0
    x_left = left - (m[left] - half) / (m[left] - lo_val)
    x_right = right + (m[right] - half) / (m[right] - hi_val)
    return (x_right - x_left) * w


def find_profile_peaks(profile, rel_prominence=0.05, n_sigma=4.0):
    """Indices of the significant local maxima of a counts profile.

    A maximum counts when its prominence exceeds both ``rel_prominence``
    times the global maximum and ``n_sigma`` Poisson standard deviations of
    the global maximum.
    """
    m = np.asarray(profile, dtype=float)
    # Pad so maxima in the end bins can be found.
    padded = np.concatenate([[0.0], m, [0.0]])
    threshold = max(rel_prominence * m.max(), n_sigma * np.sqrt(m.max()))
    peaks, _ = find_peaks(padded, prominence=threshold)
    return peaks - 1


def central_yield(records, radius):
    """Fraction of all launched protons exiting channeled with ``|theta| < radius`` (mrad)."""
    keep = (np.asarray(records.flags) & DECHANNELED) == 0
    r = np.hypot(records.theta_x, records.theta_y)
    return float((keep & (r < radius)).sum()) / max(len(records), 1)


@dataclass
class BeamSigma:
    matrix: np.ndarray  # (4, 4)
    labels: tuple = ("q1", "p1", "q2", "p2")
    count: int = 0

    def to_csv(self):
        lines = ["," + ",".join(self.labels)]
        for name, row in zip(self.labels, self.matrix):
            lines.append(name + "," + ",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def _columns(records, entry, names):
    cols = []
    for name in names:
        if name.startswith("phi"):
            if entry is None:
                raise ValueError("entry-plane subspaces need the entry states")
            cols.append(1e3 * np.asarray(entry[name]))  # rad -> mrad
        elif entry is not None and name in ("x", "y"):
            cols.append(np.asarray(entry[name]))
        else:
            cols.append(np.asarray(getattr(records, name)))
    return np.column_stack(cols)


def beam_sigma(records=None, subspace="Gx", entry=None, centered=False, channeled_only=True):
    """Second-moment matrix over a 4D subspace.

    ``subspace`` is ``"X"`` or ``"Y"`` (entry states; pass ``entry`` as a
    mapping with ``x, y, phi_x, phi_y`` arrays, angles in rad) or ``"Gx"``
    or ``"Gy"`` (exit records).  Moments are about zero unless ``centered``.
    """
    if subspace not in SUBSPACES:
        raise ValueError(f"subspace must be one of {sorted(SUBSPACES)}")
    source, names = SUBSPACES[subspace]
    if source == "entry":
        if entry is None:
            raise ValueError(f"subspace {subspace} needs entry states")
        data = _columns(None, entry, names)
    else:
        if records is None:
            raise ValueError(f"subspace {subspace} needs exit records")
        data = _columns(records, None, names)
        if channeled_only:
            data = data[(np.asarray(records.flags) & DECHANNELED) == 0]
    if data.shape[0] < 2:
        raise ValueError("beam_sigma needs at least 2 records")
    if centered:
        data = data - data.mean(axis=0)
    matrix = data.T @ data / data.shape[0]
    return BeamSigma(0.5 * (matrix + matrix.T), names, data.shape[0])


def scan_moments(batches):
    """6x6 moments over ``(x, theta_x, y, theta_y, Lambda, phi)`` pooled across batches.

    Lambda and phi are constant within a batch, so their rows only carry
    information when the batches differ in them.
    """
    rows = []
    for b in batches:
        keep = (np.asarray(b.flags) & DECHANNELED) == 0
        n = int(keep.sum())
        rows.append(np.column_stack([b.x[keep], b.theta_x[keep], b.y[keep], b.theta_y[keep],
                                     np.full(n, b.reduced_thickness), np.full(n, b.tilt_phi)]))
    data = np.concatenate(rows)
    if data.shape[0] < 2:
        raise ValueError("need at least 2 channeled records")
    return data.T @ data / data.shape[0]


def invariants(sigma):
    """``(I', sigma4) = (-Tr(S J S J) / 2, det S)``."""
    s = np.asarray(getattr(sigma, "matrix", sigma), dtype=float)
    return -0.5 * np.trace(s @ J4 @ s @ J4), float(np.linalg.det(s))


def symplectic_residual(m):
    m = np.asarray(m, dtype=float)
    return float(np.abs(m.T @ J4 @ m - J4).max())


@dataclass
class TransferMatrix:
    matrix: np.ndarray  # (4, 4) in (x, phi_x, y, phi_y), nm and rad
    h: float
    det_error: float = dc_field(init=False)
    symplectic_error: float = dc_field(init=False)

    def __post_init__(self):
        self.det_error = abs(float(np.linalg.det(self.matrix)) - 1.0)
        self.symplectic_error = symplectic_residual(self.matrix)


def _flow(field, length, states, options):
    """Dissipation-free map of entry states ``(n, 4)`` in (x, phi_x, y, phi_y) at energy ``states``' E."""
    nsteps = options.n_steps(length)
    model = kernel_model(field, options)
    s = np.asarray(states, dtype=float)
    n = s.shape[0]
    out, flags = backend.propagate_batch(
        model, s[:, 0], s[:, 2], s[:, 1], s[:, 3], np.full(n, field.geometry.energy), np.zeros(n, np.uint64),
        length / nsteps, nsteps, force=options.transverse_force)
    if np.any(flags[-1] & DECHANNELED):
        raise CausticError("a probe trajectory dechanneled")
    o = out[-1]
    return np.column_stack([o[:, 0], o[:, 2], o[:, 1], o[:, 3]])


def _wavenumber(field):
    e = field.geometry.energy
    return 2.0 * np.pi * transverse_frequency(field, e) / proton_speed(e)


def estimate_transfer_matrix(field, length, reference, h=1e-3, options=None, order=4):
    """Central-difference linearisation of the entry-to-exit map about ``reference``.

    ``reference`` is a ProtonState (only x, y, phi_x, phi_y are used; the
    energy is the channel's).  Positions are perturbed by ``h`` nm and angles
    by ``h`` times the harmonic wavenumber, so both probes are the same
    fraction of an oscillation.  ``order`` 2 uses the 3-point stencil, 4 the
    5-point one.
    """
    options = options or PropagationOptions()
    if options.energy_loss or options.multiple_scattering:
        raise ValueError("transfer matrices need a dissipation-free flow")
    ref = np.array([reference.x, reference.phi_x, reference.y, reference.phi_y], dtype=float)
    steps = np.array([h, h * _wavenumber(field), h, h * _wavenumber(field)])
    if order == 2:
        offsets, weights = (1.0, -1.0), (0.5, -0.5)
    elif order == 4:
        offsets, weights = (2.0, 1.0, -1.0, -2.0), (-1.0 / 12, 8.0 / 12, -8.0 / 12, 1.0 / 12)
    else:
        raise ValueError("order must be 2 or 4")
    probes = [ref + o * steps[k] * np.eye(4)[k] for k in range(4) for o in offsets]
    exits = _flow(field, length, np.array(probes), options).reshape(4, len(offsets), 4)
    m = np.empty((4, 4))
    for k in range(4):
        m[:, k] = np.tensordot(weights, exits[k], axes=1) / steps[k]
    return TransferMatrix(m, h)


def free_drift(length):
    """Transfer matrix of field-free flight over ``length``."""
    d = np.array([[1.0, length], [0.0, 1.0]])
    return np.block([[d, np.zeros((2, 2))], [np.zeros((2, 2)), d]])


@dataclass
class JacobianMap:
    x: np.ndarray  # (n,) nm
    y: np.ndarray
    jacobian: np.ndarray  # (mrad/nm)^2; nan where a probe dechanneled
    sigma: np.ndarray  # 1/|J|, nan at caustics and invalid nodes
    caustic: np.ndarray  # bool
    valid: np.ndarray  # bool

    def to_csv(self):
        lines = ["x_nm,y_nm,J_mrad2_per_nm2,sigma_nm2_per_mrad2,caustic"]
        for row in zip(self.x, self.y, self.jacobian, self.sigma, self.caustic):
            lines.append("%.17g,%.17g,%.17g,%.17g,%d" % row)
        return "\n".join(lines) + "\n"


def jacobian_map(field, length, x, y, tilt=0.0, h=1e-4, options=None, eps=CAUSTIC_EPS):
    """Jacobian of the impact-point to exit-angle map on the points ``(x, y)``.

    ``tilt`` is a fraction of psi_c along theta_x.  Derivatives are 3-point
    central differences with spacing ``h`` nm.  Nodes whose stencil
    dechannels are marked invalid; ``|J| < eps`` is flagged as a caustic.
    """
    options = options or PropagationOptions()
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    n = x.size
    phi0 = 1e-3 * tilt * field.geometry.psi_c
    sx = np.concatenate([x + h, x - h, x, x])
    sy = np.concatenate([y, y, y + h, y - h])
    nsteps = options.n_steps(length)
    model = kernel_model(field, options)
    out, flags = backend.propagate_batch(
        model, sx, sy, np.full(4 * n, phi0), np.zeros(4 * n), np.full(4 * n, field.geometry.energy),
        np.zeros(4 * n, np.uint64), length / nsteps, nsteps, force=options.transverse_force)
    tx = 1e3 * out[-1, :, 2].reshape(4, n)
    ty = 1e3 * out[-1, :, 3].reshape(4, n)
    valid = ~np.any((flags[-1].reshape(4, n) & DECHANNELED) != 0, axis=0)
    dtx_dx = (tx[0] - tx[1]) / (2 * h)
    dty_dx = (ty[0] - ty[1]) / (2 * h)
    dtx_dy = (tx[2] - tx[3]) / (2 * h)
    dty_dy = (ty[2] - ty[3]) / (2 * h)
    jac = np.where(valid, dtx_dx * dty_dy - dty_dx * dtx_dy, np.nan)
    caustic = valid & (np.abs(jac) < eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(valid & ~caustic, 1.0 / np.abs(jac), np.nan)
    return JacobianMap(x, y, jac, sigma, caustic, valid)


def harmonic_stiffness(field):
    """``k`` in ``U ~ U0 + k r^2`` near the axis, eV/nm^2 (half the curvature)."""
    from .potential import axis_curvature

    return 0.5 * axis_curvature(field)


def boundary_angle(a0, e, k):
    """The angle ``sqrt(A0 k / (pi E))`` at which the small-angle estimate vanishes."""
    if not (a0 > 0 and k > 0 and e > 0):
        raise ValueError("a0, k and e must be positive")
    return float(np.sqrt(a0 * k / (np.pi * e)))


def flux_enhancement(a0, e, phi, k, form="small-angle"):
    """Logarithmic flux-enhancement estimate.

    With ``phi_b = sqrt(A0 k / (pi E))`` and ``u = phi / phi_b``,
    ``form="small-angle"`` gives ``ln|A0 k / (pi E phi^2)| = -2 ln|u|``
    (``+inf`` at ``phi = 0``, exactly zero at ``phi = phi_b``) and
    ``form="full"`` gives ``ln|A0 / (A0 - pi E phi^2 / k)| = -ln|1 - u^2|``,
    which is singular at ``phi_b`` and zero at ``phi = 0``.

    Parameters
    ----------
    a0 : float
        Area of the central equipotential region, nm^2.
    e : float
        Beam energy, eV.
    phi : float or array
        Incidence angle, rad.
    k : float
        Harmonic stiffness, eV/nm^2.
    """
    u = np.abs(np.asarray(phi, dtype=float)) / boundary_angle(a0, e, k)
    with np.errstate(divide="ignore"):
        if form == "small-angle":
            out = -2.0 * np.log(u)
        elif form == "full":
            out = -np.log(np.abs(1.0 - u * u))
        else:
            raise ValueError("form must be 'small-angle' or 'full'")
    return out + 0.0 if out.ndim else float(out) + 0.0
