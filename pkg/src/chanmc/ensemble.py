"""Incident beam sampling, batch propagation and the reduced thickness.

Impact points are uniform over one channel cross-section, the square
``|x| + |y| <= a/4`` whose corners are the four nearest strings.  Initial
angles are the tilt vector plus a Gaussian of standard deviation
``Omega_b / sqrt(2)`` per component.  Every draw comes from the proton's own
counter-based stream, so a batch is reproducible whatever the worker count.
"""
import os
import tempfile
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import backend, rng
from ._model import DECHANNELED
from .constants import MEV, proton_speed
from .crystal import ConfigError
from .dynamics import ExitRecord, PropagationOptions, ProtonState, kernel_model
from .potential import transverse_frequency

RECORD_COLUMNS = ("index", "x_nm", "y_nm", "theta_x_mrad", "theta_y_mrad", "e_exit_eV", "flag")


@dataclass(frozen=True)
class BeamConfig:
    n_protons: int = 1000
    energy: float = 2.0  # MeV
    tilt_phi: float = 0.0  # fraction of psi_c, applied along theta_x
    divergence: float = 0.1  # mrad, Omega_b
    seed: int = 0
    impact_window: Union[str, float] = "channel"  # or the half-width (nm) of a centred square

    def validate(self):
        problems = []
        if int(self.n_protons) != self.n_protons or self.n_protons < 1:
            problems.append("n_protons: must be a positive integer")
        if not self.energy > 0:
            problems.append("energy: must be positive")
        if not 0.0 <= self.tilt_phi <= 0.5:
            problems.append("tilt_phi: must lie in [0, 0.5]")
        if not self.divergence >= 0:
            problems.append("divergence: must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            problems.append("seed: must fit in 64 bits")
        w = self.impact_window
        if isinstance(w, str):
            if w != "channel":
                problems.append(f"impact_window: expected 'channel' or a half-width, got {w!r}")
        elif not (np.isfinite(w) and w > 0):
            problems.append("impact_window: half-width must be positive")
        return problems


@dataclass
class RecordBatch:
    """Columnar exit records of one run plus the run-level metadata."""

    index: np.ndarray
    x: np.ndarray  # nm
    y: np.ndarray  # nm
    theta_x: np.ndarray  # mrad
    theta_y: np.ndarray  # mrad
    e_exit: np.ndarray  # eV
    flags: np.ndarray
    length: float = float("nan")  # nm
    reduced_thickness: float = float("nan")
    tilt_phi: float = float("nan")

    def __len__(self):
        return self.index.size

    @property
    def channeled(self):
        return (self.flags & DECHANNELED) == 0

    def record(self, i):
        return ExitRecord(int(self.index[i]), float(self.x[i]), float(self.y[i]), float(self.theta_x[i]),
                          float(self.theta_y[i]), float(self.e_exit[i]), int(self.flags[i]))

    def __iter__(self):
        return (self.record(i) for i in range(len(self)))

    @classmethod
    def from_records(cls, records):
        records = list(records)
        cols = np.array([(r.proton_index, r.x, r.y, r.theta_x, r.theta_y, r.e_exit, r.flags) for r in records],
                        dtype=float).reshape(-1, 7)
        return cls(cols[:, 0].astype(np.int64), *cols[:, 1:6].T, flags=cols[:, 6].astype(np.int32))


def _check_beam(beam):
    problems = beam.validate()
    if problems:
        raise ConfigError("; ".join(problems))


def sample_batch(beam, field, indices):
    """Entry states of the protons ``indices`` as arrays ``(x, y, phi_x, phi_y)``."""
    indices = np.asarray(indices, dtype=np.uint64)
    keys = rng.stream_key(beam.seed, indices)
    u = rng.uniform(keys, rng.DRAW_POSITION) - 0.5
    v = rng.uniform(keys, rng.DRAW_POSITION + 1) - 0.5
    if beam.impact_window == "channel":
        # (u, v) uniform on [-1/2, 1/2]^2, mapped onto the rotated square |x| + |y| <= s.
        s = field.geometry.site_spacing
        x = s * (u + v)
        y = s * (u - v)
    else:
        w = float(beam.impact_window)
        x = 2.0 * w * u
        y = 2.0 * w * v
    g1, g2 = rng.normal_pair(keys, rng.DRAW_ANGLE)
    sd = 1e-3 * beam.divergence / np.sqrt(2.0)
    tilt = 1e-3 * beam.tilt_phi * field.geometry.psi_c
    return x, y, tilt + sd * g1, sd * g2


def sample_initial(beam, field, index):
    """Entry state of proton ``index``; deterministic in ``(beam.seed, index)``."""
    _check_beam(beam)
    if not 0 <= index < beam.n_protons:
        raise IndexError(f"proton index {index} outside [0, {beam.n_protons})")
    x, y, px, py = sample_batch(beam, field, [index])
    return ProtonState(float(x[0]), float(y[0]), float(px[0]), float(py[0]), 0.0, beam.energy * MEV)


def reduced_thickness(length, energy, field, multiplier=1.0):
    """``Lambda = multiplier * f L / v``: depth in transverse oscillation wavelengths.

    ``energy`` is in MeV.  ``multiplier`` rescales the definition, for example
    to pin a chosen thickness to a chosen ``Lambda``.
    """
    if not (length > 0 and energy > 0 and multiplier > 0):
        raise ValueError("length, energy and multiplier must be positive")
    e = energy * MEV
    return multiplier * transverse_frequency(field, e) * length / proton_speed(e)


def length_for(reduced, energy, field, multiplier=1.0):
    """Crystal length (nm) with reduced thickness ``reduced``."""
    return reduced / reduced_thickness(1.0, energy, field, multiplier)


def run_ensemble(beam, field, length, options=None, workers=1, depths=None, backend_name=None):
    """Propagate ``beam.n_protons`` protons through ``length`` nm.

    With ``depths`` (nm, ascending, each a whole number of steps from the
    entry), returns one :class:`RecordBatch` per depth from a single pass;
    otherwise a single batch at ``length``.  The step is ``options.step`` or
    ``length / options.steps``.
    """
    _check_beam(beam)
    options = options or PropagationOptions()
    nsteps = options.n_steps(length)
    dz = length / nsteps
    if depths is None:
        snapshots = [nsteps]
    else:
        snapshots = [int(round(d / dz)) for d in depths]
        if any(abs(s * dz - d) > 1e-9 * length for s, d in zip(snapshots, depths)):
            raise ValueError("depths must be whole multiples of the step")
    model = kernel_model(field, options)
    idx = np.arange(beam.n_protons, dtype=np.int64)
    x, y, px, py = sample_batch(beam, field, idx)
    states, flags = backend.propagate_batch(
        model, x, y, px, py, np.full(idx.size, beam.energy * MEV), rng.stream_key(beam.seed, idx), dz, nsteps,
        energy_loss=options.energy_loss, scattering=options.multiple_scattering, force=options.transverse_force,
        snapshots=snapshots, workers=workers, backend=backend_name,
    )
    batches = []
    for k, s in enumerate(snapshots):
        depth = s * dz
        st = states[k]
        batches.append(RecordBatch(
            idx, st[:, 0].copy(), st[:, 1].copy(), 1e3 * st[:, 2], 1e3 * st[:, 3], st[:, 4].copy(),
            flags[k].copy(), length=depth,
            reduced_thickness=reduced_thickness(depth, beam.energy, field) if depth > 0 else 0.0,
            tilt_phi=beam.tilt_phi,
        ))
    return batches if depths is not None else batches[0]


def atomic_write(path, data, mode="w"):
    """Write ``data`` to ``path`` through a temporary file and an atomic rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_csv(batch):
    """CSV text of a batch; floats carry 17 significant digits so values round-trip."""
    lines = [",".join(RECORD_COLUMNS)]
    for i in range(len(batch)):
        lines.append("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d" % (
            batch.index[i], batch.x[i], batch.y[i], batch.theta_x[i], batch.theta_y[i], batch.e_exit[i],
            batch.flags[i]))
    return "\n".join(lines) + "\n"


def write_records_csv(path, batch):
    atomic_write(path, records_csv(batch))


def read_records_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != RECORD_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return RecordBatch(data[:, 0].astype(np.int64), *data[:, 1:6].T, flags=data[:, 6].astype(np.int32))
