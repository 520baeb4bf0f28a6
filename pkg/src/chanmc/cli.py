"""Command-line driver: ``chanmc <subcommand> CONFIG [--seed N] [--threads N] [--out DIR]``.

Subcommands are ``simulate``, ``scan-tilt``, ``scan-thickness``, ``analyze``
and ``spin``.  Exit status is 0 on success, 2 for a configuration error and
3 when the run itself fails.  Every file goes through a temporary file and
an atomic rename, and ``manifest.json`` lists each one with its SHA-256.
"""
import argparse
import configparser
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from . import __version__, backend, phasespace, spin
from .config import load_config
from .crystal import ConfigError, build_channel
from .ensemble import (atomic_write, length_for, read_records_csv, records_csv, reduced_thickness, run_ensemble,
                       sample_batch)
from .potential import PotentialField, channel_potential, electron_density, thermal_potential

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class Artifacts:
    """Writes files under one output directory and remembers their hashes."""

    def __init__(self, root):
        self.root = root
        self.files = {}

    def write(self, name, text):
        data = text.encode("utf-8")
        path = os.path.join(self.root, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        atomic_write(path, data, "wb")
        self.files[name] = hashlib.sha256(data).hexdigest()

    def manifest(self, **info):
        info["artifacts"] = [{"file": k, "sha256": v} for k, v in sorted(self.files.items())]
        text = json.dumps(info, indent=1, sort_keys=True, default=_jsonable) + "\n"
        atomic_write(os.path.join(self.root, "manifest.json"), text)


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def _g(v):
    return repr(float(v))


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_g(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _effective_ini(path, args):
    """Config text with the command-line overrides written in."""
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        parser.read_string(fh.read())
    for section, key, value in (("beam", "seed", args.seed), ("run", "threads", args.threads),
                                ("run", "out", args.out)):
        if value is not None:
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key, str(value))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _field(config):
    crystal = replace(config.crystal, energy_mev=config.beam.energy)
    return PotentialField(build_channel(crystal))


def _length(config, field):
    if config.length is not None:
        return config.length
    return length_for(config.reduced_thickness, config.beam.energy, field, config.lambda_multiplier)


def _safe_fwhm(grid, axis):
    try:
        return phasespace.fwhm(grid, axis)
    except ValueError:
        return float("nan")


def analyze_batch(batch, config, field, art, prefix="", length=None):
    """Write the requested analysis files for one batch; returns summary numbers."""
    a = config.analysis
    g = field.geometry
    summary = {"central_yield": phasespace.central_yield(batch, a.central_radius * g.psi_c)}
    grids = {}
    for plane in ("configuration", "angular"):
        window = a.configuration_window if plane == "configuration" else a.angular_window
        grids[plane] = phasespace.histogram2d(batch, plane, a.bins, window, g)
        if plane in a.histograms:
            art.write(f"{prefix}hist_{plane}.csv", grids[plane].to_csv())
    conf, ang = grids["configuration"], grids["angular"]
    summary["fwhm_x"] = _safe_fwhm(conf, 0)
    summary["fwhm_y"] = _safe_fwhm(conf, 1)
    summary["fwhm_theta_x"] = _safe_fwhm(ang, 0)
    summary["fwhm_theta_y"] = _safe_fwhm(ang, 1)
    summary["peaks_theta_x"] = phasespace.find_profile_peaks(ang.marginal(0)).size
    cell = conf.bin_width[0] * conf.bin_width[1]
    summary["peak_yield"] = float(conf.counts.max()) / (max(len(batch), 1) * cell)
    if a.fwhm:
        rows = [(k, summary[k]) for k in ("fwhm_x", "fwhm_y", "fwhm_theta_x", "fwhm_theta_y")]
        art.write(f"{prefix}fwhm.csv", _csv(("quantity", "value"), rows))
    inv_rows = []
    for sub in a.sigma:
        entry = None
        if sub in ("X", "Y"):
            x, y, px, py = sample_batch(config.beam, field, batch.index)
            entry = {"x": x, "y": y, "phi_x": px, "phi_y": py}
        try:
            sig = phasespace.beam_sigma(batch, sub, entry=entry)
        except ValueError:
            continue
        art.write(f"{prefix}sigma_{sub}.csv", sig.to_csv())
        i1, s4 = phasespace.invariants(sig)
        inv_rows.append((sub, i1, s4, sig.count))
    if inv_rows:
        art.write(f"{prefix}invariants.csv", _csv(("subspace", "I_prime", "sigma4", "count"), inv_rows))
    if a.jacobian:
        lx, hx, ly, hy = a.configuration_window or phasespace.default_window("configuration", g)
        xs = np.linspace(lx, hx, a.jacobian_points + 2)[1:-1]
        ys = np.linspace(ly, hy, a.jacobian_points + 2)[1:-1]
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        jm = phasespace.jacobian_map(field, length if length is not None else batch.length, gx.ravel(),
                                     gy.ravel(), tilt=config.beam.tilt_phi, h=a.jacobian_h,
                                     options=config.propagation)
        art.write(f"{prefix}jacobian.csv", jm.to_csv())
    return summary


def potential_map(field, window, n):
    """CSV of U, thermally averaged U and n_e on cell centres; blank values on string axes."""
    lx, hx, ly, hy = window
    xs = lx + (np.arange(n) + 0.5) * (hx - lx) / n
    ys = ly + (np.arange(n) + 0.5) * (hy - ly) / n
    gx, gy = (v.ravel() for v in np.meshgrid(xs, ys, indexing="ij"))
    pos = field.geometry.string_positions
    r = np.min(np.hypot(gx[:, None] - pos[:, 0], gy[:, None] - pos[:, 1]), axis=1)
    ok = r > 1e-3 * field.geometry.screening_radius
    u = np.full(gx.size, np.nan)
    uth, ne = u.copy(), u.copy()
    u[ok] = channel_potential(gx[ok], gy[ok], field)
    uth[ok] = thermal_potential(gx[ok], gy[ok], field)
    ne[ok] = electron_density(gx[ok], gy[ok], field)
    return _csv(("x_nm", "y_nm", "U_eV", "U_thermal_eV", "n_e_per_nm3"), zip(gx, gy, u, uth, ne))


def _counts(batch):
    ch = int(batch.channeled.sum())
    return {"protons": len(batch), "channeled": ch, "dechanneled": len(batch) - ch}


def cmd_simulate(config, field, art):
    length = _length(config, field)
    batch = run_ensemble(config.beam, field, length, config.propagation, workers=config.threads,
                         backend_name=config.backend)
    art.write("records.csv", records_csv(batch))
    summary = analyze_batch(batch, config, field, art, length=length)
    info = {"length_nm": length, "reduced_thickness": batch.reduced_thickness, "summary": summary}
    return info, _counts(batch), False


def cmd_scan_tilt(config, field, art):
    length = _length(config, field)
    rows, failed, counts = [], False, {"protons": 0, "channeled": 0, "dechanneled": 0}
    for tilt in config.tilts:
        prefix = f"tilt_{tilt:.4f}/"
        try:
            beam = replace(config.beam, tilt_phi=tilt)
            batch = run_ensemble(beam, field, length, config.propagation, workers=config.threads,
                                 backend_name=config.backend)
            art.write(prefix + "records.csv", records_csv(batch))
            s = analyze_batch(batch, replace(config, beam=beam), field, art, prefix, length=length)
            rows.append((tilt, s["central_yield"], s["fwhm_x"], s["fwhm_theta_x"], s["peaks_theta_x"], "ok"))
            for k, v in _counts(batch).items():
                counts[k] += v
        except Exception as exc:  # recorded; the scan carries on
            failed = True
            rows.append((tilt, np.nan, np.nan, np.nan, -1, f"error: {type(exc).__name__}: {exc}".replace(",", ";")))
    header = ("tilt_psi_c", "central_yield", "fwhm_x_nm", "fwhm_theta_x_mrad", "peaks_theta_x", "status")
    art.write("scan_tilt.csv", _csv(header, rows))
    return {"length_nm": length}, counts, failed


def cmd_scan_thickness(config, field, art):
    if config.lengths:
        targets = sorted(config.lengths)
    else:
        targets = sorted(length_for(v, config.beam.energy, field, config.lambda_multiplier)
                         for v in config.reduced_thicknesses)
    deepest = targets[-1]
    p = config.propagation
    dz = p.step if p.step is not None else deepest / p.n_steps(deepest)
    ks = sorted({max(1, int(round(t / dz))) for t in targets})
    depths = [k * dz for k in ks]
    batches = run_ensemble(config.beam, field, depths[-1], replace(p, step=None, steps=ks[-1]),
                           workers=config.threads, depths=depths, backend_name=config.backend)
    rows, failed = [], False
    for batch in batches:
        lam = reduced_thickness(batch.length, config.beam.energy, field, config.lambda_multiplier)
        prefix = f"lambda_{lam:.4f}/"
        try:
            art.write(prefix + "records.csv", records_csv(batch))
            s = analyze_batch(batch, config, field, art, prefix, length=batch.length)
            rows.append((lam, batch.length, s["fwhm_x"], s["fwhm_theta_x"], s["peak_yield"], "ok"))
        except Exception as exc:
            failed = True
            rows.append((lam, batch.length, np.nan, np.nan, np.nan,
                         f"error: {type(exc).__name__}: {exc}".replace(",", ";")))
    header = ("lambda", "length_nm", "fwhm_x_nm", "fwhm_theta_x_mrad", "peak_yield_per_nm2", "status")
    art.write("scan_thickness.csv", _csv(header, rows))
    return {"step_nm": dz}, _counts(batches[-1]), failed


def cmd_analyze(config, field, art):
    batch = read_records_csv(config.analysis.input)
    length = _length(config, field)
    summary = analyze_batch(batch, config, field, art, length=length)
    if config.analysis.potential_map:
        window = config.analysis.configuration_window or phasespace.default_window("configuration", field.geometry)
        art.write("potential_map.csv", potential_map(field, window, config.analysis.map_points))
    return {"input": config.analysis.input, "summary": summary}, _counts(batch), False


def cmd_spin(config, field, art):
    params = config.spin
    if config.sweep is None:
        name, values = "omega_s", [params.omega_s]
    else:
        name, start, stop, count = config.sweep
        values = np.linspace(start, stop, count)
    rows = spin.level_sweep(params, name, values)
    # Frequencies are unit-agnostic; MHz is the labelling convention.
    label = f"{name}_rad" if name == "phi_tilt" else f"{name}_MHz"
    art.write("spin_levels.csv", _csv((label, "E0_MHz", "E1_MHz", "E2_MHz", "E3_MHz", "J_MHz"), rows))
    return {"tilt_angle_rad": spin.tilt_angle(params)}, {}, False


COMMANDS = {
    "simulate": cmd_simulate,
    "scan-tilt": cmd_scan_tilt,
    "scan-thickness": cmd_scan_thickness,
    "analyze": cmd_analyze,
    "spin": cmd_spin,
}


def _preflight(command, config, config_path):
    problems = []
    if command == "scan-tilt" and not config.tilts:
        problems.append("scan.tilts: must list at least one tilt for scan-tilt")
    if command == "scan-thickness" and not (config.reduced_thicknesses or config.lengths):
        problems.append("scan.reduced_thicknesses: give reduced_thicknesses or lengths for scan-thickness")
    if command == "scan-thickness" and config.reduced_thicknesses and config.lengths:
        problems.append("scan.lengths: give only one of reduced_thicknesses and lengths")
    if command == "analyze":
        src = config.analysis.input
        if not src:
            problems.append("analysis.input: analyze needs a record CSV")
        else:
            if not os.path.isabs(src) and not os.path.exists(src):
                src = os.path.join(os.path.dirname(os.path.abspath(config_path)), src)
            if not os.path.isfile(src):
                problems.append(f"analysis.input: {config.analysis.input} not found")
            config.analysis.input = src
    try:
        os.makedirs(config.out, exist_ok=True)
        with tempfile.TemporaryFile(dir=config.out):
            pass
    except OSError as exc:
        problems.append(f"run.out: {config.out} is not writable ({exc.strerror})")
    return problems


def build_parser():
    parser = argparse.ArgumentParser(prog="chanmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chanmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="INI configuration file")
        p.add_argument("--seed", type=int, help="override beam.seed")
        p.add_argument("--threads", type=int, help="override run.threads")
        p.add_argument("--out", help="override run.out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "threads": args.threads, "out": args.out}
    try:
        config = load_config(args.config, overrides)
        problems = _preflight(args.command, config, args.config)
        if problems:
            raise ConfigError("\n".join(problems))
    except ConfigError as exc:
        print("chanmc: configuration error", file=sys.stderr)
        for line in str(exc).splitlines():
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG
    art = Artifacts(config.out)
    start = time.perf_counter()
    try:
        field = _field(config)
        info, counts, failed = COMMANDS[args.command](config, field, art)
    except Exception as exc:
        print(f"chanmc: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    art.manifest(
        command=args.command, version=__version__, backend=config.backend or backend.BACKEND,
        seed=config.beam.seed, threads=config.threads, wall_time_s=time.perf_counter() - start,
        counts=counts, config=config.echo(), config_text=_effective_ini(args.config, args), result=info,
    )
    if failed:
        print(f"chanmc: {args.command}: some scan points failed, see the summary CSV", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
