"""Run configuration read from an INI file.

Sections and keys (all optional; defaults in brackets)::

    [crystal]     lattice_constant [0.5431], coordination_lines [3], sigma_th [0.0074],
                  z1 [1], z2 [14]
    [beam]        n_protons [1000], energy [2.0 MeV], tilt_phi [0], divergence [0.1 mrad],
                  seed [0], impact_window [channel]
    [propagation] steps [4096], step, energy_loss [no], multiple_scattering [no],
                  transverse_force [yes], field_mode [radial], table_spacing [0.002],
                  r_min_factor [1e-3], phi_max [0.1]
    [run]         length [92 nm] or reduced_thickness, lambda_multiplier [1], threads [1],
                  out [runs/out]
    [analysis]    histograms [angular, configuration], bins [256], angular_window,
                  configuration_window, sigma [Gx], fwhm [yes], central_radius [0.1 psi_c],
                  jacobian [no], jacobian_points [21], jacobian_h [1e-4], input,
                  potential_map [no], map_points [65]
    [scan]        tilts, reduced_thicknesses or lengths
    [spin]        omega_s, omega_l, omega_rf, a_hyper, b_hyper, d_dip, phi_tilt,
                  sweep_parameter, sweep_start, sweep_stop, sweep_count

Windows are four comma-separated numbers ``lo_x, hi_x, lo_y, hi_y``.
"""
import configparser
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .crystal import ConfigError, CrystalConfig
from .dynamics import PropagationOptions
from .ensemble import BeamConfig
from .spin import SpinParams

_KNOWN = {
    "crystal": {"lattice_constant", "coordination_lines", "sigma_th", "z1", "z2", "material", "axis"},
    "beam": {f.name for f in fields(BeamConfig)},
    "propagation": {"steps", "step", "energy_loss", "multiple_scattering", "transverse_force", "field_mode",
                    "table_spacing", "r_min_factor", "phi_max", "record_trajectory"},
    "run": {"length", "reduced_thickness", "lambda_multiplier", "threads", "out", "backend"},
    "analysis": {"histograms", "bins", "angular_window", "configuration_window", "sigma", "fwhm",
                 "central_radius", "jacobian", "jacobian_points", "jacobian_h", "input", "potential_map",
                 "map_points"},
    "scan": {"tilts", "reduced_thicknesses", "lengths"},
    "spin": {f.name for f in fields(SpinParams)} | {"sweep_parameter", "sweep_start", "sweep_stop",
                                                     "sweep_count"},
}


@dataclass
class AnalysisConfig:
    histograms: tuple = ("angular", "configuration")
    bins: int = 256
    angular_window: Optional[tuple] = None  # mrad
    configuration_window: Optional[tuple] = None  # nm
    sigma: tuple = ("Gx",)
    fwhm: bool = True
    central_radius: float = 0.1  # fraction of psi_c
    jacobian: bool = False
    jacobian_points: int = 21
    jacobian_h: float = 1e-4  # nm
    input: Optional[str] = None  # record CSV for ``analyze``
    potential_map: bool = False  # ``analyze`` also writes U and n_e on a grid
    map_points: int = 65


@dataclass
class RunConfig:
    crystal: CrystalConfig = field(default_factory=CrystalConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    propagation: PropagationOptions = field(default_factory=PropagationOptions)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    length: Optional[float] = 92.0  # nm
    reduced_thickness: Optional[float] = None
    lambda_multiplier: float = 1.0
    threads: int = 1
    out: str = "runs/out"
    backend: Optional[str] = None
    tilts: tuple = ()
    reduced_thicknesses: tuple = ()
    lengths: tuple = ()
    spin: SpinParams = field(default_factory=SpinParams)
    sweep: Optional[tuple] = None  # (parameter, start, stop, count)

    def echo(self):
        """Plain dict of every setting, for the manifest."""
        return asdict(self)


def _bool(raw, key, problems):
    low = raw.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    problems.append(f"{key}: expected yes/no, got {raw!r}")
    return None


def _num(raw, key, problems, kind=float):
    try:
        value = kind(raw.strip()) if kind is float else int(raw.strip(), 0)
    except ValueError:
        problems.append(f"{key}: expected {'a number' if kind is float else 'an integer'}, got {raw!r}")
        return None
    return value


def _list(raw, key, problems):
    out = []
    for part in raw.split(","):
        if part.strip():
            v = _num(part, key, problems)
            if v is not None:
                out.append(v)
    return tuple(out)


def _window(raw, key, problems):
    values = _list(raw, key, problems)
    if len(values) != 4:
        problems.append(f"{key}: expected 4 numbers lo_x, hi_x, lo_y, hi_y")
        return None
    if not (values[1] > values[0] and values[3] > values[2]):
        problems.append(f"{key}: window has zero area")
    return values


def parse_config(text, overrides=None):
    """Build a :class:`RunConfig` from INI text; raises ConfigError listing every problem."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    problems = []
    for section in parser.sections():
        if section not in _KNOWN:
            problems.append(f"[{section}]: unknown section")
            continue
        for key in parser[section]:
            if key not in _KNOWN[section]:
                problems.append(f"{section}.{key}: unknown key")
    get = lambda s, k: parser.get(s, k, fallback=None)  # noqa: E731

    crystal_kw = {}
    for key, kind in (("lattice_constant", float), ("sigma_th", float), ("coordination_lines", int), ("z1", int),
                      ("z2", int)):
        raw = get("crystal", key)
        if raw is not None:
            v = _num(raw, f"crystal.{key}", problems, kind)
            if v is not None:
                crystal_kw[key] = v
    for key in ("material", "axis"):
        if get("crystal", key) is not None:
            crystal_kw[key] = get("crystal", key).strip()

    beam_kw = {}
    for key, kind in (("n_protons", int), ("energy", float), ("tilt_phi", float), ("divergence", float),
                      ("seed", int)):
        raw = get("beam", key)
        if raw is not None:
            v = _num(raw, f"beam.{key}", problems, kind)
            if v is not None:
                beam_kw[key] = v
    raw = get("beam", "impact_window")
    if raw is not None:
        raw = raw.strip()
        beam_kw["impact_window"] = raw if raw == "channel" else _num(raw, "beam.impact_window", problems)

    prop_kw = {}
    for key, kind in (("steps", int), ("step", float), ("table_spacing", float), ("r_min_factor", float),
                      ("phi_max", float)):
        raw = get("propagation", key)
        if raw is not None:
            v = _num(raw, f"propagation.{key}", problems, kind)
            if v is not None:
                prop_kw[key] = v
    for key in ("energy_loss", "multiple_scattering", "transverse_force", "record_trajectory"):
        raw = get("propagation", key)
        if raw is not None:
            prop_kw[key] = _bool(raw, f"propagation.{key}", problems)
    raw = get("propagation", "field_mode")
    if raw is not None:
        prop_kw["field_mode"] = raw.strip()
        if prop_kw["field_mode"] not in ("radial", "grid", "exact"):
            problems.append("propagation.field_mode: expected radial, grid or exact")

    an_kw = {}
    raw = get("analysis", "histograms")
    if raw is not None:
        an_kw["histograms"] = tuple(p.strip() for p in raw.split(",") if p.strip())
        for h in an_kw["histograms"]:
            if h not in ("angular", "configuration"):
                problems.append(f"analysis.histograms: unknown plane {h!r}")
    raw = get("analysis", "sigma")
    if raw is not None:
        an_kw["sigma"] = tuple(p.strip() for p in raw.split(",") if p.strip())
        for s in an_kw["sigma"]:
            if s not in ("Gx", "Gy", "X", "Y"):
                problems.append(f"analysis.sigma: unknown subspace {s!r}")
    for key, kind in (("bins", int), ("central_radius", float), ("jacobian_points", int), ("jacobian_h", float),
                      ("map_points", int)):
        raw = get("analysis", key)
        if raw is not None:
            v = _num(raw, f"analysis.{key}", problems, kind)
            if v is not None:
                an_kw[key] = v
    for key in ("fwhm", "jacobian", "potential_map"):
        raw = get("analysis", key)
        if raw is not None:
            an_kw[key] = _bool(raw, f"analysis.{key}", problems)
    for key in ("angular_window", "configuration_window"):
        raw = get("analysis", key)
        if raw is not None:
            an_kw[key] = _window(raw, f"analysis.{key}", problems)
    if get("analysis", "input") is not None:
        an_kw["input"] = get("analysis", "input").strip()

    run_kw = {}
    for key, kind in (("length", float), ("reduced_thickness", float), ("lambda_multiplier", float),
                      ("threads", int)):
        raw = get("run", key)
        if raw is not None:
            v = _num(raw, f"run.{key}", problems, kind)
            if v is not None:
                run_kw[key] = v
    if get("run", "out") is not None:
        run_kw["out"] = get("run", "out").strip()
    if get("run", "backend") is not None:
        run_kw["backend"] = get("run", "backend").strip()
    if "reduced_thickness" in run_kw and "length" not in run_kw:
        run_kw["length"] = None

    for key in ("tilts", "reduced_thicknesses", "lengths"):
        raw = get("scan", key)
        if raw is not None:
            run_kw[key] = _list(raw, f"scan.{key}", problems)

    spin_kw = {}
    for f in fields(SpinParams):
        raw = get("spin", f.name)
        if raw is not None:
            v = _num(raw, f"spin.{f.name}", problems)
            if v is not None:
                spin_kw[f.name] = v
    sweep = None
    if get("spin", "sweep_parameter") is not None:
        name = get("spin", "sweep_parameter").strip()
        if name not in {f.name for f in fields(SpinParams)}:
            problems.append(f"spin.sweep_parameter: unknown parameter {name!r}")
        start = _num(get("spin", "sweep_start") or "0", "spin.sweep_start", problems)
        stop = _num(get("spin", "sweep_stop") or "1", "spin.sweep_stop", problems)
        count = _num(get("spin", "sweep_count") or "11", "spin.sweep_count", problems, int)
        if count is not None and count < 1:
            problems.append("spin.sweep_count: must be >= 1")
        sweep = (name, start, stop, count)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            beam_kw["seed"] = int(value)
        else:
            run_kw[key] = value

    config = None
    try:
        config = RunConfig(
            crystal=CrystalConfig(**crystal_kw, energy_mev=beam_kw.get("energy", BeamConfig.energy)),
            beam=BeamConfig(**beam_kw),
            propagation=PropagationOptions(**prop_kw),
            analysis=AnalysisConfig(**an_kw),
            spin=SpinParams(**spin_kw),
            sweep=sweep,
            **run_kw,
        )
    except TypeError as exc:  # pragma: no cover - keys are filtered above
        problems.append(str(exc))
    if config is not None:
        problems.extend(validate(config))
    if problems:
        raise ConfigError("\n".join(problems))
    return config


def validate(config):
    """Every violated field of a run configuration, as ``section.key: reason`` strings."""
    problems = [f"crystal.{p}" for p in config.crystal.validate()]
    problems += [f"beam.{p}" for p in config.beam.validate()]
    p = config.propagation
    if p.step is None and p.steps < 1:
        problems.append("propagation.steps: must be >= 1")
    if p.step is not None and not p.step > 0:
        problems.append("propagation.step: must be positive")
    if not p.table_spacing > 0:
        problems.append("propagation.table_spacing: must be positive")
    if not p.r_min_factor > 0:
        problems.append("propagation.r_min_factor: must be positive")
    if not 0 < p.phi_max < 1:
        problems.append("propagation.phi_max: must lie in (0, 1) rad")
    if (config.length is None) == (config.reduced_thickness is None):
        problems.append("run.length: give exactly one of length and reduced_thickness")
    elif config.length is not None and not config.length > 0:
        problems.append("run.length: must be positive")
    elif config.reduced_thickness is not None and not config.reduced_thickness > 0:
        problems.append("run.reduced_thickness: must be positive")
    if config.length is not None and p.step is not None and p.step > config.length:
        problems.append("propagation.step: must not exceed the crystal length")
    if not config.lambda_multiplier > 0:
        problems.append("run.lambda_multiplier: must be positive")
    if config.threads < 1:
        problems.append("run.threads: must be >= 1")
    if config.backend not in (None, "compiled", "python"):
        problems.append("run.backend: expected compiled or python")
    a = config.analysis
    if a.bins < 2:
        problems.append("analysis.bins: must be >= 2")
    if not a.central_radius > 0:
        problems.append("analysis.central_radius: must be positive")
    if a.jacobian_points < 1:
        problems.append("analysis.jacobian_points: must be >= 1")
    if a.map_points < 2:
        problems.append("analysis.map_points: must be >= 2")
    if not a.jacobian_h > 0:
        problems.append("analysis.jacobian_h: must be positive")
    for t in config.tilts:
        if not 0 <= t <= 0.5:
            problems.append(f"scan.tilts: {t} outside [0, 0.5]")
    for v in config.reduced_thicknesses + config.lengths:
        if not v > 0:
            problems.append(f"scan: thickness {v} must be positive")
    problems += [f"spin.{q}" for q in config.spin.validate()]
    return problems


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
