"""Experiment orchestration: parse configs, run analyses, emit artifacts.

A config file is sectioned key=value text (INI form) with sections
``[plant]``, ``[controller]``, ``[excitation]``, ``[analysis]`` and
``[run]``; all numbers are SI units in the motor rotation frame. Missing
sections fall back to the identified gripper plant, no controller, no
excitation. Unknown keys are rejected so typos fail loudly.

Every run writes its artifacts atomically into the output directory and
finishes with ``manifest.txt`` listing each file with its SHA-256 content
hash. Identical config and seed give byte-identical artifacts.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import impedance as imp
from . import passivity as pas
from . import sysid as sid
from .controllers import (
    CompositeConfig,
    DOBConfig,
    DahlEstimate,
    FeedforwardConfig,
    PDConfig,
    ProportionalFFConfig,
)
from .lti import FrequencyGrid
from .plant import DEFAULT_DT, PlantParams, simulate
from .rng import Xorshift64Star
from .signals import ChirpSpec, ConstantSpec, SineSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "parse_config_file",
    "presets",
    "run_experiment",
    "run_preset",
    "serialize_config",
]

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid experiment configuration; message names key and constraint."""


# ---------------------------------------------------------------------------
# Config model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisSpec:
    """Analysis selection and its parameters."""

    kind: str = "simulate"
    grid_min: float = 0.1
    grid_max: float = 100.0
    grid_points: int = 20
    force_amplitude: float = 0.1
    method: str = "measured"        # impedance: measured | closed_form
    include_motor_port: bool = False
    fit_dahl: bool = False
    backdrive_omega: float = 1.0
    backdrive_amplitude: float = 0.5
    backdrive_cycles: int = 4

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.log_spaced(self.grid_min, self.grid_max, self.grid_points)


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantParams = field(default_factory=PlantParams.gripper)
    controller: object = None
    excitation: object = None
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    duration: float = 10.0
    dt: float = DEFAULT_DT
    seed: int = 1
    noise_std: float = 0.0
    allow_nyquist: bool = True
    output_dir: str = "out"


_PLANT_KEYS = ("m", "b", "k", "m_e", "b_e", "k_e", "b_s", "k_s", "F_c", "sigma", "n_dahl")
_CONTROLLER_KEYS = (
    "type", "K_f", "source", "lambda", "lambda_hz", "m_n", "b_n", "k_n",
    "K_p", "K_d", "x_target", "delay_samples",
    "ff_b_e", "ff_k_e", "ff_b_s", "ff_k_s", "ff_dahl", "ff_F_c", "ff_sigma",
)
_EXCITATION_KEYS = (
    "type", "amplitude", "f0", "f1", "duration", "omega", "value", "noise_std",
)
_ANALYSIS_KEYS = (
    "type", "grid_min", "grid_max", "grid_points", "force_amplitude", "method",
    "include_motor_port", "fit_dahl", "backdrive_omega", "backdrive_amplitude",
    "backdrive_cycles",
)
_RUN_KEYS = ("duration", "dt", "seed", "output_dir", "allow_nyquist")


def _check_keys(section: str, items, allowed) -> None:
    for key in items:
        if key not in allowed:
            raise ConfigError(f"[{section}] unknown key {key!r}; allowed: {sorted(allowed)}")


def _getfloat(cp, section, key, default=None):
    try:
        if cp.has_option(section, key):
            return cp.getfloat(section, key)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be a number: {exc}") from exc
    if default is None:
        raise ConfigError(f"[{section}] missing required key {key!r}")
    return default


def _parse_plant(cp) -> PlantParams:
    if not cp.has_section("plant"):
        return PlantParams.gripper()
    _check_keys("plant", cp.options("plant"), _PLANT_KEYS)
    base = PlantParams.gripper()
    kwargs = {}
    for key in _PLANT_KEYS:
        kwargs[key] = _getfloat(cp, "plant", key, getattr(base, key))
    try:
        return PlantParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[plant] {exc}") from exc


def _controller_lambda(cp) -> float:
    has_rad = cp.has_option("controller", "lambda")
    has_hz = cp.has_option("controller", "lambda_hz")
    if has_rad and has_hz:
        raise ConfigError("[controller] give lambda (rad/s) or lambda_hz (Hz), not both")
    if has_hz:
        return TWO_PI * _getfloat(cp, "controller", "lambda_hz")
    return _getfloat(cp, "controller", "lambda", 20.0)


def _parse_feedforward(cp, plant: PlantParams) -> FeedforwardConfig:
    dahl = None
    want_dahl = cp.getboolean("controller", "ff_dahl", fallback=plant.F_c > 0)
    if want_dahl:
        f_c = _getfloat(cp, "controller", "ff_F_c", plant.F_c if plant.F_c > 0 else 0.032)
        sig = _getfloat(cp, "controller", "ff_sigma", plant.sigma if plant.sigma > 0 else 12.8)
        dahl = DahlEstimate(F_c=f_c, sigma=sig)
    return FeedforwardConfig(
        b_e=_getfloat(cp, "controller", "ff_b_e", plant.b_e),
        k_e=_getfloat(cp, "controller", "ff_k_e", plant.k_e),
        b_s=_getfloat(cp, "controller", "ff_b_s", plant.b_s),
        k_s=_getfloat(cp, "controller", "ff_k_s", plant.k_s),
        dahl=dahl,
    )


def _parse_controller(cp, plant: PlantParams):
    if not cp.has_section("controller"):
        return None
    _check_keys("controller", cp.options("controller"), _CONTROLLER_KEYS)
    kind = cp.get("controller", "type", fallback="none").strip().lower()
    try:
        if kind == "none":
            return None
        if kind in ("proportional", "proportional_ff"):
            return ProportionalFFConfig(
                K_f=_getfloat(cp, "controller", "K_f"),
                source=cp.get("controller", "source", fallback="internal"),
            )
        if kind == "dob":
            return DOBConfig(
                lam=_controller_lambda(cp),
                m_n=_getfloat(cp, "controller", "m_n", plant.m),
                b_n=_getfloat(cp, "controller", "b_n", 0.0),
                k_n=_getfloat(cp, "controller", "k_n", 0.0),
            )
        if kind == "pd":
            return PDConfig(
                K_p=_getfloat(cp, "controller", "K_p"),
                K_d=_getfloat(cp, "controller", "K_d"),
                x_target=_getfloat(cp, "controller", "x_target", 0.0),
                delay_samples=cp.getint("controller", "delay_samples", fallback=0),
            )
        if kind == "composite":
            dob = DOBConfig(
                lam=_controller_lambda(cp),
                m_n=_getfloat(cp, "controller", "m_n", plant.m),
                b_n=_getfloat(cp, "controller", "b_n", 0.0),
                k_n=_getfloat(cp, "controller", "k_n", 0.0),
            )
            return CompositeConfig(dob=dob, feedforward=_parse_feedforward(cp, plant))
    except ValueError as exc:
        raise ConfigError(f"[controller] {exc}") from exc
    raise ConfigError(f"[controller] unknown type {kind!r}")


def _parse_excitation(cp):
    if not cp.has_section("excitation"):
        return None, 0.0
    _check_keys("excitation", cp.options("excitation"), _EXCITATION_KEYS)
    noise = _getfloat(cp, "excitation", "noise_std", 0.0)
    kind = cp.get("excitation", "type", fallback="none").strip().lower()
    try:
        if kind == "none":
            return None, noise
        if kind == "chirp":
            return (
                ChirpSpec(
                    amplitude=_getfloat(cp, "excitation", "amplitude", 0.3),
                    f0=_getfloat(cp, "excitation", "f0", 0.01),
                    f1=_getfloat(cp, "excitation", "f1", 1000.0),
                    duration=_getfloat(cp, "excitation", "duration", 600.0),
                ),
                noise,
            )
        if kind == "sine":
            return (
                SineSpec(
                    amplitude=_getfloat(cp, "excitation", "amplitude"),
                    omega=_getfloat(cp, "excitation", "omega"),
                ),
                noise,
            )
        if kind == "constant":
            return ConstantSpec(value=_getfloat(cp, "excitation", "value")), noise
    except ValueError as exc:
        raise ConfigError(f"[excitation] {exc}") from exc
    raise ConfigError(f"[excitation] unknown type {kind!r}")


def _parse_analysis(cp) -> AnalysisSpec:
    if not cp.has_section("analysis"):
        return AnalysisSpec()
    _check_keys("analysis", cp.options("analysis"), _ANALYSIS_KEYS)
    kind = cp.get("analysis", "type", fallback="simulate").strip().lower()
    kind = {"passivity-report": "passivity"}.get(kind, kind)
    if kind not in ("simulate", "sysid", "impedance", "workloop", "zwidth", "passivity"):
        raise ConfigError(f"[analysis] unknown type {kind!r}")
    spec = AnalysisSpec(
        kind=kind,
        grid_min=_getfloat(cp, "analysis", "grid_min", 0.1),
        grid_max=_getfloat(cp, "analysis", "grid_max", 100.0),
        grid_points=cp.getint("analysis", "grid_points", fallback=20),
        force_amplitude=_getfloat(cp, "analysis", "force_amplitude", 0.1),
        method=cp.get("analysis", "method", fallback="measured").strip().lower(),
        include_motor_port=cp.getboolean("analysis", "include_motor_port", fallback=False),
        fit_dahl=cp.getboolean("analysis", "fit_dahl", fallback=False),
        backdrive_omega=_getfloat(cp, "analysis", "backdrive_omega", 1.0),
        backdrive_amplitude=_getfloat(cp, "analysis", "backdrive_amplitude", 0.5),
        backdrive_cycles=cp.getint("analysis", "backdrive_cycles", fallback=4),
    )
    if spec.method not in ("measured", "closed_form"):
        raise ConfigError("[analysis] method must be 'measured' or 'closed_form'")
    if spec.grid_points < 1 or spec.grid_min <= 0 or spec.grid_max <= spec.grid_min:
        raise ConfigError("[analysis] grid requires 0 < grid_min < grid_max, points >= 1")
    return spec


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI-form experiment text into a validated ExperimentConfig."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (K_p vs k_p)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    for section in cp.sections():
        if section not in ("plant", "controller", "excitation", "analysis", "run"):
            raise ConfigError(f"unknown section [{section}]")
    plant = _parse_plant(cp)
    controller = _parse_controller(cp, plant)
    excitation, noise = _parse_excitation(cp)
    analysis = _parse_analysis(cp)
    if cp.has_section("run"):
        _check_keys("run", cp.options("run"), _RUN_KEYS)
    duration = _getfloat(cp, "run", "duration", 10.0) if cp.has_section("run") else 10.0
    dt = _getfloat(cp, "run", "dt", DEFAULT_DT) if cp.has_section("run") else DEFAULT_DT
    seed = cp.getint("run", "seed", fallback=1) if cp.has_section("run") else 1
    allow_ny = (
        cp.getboolean("run", "allow_nyquist", fallback=True)
        if cp.has_section("run")
        else True
    )
    out = cp.get("run", "output_dir", fallback="out") if cp.has_section("run") else "out"
    if dt <= 0 or dt > 1e-2:
        raise ConfigError("[run] dt must lie in (0, 1e-2]")
    if duration <= 0:
        raise ConfigError("[run] duration must be > 0")
    return ExperimentConfig(
        plant=plant,
        controller=controller,
        excitation=excitation,
        analysis=analysis,
        duration=duration,
        dt=dt,
        seed=seed,
        noise_std=noise,
        allow_nyquist=allow_ny,
        output_dir=out,
    )


def parse_config_file(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    """Render a config back to INI text; parse(serialize(c)) == c."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["plant"] = {k: repr(getattr(cfg.plant, k)) for k in _PLANT_KEYS}
    ctrl = {}
    c = cfg.controller
    if c is None:
        ctrl["type"] = "none"
    elif isinstance(c, ProportionalFFConfig):
        ctrl = {"type": "proportional", "K_f": repr(c.K_f), "source": c.source}
    elif isinstance(c, DOBConfig):
        ctrl = {
            "type": "dob", "lambda": repr(c.lam), "m_n": repr(c.m_n),
            "b_n": repr(c.b_n), "k_n": repr(c.k_n),
        }
    elif isinstance(c, PDConfig):
        ctrl = {
            "type": "pd", "K_p": repr(c.K_p), "K_d": repr(c.K_d),
            "x_target": repr(c.x_target), "delay_samples": str(c.delay_samples),
        }
    elif isinstance(c, CompositeConfig):
        ctrl = {
            "type": "composite", "lambda": repr(c.dob.lam), "m_n": repr(c.dob.m_n),
            "b_n": repr(c.dob.b_n), "k_n": repr(c.dob.k_n),
            "ff_b_e": repr(c.feedforward.b_e), "ff_k_e": repr(c.feedforward.k_e),
            "ff_b_s": repr(c.feedforward.b_s), "ff_k_s": repr(c.feedforward.k_s),
            "ff_dahl": str(c.feedforward.dahl is not None),
        }
        if c.feedforward.dahl is not None:
            ctrl["ff_F_c"] = repr(c.feedforward.dahl.F_c)
            ctrl["ff_sigma"] = repr(c.feedforward.dahl.sigma)
    else:
        raise ConfigError(f"cannot serialize controller {c!r}")
    cp["controller"] = ctrl

    exc = {}
    e = cfg.excitation
    if e is None:
        exc["type"] = "none"
    elif isinstance(e, ChirpSpec):
        exc = {
            "type": "chirp", "amplitude": repr(e.amplitude), "f0": repr(e.f0),
            "f1": repr(e.f1), "duration": repr(e.duration),
        }
    elif isinstance(e, SineSpec):
        exc = {"type": "sine", "amplitude": repr(e.amplitude), "omega": repr(e.omega)}
    elif isinstance(e, ConstantSpec):
        exc = {"type": "constant", "value": repr(e.value)}
    else:
        raise ConfigError(f"cannot serialize excitation {e!r}")
    if cfg.noise_std:
        exc["noise_std"] = repr(cfg.noise_std)
    cp["excitation"] = exc

    a = cfg.analysis
    cp["analysis"] = {
        "type": a.kind, "grid_min": repr(a.grid_min), "grid_max": repr(a.grid_max),
        "grid_points": str(a.grid_points), "force_amplitude": repr(a.force_amplitude),
        "method": a.method, "include_motor_port": str(a.include_motor_port),
        "fit_dahl": str(a.fit_dahl), "backdrive_omega": repr(a.backdrive_omega),
        "backdrive_amplitude": repr(a.backdrive_amplitude),
        "backdrive_cycles": str(a.backdrive_cycles),
    }
    cp["run"] = {
        "duration": repr(cfg.duration), "dt": repr(cfg.dt), "seed": str(cfg.seed),
        "output_dir": cfg.output_dir, "allow_nyquist": str(cfg.allow_nyquist),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


class ArtifactWriter:
    """Atomic artifact writes plus a SHA-256 manifest."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write(self, name: str, writer) -> str:
        """Run ``writer(tmp_path)`` then atomically move into place."""
        final = self.path(name)
        tmp = final + ".tmp"
        writer(tmp)
        os.replace(tmp, final)
        self.files.append(name)
        return final

    def write_text(self, name: str, text: str) -> str:
        return self.write(name, lambda p: open(p, "w").write(text))

    def finish(self) -> str:
        lines = []
        for name in self.files:
            digest = hashlib.sha256(open(self.path(name), "rb").read()).hexdigest()
            lines.append(f"{digest}  {name}")
        return self.write_text("manifest.txt", "\n".join(lines) + "\n")


def _impedance_csv(path: str, fr: sid.FrequencyResponse) -> None:
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = 20.0 * np.log10(np.abs(fr.H))
        ph = np.degrees(np.angle(fr.H))
    data = np.column_stack([fr.omegas, mag, ph])
    data[~fr.valid, 1:] = np.nan
    with open(path, "w", newline="") as fh:
        fh.write("omega_rad_s,mag_db,phase_deg\n")
        np.savetxt(fh, data, fmt="%.9g", delimiter=",")


def _closed_form_response(tf, grid: FrequencyGrid) -> sid.FrequencyResponse:
    return sid.FrequencyResponse.from_tf(tf, grid)


# ---------------------------------------------------------------------------
# Analysis runners
# ---------------------------------------------------------------------------


def _run_simulate(cfg: ExperimentConfig, art: ArtifactWriter) -> None:
    if isinstance(cfg.excitation, ChirpSpec):
        cfg.excitation.validate_sampling(cfg.dt, cfg.allow_nyquist)
        duration = cfg.excitation.duration
    else:
        duration = cfg.duration
    trace = simulate(
        cfg.plant, cfg.controller, cfg.excitation, None, duration=duration, dt=cfg.dt
    )
    art.write("trace.csv", trace.to_csv)


def _run_sysid(cfg: ExperimentConfig, art: ArtifactWriter) -> None:
    spec = cfg.excitation
    if not isinstance(spec, ChirpSpec):
        raise ConfigError("[analysis] sysid requires a chirp excitation")
    spec.validate_sampling(cfg.dt, cfg.allow_nyquist)
    rng = Xorshift64Star(cfg.seed) if cfg.noise_std > 0 else None
    result = sid.run_sysid(
        cfg.plant, spec, dt=cfg.dt, noise_std=cfg.noise_std, rng=rng
    )
    art.write("frf_motor.csv", result.motor_frf.to_csv)
    art.write("frf_finger.csv", result.finger_frf.to_csv)
    art.write("frf_line.csv", result.line_frf.to_csv)
    art.write("frf_endpoint.csv", result.endpoint_frf.to_csv)
    wf = result.whole_fit
    report = (
        result.extraction.report_text()
        + "\n\nwhole-system endpoint fit (2 zeros / 4 poles)\n"
        + f"num: {wf.num.coeffs.tolist()}\n"
        + f"den: {wf.den.coeffs.tolist()}\n"
        + f"weighted residual: {result.whole_report.residual:.6e} "
        + f"({result.whole_report.iterations} iterations)\n"
    )
    art.write_text("params_report.txt", report)


def _run_impedance(cfg: ExperimentConfig, art: ArtifactWriter) -> None:
    grid = cfg.analysis.grid()
    if cfg.analysis.method == "closed_form":
        curves = {
            "impedance_passive.csv": pas.endpoint_impedance_ff(cfg.plant, 0.0),
            "impedance_internal.csv": pas.endpoint_impedance_ff(cfg.plant, 1.0, "internal"),
            "impedance_external.csv": pas.endpoint_impedance_ff(
                cfg.plant,
                cfg.controller.K_f
                if isinstance(cfg.controller, ProportionalFFConfig)
                and cfg.controller.source == "external"
                else 1.0,
                "external",
            ),
        }
        for name, tf in curves.items():
            art.write(name, lambda p, tf=tf: _impedance_csv(p, _closed_form_response(tf, grid)))
        return
    fr = imp.measure_impedance(
        cfg.plant, cfg.controller, grid, amplitude=cfg.analysis.force_amplitude, dt=cfg.dt
    )
    base = imp.measure_impedance(
        cfg.plant, None, grid, amplitude=cfg.analysis.force_amplitude, dt=cfg.dt
    )
    art.write("impedance.csv", lambda p: _impedance_csv(p, fr))
    art.write("impedance_passive.csv", lambda p: _impedance_csv(p, base))


def _run_workloop(cfg: ExperimentConfig, art: ArtifactWriter) -> None:
    a = cfg.analysis
    trace = imp.quasi_static_backdrive(
        cfg.plant,
        cfg.controller,
        omega=a.backdrive_omega,
        amplitude=a.backdrive_amplitude,
        cycles=a.backdrive_cycles,
        dt=cfg.dt,
    )
    ext = imp.work_loop(trace, "F_e")
    internal = imp.work_loop(trace, "F_p")
    art.write("loop_external.csv", ext.to_csv)
    art.write("loop_internal.csv", internal.to_csv)
    lines = [
        f"external loop: amplitude {ext.amplitude:.6e} Nm, area {ext.area:.6e} J",
        f"internal loop: amplitude {internal.amplitude:.6e} Nm, area {internal.area:.6e} J",
    ]
    if a.fit_dahl:
        fit = imp.fit_dahl(ext)
        lines += [
            f"dahl fit: F_c {fit.F_c:.6e} Nm, sigma {fit.sigma:.6e} Nm/rad, "
            f"rms residual {fit.residual_rms:.3e}",
            "reference values: F_c 0.032 Nm, sigma 12.8 Nm/rad",
        ]
    art.write_text("workloop_report.txt", "\n".join(lines) + "\n")


def _run_zwidth(cfg: ExperimentConfig, art: ArtifactWriter) -> None:
    a = cfg.analysis
    grid = a.grid()
    min_ctrl = cfg.controller
    pd_cfg = imp.max_stable_pd(cfg.plant, dt=cfg.dt)
    z_min = imp.measure_impedance(
        cfg.plant, min_ctrl, grid, amplitude=a.force_amplitude, dt=cfg.dt
    )
    z_max = imp.measure_impedance(
        cfg.plant, pd_cfg, grid, amplitude=a.force_amplitude, dt=cfg.dt
    )
    curve = imp.zwidth(z_min, z_max)
    art.write("zmin.csv", lambda p: _impedance_csv(p, z_min))
    art.write("zmax.csv", lambda p: _impedance_csv(p, z_max))
    art.write("zwidth.csv", curve.to_csv)
    summary = [
        f"max-impedance PD gains: K_p {pd_cfg.K_p:.4f} Nm/rad, K_d {pd_cfg.K_d:.4f} Nm s/rad"
    ]
    if a.include_motor_port:
        z_motor = imp.measure_impedance(
            cfg.plant, pd_cfg, grid, amplitude=a.force_amplitude, dt=cfg.dt, port="motor"
        )
        curve_m = imp.zwidth(z_min, z_motor)
        art.write("zmax_motor.csv", lambda p: _impedance_csv(p, z_motor))
        art.write("zwidth_motor.csv", curve_m.to_csv)
    art.write_text("zwidth_report.txt", "\n".join(summary) + "\n")


def _run_passivity(cfg: ExperimentConfig, art: ArtifactWriter) -> None:
    ctrl = cfg.controller
    if isinstance(ctrl, CompositeConfig):
        ctrl = ctrl.dob
    if not isinstance(ctrl, DOBConfig):
        raise ConfigError("[controller] passivity analysis requires a dob or composite type")
    p = cfg.plant
    bounds = pas.nominal_bounds(p.m, p.b, p.k, ctrl.lam)
    Y = pas.dob_admittance(p, ctrl, ctrl.lam)
    report = pas.check_passive(Y)
    text = [
        "observer admittance passivity report",
        f"plant: m {p.m}, b {p.b}, k {p.k}",
        f"nominal: m_n {ctrl.m_n}, b_n {ctrl.b_n}, k_n {ctrl.k_n}, lambda {ctrl.lam} rad/s",
        "",
        "closed-form bounds:",
        f"  m_n >= {bounds.m_n_min:.6e}",
        f"  b_n >= {bounds.b_n_min:.6e}",
        f"  0 <= k_n <= {bounds.k_n_max(ctrl.b_n):.6e} (at configured b_n)",
        f"  auxiliary RHP cap: k_n <= {bounds.k_n_routh_cap(ctrl.m_n, ctrl.b_n):.6e}",
        f"  closed-form verdict: "
        f"{'passive' if bounds.contains(ctrl.m_n, ctrl.b_n, ctrl.k_n) else 'non-passive'}",
        "",
        "numeric three-criteria test:",
        report.to_text(),
    ]
    art.write_text("passivity_report.txt", "\n".join(text) + "\n")
    art.write("re_y_sweep.csv", report.sweep_csv)


_RUNNERS = {
    "simulate": _run_simulate,
    "sysid": _run_sysid,
    "impedance": _run_impedance,
    "workloop": _run_workloop,
    "zwidth": _run_zwidth,
    "passivity": _run_passivity,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> list[str]:
    """Run the configured analysis; returns the artifact names written.

    The manifest is written last; on numerical failure the exception
    propagates and the manifest covers the artifacts completed so far.
    """
    art = ArtifactWriter(out_dir or cfg.output_dir)
    runner = _RUNNERS[cfg.analysis.kind]
    try:
        runner(cfg, art)
    finally:
        art.finish()
    return art.files


# ---------------------------------------------------------------------------
# Presets: one per reproduced figure pipeline
# ---------------------------------------------------------------------------

LAMBDA_20_RAD = 20.0
LAMBDA_20_HZ = TWO_PI * 20.0  # the text's cutoff reading; reproduces the
                              # reported quasi-static compensation quality

_CHIRP = ChirpSpec(amplitude=0.3, f0=0.01, f1=1000.0, duration=600.0)


def _preset_fig3(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant, excitation=_CHIRP, analysis=AnalysisSpec(kind="simulate")
    )


def _preset_fig4(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant, excitation=_CHIRP, analysis=AnalysisSpec(kind="sysid")
    )


def _preset_fig5(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant,
        controller=ProportionalFFConfig(K_f=1.0, source="external"),
        analysis=AnalysisSpec(
            kind="impedance", method="closed_form",
            grid_min=1e-2, grid_max=1e3, grid_points=181,
        ),
    )


def _preset_fig6a(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant,
        controller=DOBConfig.inertial(plant.m, LAMBDA_20_RAD),
        analysis=AnalysisSpec(kind="workloop"),
    )


def _composite(plant: PlantParams, lam: float, include_dahl: bool) -> CompositeConfig:
    return CompositeConfig(
        dob=DOBConfig.inertial(plant.m, lam),
        feedforward=FeedforwardConfig.from_params(plant, include_dahl=include_dahl),
    )


def _preset_fig6b(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant,
        controller=_composite(plant, LAMBDA_20_HZ, include_dahl=True),
        analysis=AnalysisSpec(kind="workloop"),
    )


def _preset_fig6c(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant,
        controller=_composite(plant, LAMBDA_20_RAD, include_dahl=True),
        analysis=AnalysisSpec(
            kind="zwidth", grid_min=0.1, grid_max=100.0, grid_points=25,
            include_motor_port=True,
        ),
    )


def _preset_fig7(plant: PlantParams) -> ExperimentConfig:
    return ExperimentConfig(
        plant=plant,
        controller=_composite(plant, LAMBDA_20_HZ, include_dahl=False),
        analysis=AnalysisSpec(kind="workloop", fit_dahl=True),
    )


_PRESETS = {
    "fig3-chirp": (_preset_fig3, "passive chirp backdrive trace for identification"),
    "fig4-sysid": (_preset_fig4, "chirp identification: sub-plant FRFs, fits, parameters"),
    "fig5-ff-compare": (_preset_fig5, "closed-form endpoint impedance: passive vs internal vs external feedback"),
    "fig6a-workloop": (_preset_fig6a, "quasi-static work loops, passive vs observer"),
    "fig6b-feedforward": (_preset_fig6b, "work loops under observer plus full friction feedforward"),
    "fig6c-zwidth": (_preset_fig6c, "rendered impedance range against the stiff PD hold"),
    "fig7-dahl-fit": (_preset_fig7, "hysteresis-model fit of the residual external loop"),
}


def presets() -> dict[str, str]:
    """Built-in experiment presets, name to one-line description."""
    return {name: desc for name, (_, desc) in _PRESETS.items()}


def preset_config(name: str, plant: PlantParams | None = None) -> ExperimentConfig:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(_PRESETS)}")
    builder, _ = _PRESETS[name]
    return builder(plant or PlantParams.gripper())


def run_preset(name: str, out_dir: str, dt: float | None = None,
               seed: int | None = None, lam: float | None = None) -> list[str]:
    """Build and run a preset; fig6a additionally emits the passive loops."""
    cfg = preset_config(name)
    if dt is not None:
        cfg = replace(cfg, dt=dt)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if lam is not None and cfg.controller is not None:
        cfg = replace(cfg, controller=_override_lambda(cfg.controller, lam))
    files = run_experiment(cfg, out_dir)
    if name == "fig6a-workloop":
        passive_cfg = replace(cfg, controller=None)
        sub = os.path.join(out_dir, "passive")
        files += [os.path.join("passive", f) for f in run_experiment(passive_cfg, sub)]
    return files


def _override_lambda(controller, lam: float):
    if isinstance(controller, DOBConfig):
        return replace(controller, lam=lam)
    if isinstance(controller, CompositeConfig):
        return replace(controller, dob=replace(controller.dob, lam=lam))
    return controller
