"""TOML run configuration.

All keys live at the top level of the file.  Frequencies are given as f/2pi in the
unit named by the key and converted to rad/ns once, here.  An empty file yields
the reference parameter set (g/2pi = 30 MHz, Delta/2pi = 50 MHz, B0/2pi = 497.4 MHz,
sigma_q = 3 ns, t_q = 3.25 ns, t_qe = 30 ns).
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .hilbert import SpaceSpec, SystemParams, TruncationError, check_truncation, required_n_max
from .optimize import OptSpec
from .pulse import DrivePulse, QubitFreqPulse, Schedule, ghz, lambda_in, mhz
from .quadrature import DetectionParams

DEFAULTS: dict[str, object] = {
    # system
    "g_over_2pi_mhz": 30.0,
    "omega_r_over_2pi_ghz": 7.0,
    "omega_0_over_2pi_ghz": 6.0,
    "detuning_over_2pi_mhz": 50.0,
    "anharmonicity_over_2pi_mhz": 200.0,
    "n_levels": 2,
    "drive_amplitude_over_2pi_mhz": 497.4,
    "n_bar": None,
    "n_bar_nominal": 9.0,
    "drive_frequency_over_2pi_ghz": None,
    "t_b_ns": 3.0,
    "tau_b_ns": 1.0,
    "sigma_b_ns": 1.0,
    "t_q_ns": 3.25,
    "sigma_q_ns": 3.0,
    "t_qe_ns": 30.0,
    "sigma_qe_ns": 1.0,
    # numerics
    "dt_ps": 0.5,
    "n_max": 40,
    "tail_tolerance": 1e-9,
    "log_every": 50,
    "grid_points": 4096,
    "series_grid_points": 1024,
    "error_every": 1,
    "method": "rk4",
    # detection
    "eta": 1.0,
    "phi": "auto",
    # outputs
    "wigner": False,
    "wigner_points": 81,
    "phi_scan": False,
    # optimizer / sweep
    "t_f_ns": [30.0],
    "budget": 400,
    "opt_dt_ps": 2.0,
    "delta_bounds_mhz": [20.0, 400.0],
    "sigma_q_bounds_ns": [1.0, 10.0],
    "t_q_bounds_ns": [2.0, 10.0],
    "seed_reference_optimum": "auto",
    "sweep_axis": "n_bar",
    "sweep_values": [],
}

SWEEP_AXES = ("n_bar", "eta", "n_levels", "anharmonicity_over_2pi_mhz", "g_over_2pi_mhz",
              "sigma_qe_ns", "detuning_over_2pi_mhz")
_POSITIVE = ("omega_r_over_2pi_ghz", "omega_0_over_2pi_ghz",
             "detuning_over_2pi_mhz", "tau_b_ns", "sigma_b_ns", "sigma_q_ns", "sigma_qe_ns",
             "dt_ps", "tail_tolerance", "opt_dt_ps")
_INTS = ("n_levels", "n_max", "log_every", "grid_points", "series_grid_points", "error_every",
         "budget", "wigner_points")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    values: dict
    params: SystemParams
    det: DetectionParams
    source: str | None = None
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def n_bar_integral(self) -> float:
        return abs(lambda_in(self.params.drive)) ** 2

    @property
    def n_bar_nominal(self) -> float:
        v = self.values
        return float(v["n_bar"]) if v["n_bar"] is not None else float(v["n_bar_nominal"])

    def with_overrides(self, **changes) -> "RunConfig":
        vals = dict(self.values)
        vals.update(changes)
        return build_config(vals, self.source)

    def opt_spec(self, t_f: float) -> OptSpec:
        v = self.values
        seed = v["seed_reference_optimum"]
        return OptSpec(base=self.params, t_f=float(t_f), det=self.det,
                       delta_bounds=tuple(v["delta_bounds_mhz"]),
                       sigma_q_bounds=tuple(v["sigma_q_bounds_ns"]),
                       t_q_bounds=tuple(v["t_q_bounds_ns"]), budget=int(v["budget"]),
                       dt=float(v["opt_dt_ps"]) * 1e-3, n_points=int(v["grid_points"]),
                       seed_reference=None if seed == "auto" else bool(seed))


def _fail(key, msg):
    raise ConfigError(f"{key}: {msg}")


def _validate(v: dict):
    for k in _POSITIVE:
        if not isinstance(v[k], (int, float)) or isinstance(v[k], bool) or not v[k] > 0:
            _fail(k, f"must be a positive number, got {v[k]!r}")
    for k in _INTS:
        if not isinstance(v[k], int) or isinstance(v[k], bool) or v[k] < 1:
            _fail(k, f"must be a positive integer, got {v[k]!r}")
    if v["n_levels"] not in (2, 3):
        _fail("n_levels", "must be 2 or 3")
    if v["n_levels"] == 3 and not v["anharmonicity_over_2pi_mhz"] > 0:
        _fail("anharmonicity_over_2pi_mhz", "must be > 0 for a three-level qubit")
    g = v["g_over_2pi_mhz"]
    if not isinstance(g, (int, float)) or isinstance(g, bool) or g < 0:
        _fail("g_over_2pi_mhz", f"must be >= 0, got {g!r}")
    if v["drive_amplitude_over_2pi_mhz"] < 0:
        _fail("drive_amplitude_over_2pi_mhz", "must be >= 0")
    if v["n_bar"] is not None and not v["n_bar"] >= 0:
        _fail("n_bar", "must be >= 0")
    if v["omega_r_over_2pi_ghz"] <= v["omega_0_over_2pi_ghz"]:
        _fail("omega_0_over_2pi_ghz", "initial qubit frequency must lie below the resonator")
    if v["detuning_over_2pi_mhz"] * 1e-3 > v["omega_r_over_2pi_ghz"]:
        _fail("detuning_over_2pi_mhz", "detuning exceeds the resonator frequency")
    f = v["drive_frequency_over_2pi_ghz"]
    if f is not None and not math.isclose(f, v["omega_r_over_2pi_ghz"], rel_tol=1e-12):
        _fail("drive_frequency_over_2pi_ghz", "only a resonant drive (omega = omega_r) is supported")
    if not 0 < v["eta"] <= 1:
        _fail("eta", f"must be in (0, 1], got {v['eta']}")
    if not (v["phi"] == "auto" or isinstance(v["phi"], (int, float))):
        _fail("phi", "must be 'auto' or an angle in rad")
    if v["method"] not in ("rk4", "expm"):
        _fail("method", "must be 'rk4' or 'expm'")
    if v["t_qe_ns"] <= v["t_b_ns"] + 0.5 * v["tau_b_ns"]:
        _fail("t_qe_ns", "rear ramp must come after the drive pulse center")
    for k in ("delta_bounds_mhz", "sigma_q_bounds_ns", "t_q_bounds_ns"):
        b = v[k]
        if not (isinstance(b, list) and len(b) == 2 and 0 < b[0] < b[1]):
            _fail(k, f"must be [low, high] with 0 < low < high, got {b!r}")
    if not (isinstance(v["t_f_ns"], list) and v["t_f_ns"] and all(t > 0 for t in v["t_f_ns"])):
        _fail("t_f_ns", "must be a non-empty list of positive times")
    if v["sweep_axis"] not in SWEEP_AXES:
        _fail("sweep_axis", f"must be one of {', '.join(SWEEP_AXES)}")
    if not isinstance(v["sweep_values"], list):
        _fail("sweep_values", "must be a list")
    if v["seed_reference_optimum"] not in ("auto", True, False):
        _fail("seed_reference_optimum", "must be 'auto', true or false")


def build_params(v: dict) -> SystemParams:
    omega_r, omega0 = ghz(v["omega_r_over_2pi_ghz"]), ghz(v["omega_0_over_2pi_ghz"])
    kw = dict(t_B=float(v["t_b_ns"]), tau_B=float(v["tau_b_ns"]), sigma_B=float(v["sigma_b_ns"]))
    if v["n_bar"] is not None:
        drive = DrivePulse.from_photon_number(float(v["n_bar"]), **kw)
    else:
        drive = DrivePulse(B0=mhz(v["drive_amplitude_over_2pi_mhz"]), **kw)
    qp = QubitFreqPulse(omega0=omega0, Delta0=omega_r - omega0,
                        Delta=mhz(v["detuning_over_2pi_mhz"]), t_q=float(v["t_q_ns"]),
                        t_qe=float(v["t_qe_ns"]), sigma_q=float(v["sigma_q_ns"]),
                        sigma_qe=float(v["sigma_qe_ns"]))
    n_levels = int(v["n_levels"])
    return SystemParams(g=mhz(v["g_over_2pi_mhz"]), omega_r=omega_r, drive=drive, qubit_pulse=qp,
                        schedule=Schedule.from_pulses(drive, qp, dt=float(v["dt_ps"]) * 1e-3),
                        space=SpaceSpec(n_levels, int(v["n_max"])),
                        anharmonicity=mhz(v["anharmonicity_over_2pi_mhz"]) if n_levels == 3 else 0.0,
                        tail_tol=float(v["tail_tolerance"]))


def build_config(values: dict, source: str | None = None) -> RunConfig:
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    v = dict(DEFAULTS)
    v.update(values)
    _validate(v)
    try:
        params = build_params(v)
        det = DetectionParams(eta=float(v["eta"]),
                              phi=v["phi"] if v["phi"] == "auto" else float(v["phi"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(values=v, params=params, det=det, source=source)


def parse_config(path) -> RunConfig:
    """Read and validate a TOML configuration file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for k, val in data.items():
        if isinstance(val, dict):
            raise ConfigError(f"{k}: tables are not supported; put all keys at top level")
    return build_config(data, str(path))


def check_run_truncation(cfg: RunConfig) -> float:
    """Truncation tail for the loaded coherent state; raises ConfigError if too large."""
    try:
        return check_truncation(cfg.n_bar_integral, cfg.params)
    except TruncationError as exc:
        raise ConfigError(f"n_max: {exc}") from exc


def auto_n_max(cfg: RunConfig) -> RunConfig:
    """Raise n_max if the configured truncation is too small for the loaded photon number."""
    need = required_n_max(cfg.n_bar_integral, cfg.params.n_levels, cfg.params.tail_tol)
    if need > cfg["n_max"]:
        return cfg.with_overrides(n_max=need)
    return cfg
